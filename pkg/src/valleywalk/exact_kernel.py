"""Exact quenched distributions by mass propagation.

All kernels here are deterministic: a probability vector on a finite window
is pushed forward one step at a time. In absorbing mode mass that leaves the
window is banked in ``absorbed_left`` / ``absorbed_right``; in reflecting
mode the end sites push all of their mass back inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .config import budget
from .env_model import Environment
from .errors import ArgumentError, BudgetExceededError, RangeError
from .potential import Potential, compute_potential, measure

ABSORBING = "absorbing"


class Reflecting(NamedTuple):
    """Reflecting barriers at ``lower`` and ``upper`` (both inclusive)."""

    lower: int
    upper: int


@dataclass(frozen=True, eq=False)
class MassProfile:
    lo: int
    hi: int
    n: int
    p: np.ndarray
    absorbed_left: float = 0.0
    absorbed_right: float = 0.0

    @classmethod
    def delta(cls, x: int, lo: int, hi: int) -> "MassProfile":
        if not (lo <= x <= hi):
            raise RangeError(f"start {x} outside window [{lo}, {hi}]")
        p = np.zeros(hi - lo + 1)
        p[x - lo] = 1.0
        return cls(lo, hi, 0, p)

    def __getitem__(self, x: int) -> float:
        if not (self.lo <= x <= self.hi):
            return 0.0
        return float(self.p[x - self.lo])

    @property
    def total(self) -> float:
        """Mass inside the window plus both absorbed accumulators (compensated sum)."""
        return math.fsum(self.p.tolist() + [self.absorbed_left, self.absorbed_right])

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)


class _Kahan:
    __slots__ = ("s", "c")

    def __init__(self, s: float = 0.0):
        self.s = s
        self.c = 0.0

    def add(self, x: float) -> None:
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


class Trace(NamedTuple):
    final: MassProfile
    watched: np.ndarray          # shape (n_steps + 1, len(watch))
    absorbed_left: np.ndarray    # cumulative, shape (n_steps + 1,)
    absorbed_right: np.ndarray


def _rates(env: Environment, lo: int, hi: int, mode) -> tuple[np.ndarray, np.ndarray]:
    up = np.array(env.values(lo, hi), dtype=np.float64)
    down = 1.0 - up
    if mode == ABSORBING:
        return up, down
    if not isinstance(mode, Reflecting):
        raise ArgumentError(f"unknown propagation mode {mode!r}")
    if (mode.lower, mode.upper) != (lo, hi) or mode.lower >= mode.upper:
        raise RangeError(f"reflecting barriers {tuple(mode)} must equal the profile window [{lo}, {hi}]")
    up[0], down[0] = 1.0, 0.0
    up[-1], down[-1] = 0.0, 1.0
    return up, down


def propagate(env: Environment, start: MassProfile, n_steps: int, mode=ABSORBING,
              watch: Sequence[int] = ()) -> Trace:
    """Advance ``start`` by ``n_steps`` steps, recording ``p`` at the watched sites."""
    if n_steps < 0:
        raise ArgumentError("n_steps must be nonnegative")
    if n_steps > budget():
        raise BudgetExceededError(f"{n_steps} steps exceed the budget of {budget()}")
    lo, hi = start.lo, start.hi
    up, down = _rates(env, lo, hi, mode)
    up_l, down_f = up[:-1], down[1:]
    up_last, down_first = float(up[-1]), float(down[0])
    widx = np.array([x - lo for x in watch], dtype=np.intp)
    if np.any((widx < 0) | (widx > hi - lo)):
        raise RangeError(f"watched sites {list(watch)} not all inside [{lo}, {hi}]")

    p = start.p.astype(np.float64, copy=True)
    q = np.empty_like(p)
    tmp = np.empty(p.size - 1)
    left, right = _Kahan(start.absorbed_left), _Kahan(start.absorbed_right)
    watched = np.empty((n_steps + 1, widx.size))
    abs_l = np.empty(n_steps + 1)
    abs_r = np.empty(n_steps + 1)
    watched[0] = p[widx]
    abs_l[0], abs_r[0] = left.s, right.s
    for t in range(1, n_steps + 1):
        left.add(float(p[0]) * down_first)
        right.add(float(p[-1]) * up_last)
        q[0] = 0.0
        np.multiply(p[:-1], up_l, out=q[1:])
        np.multiply(p[1:], down_f, out=tmp)
        q[:-1] += tmp
        p, q = q, p
        watched[t] = p[widx]
        abs_l[t], abs_r[t] = left.s, right.s
    final = MassProfile(lo, hi, start.n + n_steps, p, left.s, right.s)
    return Trace(final, watched, abs_l, abs_r)


def step(m: MassProfile, env: Environment, mode=ABSORBING) -> MassProfile:
    """One transition: ``p'(y) = p(y-1) omega_{y-1} + p(y+1) (1 - omega_{y+1})``."""
    return propagate(env, m, 1, mode).final


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Certified bracket ``p_lower(n) <= P(X_{2n} = 0) <= p_upper(n)`` for ``n = 1..N``."""

    N: int
    p_lower: np.ndarray
    p_upper: np.ndarray
    window: tuple[int, int]
    complete: bool
    half_widths: tuple[int, ...] = field(default=())

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    @property
    def slack(self) -> np.ndarray:
        return self.p_upper - self.p_lower

    def rows(self):
        for n, lo, hi in zip(self.n.tolist(), self.p_lower.tolist(), self.p_upper.tolist()):
            yield n, lo, hi


def _return_run(env: Environment, lo: int, hi: int, N: int, watch: Sequence[int] = ()):
    trace = propagate(env, MassProfile.delta(0, lo, hi), 2 * N, ABSORBING, watch=(0, *watch))
    p0 = trace.watched[2::2, 0]
    escaped = trace.absorbed_left[2::2] + trace.absorbed_right[2::2]
    return p0.copy(), np.minimum(p0 + escaped, 1.0), trace


def return_series(env_source: Environment, N: int, slack_tol: float = 0.0,
                  initial_half_width: int = 64, max_half_width: int | None = None) -> ReturnSeries:
    """Bracketed return probabilities at even times ``2n``, ``n = 1..N``.

    For a law-backed environment the window ``[-h, h]`` starts at
    ``initial_half_width`` and doubles (rerunning from scratch) until
    ``slack(N) <= slack_tol`` or ``max_half_width`` is hit; ``h >= 2N``
    always gives zero slack. Fixture environments are used as they are.
    ``complete`` is False when the tolerance was not met.
    """
    if N < 1:
        raise ArgumentError("N must be at least 1")
    if 2 * N > budget():
        raise BudgetExceededError(f"2N = {2 * N} steps exceed the budget of {budget()}")
    if env_source.law is None:
        lo, hi = env_source.lo, env_source.hi
        p_lo, p_hi, _ = _return_run(env_source, lo, hi, N)
        ok = bool(p_hi[-1] - p_lo[-1] <= slack_tol)
        return ReturnSeries(N, p_lo, p_hi, (lo, hi), ok, ())

    cap = max_half_width if max_half_width is not None else budget() // 2
    h = max(1, min(initial_half_width, 2 * N, cap))
    tried = []
    env = env_source
    while True:
        env = env.ensure(-h, h)
        p_lo, p_hi, _ = _return_run(env, -h, h, N)
        tried.append(h)
        ok = bool(p_hi[-1] - p_lo[-1] <= slack_tol)
        if ok or h >= 2 * N or h >= cap:
            return ReturnSeries(N, p_lo, p_hi, (-h, h), ok, tuple(tried))
        h = min(2 * h, 2 * N, cap)


def _logsumexp(v: np.ndarray) -> tuple[float, float]:
    m = float(np.max(v))
    return m, math.fsum(np.exp(v - m).tolist())


def hitting_prob_formula(pot: Potential, x: int, y: int, z: int) -> float:
    """``P^y(tau(z) < tau(x))`` from the electrical-network ratio of ``exp(V)`` sums."""
    if not (x < y < z):
        raise ArgumentError(f"need x < y < z, got {x}, {y}, {z}")
    seg = pot.segment(x, z - 1)
    m = float(np.max(seg))
    w = np.exp(seg - m)
    return math.fsum(w[: y - x].tolist()) / math.fsum(w.tolist())


def _thomas_harmonic(omega: np.ndarray, rhs: np.ndarray, right_boundary: float) -> np.ndarray:
    """Solve ``u_j - omega_j u_{j+1} - (1 - omega_j) u_{j-1} = rhs_j`` on interior sites.

    Boundary values are ``u = 0`` on the left and ``right_boundary`` on the
    right. The sweep carries ``s_j = 1 - r_j`` rather than ``r_j``: its
    update has no subtraction and never amplifies relative error, whereas
    the plain recursion for ``r_j`` loses digits inside deep valleys. Every
    quantity stays nonnegative, so small solutions keep full relative
    precision.
    """
    n = omega.size
    r = np.empty(n)   # u_j = d_j + r_j u_{j+1}
    d = np.empty(n)
    s_prev, d_prev = 1.0, 0.0
    for j in range(n):
        w = float(omega[j])
        back = 1.0 - w
        denom = w + back * s_prev   # = 1 - back * r_{j-1}
        r_prev = w / denom
        s_prev = back * s_prev / denom
        d_prev = (float(rhs[j]) + back * d_prev) / denom
        r[j], d[j] = r_prev, d_prev
    u = np.empty(n)
    nxt = right_boundary
    for j in range(n - 1, -1, -1):
        nxt = d[j] + r[j] * nxt
        u[j] = nxt
    return u


def _interior(env: Environment, x: int, z: int) -> np.ndarray:
    return np.asarray(env.values(x + 1, z - 1))


def hitting_profile(env: Environment, x: int, z: int) -> np.ndarray:
    """``h(j) = P^j(tau(z) < tau(x))`` for ``j = x+1 .. z-1``."""
    omega = _interior(env, x, z)
    return _thomas_harmonic(omega, np.zeros(omega.size), 1.0)


def hitting_prob_solve(env: Environment, x: int, y: int, z: int) -> float:
    """``P^y(tau(z) < tau(x))`` by solving the harmonic boundary problem."""
    if not (x < y < z):
        raise ArgumentError(f"need x < y < z, got {x}, {y}, {z}")
    return float(hitting_profile(env, x, z)[y - x - 1])


def expected_confinement(env: Environment, x: int, y: int, z: int) -> float:
    """``E^y[tau(z) 1{tau(z) < tau(x)}]`` via first-step analysis.

    ``g(j) = omega_j g(j+1) + (1 - omega_j) g(j-1) + h(j)`` with
    ``g(x) = g(z) = 0`` and ``h`` the hitting profile.
    """
    if not (x < y < z):
        raise ArgumentError(f"need x < y < z, got {x}, {y}, {z}")
    omega = _interior(env, x, z)
    h = _thomas_harmonic(omega, np.zeros(omega.size), 1.0)
    g = _thomas_harmonic(omega, h, 0.0)
    return float(g[y - x - 1])


def exit_time_cdf(env: Environment, y: int, barrier: int, k: int) -> float:
    """``P^y(tau(barrier) < k)`` for a barrier on either side of ``y``.

    The far edge of the window is placed ``k + 1`` sites away so that it is
    unreachable and the result is exact.
    """
    if barrier == y:
        raise ArgumentError("barrier must differ from the start")
    if k < 1:
        raise ArgumentError("k must be a positive integer")
    if k > budget():
        raise BudgetExceededError(f"k = {k} exceeds the step budget of {budget()}")
    if barrier > y:
        lo, hi = y - k - 1, barrier - 1
    else:
        lo, hi = barrier + 1, y + k + 1
    env = env.ensure(lo, hi)
    trace = propagate(env, MassProfile.delta(y, lo, hi), k - 1)
    return float(trace.final.absorbed_right if barrier > y else trace.final.absorbed_left)


def transition_row(env: Environment, x: int, n: int, lo: int, hi: int) -> MassProfile:
    """``P^x(X_n = .)`` on ``[lo, hi]``; the window must be unreachable-wide."""
    if not (lo <= x - n - 1 and x + n + 1 <= hi):
        raise RangeError(f"window [{lo}, {hi}] is reachable from {x} in {n} steps")
    if not env.covers(lo, hi):
        raise RangeError(f"environment [{env.lo}, {env.hi}] does not cover [{lo}, {hi}]")
    return propagate(env, MassProfile.delta(x, lo, hi), n).final


def reversibility_residual(env: Environment, n: int, x: int, y: int) -> float:
    """``|mu(x) P^x(X_n = y) - mu(y) P^y(X_n = x)|`` with both kernels computed exactly."""
    if n < 0:
        raise ArgumentError("n must be nonnegative")
    lo, hi = min(x, y) - n - 1, max(x, y) + n + 1
    if not env.covers(lo, hi):
        raise RangeError(f"environment [{env.lo}, {env.hi}] too narrow for n={n}, x={x}, y={y}")
    if x == y:
        return 0.0
    pot = compute_potential(env)
    pxy = transition_row(env, x, n, lo, hi)[y]
    pyx = transition_row(env, y, n, lo, hi)[x]
    return abs(measure(pot, x) * pxy - measure(pot, y) * pyx)


def reflected_measure(pot: Potential, t_minus: int, t_plus: int, x: int) -> float:
    """Reversible measure of the walk reflected at ``t_minus`` and ``t_plus``."""
    if not (t_minus <= x <= t_plus):
        raise RangeError(f"site {x} outside [{t_minus}, {t_plus}]")
    if x == t_minus:
        return math.exp(-pot[t_minus])
    if x == t_plus:
        return math.exp(-pot[t_plus - 1])
    return measure(pot, x)


def reflected_diagonal(env: Environment, t_minus: int, t_plus: int, start: int,
                       n_steps: int) -> np.ndarray:
    """``P^start(X~_l = start)`` for ``l = 0..n_steps`` in the reflected chain."""
    trace = propagate(env, MassProfile.delta(start, t_minus, t_plus), n_steps,
                      Reflecting(t_minus, t_plus), watch=(start,))
    return trace.watched[:, 0].copy()


def first_passage_trace(env: Environment, start: int, left: int, right: int,
                        n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative ``P(tau(left) <= t, tau(left) < tau(right))`` and the mirror, ``t = 0..n_steps``."""
    if not (left < start < right):
        raise ArgumentError(f"need left < start < right, got {left}, {start}, {right}")
    trace = propagate(env, MassProfile.delta(start, left + 1, right - 1), n_steps)
    return trace.absorbed_left, trace.absorbed_right
