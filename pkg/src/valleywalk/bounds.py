"""Concrete checks of the hitting-time, confinement and valley inequalities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .env_model import Environment, log_rho
from .errors import ArgumentError, PreconditionError, WindowExhaustedError
from .exact_kernel import (
    MassProfile,
    expected_confinement,
    exit_time_cdf,
    first_passage_trace,
    hitting_prob_solve,
    propagate,
    reflected_diagonal,
)
from .potential import (
    Potential,
    ValleyStats,
    compute_potential,
    gamma_membership,
    measure,
    valley_stats,
)

FP_SLACK = 1e-9
PROP1_SLACK = 0.5


def _log_ratio(a: float, b: float) -> float | None:
    if a <= 0.0 or b <= 0.0:
        return None
    return math.log(a) - math.log(b)


@dataclass(frozen=True)
class BoundReport:
    """``lhs <= rhs`` checked with an absolute floating-point allowance of 1e-9."""

    name: str
    lhs: float
    rhs: float
    holds: bool
    margin: float
    log_margin: float | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name: str, lhs: float, rhs: float, **params) -> "BoundReport":
        return cls(name, float(lhs), float(rhs), bool(lhs <= rhs + FP_SLACK), float(rhs - lhs),
                   _log_ratio(rhs, lhs), params)

    def to_dict(self) -> dict:
        return asdict(self)


def _max_drop_to(values: np.ndarray, end: float) -> float:
    return float(np.max(end - values))


def check_exit_bounds(env: Environment, y: int, z: int, k: int,
                      x: int | None = None) -> tuple[BoundReport, BoundReport]:
    """Exit-time tail bounds to the right (barrier ``z``) and left (barrier ``x``).

    ``x`` defaults to the mirror image ``2y - z``. Left-hand sides are exact
    absorbed masses; right-hand sides are
    ``k exp(-max_{y<=i<z}[V(z-1) - V(i)])`` and
    ``k exp(-max_{x<i<=y}[V(x+1) - V(i)])``.
    """
    if not y < z:
        raise ArgumentError(f"need y < z, got {y}, {z}")
    if x is None:
        x = 2 * y - z
    if not x < y:
        raise ArgumentError(f"need x < y, got {x}, {y}")
    env = env.ensure(min(x, y - k - 1), max(z, y + k + 1))
    pot = compute_potential(env)

    lhs_r = exit_time_cdf(env, y, z, k)
    seg = pot.segment(y, z - 1)
    rhs_r = k * math.exp(-_max_drop_to(seg, seg[-1]))
    right = BoundReport.make("prel2", lhs_r, rhs_r, y=y, z=z, k=k)

    lhs_l = exit_time_cdf(env, y, x, k)
    seg = pot.segment(x + 1, y)
    rhs_l = k * math.exp(-_max_drop_to(seg, seg[0]))
    left = BoundReport.make("prel3", lhs_l, rhs_l, x=x, y=y, k=k)
    return right, left


def max_ascent(pot: Potential, a: int, b: int) -> float:
    """``max_{a<=i<=j<=b} (V(j) - V(i))``."""
    seg = pot.segment(a, b)
    return float(np.max(seg - np.minimum.accumulate(seg)))


def check_confinement(env: Environment, x: int, y: int, z: int) -> BoundReport:
    if not (x < y < z):
        raise ArgumentError(f"need x < y < z, got {x}, {y}, {z}")
    env = env.ensure(x, z)
    pot = compute_potential(env)
    lhs = expected_confinement(env, x, y, z)
    rhs = (z - x) ** 2 * math.exp(max_ascent(pot, x, z))
    return BoundReport.make("prel4", lhs, rhs, x=x, y=y, z=z)


# ---------------------------------------------------------------------------
# valley certificates


def _require_gamma(env: Environment, L: float, delta: float) -> tuple[Potential, ValleyStats]:
    pot = compute_potential(env)
    try:
        stats = valley_stats(pot, L)
    except WindowExhaustedError as exc:
        raise PreconditionError(f"cannot certify Gamma(L={L}, delta={delta}): {exc}") from None
    if not gamma_membership(stats, delta).in_gamma:
        raise PreconditionError(f"environment is not in Gamma(L={L}, delta={delta}): {stats.to_dict()}")
    return pot, stats


def factor2_check(env: Environment, pot: Potential, bottom: int, L: float, delta: float) -> tuple[BoundReport, BoundReport]:
    """``mu(0)/mu(b) >= eps/(1-eps) e^{V(b)}`` and its Gamma consequence ``>= eps/(1-eps) e^{-delta L}``."""
    eps = env.epsilon
    ratio = measure(pot, 0) / measure(pot, bottom)
    odds = eps / (1.0 - eps)
    exact = BoundReport.make("factor2_vb", odds * math.exp(pot[bottom]), ratio, bottom=bottom)
    gamma = BoundReport.make("factor2", odds * math.exp(-delta * L), ratio, bottom=bottom)
    return exact, gamma


@dataclass(frozen=True)
class CertificateEntry:
    n: int
    p_lower: float
    p_upper: float
    threshold: float
    log_margin: float | None
    passes: bool
    factor1: float
    factor1_bound: float
    factor3: float
    factor3_bound: float
    composite_bound: float
    factor_product: float


@dataclass(frozen=True)
class CertificateReport:
    L: float
    delta: float
    slack: float
    stats: ValleyStats
    bottom: int
    other_bottom: int
    swapped: bool
    reach_prob: float
    epsilon: float
    factor2: float
    factor2_reports: tuple[BoundReport, BoundReport]
    entries: tuple[CertificateEntry, ...]

    @property
    def passes(self) -> bool:
        return all(e.passes for e in self.entries) and all(r.holds for r in self.factor2_reports)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "delta": self.delta,
            "slack": self.slack,
            "stats": self.stats.to_dict(),
            "bottom": self.bottom,
            "other_bottom": self.other_bottom,
            "swapped": self.swapped,
            "reach_prob": self.reach_prob,
            "epsilon": self.epsilon,
            "factor2": self.factor2,
            "factor2_reports": [r.to_dict() for r in self.factor2_reports],
            "entries": [asdict(e) for e in self.entries],
            "passes": self.passes,
        }


def prop1_window(L: float, delta: float) -> tuple[float, float]:
    """Time range ``[exp(3 delta L), exp((1 - 2 delta) L)]`` covered by the return bound."""
    return math.exp(3 * delta * L), math.exp((1 - 2 * delta) * L)


def _reach_prob(env: Environment, b_plus: int, b_minus: int) -> float:
    """``P^0(tau(b+) < tau(b-))`` with the degenerate bottoms at the origin handled directly."""
    if b_plus == 0:
        return 1.0
    if b_minus == 0:
        return 0.0
    return hitting_prob_solve(env, b_minus, 0, b_plus)


def prop1_certificate(env: Environment, L: float, delta: float, sample_ns: Sequence[int],
                      slack: float = PROP1_SLACK) -> CertificateReport:
    """Exact return probabilities against ``exp(-3 delta L)`` with the proof's three factors.

    The bottom used is ``b+`` when the walk reaches it before ``b-`` with
    probability at least 1/2, and ``b-`` otherwise. Factor 1 is
    ``P(tau(b) <= 2n/3, tau(b) < tau(b'))``, factor 2 is ``mu(0)/mu(b)`` and
    factor 3 is the parity-restricted minimum of ``P(X_l = b)`` over
    ``l in [ceil(4n/3), 2n]``; all are computed exactly and reported next to
    the closed-form bounds the proof uses for them.
    """
    if not (0.0 < delta < 0.2):
        raise PreconditionError(f"delta must lie in (0, 1/5), got {delta}")
    ns = [int(n) for n in sample_ns]
    if not ns:
        raise ArgumentError("sample_ns is empty")
    n_min, n_max = prop1_window(L, delta)
    bad = [n for n in ns if not (n_min <= n <= n_max)]
    if bad:
        raise ArgumentError(f"n values {bad} outside [{n_min:.6g}, {n_max:.6g}]")
    pot, stats = _require_gamma(env, L, delta)

    reach = _reach_prob(env, stats.b_plus, stats.b_minus)
    swapped = reach < 0.5
    b, other = (stats.b_minus, stats.b_plus) if swapped else (stats.b_plus, stats.b_minus)

    steps = 2 * max(ns)
    trace = propagate(env, MassProfile.delta(0, env.lo, env.hi), steps, watch=(0, b))
    escaped = trace.absorbed_left + trace.absorbed_right
    at_origin, at_bottom = trace.watched[:, 0], trace.watched[:, 1]

    if b == 0:
        reach_b = np.ones(steps + 1)
    else:
        left_abs, right_abs = first_passage_trace(env, 0, min(b, other), max(b, other),
                                                  (2 * max(ns)) // 3)
        reach_b = right_abs if b > 0 else left_abs

    f2_exact, f2_gamma = factor2_check(env, pot, b, L, delta)
    f2 = f2_exact.rhs
    threshold = math.exp(-3 * delta * L)
    f1_bound = 0.5 - 6 * L ** 4 * math.exp(-delta * L)
    f3_bound = math.exp(-1.5 * delta * L)
    composite = (f1_bound * 0.5 / (2 * L * L + 1) * math.exp(-delta * L)
                 - 4 * math.exp(-2 * delta * L))

    entries = []
    for n in ns:
        p_lo = float(at_origin[2 * n])
        p_hi = min(1.0, p_lo + float(escaped[2 * n]))
        f1 = float(reach_b[min((2 * n) // 3, reach_b.size - 1)])
        start = -(-4 * n // 3)
        if (start - b) % 2:
            start += 1
        f3 = float(np.min(at_bottom[start : 2 * n + 1 : 2]))
        entries.append(CertificateEntry(
            n=n, p_lower=p_lo, p_upper=p_hi, threshold=threshold,
            log_margin=_log_ratio(p_lo, threshold), passes=bool(p_lo >= slack * threshold),
            factor1=f1, factor1_bound=f1_bound, factor3=f3, factor3_bound=f3_bound,
            composite_bound=composite, factor_product=f1 * f2 * f3,
        ))
    return CertificateReport(float(L), float(delta), slack, stats, b, other, swapped, reach,
                             env.epsilon, f2, (f2_exact, f2_gamma), tuple(entries))


def lem3_rhs(t_minus: int, t_plus: int, L: float, delta: float) -> float:
    return 0.5 / (abs(t_minus) + t_plus + 1) * math.exp(-delta * L)


def lem3_check(env: Environment, L: float, delta: float, ell_max: int) -> list[BoundReport]:
    """Reflected-chain diagonal ``P^{b+}(X~_l = b+)`` against its lower bound, every even ``l <= ell_max``."""
    if ell_max < 2:
        raise ArgumentError("ell_max must be at least 2")
    _, stats = _require_gamma(env, L, delta)
    diag = reflected_diagonal(env, stats.T_minus, stats.T_plus, stats.b_plus, ell_max)
    rhs = lem3_rhs(stats.T_minus, stats.T_plus, L, delta)
    return [BoundReport.make("lem3", rhs, float(diag[ell]), ell=ell)
            for ell in range(2, ell_max + 1, 2)]


# ---------------------------------------------------------------------------
# fixtures

STAIR_LOW, STAIR_HIGH = 0.3, 0.7


def staircase_profile(L: float, delta: float, stair: int = 4, landing: int = 10,
                      bottom: int = 10, extra: int = 6) -> list[int]:
    """Unit moves (+1 up, -1 down) of ``V`` walking away from the origin on one side.

    Descend as far as ``delta * L`` allows, zigzag along a bottom plateau of
    ``bottom`` up/down pairs, then climb in stairs of ``stair`` up-moves
    separated by zigzag landings of ``landing`` pairs, until the rise above
    the bottom exceeds ``L`` by ``extra`` moves.
    """
    unit = log_rho(STAIR_LOW)
    depth = int(math.floor(delta * L / unit))
    while depth > 0 and depth * unit > delta * L - 1e-9:
        depth -= 1
    moves = [-1] * depth + [1, -1] * bottom
    need = int(math.ceil(L / unit)) + extra
    climbed = 0
    while climbed < need:
        run = min(stair, need - climbed)
        moves += [1] * run
        climbed += run
        if climbed < need:
            moves += [1, -1] * landing
    return moves


def staircase_environment(L: float, delta: float, stair: int = 4, landing: int = 10,
                          bottom: int = 10, extra: int = 6,
                          left_landing: int | None = None) -> Environment:
    """Deterministic two-sided valley with ``omega`` in ``{0.3, 0.7}``.

    A test fixture: ``V`` steps by exactly ``+-log(7/3)`` so the valley
    depth and widths are set by the move counts. The left side uses
    ``left_landing`` (default ``landing + 1``) to break the mirror symmetry.
    """
    right = staircase_profile(L, delta, stair, landing, bottom, extra)
    left = staircase_profile(L, delta, stair, landing + 1 if left_landing is None else left_landing,
                             bottom, extra)
    # right of 0, V(x) - V(x-1) = log rho_x: an up-move needs omega_x = 0.3
    right_omega = [STAIR_LOW if m > 0 else STAIR_HIGH for m in right]
    # left of 0, V(x-1) - V(x) = -log rho_x: an up-move needs omega_x = 0.7
    left_omega = [STAIR_HIGH if m > 0 else STAIR_LOW for m in left]
    # left_omega[k] is omega at site -k; the outermost site only matters for the walk
    omega = [STAIR_HIGH] + left_omega[::-1] + right_omega
    lo = -len(left)
    label = f"staircase(L={L},delta={delta},stair={stair},landing={landing},bottom={bottom},extra={extra})"
    return Environment(lo, lo + len(omega) - 1, np.array(omega), label=label)
