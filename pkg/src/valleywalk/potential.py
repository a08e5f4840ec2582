"""Potential, conductances, reversible measure and valley statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .env_model import Environment, SiteLaw, log_rho_array, sample_environment
from .errors import ArgumentError, RangeError, WindowExhaustedError


@dataclass(frozen=True, eq=False)
class Potential:
    """``V`` on ``[lo, hi]`` with ``V(0) = 0``.

    ``increment_bound`` is ``log(1 - eps) - log(eps)``, the largest possible
    jump of ``V`` between neighbouring sites.
    """

    lo: int
    hi: int
    values: np.ndarray
    increment_bound: float
    env: Environment | None = None

    @classmethod
    def from_values(cls, values: Sequence[float], lo: int = 0) -> "Potential":
        """Wrap a hand-specified profile (``values[0]`` sits at site ``lo``)."""
        v = np.array(values, dtype=np.float64)
        hi = lo + v.size - 1
        if not (lo <= 0 <= hi):
            raise ArgumentError("profile must cover the origin")
        if v[-lo] != 0.0:
            raise ArgumentError("V(0) must be 0")
        bound = float(np.max(np.abs(np.diff(v)))) if v.size > 1 else 0.0
        v.setflags(write=False)
        return cls(lo, hi, v, bound)

    def __getitem__(self, x: int) -> float:
        if not (self.lo <= x <= self.hi):
            raise RangeError(f"site {x} outside potential window [{self.lo}, {self.hi}]")
        return float(self.values[x - self.lo])

    def segment(self, a: int, b: int) -> np.ndarray:
        """``V`` on ``[a, b]`` (inclusive)."""
        if not (self.lo <= a and b <= self.hi):
            raise RangeError(f"[{a}, {b}] outside potential window [{self.lo}, {self.hi}]")
        return self.values[a - self.lo : b - self.lo + 1]

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)


def compute_potential(env: Environment) -> Potential:
    lr = log_rho_array(env.omega)
    origin = -env.lo
    v = np.empty(env.size)
    v[origin] = 0.0
    # V(x) = sum_{1..x} log rho_i to the right, -sum_{x+1..0} log rho_i to the left
    v[origin + 1 :] = np.cumsum(lr[origin + 1 :])
    if origin > 0:
        v[:origin] = -np.cumsum(lr[origin:0:-1])[::-1]
    v.setflags(write=False)
    eps = env.epsilon
    return Potential(env.lo, env.hi, v, math.log1p(-eps) - math.log(eps), env)


def conductance(pot: Potential, x: int) -> float:
    """Conductance ``exp(-V(x))`` of the edge ``(x, x + 1)``."""
    return math.exp(-pot[x])


def measure(pot: Potential, x: int) -> float:
    """Reversible measure ``mu(x) = exp(-V(x)) + exp(-V(x - 1))``, normalised by ``mu(0) = 1/omega_0``."""
    if not (pot.lo < x <= pot.hi):
        raise RangeError(f"mu({x}) needs V on [{x - 1}, {x}], window is [{pot.lo}, {pot.hi}]")
    return math.exp(-pot[x]) + math.exp(-pot[x - 1])


def measure_array(pot: Potential, a: int, b: int) -> np.ndarray:
    seg = pot.segment(a - 1, b)
    return np.exp(-seg[1:]) + np.exp(-seg[:-1])


@dataclass(frozen=True)
class ValleyStats:
    L: float
    T_plus: int
    T_minus: int
    Tb_plus: int
    Tb_minus: int
    R1_plus: float
    R1_minus: float
    R2_plus: float
    R2_minus: float

    @property
    def b_plus(self) -> int:
        return self.Tb_plus

    @property
    def b_minus(self) -> int:
        return self.Tb_minus

    @property
    def width(self) -> int:
        """Number of sites in ``[T_minus, T_plus]``."""
        return self.T_plus - self.T_minus + 1

    def to_dict(self) -> dict:
        return asdict(self)


class SideScan(NamedTuple):
    T: int
    Tb: int
    R1: float
    R2: float


def _scan_side(path: np.ndarray, L: float) -> SideScan | None:
    """Scan ``path[k] = V(+-k)`` outward; ``None`` if the level is never reached."""
    runmin = np.minimum.accumulate(path)
    crossed = np.flatnonzero(path - runmin >= L)
    if crossed.size == 0:
        return None
    t = int(crossed[0])
    bottom = runmin[t]
    tb = int(np.flatnonzero(path[: t + 1] == bottom)[0])
    return SideScan(t, tb, 0.0 - float(bottom), float(np.max(path[: tb + 1])))


def valley_stats(pot: Potential, L: float) -> ValleyStats:
    """The eight valley statistics at level ``L``, scanning outward from 0.

    Raises :class:`WindowExhaustedError` when the window ends before the
    potential climbs ``L`` above its running minimum on either side.
    """
    if not L > 0:
        raise ArgumentError(f"level L must be positive, got {L}")
    origin = -pot.lo
    right = _scan_side(pot.values[origin:], L)
    if right is None:
        raise WindowExhaustedError(f"T+({L}) not reached within [0, {pot.hi}]")
    left = _scan_side(pot.values[origin::-1], L)
    if left is None:
        raise WindowExhaustedError(f"T-({L}) not reached within [{pot.lo}, 0]")
    return ValleyStats(
        L=float(L),
        T_plus=right.T,
        T_minus=-left.T,
        Tb_plus=right.Tb,
        Tb_minus=-left.Tb,
        R1_plus=right.R1,
        R1_minus=left.R1,
        R2_plus=right.R2,
        R2_minus=left.R2,
    )


class GammaVerdict(NamedTuple):
    in_gamma_plus: bool
    in_gamma_minus: bool
    in_gamma: bool


def gamma_membership(stats: ValleyStats, delta: float) -> GammaVerdict:
    if not (0.0 < delta < 1.0):
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    cap = delta * stats.L
    width = stats.L * stats.L
    plus = stats.R1_plus <= cap and stats.R2_plus <= cap and stats.T_plus <= width
    minus = stats.R1_minus <= cap and stats.R2_minus <= cap and -stats.T_minus <= width
    return GammaVerdict(plus, minus, plus and minus)


@dataclass(frozen=True)
class ValleyRecord:
    """Outcome of a valley search at one level.

    ``status`` is ``"hit"`` (environment in Gamma(L, delta)), ``"miss"`` or
    ``"undetermined"`` (the site budget could not cover ``L**2`` sites per side).
    """

    seed: int
    L: float
    delta: float
    status: str
    stats: ValleyStats | None
    verdict: GammaVerdict | None

    @property
    def in_gamma(self) -> bool:
        return self.status == "hit"

    def to_dict(self) -> dict:
        out = {"seed": self.seed, "L": self.L, "delta": self.delta, "status": self.status,
               "in_gamma": self.in_gamma}
        out["stats"] = self.stats.to_dict() if self.stats is not None else None
        if self.verdict is not None:
            out["in_gamma_plus"] = self.verdict.in_gamma_plus
            out["in_gamma_minus"] = self.verdict.in_gamma_minus
        return out


def find_valleys(law: SiteLaw, seed: int, delta: float, L_candidates: Sequence[float],
                 site_budget: int) -> list[ValleyRecord]:
    """Test ``omega in Gamma(L, delta)`` for each candidate level.

    Membership at level ``L`` only depends on ``V`` within ``floor(L**2)``
    sites of the origin, so each verdict is exact; levels needing more than
    ``site_budget`` sites per side come back undetermined.
    """
    if not (0.0 < delta < 1.0):
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    levels = [float(L) for L in L_candidates]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ArgumentError("L_candidates must be ascending")
    records = []
    env = None
    for L in levels:
        half = math.floor(L * L)
        if half > site_budget:
            records.append(ValleyRecord(seed, L, delta, "undetermined", None, None))
            continue
        if env is None:
            env = sample_environment(law, -half, half, seed)
        else:
            env = env.ensure(-half, half)
        pot = compute_potential(env.subwindow(-half, half))
        try:
            stats = valley_stats(pot, L)
        except WindowExhaustedError:
            # T+ or T- lies beyond L**2, so the width condition already fails
            records.append(ValleyRecord(seed, L, delta, "miss", None, None))
            continue
        verdict = gamma_membership(stats, delta)
        records.append(ValleyRecord(seed, L, delta, "hit" if verdict.in_gamma else "miss",
                                    stats, verdict))
    return records
