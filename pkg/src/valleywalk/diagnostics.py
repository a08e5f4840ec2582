"""Summability diagnostics, the return exponent, and reference curves.

Every sum is taken over ``p_lower`` so that a reported partial sum is a
certified lower bound for the true one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .env_model import SiteLaw, sample_environment
from .errors import ArgumentError
from .exact_kernel import return_series

MODES = ("weighted", "power", "product")
_EXACT_SRW_MAX = 1000


def _lower(series) -> np.ndarray:
    return np.asarray(getattr(series, "p_lower", series), dtype=np.float64)


def _check_mode(mode: str, alpha: float | None, d: int) -> None:
    if mode == "weighted":
        if alpha is None or not (0.0 <= alpha < 1.0):
            raise ArgumentError(f"weighted mode needs 0 <= alpha < 1, got {alpha}")
    elif mode == "power":
        if alpha is None or not alpha > 0.0:
            raise ArgumentError(f"power mode needs alpha > 0, got {alpha}")
    elif mode == "product":
        if d < 1:
            raise ArgumentError("product mode needs at least one series")
    else:
        raise ArgumentError(f"unknown mode {mode!r}; expected one of {MODES}")


def summand(series, mode: str, alpha: float | None = None) -> np.ndarray:
    """Per-``n`` terms of the divergence sums, ``n = 1..N``."""
    if mode == "product":
        many = list(series) if isinstance(series, (list, tuple)) else [series]
        _check_mode(mode, alpha, len(many))
        arrays = [_lower(s) for s in many]
        if len({a.size for a in arrays}) != 1:
            raise ArgumentError("product mode needs series of equal length")
        out = arrays[0].copy()
        for a in arrays[1:]:
            out *= a
        return out
    _check_mode(mode, alpha, 1)
    p = _lower(series)
    if mode == "weighted":
        n = np.arange(1, p.size + 1, dtype=np.float64)
        return p * n ** (-alpha)
    return p ** alpha


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    mode: str
    alpha: float | None
    d: int
    terms: np.ndarray
    partial_sums: np.ndarray
    block_sums: tuple[tuple[int, int, float], ...]
    trend_slope: float

    @property
    def N(self) -> int:
        return int(self.partial_sums.size)

    def rows(self):
        for n, s in enumerate(self.partial_sums.tolist(), 1):
            yield n, s


def block_sum(terms: np.ndarray, n_lo: int, n_hi: int) -> float:
    """``sum_{n = n_lo}^{n_hi} terms[n]`` with 1-based ``n``, clipped to the available range."""
    a, b = max(1, n_lo), min(terms.size, n_hi)
    if b < a:
        return 0.0
    return math.fsum(terms[a - 1 : b].tolist())


def _trend(partial: np.ndarray) -> float:
    mask = partial > 0
    if mask.sum() < 2:
        return float("nan")
    n = np.arange(1, partial.size + 1)[mask]
    slope, _ = np.polyfit(np.log(n), np.log(partial[mask]), 1)
    return float(slope)


def partial_sums(series, mode: str = "weighted", alpha: float | None = None,
                 windows: Sequence[tuple[int, int]] = ()) -> DivergenceReport:
    """Running sums ``S_N`` in one of three forms.

    ``weighted``: ``sum p(n) n**-alpha`` (``0 <= alpha < 1``);
    ``power``: ``sum p(n)**alpha`` (``alpha > 0``);
    ``product``: ``sum prod_k p_k(n)`` over a list of series.
    """
    terms = summand(series, mode, alpha)
    d = len(series) if mode == "product" and isinstance(series, (list, tuple)) else 1
    s = np.cumsum(terms)
    blocks = tuple((int(a), int(b), block_sum(terms, int(a), int(b))) for a, b in windows)
    return DivergenceReport(mode, alpha, d, terms, s, blocks, _trend(s))


@dataclass(frozen=True)
class BlockBound:
    value: float
    n_lo: float
    n_hi: float
    growth_exponent: float


def valley_block_bound(L: float, delta: float, alpha: float, mode: str = "weighted", d: int = 1,
                       C: float = 1.0, n_hi: float | None = None) -> BlockBound:
    """Lower bound for the block sum over ``[exp(3 delta L), n_hi]`` given ``p >= C exp(-3 delta L)``.

    With ``n_hi`` left at ``exp((1 - 2 delta) L)`` this is the displayed
    bound from the divergence argument, e.g. for ``weighted`` mode
    ``C (exp((1-5 delta) L) - 1 - exp(-3 delta L)) exp(-alpha (1-2 delta) L)``.
    A smaller ``n_hi`` truncates the block the same way. ``growth_exponent``
    is the rate in ``L`` at which the full-range bound grows.
    """
    if not (0.0 < delta < 1.0):
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    if mode == "weighted":
        if not (0.0 <= alpha < 1.0 and delta < 1 / 6 and alpha < (1 - 5 * delta) / (1 - 2 * delta)):
            raise ArgumentError(f"need 0 < delta < 1/6 and alpha < (1-5 delta)/(1-2 delta); got alpha={alpha}, delta={delta}")
        growth = (1 - 5 * delta) - alpha * (1 - 2 * delta)
    elif mode == "power":
        if not (alpha > 0.0 and delta < min(1 / (2 + 3 * alpha), 0.2)):
            raise ArgumentError(f"need delta < min(1/(2+3 alpha), 1/5); got alpha={alpha}, delta={delta}")
        growth = 1 - 2 * delta - 3 * alpha * delta
    elif mode == "product":
        if not (d >= 1 and delta < 1 / (2 + 3 * d)):
            raise ArgumentError(f"need delta < 1/(2+3d); got d={d}, delta={delta}")
        growth = 1 - 2 * delta - 3 * delta * d
    else:
        raise ArgumentError(f"unknown mode {mode!r}")

    lo = math.exp(3 * delta * L)
    full_hi = math.exp((1 - 2 * delta) * L)
    hi = full_hi if n_hi is None else float(n_hi)
    if hi < lo:
        raise ArgumentError(f"block end {hi} precedes its start {lo}")
    per_term = C * math.exp(-3 * delta * L)
    if mode == "weighted":
        if n_hi is None:
            value = C * (math.exp((1 - 5 * delta) * L) - 1 - math.exp(-3 * delta * L)) \
                * math.exp(-alpha * (1 - 2 * delta) * L)
        else:
            value = (hi - lo - 1) * per_term * hi ** (-alpha)
    elif mode == "power":
        value = (hi - lo - 1) * per_term ** alpha
    else:
        value = (hi - lo - 1) * per_term ** d
    return BlockBound(value, lo, hi, growth)


@dataclass(frozen=True, eq=False)
class ExponentProcess:
    n: np.ndarray
    a: np.ndarray
    running_min: np.ndarray
    running_max: np.ndarray

    def rows(self):
        for row in zip(self.n.tolist(), self.a.tolist(), self.running_min.tolist(),
                       self.running_max.tolist()):
            yield row


def exponent_process(series) -> ExponentProcess:
    """``a(n) = -log p(n) / log n`` for ``n >= 2`` with running extremes.

    Zero probabilities give ``a = inf``; those points are skipped when
    tracking the running minimum.
    """
    p = _lower(series)
    if p.size < 2:
        raise ArgumentError("need at least N = 2")
    n = np.arange(2, p.size + 1)
    with np.errstate(divide="ignore"):
        a = -np.log(p[1:]) / np.log(n)
    a = np.where(p[1:] > 0, a, np.inf)
    rmin = np.minimum.accumulate(a)
    rmax = np.maximum.accumulate(a)
    return ExponentProcess(n, a, rmin, rmax)


def srw_return(n: int) -> float:
    """``P(S_{2n} = 0) = C(2n, n) 4**-n`` for the simple symmetric walk."""
    if n < 0:
        raise ArgumentError("n must be nonnegative")
    if n <= _EXACT_SRW_MAX:
        return math.comb(2 * n, n) / 4 ** n
    return math.exp(math.lgamma(2 * n + 1) - 2 * math.lgamma(n + 1) - n * math.log(4.0))


def srw_return_array(n_max: int) -> np.ndarray:
    """``srw_return(n)`` for ``n = 1..n_max``."""
    n = np.arange(1, n_max + 1, dtype=np.float64)
    out = np.exp(gammaln(2 * n + 1) - 2 * gammaln(n + 1) - n * math.log(4.0))
    k = min(n_max, _EXACT_SRW_MAX)
    out[:k] = [srw_return(i) for i in range(1, k + 1)]
    return out


def srw_lower_check(n: int) -> bool:
    """``srw_return(n) >= n**-0.5 / 2``."""
    return srw_return(n) >= 0.5 / math.sqrt(n)


def ahat_density(z: float) -> float:
    """Limit density of the return exponent for the continuous-time walk."""
    if not z > 0:
        raise ArgumentError(f"density is defined for z > 0, got {z}")
    if z < 1.0:
        return 2.0 - z - (z + 2.0) * math.exp(-2.0 * z)
    return ((math.e ** 2 - 1.0) * z - 2.0) * math.exp(-2.0 * z)


def _ahat_tail(z0: float) -> float:
    """``int_{z0}^inf ((e^2 - 1) z - 2) e^{-2z} dz`` in closed form."""
    k = math.e ** 2 - 1.0
    return (k * (z0 / 2.0 + 0.25) - 1.0) * math.exp(-2.0 * z0)


def ahat_normalization(cutoff: float = 30.0) -> float:
    """Total mass of :func:`ahat_density`: adaptive quadrature to ``cutoff``, exact tail beyond."""
    first, _ = integrate.quad(ahat_density, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    second, _ = integrate.quad(ahat_density, 1.0, cutoff, epsabs=1e-14, epsrel=1e-13, limit=200)
    return first + second + _ahat_tail(cutoff)


def exponent_histogram(law: SiteLaw, seeds: Iterable[int], N: int, bins: int = 20,
                       z_max: float = 4.0) -> list[tuple[float, float, float, float]]:
    """Histogram of ``a(omega, N)`` across seeds next to the limit density.

    Rows are ``(bin_lo, bin_hi, empirical_density, reference_density)`` with
    the reference evaluated at the bin centre. For inspection only.
    """
    values = []
    for seed in seeds:
        env = sample_environment(law, -1, 1, seed)
        series = return_series(env, N, slack_tol=0.0)
        values.append(exponent_process(series).a[-1])
    edges = np.linspace(0.0, z_max, bins + 1)
    counts, _ = np.histogram(np.clip(values, 0.0, z_max), bins=edges)
    width = edges[1] - edges[0]
    total = max(len(values), 1)
    rows = []
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        mid = 0.5 * (lo + hi)
        rows.append((float(lo), float(hi), float(c) / (total * width), ahat_density(mid)))
    return rows
