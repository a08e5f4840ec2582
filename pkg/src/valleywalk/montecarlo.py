"""Monte Carlo for the multidimensional recurrence examples.

Replica ``r`` draws its step ``t`` direction for coordinate ``c`` from
``splitmix64(base_r ^ (64 t + c))`` with ``base_r`` keyed by (seed, r), so
the result does not depend on how replicas are chunked or on the number
of worker threads. Chunk results are integer tallies merged in replica
order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import rng
from .config import budget
from .env_model import DEFAULT_LAW, Environment, SiteLaw, sample_environment, site_values
from .errors import (
    ArgumentError,
    BudgetExceededError,
    InsufficientDataError,
    PreconditionError,
    RangeError,
)
from .exact_kernel import return_series
from .diagnostics import srw_return

MODES = ("shared_env", "iid_envs", "rwre_times_srw", "lazy_mixture", "simple")
CHOICE_COMPONENT = 63
MAX_COORDS = 62
DEFAULT_CHUNK = 1 << 16
TABLE_CAP = 1 << 20


@dataclass(frozen=True)
class SimSpec:
    """One Monte Carlo experiment.

    ``simple`` runs ``d`` simple symmetric walkers and is the transient
    reference for ``d >= 3``. ``envs`` overrides environments derived from
    ``(law, env_seed)``; environment ``k`` of ``iid_envs`` uses seed
    ``key(env_seed, k)``.
    """

    mode: str
    horizon: int
    replicas: int
    seed: int
    d: int = 1
    law: SiteLaw = DEFAULT_LAW
    delta_mix: float | None = None
    env_seed: int | None = None
    checkpoints: tuple[int, ...] | None = None
    envs: tuple[Environment, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ArgumentError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.horizon < 2 or self.horizon % 2:
            raise ArgumentError(f"horizon must be a positive even number, got {self.horizon}")
        if self.replicas < 1:
            raise ArgumentError("replicas must be positive")
        if not (1 <= self.d <= MAX_COORDS):
            raise ArgumentError(f"d must lie in [1, {MAX_COORDS}], got {self.d}")
        if self.mode == "lazy_mixture":
            if self.delta_mix is None or not (0.0 < self.delta_mix <= 1.0):
                raise ArgumentError(f"lazy_mixture needs 0 < delta_mix <= 1, got {self.delta_mix}")
        cap = budget()
        if self.horizon > cap or self.replicas > cap:
            raise BudgetExceededError(f"horizon and replicas are each capped at {cap}")

    @property
    def coords(self) -> int:
        if self.mode in ("rwre_times_srw", "lazy_mixture"):
            return 2
        return self.d

    @property
    def n_envs(self) -> int:
        return {"shared_env": 1, "iid_envs": self.d, "rwre_times_srw": 1,
                "lazy_mixture": 1, "simple": 0}[self.mode]

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            cps = sorted({int(c) for c in self.checkpoints})
            if any(c < 0 or c > self.horizon for c in cps):
                raise ArgumentError(f"checkpoints must lie in [0, {self.horizon}]")
            return tuple(cps)
        cps = {10 ** k for k in range(1, 19) if 10 ** k <= self.horizon}
        cps.add(self.horizon)
        return tuple(sorted(cps))

    def environment_seeds(self) -> list[int]:
        base = self.seed if self.env_seed is None else self.env_seed
        if self.mode == "iid_envs":
            return [int(rng.key(rng.ENV_SEED_TAG, base, k)) for k in range(self.d)]
        return [base] * self.n_envs

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "d": self.d, "horizon": self.horizon, "replicas": self.replicas,
            "seed": self.seed, "env_seed": self.env_seed, "law": self.law.to_dict(),
            "delta_mix": self.delta_mix, "checkpoints": list(self.resolved_checkpoints()),
        }


class _SiteTable:
    """``omega`` lookup for unbounded walkers: dense near the origin, on demand beyond."""

    def __init__(self, env: Environment | None, law: SiteLaw, seed: int, reach: int):
        half = min(reach + 1, TABLE_CAP)
        if env is None:
            env = sample_environment(law, -half, half, seed)
        self.env = env
        self.lo, self.hi = env.lo, env.hi
        self.table = env.omega
        self.extendable = env.law is not None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        inside = (x >= self.lo) & (x <= self.hi)
        if inside.all():
            return self.table[x - self.lo]
        if not self.extendable:
            raise RangeError(
                f"walker left the fixture window [{self.lo}, {self.hi}] (site {int(x[~inside][0])})"
            )
        out = np.empty(x.shape)
        out[inside] = self.table[x[inside] - self.lo]
        out[~inside] = site_values(self.env.law, self.env.seed, x[~inside])
        return out


def _tables(spec: SimSpec) -> list[_SiteTable]:
    seeds = spec.environment_seeds()
    if spec.envs is not None:
        if len(spec.envs) != spec.n_envs:
            raise ArgumentError(f"mode {spec.mode} needs {spec.n_envs} environments, got {len(spec.envs)}")
        return [_SiteTable(e, spec.law, s, spec.horizon) for e, s in zip(spec.envs, seeds)]
    return [_SiteTable(None, spec.law, s, spec.horizon) for s in seeds]


def replica_keys(seed: int, start: int, stop: int) -> np.ndarray:
    return rng.splitmix64(rng.key(rng.WALK_TAG, seed) ^ np.arange(start, stop, dtype=np.uint64))


def _move(spec: SimSpec, tables: list[_SiteTable], pos: np.ndarray, keys: np.ndarray,
          t: int) -> np.ndarray:
    """Advance ``pos`` (replicas x coords) by one step in place; return the mask of movers for coordinate 0."""
    base = keys[:, None]
    k = pos.shape[1]
    u = rng.uniforms(base, np.uint64(64 * t) + np.arange(k, dtype=np.uint64)[None, :])
    mode = spec.mode
    if mode == "simple":
        pos += np.where(u < 0.5, 1, -1)
        return np.ones(pos.shape[0], dtype=bool)
    if mode == "shared_env":
        omega = tables[0](pos)
        pos += np.where(u < omega, 1, -1)
        return np.ones(pos.shape[0], dtype=bool)
    if mode == "iid_envs":
        for c in range(k):
            omega = tables[c](pos[:, c])
            pos[:, c] += np.where(u[:, c] < omega, 1, -1)
        return np.ones(pos.shape[0], dtype=bool)
    x_step = np.where(u[:, 0] < tables[0](pos[:, 0]), 1, -1)
    y_step = np.where(u[:, 1] < 0.5, 1, -1)
    if mode == "rwre_times_srw":
        pos[:, 0] += x_step
        pos[:, 1] += y_step
        return np.ones(pos.shape[0], dtype=bool)
    choice = rng.uniforms(keys, np.uint64(64 * t + CHOICE_COMPONENT)) < spec.delta_mix
    pos[:, 0] += np.where(choice, x_step, 0)
    pos[:, 1] += np.where(choice, 0, y_step)
    return choice


@dataclass
class _Tally:
    ret_sum: np.ndarray
    ret_sumsq: np.ndarray
    hits: np.ndarray
    marginal_hits: np.ndarray

    def __iadd__(self, other: "_Tally") -> "_Tally":
        self.ret_sum += other.ret_sum
        self.ret_sumsq += other.ret_sumsq
        self.hits += other.hits
        self.marginal_hits += other.marginal_hits
        return self


def _run_chunk(spec: SimSpec, tables, checkpoints: tuple[int, ...], start: int, stop: int) -> _Tally:
    keys = replica_keys(spec.seed, start, stop)
    n, k = stop - start, spec.coords
    pos = np.zeros((n, k), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    m = len(checkpoints)
    tally = _Tally(np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.int64),
                   np.zeros(m, dtype=np.int64), np.zeros((m, k), dtype=np.int64))
    slot = {c: i for i, c in enumerate(checkpoints)}
    if 0 in slot:
        i = slot[0]
        tally.hits[i] = n
        tally.marginal_hits[i] = n
    for t in range(1, spec.horizon + 1):
        _move(spec, tables, pos, keys, t)
        if t % 2 == 0:
            at_zero = pos == 0
            home = at_zero.all(axis=1)
            count += home
        i = slot.get(t)
        if i is not None:
            tally.ret_sum[i] = int(count.sum())
            tally.ret_sumsq[i] = int((count * count).sum())
            if t % 2 == 0:
                tally.hits[i] = int(home.sum())
                tally.marginal_hits[i] = at_zero.sum(axis=0)
            else:
                tally.marginal_hits[i] = (pos == 0).sum(axis=0)
    return tally


@dataclass(frozen=True, eq=False)
class SimResult:
    """Cumulative origin-return counts ``R(t)`` and hit frequencies at checkpoints.

    ``returns_mean[i]`` is the mean over replicas of the number of even
    times ``s in (0, t_i]`` with every coordinate at 0. ``hit_freq[i]`` is
    the fraction of replicas at the origin at time ``t_i`` exactly.
    """

    spec: SimSpec
    checkpoints: tuple[int, ...]
    returns_mean: np.ndarray
    returns_se: np.ndarray
    hit_freq: np.ndarray
    hit_se: np.ndarray
    marginal_hit_freq: np.ndarray
    replicas: int

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "replicas": self.replicas,
            "checkpoints": list(self.checkpoints),
            "returns_mean": self.returns_mean.tolist(),
            "returns_se": self.returns_se.tolist(),
            "hit_freq": self.hit_freq.tolist(),
            "hit_se": self.hit_se.tolist(),
            "marginal_hit_freq": self.marginal_hit_freq.tolist(),
            "rng": {"generator": "splitmix64-counter", "seed": self.spec.seed,
                    "stream": "replica r, step t, coordinate c -> key(seed) ^ r, 64 t + c"},
        }


def simulate(spec: SimSpec, workers: int = 1, chunk: int = DEFAULT_CHUNK) -> SimResult:
    """Run all replicas of ``spec``; output is identical for any ``workers`` and ``chunk``."""
    if workers < 1:
        raise ArgumentError("workers must be positive")
    checkpoints = spec.resolved_checkpoints()
    tables = _tables(spec)
    bounds = [(a, min(a + chunk, spec.replicas)) for a in range(0, spec.replicas, chunk)]
    if workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(spec, tables, checkpoints, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(spec, tables, checkpoints, *ab), bounds))
    total = parts[0]
    for part in parts[1:]:
        total += part
    r = spec.replicas
    mean = total.ret_sum / r
    var = np.maximum(total.ret_sumsq / r - mean * mean, 0.0)
    se = np.sqrt(var / max(r - 1, 1))
    hit = total.hits / r
    hit_se = np.sqrt(hit * (1.0 - hit) / r)
    return SimResult(spec, checkpoints, mean, se, hit, hit_se, total.marginal_hits / r, r)


@dataclass(frozen=True, eq=False)
class CompareReport:
    times: tuple[int, ...]
    estimate: np.ndarray
    exact: np.ndarray
    z: np.ndarray
    replicas: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    def to_dict(self) -> dict:
        return {"times": list(self.times), "estimate": self.estimate.tolist(),
                "exact": self.exact.tolist(), "z": self.z.tolist(),
                "max_abs_z": self.max_abs_z, "replicas": self.replicas}


def exact_joint_returns(spec: SimSpec) -> np.ndarray:
    """``P(all coordinates at 0 at time 2n)``, ``n = 1..horizon/2``, as a product of exact marginals."""
    half = spec.horizon // 2
    tables = _tables(spec)
    marginals = []
    for table in tables:
        lo, hi = -spec.horizon - 1, spec.horizon + 1
        if not table.env.covers(lo, hi):
            if not table.extendable:
                raise PreconditionError(
                    f"fixture window [{table.lo}, {table.hi}] is narrower than the reach of {spec.horizon} steps"
                )
        env = table.env.ensure(lo, hi).subwindow(lo, hi)
        series = return_series(env, half)
        if np.any(series.slack != 0.0):
            raise PreconditionError("exact marginals carry truncation slack")
        marginals.append(series.p_lower)
    srw = np.array([srw_return(n) for n in range(1, half + 1)])
    if spec.mode == "shared_env":
        return marginals[0] ** spec.d
    if spec.mode == "iid_envs":
        out = np.ones(half)
        for m in marginals:
            out = out * m
        return out
    if spec.mode == "rwre_times_srw":
        return marginals[0] * srw
    if spec.mode == "simple":
        return srw ** spec.d
    raise ArgumentError("lazy_mixture has no product-form exact joint law")


def compare_exact(spec: SimSpec, workers: int = 1) -> CompareReport:
    """Monte Carlo joint return frequencies against the exact product of marginals at every even time."""
    if spec.horizon > 40:
        raise PreconditionError(f"exact comparison is limited to horizon <= 40, got {spec.horizon}")
    times = tuple(range(2, spec.horizon + 1, 2))
    exact = exact_joint_returns(spec)
    result = simulate(replace(spec, checkpoints=times), workers=workers)
    est = result.hit_freq
    sd = np.sqrt(exact * (1.0 - exact) / spec.replicas)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, (est - exact) / np.where(sd > 0, sd, 1.0),
                     np.where(est == exact, 0.0, np.inf))
    return CompareReport(times, est, exact, z, spec.replicas)


# ---------------------------------------------------------------------------
# jump times of the lazy mixture


@dataclass(frozen=True, eq=False)
class JumpTrace:
    """``tau[r, k-1]`` is the time of the ``k``-th move of the first coordinate in replica ``r``."""

    tau: np.ndarray
    delta_mix: float


def simulate_jumps(spec: SimSpec, n_jumps: int, max_steps: int | None = None,
                   chunk: int = DEFAULT_CHUNK) -> JumpTrace:
    """Run the lazy mixture until every replica has made ``n_jumps`` first-coordinate moves."""
    if spec.mode != "lazy_mixture":
        raise ArgumentError("jump times are defined for the lazy_mixture mode")
    if n_jumps < 1:
        raise ArgumentError("n_jumps must be positive")
    cap = max_steps if max_steps is not None else spec.horizon
    tables = [_SiteTable(spec.envs[0] if spec.envs else None, spec.law,
                         spec.environment_seeds()[0], cap)]
    taus = []
    for a in range(0, spec.replicas, chunk):
        b = min(a + chunk, spec.replicas)
        keys = replica_keys(spec.seed, a, b)
        pos = np.zeros((b - a, 2), dtype=np.int64)
        tau = np.zeros((b - a, n_jumps), dtype=np.int64)
        jumps = np.zeros(b - a, dtype=np.int64)
        rows = np.arange(b - a)
        t = 0
        while jumps.min() < n_jumps:
            t += 1
            if t > cap:
                raise InsufficientDataError(
                    f"only {int(jumps.min())} of {n_jumps} jumps recorded within {cap} steps"
                )
            moved = _move(spec, tables, pos, keys, t)
            record = moved & (jumps < n_jumps)
            tau[rows[record], jumps[record]] = t
            jumps += record
        taus.append(tau)
    return JumpTrace(np.concatenate(taus), float(spec.delta_mix))


@dataclass(frozen=True)
class TauReport:
    delta_mix: float
    n_increments: int
    mean: float
    mean_se: float
    mean_z: float
    expected_mean: float
    var: float
    expected_var: float
    min_increment: int
    even_fraction: dict
    even_threshold: float
    pmf_checked_n: int
    pmf_unimodal: bool

    @property
    def passes(self) -> bool:
        return (abs(self.mean_z) <= 3.0 and self.min_increment >= 1 and self.pmf_unimodal
                and all(f >= self.even_threshold for f in self.even_fraction.values()))

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["even_fraction"] = {str(k): v for k, v in self.even_fraction.items()}
        out["passes"] = self.passes
        return out


def _unimodal(values: np.ndarray, n: int, delta: float, tol_sd: float = 3.0) -> bool:
    """Coarse unimodality test of the empirical law of ``tau_n`` around its mode.

    Bins of width about half a standard deviation; consecutive bin
    frequencies must rise before the negative-binomial mode and fall after,
    up to ``tol_sd`` standard errors.
    """
    mode = (n - 1) / delta
    sd = math.sqrt(n * (1 - delta)) / delta
    width = max(1, int(round(sd / 2)))
    edges = mode + width * (np.arange(-6, 7) - 0.5)
    counts, _ = np.histogram(values, bins=edges)
    freq = counts / values.size
    se = np.sqrt(np.maximum(freq, 1.0 / values.size) / values.size)
    centres = 0.5 * (edges[:-1] + edges[1:])
    for i in range(len(freq) - 1):
        diff = freq[i + 1] - freq[i]
        allow = tol_sd * math.hypot(se[i], se[i + 1])
        if centres[i + 1] <= mode and diff < -allow:
            return False
        if centres[i] >= mode and diff > allow:
            return False
    return True


def tau_increment_stats(trace: JumpTrace, parity_ns: Sequence[int] = (1000,),
                        even_threshold: float = 0.2, min_increments: int = 1000) -> TauReport:
    """Geometric increments of the jump times and the parity balance of ``tau_n``."""
    tau = trace.tau
    inc = np.diff(tau, axis=1, prepend=0).ravel()
    if inc.size < min_increments:
        raise InsufficientDataError(f"{inc.size} increments recorded, need {min_increments}")
    delta = trace.delta_mix
    mean = float(inc.mean())
    var = float(inc.var(ddof=1))
    se = math.sqrt(var / inc.size) if var > 0 else 0.0
    expected = 1.0 / delta
    z = (mean - expected) / se if se > 0 else (0.0 if mean == expected else math.inf)
    even = {}
    for n in parity_ns:
        if not (1 <= n <= tau.shape[1]):
            raise InsufficientDataError(f"tau_{n} not recorded (have {tau.shape[1]} jumps)")
        even[int(n)] = float(np.mean(tau[:, n - 1] % 2 == 0))
    n_check = int(max(parity_ns))
    unimodal = _unimodal(tau[:, n_check - 1], n_check, delta) if delta < 1 else True
    return TauReport(delta, int(inc.size), mean, se, z, expected, var, (1 - delta) / delta ** 2,
                     int(inc.min()), even, even_threshold, n_check, unimodal)
