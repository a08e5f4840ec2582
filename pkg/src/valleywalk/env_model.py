"""Site laws and seeded, extensible environment windows."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .config import budget
from .errors import (
    ArgumentError,
    BudgetExceededError,
    InvalidLawError,
    PreconditionError,
    RangeError,
)

WEIGHT_TOL = 1e-12


def log_rho(value: float) -> float:
    """``log((1 - value) / value)``, evaluated antisymmetrically.

    Values above 1/2 are mapped through their decimal complement so that
    ``log_rho(1 - a) == -log_rho(a)`` holds bit for bit for decimal inputs
    such as 0.3 / 0.7 (binary ``1 - 0.7`` is not ``0.3``).
    """
    if value > 0.5:
        comp = float(f"{1.0 - value:.15g}")
        return -(math.log1p(-comp) - math.log(comp))
    return math.log1p(-value) - math.log(value)


def log_rho_array(values: np.ndarray) -> np.ndarray:
    """Vectorised :func:`log_rho`; distinct values are evaluated once."""
    values = np.asarray(values, dtype=np.float64)
    uniq, inverse = np.unique(values, return_inverse=True)
    table = np.array([log_rho(float(v)) for v in uniq])
    return table[inverse].reshape(values.shape)


@dataclass(frozen=True)
class SiteLaw:
    """Finite-support law of a single transition probability ``omega_0``."""

    atoms: tuple[tuple[float, float], ...]
    epsilon: float | None = None

    def __post_init__(self):
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        if not atoms:
            raise InvalidLawError("law has no atoms")
        for v, w in atoms:
            if not (0.0 < v < 1.0):
                raise InvalidLawError(f"atom value {v} is outside (0, 1)")
            if not w > 0.0:
                raise InvalidLawError(f"atom weight {w} is not strictly positive")
        total = math.fsum(w for _, w in atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InvalidLawError(f"weights sum to {total!r}, not 1")
        if self.epsilon is not None and not (0.0 < self.epsilon < 0.5):
            raise InvalidLawError(f"epsilon {self.epsilon} is outside (0, 1/2)")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def parse(cls, text: str, epsilon: float | None = None) -> "SiteLaw":
        """Build a law from ``"0.3:0.5,0.7:0.5"`` (value:weight pairs)."""
        atoms = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                v, w = chunk.split(":")
                atoms.append((float(v), float(w)))
            except ValueError:
                raise InvalidLawError(f"cannot parse atom {chunk!r}; expected value:weight") from None
        return cls(tuple(atoms), epsilon)

    @classmethod
    def from_dict(cls, data: dict) -> "SiteLaw":
        return cls(tuple(tuple(a) for a in data["atoms"]), data.get("epsilon"))

    @classmethod
    def from_config(cls, cfg: dict) -> "SiteLaw":
        if "atoms" not in cfg:
            raise InvalidLawError("law config needs an 'atoms' entry")
        eps = cfg.get("epsilon")
        return cls.parse(cfg["atoms"], float(eps) if eps not in (None, "") else None)

    def to_dict(self) -> dict:
        out: dict = {"atoms": [[v, w] for v, w in self.atoms]}
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out

    @property
    def law_id(self) -> str:
        return ",".join(f"{v!r}:{w!r}" for v, w in self.atoms)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def ellipticity(self) -> float:
        """The largest ``eps`` with every atom in ``[eps, 1 - eps]``."""
        return min(min(v, 1.0 - v) for v, _ in self.atoms)

    @property
    def mean_log_rho(self) -> float:
        return math.fsum(w * log_rho(v) for v, w in self.atoms)

    @property
    def var_log_rho(self) -> float:
        m = self.mean_log_rho
        return math.fsum(w * (log_rho(v) - m) ** 2 for v, w in self.atoms)


@dataclass(frozen=True)
class LawReport:
    mean_log_rho: float
    var_log_rho: float
    epsilon: float
    passes: tuple[bool, bool, bool]

    @property
    def ok(self) -> bool:
        return all(self.passes)

    def to_dict(self) -> dict:
        return {
            "mean_log_rho": self.mean_log_rho,
            "var_log_rho": self.var_log_rho,
            "epsilon": self.epsilon,
            "passes": {
                "centered": self.passes[0],
                "nondegenerate": self.passes[1],
                "elliptic": self.passes[2],
            },
            "ok": self.ok,
        }


def validate_law(law: SiteLaw, tol: float = 1e-12) -> LawReport:
    """Check the recurrence, ellipticity and non-degeneracy assumptions.

    ``passes`` holds, in order: centred log-ratio (within ``tol``), strictly
    positive variance, and every atom inside ``[eps, 1 - eps]`` for an
    ``eps`` in (0, 1/2).
    """
    eps = law.epsilon if law.epsilon is not None else law.ellipticity
    mean = law.mean_log_rho
    var = law.var_log_rho
    elliptic = all(eps <= v <= 1.0 - eps for v, _ in law.atoms) and 0.0 < eps <= 0.5
    if law.epsilon is not None:
        elliptic = elliptic and eps < 0.5
    return LawReport(mean, var, eps, (abs(mean) <= tol, var > 0.0, elliptic))


def site_values(law: SiteLaw, seed: int, sites) -> np.ndarray:
    """Draw ``omega_x`` for each site in ``sites`` as a pure function of (law, seed, x)."""
    sites = np.asarray(sites, dtype=np.int64)
    u = rng.uniforms(rng.key(rng.ENV_TAG, seed), sites)
    cum = np.cumsum(law.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, u, side="right")
    return law.values[np.minimum(idx, len(cum) - 1)]


def _check_size(lo: int, hi: int) -> None:
    size = hi - lo + 1
    limit = budget()
    if size > limit:
        raise BudgetExceededError(f"window [{lo}, {hi}] has {size} sites; budget is {limit}")


@dataclass(frozen=True, eq=False)
class Environment:
    """A window ``[lo, hi]`` of site probabilities ``omega_x``.

    Environments sampled from a law carry ``law`` and ``seed`` and can be
    extended; hand-built fixtures have ``law=None`` and a descriptive
    ``label`` instead.
    """

    lo: int
    hi: int
    omega: np.ndarray
    law: SiteLaw | None = None
    seed: int | None = None
    label: str | None = None
    _eps: float = field(init=False, repr=False)

    def __post_init__(self):
        omega = np.array(self.omega, dtype=np.float64)
        if omega.ndim != 1 or omega.size != self.hi - self.lo + 1:
            raise ArgumentError(f"omega has {omega.size} values for window [{self.lo}, {self.hi}]")
        if not (self.lo <= 0 <= self.hi):
            raise ArgumentError(f"window [{self.lo}, {self.hi}] must contain the origin")
        if np.any((omega <= 0.0) | (omega >= 1.0)):
            raise InvalidLawError("site probabilities must lie in (0, 1)")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        eps = float(np.min(np.minimum(omega, 1.0 - omega)))
        if self.law is not None:
            eps = min(eps, self.law.epsilon if self.law.epsilon is not None else self.law.ellipticity)
        object.__setattr__(self, "_eps", eps)

    @classmethod
    def from_values(cls, omega: Sequence[float], lo: int = 0, label: str = "fixture") -> "Environment":
        omega = np.asarray(omega, dtype=np.float64)
        return cls(lo, lo + omega.size - 1, omega, label=label)

    @classmethod
    def constant(cls, value: float, lo: int, hi: int) -> "Environment":
        return cls(lo, hi, np.full(hi - lo + 1, float(value)), label=f"constant({value!r})")

    @property
    def law_id(self) -> str:
        return self.law.law_id if self.law is not None else (self.label or "fixture")

    @property
    def epsilon(self) -> float:
        return self._eps

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def covers(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def __getitem__(self, x: int) -> float:
        if not (self.lo <= x <= self.hi):
            raise RangeError(f"site {x} outside window [{self.lo}, {self.hi}]")
        return float(self.omega[x - self.lo])

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Read-only view of ``omega`` on ``[lo, hi]``."""
        if not self.covers(lo, hi):
            raise RangeError(f"[{lo}, {hi}] not inside window [{self.lo}, {self.hi}]")
        return self.omega[lo - self.lo : hi - self.lo + 1]

    def subwindow(self, lo: int, hi: int) -> "Environment":
        vals = self.values(lo, hi)
        return Environment(lo, hi, vals.copy(), self.law, self.seed, self.label)

    def ensure(self, lo: int, hi: int) -> "Environment":
        """Return an environment covering ``[lo, hi]``, extending if needed."""
        if self.covers(lo, hi):
            return self
        if self.law is None:
            raise RangeError(
                f"fixture environment [{self.lo}, {self.hi}] cannot be extended to [{lo}, {hi}]"
            )
        return extend_environment(self, min(lo, self.lo), max(hi, self.hi))

    def to_dict(self) -> dict:
        return {
            "law": self.law.to_dict() if self.law is not None else None,
            "law_id": self.law_id,
            "seed": self.seed,
            "lo": self.lo,
            "hi": self.hi,
            "omega": self.omega.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        law = SiteLaw.from_dict(data["law"]) if data.get("law") else None
        label = None if law is not None else data.get("law_id", "fixture")
        return cls(int(data["lo"]), int(data["hi"]), np.asarray(data["omega"], dtype=float),
                   law, data.get("seed"), label)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Environment":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_environment(law: SiteLaw, lo: int, hi: int, seed: int,
                       require_valid: bool = True) -> Environment:
    """Sample ``omega`` on ``[lo, hi]``; values depend only on (law, seed, x)."""
    if not (lo <= 0 <= hi):
        raise ArgumentError(f"window [{lo}, {hi}] must contain the origin")
    if require_valid:
        report = validate_law(law)
        if not report.ok:
            raise PreconditionError(f"law {law.law_id} fails the model assumptions: {report.to_dict()['passes']}")
    _check_size(lo, hi)
    omega = site_values(law, seed, np.arange(lo, hi + 1))
    return Environment(lo, hi, omega, law, int(seed))


def extend_environment(env: Environment, new_lo: int, new_hi: int) -> Environment:
    """Grow ``env`` to ``[new_lo, new_hi]``; existing sites are kept bit for bit."""
    if env.law is None or env.seed is None:
        raise PreconditionError("only environments sampled from a law can be extended")
    if new_lo > env.lo or new_hi < env.hi:
        raise ArgumentError(
            f"[{new_lo}, {new_hi}] does not contain the current window [{env.lo}, {env.hi}]"
        )
    _check_size(new_lo, new_hi)
    left = site_values(env.law, env.seed, np.arange(new_lo, env.lo))
    right = site_values(env.law, env.seed, np.arange(env.hi + 1, new_hi + 1))
    omega = np.concatenate([left, env.omega, right])
    return Environment(new_lo, new_hi, omega, env.law, env.seed)


def environments(law: SiteLaw, seeds: Iterable[int], lo: int, hi: int) -> list[Environment]:
    return [sample_environment(law, lo, hi, s) for s in seeds]


DEFAULT_LAW = SiteLaw(((0.3, 0.5), (0.7, 0.5)))
