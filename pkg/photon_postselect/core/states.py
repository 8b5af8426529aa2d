# photon_postselect/core/states.py

"""
Photon-number distributions of the input field states and their cutoffs.

A distribution is the universal state representation for every
distribution-level map: a truncated vector p_0 ... p_N plus an upper bound
on the probability mass above N.
"""

import json
import logging
import math
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import gammaln
from scipy.stats import poisson

from .kernels import _lachs_pmf_numba, _moments_numba
from .numerics import laguerre
from .utils import DomainError, InsufficientCutoffError

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-12
MIXED_LIGHT_MAX_TERMS = 1_000_000

StateKind = Literal["coherent", "thermal", "mixed_light", "fock", "custom"]


class PhotonNumberDistribution(BaseModel):
    """Immutable truncated photon-number distribution."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probs: np.ndarray
    kind: str = "custom"
    params: dict[str, float] = Field(default_factory=dict)
    tail_bound: float = 0.0

    @field_validator("probs", mode="before")
    @classmethod
    def _as_readonly_vector(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise DomainError("a photon-number distribution needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise DomainError("photon-number probabilities must be finite")
        if np.any(arr < 0):
            raise DomainError("photon-number probabilities must be non-negative")
        arr.setflags(write=False)
        return arr

    @field_validator("tail_bound")
    @classmethod
    def _tail_non_negative(cls, value: float) -> float:
        if value < 0:
            raise DomainError("tail_bound must be non-negative")
        return value

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    def total(self) -> float:
        return float(_moments_numba(self.probs)[0])

    def mean(self) -> float:
        return self.factorial_moments()[0]

    def factorial_moments(self) -> tuple[float, float]:
        """(<n>, <n(n-1)>) of the stored vector, taken as already normalized."""
        _, s1, s2 = _moments_numba(self.probs)
        return float(s1), float(s2)

    def padded(self, cutoff: int) -> np.ndarray:
        """Copy of the vector, zero-padded (or cut) to length cutoff + 1."""
        out = np.zeros(cutoff + 1, dtype=np.float64)
        m = min(cutoff, self.cutoff) + 1
        out[:m] = self.probs[:m]
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "cutoff": self.cutoff,
            "tail_bound": self.tail_bound,
            "probs": self.probs.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "PhotonNumberDistribution":
        probs = data["probs"]
        if "cutoff" in data and int(data["cutoff"]) != len(probs) - 1:
            raise DomainError(f"cutoff {data['cutoff']} does not match {len(probs)} probabilities")
        return cls(
            probs=probs,
            kind=data.get("kind", "custom"),
            params=data.get("params", {}),
            tail_bound=float(data.get("tail_bound", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "PhotonNumberDistribution":
        return cls.from_dict(json.loads(text))


class FieldStateSpec(BaseModel):
    """Parametric description of an input state; `build_distribution` turns it into a vector."""
    model_config = ConfigDict(frozen=True)

    kind: StateKind
    n0: Optional[float] = None
    n_c: Optional[float] = None
    n_t: Optional[float] = None
    m: Optional[int] = None
    custom_probs: Optional[tuple[float, ...]] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_mixed_light_total(cls, values):
        if isinstance(values, dict) and values.get("kind") == "mixed_light" and values.get("n0") is None:
            n_c, n_t = values.get("n_c"), values.get("n_t")
            if n_c is not None and n_t is not None:
                values = {**values, "n0": float(n_c) + float(n_t)}
        return values

    @model_validator(mode="after")
    def _check_fields_for_kind(self):
        relevant = {
            "coherent": {"n0"},
            "thermal": {"n0"},
            "mixed_light": {"n_c", "n_t", "n0"},
            "fock": {"m"},
            "custom": {"custom_probs"},
        }[self.kind]
        for name in ("n0", "n_c", "n_t", "m", "custom_probs"):
            if name not in relevant and getattr(self, name) is not None:
                raise DomainError(f"field '{name}' is not used by a {self.kind} state")

        if self.kind in ("coherent", "thermal"):
            if self.n0 is None or self.n0 < 0:
                raise DomainError(f"{self.kind} state needs n0 >= 0")
        elif self.kind == "mixed_light":
            if self.n_c is None or self.n_c < 0:
                raise DomainError("mixed light needs n_c >= 0")
            if self.n_t is None or self.n_t <= 0:
                raise DomainError("mixed light needs n_t > 0")
            total = self.n_c + self.n_t
            if not math.isclose(self.n0, total, rel_tol=1e-12, abs_tol=1e-300):
                raise DomainError(f"mixed light needs n0 = n_c + n_t, got {self.n0} != {total}")
        elif self.kind == "fock":
            if self.m is None or self.m < 0:
                raise DomainError("fock state needs m >= 0")
        elif self.custom_probs is None or len(self.custom_probs) == 0:
            raise DomainError("custom state needs explicit probabilities")
        return self

    @classmethod
    def coherent(cls, n0: float) -> "FieldStateSpec":
        return cls(kind="coherent", n0=n0)

    @classmethod
    def thermal(cls, n0: float) -> "FieldStateSpec":
        return cls(kind="thermal", n0=n0)

    @classmethod
    def mixed_light(cls, n_c: float, n_t: float) -> "FieldStateSpec":
        return cls(kind="mixed_light", n_c=n_c, n_t=n_t)

    @classmethod
    def fock(cls, m: int) -> "FieldStateSpec":
        return cls(kind="fock", m=m)

    @classmethod
    def custom(cls, probs) -> "FieldStateSpec":
        return cls(kind="custom", custom_probs=tuple(float(p) for p in probs))

    @property
    def mean_photon_number(self) -> float:
        if self.kind == "fock":
            return float(self.m)
        if self.kind == "custom":
            return custom_distribution(self.custom_probs).mean()
        return float(self.n0)

    def with_mean(self, n0: float) -> "FieldStateSpec":
        """Same family at a new mean photon number (mixed light keeps n_c/n_t)."""
        if self.kind in ("coherent", "thermal"):
            return FieldStateSpec(kind=self.kind, n0=n0)
        if self.kind == "mixed_light":
            frac = self.n_c / (self.n_c + self.n_t)
            return FieldStateSpec.mixed_light(n_c=frac * n0, n_t=(1.0 - frac) * n0)
        raise DomainError(f"a {self.kind} state has no mean-photon-number axis")

    def label(self) -> str:
        if self.kind == "coherent":
            return f"coherent:{self.n0:g}"
        if self.kind == "thermal":
            return f"thermal:{self.n0:g}"
        if self.kind == "mixed_light":
            return f"mixed:{self.n_c:g},{self.n_t:g}"
        if self.kind == "fock":
            return f"fock:{self.m}"
        return "custom"


def _vacuum(kind: str, params: dict) -> PhotonNumberDistribution:
    return PhotonNumberDistribution(probs=[1.0], kind=kind, params=params, tail_bound=0.0)


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")


def thermal_cutoff(n0: float, epsilon: float) -> int:
    """
    Smallest N whose dropped tail carries at most epsilon of the mass and at
    most epsilon*(1+n0) of the mean.

    With q = n0/(n0+1) and M = N+1 the tail mass is q^M and the tail mean is
    q^M (M + n0); the second condition is solved by fixed-point iteration on M.
    """
    if n0 == 0:
        return 0
    log_q = -math.log1p(1.0 / n0)
    log_eps = math.log(epsilon)
    m = max(1, math.ceil(log_eps / log_q))
    while True:
        needed = math.ceil((log_eps + math.log1p(n0) - math.log(m + n0)) / log_q)
        if needed <= m:
            return m - 1
        m = needed


def thermal_distribution(n0: float, epsilon: float = DEFAULT_EPSILON) -> PhotonNumberDistribution:
    if n0 < 0:
        raise DomainError(f"thermal state needs n0 >= 0, got {n0}")
    _check_epsilon(epsilon)
    params = {"n0": float(n0)}
    if n0 == 0:
        return _vacuum("thermal", params)
    cutoff = thermal_cutoff(n0, epsilon)
    log_q = -math.log1p(1.0 / n0)
    n = np.arange(cutoff + 1, dtype=np.float64)
    probs = np.exp(n * log_q - math.log1p(n0))
    return PhotonNumberDistribution(
        probs=probs, kind="thermal", params=params, tail_bound=math.exp((cutoff + 1) * log_q)
    )


def _poisson_log_chernoff(n0: float, a: float) -> float:
    # ln of the bound P(X >= a) <= e^{-n0} (e n0 / a)^a, valid for a > n0
    return -n0 + a * (1.0 + math.log(n0) - math.log(a))


def coherent_cutoff(n0: float, epsilon: float) -> int:
    """
    Smallest N >= n0 whose Chernoff bound on P(X > N) is <= epsilon and whose
    dropped tail mean n0 * P(X >= N) is <= epsilon * (1 + n0).
    """
    if n0 == 0:
        return 0
    cutoff = _coherent_chernoff_cutoff(n0, epsilon)
    mean_tolerance = epsilon * (1.0 + n0)
    while True:
        candidates = np.arange(cutoff, cutoff + 64)
        ok = n0 * poisson.sf(candidates - 1, n0) <= mean_tolerance
        if ok.any():
            return int(candidates[np.argmax(ok)])
        cutoff += 64


def _coherent_chernoff_cutoff(n0: float, epsilon: float) -> int:
    log_eps = math.log(epsilon)
    lo = math.floor(n0)
    hi = max(lo + 1, math.ceil(n0 + 12.0 * math.sqrt(n0) + 50.0))
    while _poisson_log_chernoff(n0, hi + 1) > log_eps:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _poisson_log_chernoff(n0, mid + 1) > log_eps:
            lo = mid
        else:
            hi = mid
    return hi


def coherent_distribution(n0: float, epsilon: float = DEFAULT_EPSILON) -> PhotonNumberDistribution:
    if n0 < 0:
        raise DomainError(f"coherent state needs n0 >= 0, got {n0}")
    _check_epsilon(epsilon)
    params = {"n0": float(n0)}
    if n0 == 0:
        return _vacuum("coherent", params)
    cutoff = coherent_cutoff(n0, epsilon)
    tail = float(poisson.sf(cutoff, n0))
    probs = _poisson_shape(n0, cutoff)
    probs *= float(poisson.cdf(cutoff, n0)) / math.fsum(probs)
    return PhotonNumberDistribution(probs=probs, kind="coherent", params=params, tail_bound=tail)


def _poisson_shape(n0: float, cutoff: int) -> np.ndarray:
    """p_n / p_mode on 0..cutoff from the ratio p_n/p_(n-1) = n0/n, accumulated outwards from the mode."""
    mode = min(int(math.floor(n0)), cutoff)
    n = np.arange(cutoff + 1, dtype=np.float64)
    log_shape = np.zeros(cutoff + 1)
    log_shape[mode + 1:] = np.cumsum(np.log(n0 / n[mode + 1:]))
    if mode > 0:
        log_shape[:mode] = np.cumsum(np.log(n[1:mode + 1] / n0)[::-1])[::-1]
    return np.exp(log_shape)


def mixed_light_distribution(n_c: float, n_t: float, epsilon: float = DEFAULT_EPSILON) -> PhotonNumberDistribution:
    """
    Lachs distribution of superposed coherent (n_c) and thermal (n_t) light.

    The cutoff is found by running the sum until, past the mode, the geometric
    estimates of the remaining mass and of its share of the mean drop below
    epsilon and epsilon*(1+n0).
    """
    if n_t <= 0:
        raise DomainError(f"mixed light needs n_t > 0, got {n_t}")
    if n_c < 0:
        raise DomainError(f"mixed light needs n_c >= 0, got {n_c}")
    _check_epsilon(epsilon)
    probs, tail, converged = _lachs_pmf_numba(float(n_c), float(n_t), float(epsilon), MIXED_LIGHT_MAX_TERMS)
    if not converged:
        raise InsufficientCutoffError(
            f"mixed light (n_c={n_c:g}, n_t={n_t:g}) needs more than {MIXED_LIGHT_MAX_TERMS} terms",
            deficit=float(tail),
        )
    # the recurrence accumulates rounding over N terms; the kept mass is 1 - tail
    probs = probs * ((1.0 - float(tail)) / math.fsum(probs))
    return PhotonNumberDistribution(
        probs=probs,
        kind="mixed_light",
        params={"n_c": float(n_c), "n_t": float(n_t), "n0": float(n_c + n_t)},
        tail_bound=float(tail),
    )


def fock_distribution(m: int) -> PhotonNumberDistribution:
    if m < 0:
        raise DomainError(f"fock state needs m >= 0, got {m}")
    probs = np.zeros(m + 1)
    probs[m] = 1.0
    return PhotonNumberDistribution(probs=probs, kind="fock", params={"m": float(m)}, tail_bound=0.0)


def custom_distribution(probs) -> PhotonNumberDistribution:
    arr = np.asarray(probs, dtype=np.float64)
    tail = max(0.0, 1.0 - float(arr.sum())) if arr.size else 0.0
    return PhotonNumberDistribution(probs=arr, kind="custom", tail_bound=tail)


def build_distribution(spec: FieldStateSpec, epsilon: float = DEFAULT_EPSILON) -> PhotonNumberDistribution:
    if spec.kind == "coherent":
        return coherent_distribution(spec.n0, epsilon)
    if spec.kind == "thermal":
        return thermal_distribution(spec.n0, epsilon)
    if spec.kind == "mixed_light":
        return mixed_light_distribution(spec.n_c, spec.n_t, epsilon)
    if spec.kind == "fock":
        return fock_distribution(spec.m)
    return custom_distribution(spec.custom_probs)


def factorial_moment(spec: FieldStateSpec, j: int) -> float:
    """F_j = <n(n-1)...(n-j+1)> of the state, in closed form where one exists."""
    if j < 0:
        raise DomainError(f"factorial moment order must be >= 0, got {j}")
    if j == 0:
        return 1.0
    if spec.kind == "thermal":
        return math.exp(gammaln(j + 1.0)) * spec.n0 ** j
    if spec.kind == "coherent":
        return spec.n0 ** j
    if spec.kind == "mixed_light":
        if spec.n_c == 0:
            return math.exp(gammaln(j + 1.0)) * spec.n_t ** j
        return math.exp(gammaln(j + 1.0)) * spec.n_t ** j * laguerre(j, -spec.n_c / spec.n_t)
    if spec.kind == "fock":
        if j > spec.m:
            return 0.0
        return math.exp(gammaln(spec.m + 1.0) - gammaln(spec.m - j + 1.0))
    probs = np.asarray(spec.custom_probs, dtype=np.float64)
    n = np.arange(probs.size, dtype=np.float64)
    falling = np.ones_like(n)
    for i in range(j):
        falling *= n - i
    return float(np.sum(falling * probs))


def pmf(spec: FieldStateSpec, m: int) -> float:
    """p_m of the state, evaluated directly (no truncation)."""
    if m < 0:
        return 0.0
    if spec.kind == "thermal":
        if spec.n0 == 0:
            return 1.0 if m == 0 else 0.0
        return math.exp(-m * math.log1p(1.0 / spec.n0) - math.log1p(spec.n0))
    if spec.kind == "coherent":
        return float(poisson.pmf(m, spec.n0))
    if spec.kind == "mixed_light":
        n_c, n_t = spec.n_c, spec.n_t
        log_pref = -n_c / (1.0 + n_t) + m * math.log(n_t / (1.0 + n_t)) - math.log1p(n_t)
        return math.exp(log_pref) * laguerre(m, -n_c / (n_t * (1.0 + n_t)))
    if spec.kind == "fock":
        return 1.0 if m == spec.m else 0.0
    probs = spec.custom_probs
    return float(probs[m]) if m < len(probs) else 0.0
