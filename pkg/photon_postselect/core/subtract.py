# photon_postselect/core/subtract.py

"""
Photon subtraction: a beam splitter taps the field, a detector watches the
reflected port and the transmitted field is kept on a click.

Distribution-level maps (exact Theta transform, A_k and E_k models,
sequential S_k detection) plus the printed closed forms for coherent,
thermal and mixed light.
"""

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import nbinom, poisson

from .detectors import DetectorModel
from .kernels import _subtract_theta_numba
from .numerics import laguerre_sequence, log_factorial_table
from .outcome import OutcomeRecord, OutcomeStats, check_probability, record_from_closed_form, record_from_theta
from .states import (
    DEFAULT_EPSILON,
    FieldStateSpec,
    PhotonNumberDistribution,
    coherent_distribution,
    factorial_moment,
    pmf,
    thermal_cutoff,
)
from .utils import DomainError, UnsupportedCombinationError

logger = logging.getLogger(__name__)


class BeamSplitterParams(BaseModel):
    """Beam splitter with reflectivity R = sin^2(theta) and transmittivity T = cos^2(theta)."""
    model_config = ConfigDict(frozen=True)

    theta: float
    R: float
    T: float

    @model_validator(mode="after")
    def _consistent(self):
        if not 0.0 < self.theta < math.pi / 2:
            raise DomainError(f"beam-splitter angle must lie in (0, pi/2), got {self.theta}")
        if not 0.0 < self.R < 1.0:
            raise DomainError(f"reflectivity must lie in (0, 1), got {self.R}")
        if abs(self.R + self.T - 1.0) > 1e-15:
            raise DomainError("R + T must equal 1")
        if abs(math.sin(self.theta) ** 2 - self.R) > 1e-12:
            raise DomainError("R must equal sin^2(theta)")
        return self

    @classmethod
    def from_theta(cls, theta: float) -> "BeamSplitterParams":
        R = math.sin(theta) ** 2
        return cls(theta=theta, R=R, T=1.0 - R)

    @classmethod
    def from_reflectivity(cls, R: float) -> "BeamSplitterParams":
        if not 0.0 < R < 1.0:
            raise DomainError(f"reflectivity must lie in (0, 1), got {R}")
        return cls(theta=reflectivity_to_theta(R), R=R, T=1.0 - R)


def reflectivity_to_theta(R: float) -> float:
    return math.asin(math.sqrt(R))


def _log_probs(vec: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.ascontiguousarray(vec, dtype=np.float64))


def subtract_theta(vec: np.ndarray, bs: BeamSplitterParams, k: int, resolving: bool) -> np.ndarray:
    """Unnormalized Theta vector of the k-photon map applied to any non-negative vector."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size - 1 < k:
        return np.zeros(0)
    lf = log_factorial_table(vec.size - 1)
    return _subtract_theta_numba(_log_probs(vec), lf, math.log(bs.R), math.log(bs.T), int(k), bool(resolving))


def subtract_exact(p: PhotonNumberDistribution, bs: BeamSplitterParams, d: DetectorModel) -> OutcomeRecord:
    theta = subtract_theta(p.probs, bs, d.k, d.resolving)
    return record_from_theta(theta, p.tail_bound, label=f"exact:{d.label}")


def subtract_no_click(p: PhotonNumberDistribution, bs: BeamSplitterParams) -> OutcomeRecord:
    """Resolving-0 branch (nothing reflected); only used to close the partition of outcomes."""
    theta = subtract_theta(p.probs, bs, 0, True)
    return record_from_theta(theta, p.tail_bound, label="exact:r:0")


def subtract_model_A(p: PhotonNumberDistribution, bs: BeamSplitterParams, k: int) -> OutcomeRecord:
    """
    A_k rho = (R^k/k!) a^k rho a^dag^k. P is not bounded by 1 here, and no
    error is raised when it exceeds 1.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    cutoff = p.cutoff
    if cutoff < k:
        return record_from_theta(np.zeros(0), p.tail_bound, label=f"A:{k}")
    lf = log_factorial_table(cutoff)
    n = np.arange(cutoff - k + 1)
    log_theta = k * math.log(bs.R) - lf[k] + lf[n + k] - lf[n] + _log_probs(p.probs)[n + k]
    return record_from_theta(np.exp(log_theta), p.tail_bound, label=f"A:{k}")


def subtract_model_E(p: PhotonNumberDistribution, k: int) -> OutcomeRecord:
    """E_- |n> = |n-1>, so the k-fold map is a left shift by k."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    return record_from_theta(p.probs[k:].copy(), p.tail_bound, label=f"E:{k}")


def subtract_sequential(p: PhotonNumberDistribution, bs: BeamSplitterParams, k: int) -> OutcomeRecord:
    """S_k: k successive single-photon nonresolving clicks, unnormalized between clicks."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    vec = p.probs
    for _ in range(k):
        vec = subtract_theta(vec, bs, 1, False)
    return record_from_theta(vec, p.tail_bound, label=f"s:{k}")


def factorial_moments(p: PhotonNumberDistribution) -> tuple[float, float]:
    return p.factorial_moments()


# --- Model predictions from the input's factorial moments ---

def model_A_stats(spec: FieldStateSpec, R: float, k: int) -> OutcomeStats:
    f_k = factorial_moment(spec, k)
    probability = check_probability(R ** k * f_k / math.factorial(k), f"A:{k}")
    return OutcomeStats(
        probability=probability,
        mean=factorial_moment(spec, k + 1) / f_k,
        second_factorial=factorial_moment(spec, k + 2) / f_k,
    )


def model_E_stats(spec: FieldStateSpec, k: int) -> OutcomeStats:
    low = [pmf(spec, m) for m in range(k)]
    probability = check_probability(1.0 - math.fsum(low), f"E:{k}")
    f1 = factorial_moment(spec, 1)
    f2 = factorial_moment(spec, 2)
    # sums of (m-k) p_m and (m-k)(m-k-1) p_m over all m, minus the m < k part
    shifted_1 = f1 - k - math.fsum((m - k) * low[m] for m in range(k))
    shifted_2 = f2 - 2 * k * f1 + k * (k + 1) - math.fsum((m - k) * (m - k - 1) * low[m] for m in range(k))
    return OutcomeStats(probability=probability, mean=shifted_1 / probability, second_factorial=shifted_2 / probability)


# --- Printed closed forms ---

def _require_kind(spec: FieldStateSpec, kinds: tuple, what: str) -> None:
    if spec.kind not in kinds:
        raise UnsupportedCombinationError(f"no closed form for {what} of a {spec.kind} state")


def closed_form_subtraction_stats(spec: FieldStateSpec, bs: BeamSplitterParams, d: DetectorModel) -> OutcomeStats:
    _require_kind(spec, ("coherent", "thermal", "mixed_light"), "subtraction")
    R, T, k = bs.R, bs.T, d.k
    label = f"closed:{d.label}"

    if spec.kind == "coherent":
        n0 = spec.n0
        if d.resolving:
            probability = float(poisson.pmf(k, n0 * R))
        else:
            probability = float(poisson.sf(k - 1, n0 * R))
        check_probability(probability, label)
        return OutcomeStats(probability=probability, mean=n0 * T, second_factorial=(n0 * T) ** 2)

    if spec.kind == "thermal":
        n0 = spec.n0
        v = 0 if d.resolving else 1
        x = n0 * R
        if x == 0:
            check_probability(0.0, label)
        probability = math.exp(k * math.log(x) - (k + 1 - v) * math.log1p(x))
        check_probability(probability, label)
        mean = n0 * T * (1 + k + v * x) / (1 + x)
        second = (n0 * T) ** 2 * ((1 + k) * (2 + k) + 2 * v * x * (2 + k + x)) / (1 + x) ** 2
        return OutcomeStats(probability=probability, mean=mean, second_factorial=second)

    n_c, n_t = spec.n_c, spec.n_t
    n0 = n_c + n_t
    w = 1.0 + R * n_t
    if not d.resolving:
        if k != 1:
            raise UnsupportedCombinationError("mixed-light nonresolving closed form exists for k = 1 only")
        x = R * n_c / w
        ex = math.exp(-x)
        probability = check_probability((R * n_t - math.expm1(-x)) / w, label)
        mean = T * (n0 - ex * (n0 + R * n_t ** 2) / w ** 3) / probability
        second = T ** 2 * (
            n0 ** 2 + n_t * (n0 + n_c)
            - ex * (n0 ** 2 + 2 * n_c * n_t + n_t ** 2 * (1 + 4 * R * n0 + 2 * R ** 2 * n_t ** 2)) / w ** 5
        ) / probability
        return OutcomeStats(probability=probability, mean=mean, second_factorial=second)

    x = R * n_c / w
    y = -n_c / (n_t * w)
    z = 1 + 2 * k - y
    lag = laguerre_sequence(k, y)
    l_k, l_km1 = lag[k], lag[k - 1]
    probability = check_probability(math.exp(-x + k * math.log(R * n_t) - (k + 1) * math.log(w)) * l_k, label)
    scale = n_t * T / w
    mean = scale * (z - k * l_km1 / l_k)
    bracket = z * (1 + z) - y - 2 * k * z * l_km1 / l_k
    if k >= 2:
        bracket += k * (k - 1) * lag[k - 2] / l_k
    return OutcomeStats(probability=probability, mean=mean, second_factorial=scale ** 2 * bracket)


def _thermal_resolving_posterior(n0: float, bs: BeamSplitterParams, k: int, epsilon: float):
    # negative binomial with k+1 successes of probability (1+n0R)/(1+n0)
    success = (1 + n0 * bs.R) / (1 + n0)
    cutoff = max(0, int(nbinom.isf(epsilon, k + 1, success)))
    n = np.arange(cutoff + 1)
    lf = log_factorial_table(cutoff + k)
    log_probs = (lf[n + k] - lf[n] - lf[k]) + (k + 1) * math.log(success) + n * math.log(n0 * bs.T / (1 + n0))
    return np.exp(log_probs), float(nbinom.sf(cutoff, k + 1, success))


def _thermal_nonresolving_posterior(n0: float, bs: BeamSplitterParams, k: int, probability: float, epsilon: float):
    # The printed bracket [geometric - partial sum over l < k] equals the
    # geometric term times the negative-binomial tail over l >= k.
    mean_t = n0 * bs.T
    cutoff = thermal_cutoff(mean_t, epsilon * probability)
    n = np.arange(cutoff + 1)
    log_geom = n * math.log(mean_t) - (n + 1) * math.log1p(mean_t)
    tail = nbinom.sf(k - 1, n + 1, (1 + mean_t) / (1 + n0))
    probs = np.exp(log_geom) * tail / probability
    bound = math.exp(-(cutoff + 1) * math.log1p(1.0 / mean_t)) / probability
    return probs, bound


def closed_form_subtraction(
    spec: FieldStateSpec,
    bs: BeamSplitterParams,
    d: DetectorModel,
    epsilon: float = DEFAULT_EPSILON,
) -> OutcomeRecord:
    stats = closed_form_subtraction_stats(spec, bs, d)
    label = f"closed:{d.label}"
    if spec.kind == "coherent":
        post = coherent_distribution(spec.n0 * bs.T, epsilon)
        return record_from_closed_form(stats, post.probs, post.tail_bound, label=label)
    if spec.kind == "thermal":
        if d.resolving:
            probs, tail = _thermal_resolving_posterior(spec.n0, bs, d.k, epsilon)
        else:
            probs, tail = _thermal_nonresolving_posterior(spec.n0, bs, d.k, stats.probability, epsilon)
        return record_from_closed_form(stats, probs, tail, label=label)
    return record_from_closed_form(stats, label=label)


def _double_difference(a: float, b: float, power):
    """
    1 - (1+a)^-N - (1+b)^-N + (1+a+b)^-N, rearranged so both terms are
    O(a b) and small a, b cause no cancellation.
    """
    power = np.asarray(power, dtype=np.float64)
    u_a = -np.expm1(-power * math.log1p(a))
    u_b = -np.expm1(-power * math.log1p(b))
    c = np.exp(-power * math.log1p(a + b))
    return u_a * u_b - c * np.expm1(-power * math.log1p(a * b / (1 + a + b)))


def closed_form_sequential_stats(spec: FieldStateSpec, bs: BeamSplitterParams, k: int = 2) -> OutcomeStats:
    _require_kind(spec, ("coherent", "thermal"), "sequential detection")
    if k != 2:
        raise UnsupportedCombinationError("sequential closed forms exist for k = 2 only")
    R, T, n0 = bs.R, bs.T, spec.n0
    a = n0 * R
    label = "closed:s:2"
    if spec.kind == "coherent":
        probability = check_probability(float(np.expm1(-a * T) * np.expm1(-a)), label)
        return OutcomeStats(probability=probability, mean=n0 * T ** 2, second_factorial=(n0 * T ** 2) ** 2)
    g1, g2, g3 = _double_difference(a, a * T, [1, 2, 3])
    probability = check_probability(float(g1), label)
    return OutcomeStats(
        probability=probability,
        mean=n0 * T ** 2 * float(g2 / g1),
        second_factorial=2 * n0 ** 2 * T ** 4 * float(g3 / g1),
    )


def closed_form_sequential(
    spec: FieldStateSpec,
    bs: BeamSplitterParams,
    k: int = 2,
    epsilon: float = DEFAULT_EPSILON,
) -> OutcomeRecord:
    stats = closed_form_sequential_stats(spec, bs, k)
    R, T, n0 = bs.R, bs.T, spec.n0
    if spec.kind == "coherent":
        post = coherent_distribution(n0 * T ** 2, epsilon)
        return record_from_closed_form(stats, post.probs, post.tail_bound, label="closed:s:2")
    g1 = stats.probability
    m = n0 * T ** 2
    d1 = 1 + m
    cutoff = thermal_cutoff(m, epsilon * g1)
    n = np.arange(cutoff + 1)
    diff = _double_difference(n0 * R / d1, n0 * R * T / d1, n + 1)
    probs = np.exp(n * math.log(m) - (n + 1) * math.log(d1)) * diff / g1
    tail = math.exp(-(cutoff + 1) * math.log1p(1.0 / m)) / g1
    return record_from_closed_form(stats, probs, tail, label="closed:s:2")
