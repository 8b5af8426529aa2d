# photon_postselect/core/add.py

"""
Photon addition: the field seeds a parametric down-converter whose idler is
watched by a detector; on a click the signal is kept.
"""

import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import nbinom

from .detectors import DetectorModel
from .kernels import _add_theta_numba
from .numerics import laguerre_sequence, log_factorial_table
from .outcome import OutcomeRecord, OutcomeStats, check_probability, record_from_closed_form, record_from_theta
from .states import (
    DEFAULT_EPSILON,
    FieldStateSpec,
    PhotonNumberDistribution,
    coherent_distribution,
    factorial_moment,
    mixed_light_distribution,
)
from .utils import DomainError, NumericRangeError, UnsupportedCombinationError

logger = logging.getLogger(__name__)

# add_exact grows the output support until Theta_N / sum(Theta) drops below this.
OUTPUT_TAIL_RATIO = 1e-14
MAX_EXTRA_OUTPUT_TERMS = 10_000

RangeErrorPolicy = Literal["defer", "raise"]


class PdcParams(BaseModel):
    """Down-converter gain lambda with r = sinh^2(lambda), t = cosh^-2(lambda)."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gain: float = Field(..., alias="lambda", gt=0.0)
    r: float
    t: float

    @model_validator(mode="after")
    def _consistent(self):
        if not 0.0 < self.t <= 1.0 or self.r < 0.0:
            raise DomainError(f"need 0 < t <= 1 and r >= 0, got t={self.t}, r={self.r}")
        if abs(self.t * (1.0 + self.r) - 1.0) > 1e-15:
            raise DomainError("t (1 + r) must equal 1")
        return self

    @classmethod
    def from_gain(cls, gain: float) -> "PdcParams":
        if not gain > 0:
            raise DomainError(f"PDC gain must be > 0, got {gain}")
        r = math.sinh(gain) ** 2
        return cls(gain=gain, r=r, t=1.0 / (1.0 + r))


def _log_probs(vec: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.ascontiguousarray(vec, dtype=np.float64))


def add_theta(vec: np.ndarray, pdc: PdcParams, k: int, resolving: bool, n_start: int, n_end: int) -> np.ndarray:
    """Theta_n for n in [n_start, n_end) of the k-photon addition map on any non-negative vector."""
    lf = log_factorial_table(max(n_end, vec.size))
    return _add_theta_numba(
        _log_probs(vec), lf, math.log(pdc.r), math.log(pdc.t), int(k), bool(resolving), int(n_start), int(n_end)
    )


def add_exact(p: PhotonNumberDistribution, pdc: PdcParams, d: DetectorModel) -> OutcomeRecord:
    """
    Exact k-photon addition. A nonresolving detector spreads the output
    beyond N_in + k; the support is then grown in chunks until the last
    Theta entry is below OUTPUT_TAIL_RATIO of the running total.
    """
    n_in = p.cutoff
    theta = add_theta(p.probs, pdc, d.k, d.resolving, 0, n_in + d.k + 1)
    tail = p.tail_bound
    if not d.resolving:
        chunk = max(64, n_in // 4)
        ceiling = n_in + MAX_EXTRA_OUTPUT_TERMS
        pieces = [theta]
        total = float(theta.sum())
        end = theta.size
        while end <= ceiling and total > 0 and pieces[-1][-1] >= OUTPUT_TAIL_RATIO * total:
            stop = min(end + chunk, ceiling + 1)
            if stop <= end:
                break
            piece = add_theta(p.probs, pdc, d.k, False, end, stop)
            pieces.append(piece)
            total += float(piece.sum())
            end = stop
        if pieces[-1][-1] >= OUTPUT_TAIL_RATIO * total:
            logger.warning("add_exact hit the output ceiling N_in + %d with a non-negligible tail", MAX_EXTRA_OUTPUT_TERMS)
        theta = np.concatenate(pieces)
        if theta.size >= 2 and theta[-2] > 0:
            ratio = theta[-1] / theta[-2]
            if ratio < 1:
                tail += theta[-1] * ratio / (1 - ratio)
    return record_from_theta(theta, tail, label=f"exact:{d.label}")


def add_no_click(p: PhotonNumberDistribution, pdc: PdcParams) -> OutcomeRecord:
    """Resolving-0 branch: Theta_n = t^(n+1) p_n."""
    theta = add_theta(p.probs, pdc, 0, True, 0, p.cutoff + 1)
    return record_from_theta(theta, p.tail_bound, label="exact:r:0")


def add_model_A(p: PhotonNumberDistribution, pdc: PdcParams, k: int) -> OutcomeRecord:
    """A+_k rho = (r^k/k!) a^dag^k rho a^k; P may exceed 1."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    cutoff = p.cutoff + k
    lf = log_factorial_table(cutoff)
    n = np.arange(k, cutoff + 1)
    theta = np.zeros(cutoff + 1)
    theta[k:] = np.exp(k * math.log(pdc.r) - lf[k] + lf[n] - lf[n - k] + _log_probs(p.probs))
    return record_from_theta(theta, p.tail_bound, label=f"A:{k}")


def add_model_E(p: PhotonNumberDistribution, k: int) -> OutcomeRecord:
    """E+ |n> = |n+1>: right shift by k, P = 1."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    theta = np.concatenate([np.zeros(k), p.probs])
    return record_from_theta(theta, p.tail_bound, label=f"E:{k}")


# --- Model predictions from the input's factorial moments ---

def _rising_moment(spec: FieldStateSpec, q: int) -> float:
    # E[(m+1)(m+2)...(m+q)] = sum_j C(q, j) q!/j! F_j
    return math.fsum(
        math.comb(q, j) * math.factorial(q) / math.factorial(j) * factorial_moment(spec, j) for j in range(q + 1)
    )


def model_A_stats(spec: FieldStateSpec, r: float, k: int) -> OutcomeStats:
    w_k = _rising_moment(spec, k)
    w_k1 = _rising_moment(spec, k + 1)
    w_k2 = _rising_moment(spec, k + 2)
    weighted_n = w_k1 - w_k
    return OutcomeStats(
        probability=r ** k * w_k / math.factorial(k),
        mean=weighted_n / w_k,
        second_factorial=(w_k2 - 4 * weighted_n - 2 * w_k) / w_k,
    )


def model_E_stats(spec: FieldStateSpec, k: int) -> OutcomeStats:
    f1 = factorial_moment(spec, 1)
    f2 = factorial_moment(spec, 2)
    return OutcomeStats(probability=1.0, mean=f1 + k, second_factorial=f2 + 2 * k * f1 + k * (k - 1))


# --- Printed closed forms (k = 1) ---

def _check_supported(spec: FieldStateSpec, d: DetectorModel) -> None:
    if spec.kind not in ("coherent", "thermal"):
        raise UnsupportedCombinationError(f"no addition closed form for a {spec.kind} state")
    if d.k != 1:
        raise UnsupportedCombinationError("addition closed forms exist for k = 1 only")
    if spec.kind == "coherent" and d.resolving:
        raise UnsupportedCombinationError("coherent addition closed form exists for the nonresolving detector only")


def closed_form_addition_stats(spec: FieldStateSpec, pdc: PdcParams, d: DetectorModel) -> OutcomeStats:
    _check_supported(spec, d)
    r, t, n0 = pdc.r, pdc.t, spec.n0
    label = f"closed:{d.label}"
    if spec.kind == "coherent":
        log_t = math.log(t)
        decay = r * t * n0
        probability = check_probability(-math.expm1(log_t - decay), label)
        mean = (n0 * -math.expm1(2 * log_t - decay) + r * n0 + r) / probability
        second = (n0 ** 2 * -math.expm1(5 * log_t - decay) / t ** 2 + 4 * r * n0 / t + 2 * r ** 2) / probability
        return OutcomeStats(probability=probability, mean=mean, second_factorial=second)

    g = 1 + n0 * r * t
    if d.resolving:
        probability = check_probability(r * t ** 2 * (1 + n0) / g ** 2, label)
        mean = (n0 * (1 + t) + 1) / g
        second = 2 * t * (n0 ** 2 * (2 + t) + 2 * n0) / g ** 2
        return OutcomeStats(probability=probability, mean=mean, second_factorial=second)
    probability = check_probability(r * t * (1 + n0) / g, label)
    mean = (n0 / t + r - n0 * t ** 2 / g ** 2) / probability
    second = 2 * ((n0 / t + r) ** 2 - n0 ** 2 * t ** 3 / g ** 3) / probability
    return OutcomeStats(probability=probability, mean=mean, second_factorial=second)


def _coherent_nonresolving_posterior(n0: float, pdc: PdcParams, probability: float, epsilon: float):
    """
    t e^{-n0} [(rt)^n L_n(-n0/r) - (n0 t)^n / n!] / P. The first term is the
    unconditioned signal distribution (mixed light with n_c = n0/t, n_t = r),
    whose cutoff bounds the posterior's.
    """
    r, t = pdc.r, pdc.t
    envelope = mixed_light_distribution(n0 / t, r, min(epsilon * probability, 0.5))
    cutoff = envelope.cutoff
    n = np.arange(cutoff + 1)
    lag = laguerre_sequence(cutoff, -n0 / r)
    log_first = n * math.log(r * t) + np.log(lag)
    if n0 > 0:
        lf = log_factorial_table(cutoff)
        log_second = n * math.log(n0 * t) - lf
        bracket = np.exp(log_first) * -np.expm1(log_second - log_first)
    else:
        bracket = np.where(n == 0, 0.0, np.exp(log_first))
    probs = t * math.exp(-n0) * bracket / probability
    return probs, envelope.tail_bound / probability


def _thermal_nonresolving_posterior(n0: float, pdc: PdcParams, probability: float, epsilon: float):
    r, t = pdc.r, pdc.t
    a = (r * t + n0) / (1 + n0)
    cutoff = max(1, math.ceil(math.log(epsilon * probability) / math.log(a)) - 1)
    n = np.arange(cutoff + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = n * (math.log(n0 * t) - math.log(r * t + n0)) if n0 > 0 else np.full(n.size, -np.inf)
        diff = np.where(n == 0, 0.0, -np.expm1(log_ratio))
    probs = t / (probability * (1 + n0)) * np.exp(n * math.log(a)) * diff
    return probs, math.exp((cutoff + 1) * math.log(a)) / probability


def _thermal_resolving_posterior(n0: float, pdc: PdcParams, epsilon: float):
    # (1 + n0 r t)^2 n (n0 t)^(n-1) / (1+n0)^(n+1): one plus a negative binomial
    b = n0 * pdc.t / (1 + n0)
    success = 1 - b
    if b == 0:
        return np.array([0.0, 1.0]), 0.0
    cutoff = 1 + max(0, int(nbinom.isf(epsilon, 2, success)))
    n = np.arange(cutoff + 1)
    with np.errstate(divide="ignore"):
        log_probs = 2 * math.log(success) + np.log(n) + (n - 1) * math.log(b)
    return np.exp(log_probs), float(nbinom.sf(cutoff - 1, 2, success))


def closed_form_addition(
    spec: FieldStateSpec,
    pdc: PdcParams,
    d: DetectorModel,
    epsilon: float = DEFAULT_EPSILON,
    on_range_error: RangeErrorPolicy = "defer",
) -> OutcomeRecord:
    """
    Printed k = 1 closed forms. The coherent posterior needs L_n(-n0/r),
    which leaves the double range for moderate n0 at small gain; with
    on_range_error="defer" the posterior is then taken from add_exact,
    with "raise" the NumericRangeError propagates.
    """
    stats = closed_form_addition_stats(spec, pdc, d)
    label = f"closed:{d.label}"
    if spec.kind == "thermal":
        if d.resolving:
            probs, tail = _thermal_resolving_posterior(spec.n0, pdc, epsilon)
        else:
            probs, tail = _thermal_nonresolving_posterior(spec.n0, pdc, stats.probability, epsilon)
        return record_from_closed_form(stats, probs, tail, label=label)

    try:
        probs, tail = _coherent_nonresolving_posterior(spec.n0, pdc, stats.probability, epsilon)
    except NumericRangeError as exc:
        if on_range_error == "raise":
            raise
        logger.warning(
            "coherent addition posterior out of double range (n0=%g, lambda=%g, degree %s); using add_exact",
            spec.n0, pdc.gain, exc.degree,
        )
        generic = add_exact(coherent_distribution(spec.n0, epsilon), pdc, d)
        probs, tail = generic.posterior.probs, generic.posterior.tail_bound
    return record_from_closed_form(stats, probs, tail, label=label)
