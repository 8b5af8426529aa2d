# photon_postselect/core/outcome.py

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .kernels import _kahan_sum_numba, _moments_numba
from .states import PhotonNumberDistribution
from .utils import ImpossibleOutcomeError

# Below this the conditional state is undefined.
MIN_PROBABILITY = 1e-300


class OutcomeStats(BaseModel):
    """Scalar part of a post-selection outcome."""
    model_config = ConfigDict(frozen=True)

    probability: float
    mean: float
    second_factorial: float

    def as_row(self, n0: float) -> dict:
        return {
            "P": self.probability,
            "mean_n": self.mean,
            "mean_n_over_n0": self.mean / n0 if n0 > 0 else float("nan"),
            "second_factorial": self.second_factorial,
            "second_factorial_over_n0sq": self.second_factorial / n0 ** 2 if n0 > 0 else float("nan"),
        }


class OutcomeRecord(BaseModel):
    """
    Result of one (process, detector, parameters) evaluation: the
    unnormalized Theta vector, the event probability P and the normalized
    post-selected distribution with its two lowest factorial moments.

    Closed forms that print no conditional distribution leave
    `theta_vector` and `posterior` unset.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta_vector: Optional[np.ndarray] = None
    probability: float
    posterior: Optional[PhotonNumberDistribution] = None
    mean: float
    second_factorial: float
    label: str = Field("", description="Short tag of the map that produced the record, e.g. 'exact:n:1'.")

    @field_validator("theta_vector", mode="before")
    @classmethod
    def _readonly(cls, value):
        if value is None:
            return None
        arr = np.array(value, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        return arr

    def stats(self) -> OutcomeStats:
        return OutcomeStats(probability=self.probability, mean=self.mean, second_factorial=self.second_factorial)


def record_from_theta(
    theta: np.ndarray,
    input_tail: float = 0.0,
    label: str = "",
    kind: str = "posterior",
    params: Optional[dict] = None,
) -> OutcomeRecord:
    """Normalize a Theta vector into an OutcomeRecord (moments from the posterior)."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    probability = float(_kahan_sum_numba(theta)) if theta.size else 0.0
    if not probability >= MIN_PROBABILITY:
        raise ImpossibleOutcomeError(f"outcome '{label or 'post-selection'}' has zero probability", probability=0.0)
    posterior_probs = theta / probability
    _, mean, second = _moments_numba(posterior_probs)
    posterior = PhotonNumberDistribution(
        probs=posterior_probs,
        kind=kind,
        params=params or {},
        tail_bound=input_tail / probability,
    )
    return OutcomeRecord(
        theta_vector=theta,
        probability=probability,
        posterior=posterior,
        mean=float(mean),
        second_factorial=float(second),
        label=label,
    )


def record_from_closed_form(
    stats: OutcomeStats,
    posterior_probs: Optional[np.ndarray] = None,
    posterior_tail: float = 0.0,
    label: str = "",
    params: Optional[dict] = None,
) -> OutcomeRecord:
    """Wrap printed closed-form values; Theta is P times the printed distribution."""
    posterior = None
    theta = None
    if posterior_probs is not None:
        posterior = PhotonNumberDistribution(
            probs=np.clip(posterior_probs, 0.0, None),
            kind="posterior",
            params=params or {},
            tail_bound=posterior_tail,
        )
        theta = stats.probability * posterior.probs
    return OutcomeRecord(
        theta_vector=theta,
        probability=stats.probability,
        posterior=posterior,
        mean=stats.mean,
        second_factorial=stats.second_factorial,
        label=label,
    )


def check_probability(probability: float, label: str) -> float:
    if not probability >= MIN_PROBABILITY:
        raise ImpossibleOutcomeError(f"outcome '{label}' has zero probability", probability=0.0)
    return probability
