# photon_postselect/core/numerics.py

"""
Combinatorial and special-function primitives shared by the transforms.

Everything that multiplies binomials by powers of R, T, r, t is assembled
as a sum of logarithms and exponentiated once, so the helpers here return
logarithms wherever a magnitude can leave the double range.
"""

import math

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import gammaln

from .utils import NumericRangeError

FACTORIAL_TABLE_SIZE = 2048


def _build_log_factorial_table(size: int) -> np.ndarray:
    logs = np.log(np.arange(1, size, dtype=np.longdouble))
    table = np.empty(size, dtype=np.float64)
    table[0] = 0.0
    table[1:] = np.cumsum(logs, dtype=np.longdouble).astype(np.float64)
    table.setflags(write=False)
    return table


_LOG_FACTORIAL_TABLE = _build_log_factorial_table(FACTORIAL_TABLE_SIZE)


class LogReal(BaseModel):
    """A non-negative real stored as its natural logarithm."""
    model_config = ConfigDict(frozen=True)

    log_magnitude: float = float("-inf")
    is_zero: bool = False

    @model_validator(mode="before")
    @classmethod
    def _zero_is_consistent(cls, values):
        if isinstance(values, dict):
            log_magnitude = values.get("log_magnitude", float("-inf"))
            if log_magnitude == float("-inf"):
                values = {**values, "is_zero": True}
        return values

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(log_magnitude=float("-inf"), is_zero=True)

    @classmethod
    def from_value(cls, value: float) -> "LogReal":
        if value < 0:
            raise ValueError("LogReal represents non-negative quantities only")
        if value == 0:
            return cls.zero()
        return cls(log_magnitude=math.log(value))

    @property
    def value(self) -> float:
        if self.is_zero:
            return 0.0
        return math.exp(self.log_magnitude)

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(log_magnitude=self.log_magnitude + other.log_magnitude)


def log_factorial(n: int) -> float:
    """ln(n!) from the cached table, log-gamma beyond it."""
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n < FACTORIAL_TABLE_SIZE:
        return float(_LOG_FACTORIAL_TABLE[n])
    return float(gammaln(n + 1.0))


def log_factorial_table(n_max: int) -> np.ndarray:
    """ln(0!) ... ln(n_max!) as a float64 vector."""
    if n_max < FACTORIAL_TABLE_SIZE:
        return _LOG_FACTORIAL_TABLE[: n_max + 1].copy()
    tail = gammaln(np.arange(FACTORIAL_TABLE_SIZE, n_max + 1, dtype=np.float64) + 1.0)
    return np.concatenate([_LOG_FACTORIAL_TABLE, tail])


def log_binomial(n: int, k: int) -> LogReal:
    if k < 0 or k > n:
        return LogReal.zero()
    return LogReal(log_magnitude=log_factorial(n) - log_factorial(k) - log_factorial(n - k))


@njit(cache=True)
def _laguerre_sequence_numba(n_max, x):
    out = np.empty(n_max + 1, dtype=np.float64)
    out[0] = 1.0
    if n_max == 0:
        return out
    out[1] = 1.0 - x
    for m in range(1, n_max):
        out[m + 1] = ((2.0 * m + 1.0 - x) * out[m] - m * out[m - 1]) / (m + 1.0)
    return out


def laguerre_sequence(n_max: int, x: float) -> np.ndarray:
    """
    L_0(x) ... L_{n_max}(x) by the three-term recurrence.

    Forward-stable for x <= 0, where every L_n(x) is positive. Raises
    NumericRangeError at the first degree whose value is not finite.
    """
    if n_max < 0:
        raise ValueError(f"laguerre needs n >= 0, got {n_max}")
    values = _laguerre_sequence_numba(int(n_max), float(x))
    finite = np.isfinite(values)
    if not finite.all():
        degree = int(np.argmin(finite))
        raise NumericRangeError(
            f"Laguerre polynomial L_{degree}({x:g}) overflows double precision",
            degree=degree, argument=float(x),
        )
    return values


def laguerre(n: int, x: float) -> float:
    return float(laguerre_sequence(n, x)[-1])
