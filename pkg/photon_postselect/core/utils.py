# photon_postselect/core/utils.py

import json
import math

import numpy as np


# --- Exception hierarchy shared by every core module ---
class PhotonStatsError(Exception):
    """Base class for all errors raised by photon_postselect."""
    pass


class DomainError(PhotonStatsError, ValueError):
    """A parameter lies outside the domain of the operation (e.g. n0 < 0)."""
    pass


class ConfigError(PhotonStatsError, ValueError):
    """A sweep or CLI configuration is inconsistent."""
    pass


class ImpossibleOutcomeError(PhotonStatsError):
    """
    The requested post-selection outcome has zero probability for this input
    (e.g. subtracting a photon from the vacuum). `probability` is always 0.0.
    """

    def __init__(self, message: str, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class NumericRangeError(PhotonStatsError, ArithmeticError):
    """A double-precision evaluation left the representable range."""

    def __init__(self, message: str, degree: int | None = None, argument: float | None = None):
        super().__init__(message)
        self.degree = degree
        self.argument = argument


class UnsupportedCombinationError(PhotonStatsError):
    """No closed form is available for this state / detector / k combination."""
    pass


class InsufficientCutoffError(PhotonStatsError):
    """A truncated Fock space is too small for the requested state."""

    def __init__(self, message: str, deficit: float):
        super().__init__(message)
        self.deficit = deficit


class TruncationLeakageError(PhotonStatsError):
    """A truncated unitary is not unitary on its retained block."""

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


class NumpyEncoder(json.JSONEncoder):
    """
    JSONEncoder for NumPy scalars and arrays. NaN becomes null so that
    reports stay parseable by strict JSON readers.
    """
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            if np.isnan(obj):
                return None
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.bool_):
            return bool(obj)
        return super(NumpyEncoder, self).default(obj)


def sanitize_floats(obj):
    """
    Recursively replace NaN/inf floats by None, because json.dumps emits
    them as bare tokens that generic parsers reject.
    """
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return None if (math.isnan(value) or math.isinf(value)) else value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [sanitize_floats(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: sanitize_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize_floats(i) for i in obj]
    return obj


def dump_json(obj, indent: int = 2) -> str:
    return json.dumps(sanitize_floats(obj), cls=NumpyEncoder, indent=indent)
