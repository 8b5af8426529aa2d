# tests/conftest.py

import numpy as np
import pytest

from photon_postselect.core.add import PdcParams
from photon_postselect.core.detectors import DetectorModel
from photon_postselect.core.subtract import BeamSplitterParams

# generic sums compared against closed forms are built far below the smallest P compared
FINE_EPSILON = 1e-18


@pytest.fixture
def bs_small():
    return BeamSplitterParams.from_reflectivity(0.01)


@pytest.fixture
def bs_tenth():
    return BeamSplitterParams.from_reflectivity(0.1)


@pytest.fixture
def pdc_tenth():
    return PdcParams.from_gain(0.1)


@pytest.fixture
def nd1():
    return DetectorModel(flavor="nonresolving", k=1)


@pytest.fixture
def rd1():
    return DetectorModel(flavor="resolving", k=1)


def detector(code: str) -> DetectorModel:
    return DetectorModel.parse(code)


def rel(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)


def padded_max_diff(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    size = max(a.size, b.size)
    pa, pb = np.zeros(size), np.zeros(size)
    pa[: a.size] = a
    pb[: b.size] = b
    return float(np.max(np.abs(pa - pb)))
