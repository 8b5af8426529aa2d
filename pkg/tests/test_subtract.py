# tests/test_subtract.py

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from photon_postselect.core.detectors import DetectorModel
from photon_postselect.core.states import (
    FieldStateSpec,
    build_distribution,
    coherent_distribution,
    fock_distribution,
    thermal_distribution,
)
from photon_postselect.core.subtract import (
    BeamSplitterParams,
    closed_form_sequential,
    closed_form_sequential_stats,
    closed_form_subtraction,
    closed_form_subtraction_stats,
    factorial_moments,
    model_A_stats,
    model_E_stats,
    subtract_exact,
    subtract_model_A,
    subtract_model_E,
    subtract_no_click,
    subtract_sequential,
    subtract_theta,
)
from photon_postselect.core.utils import DomainError, ImpossibleOutcomeError, UnsupportedCombinationError
from tests.conftest import FINE_EPSILON, detector, padded_max_diff, rel


def _assert_stats_close(a, b, tol):
    assert rel(a.probability, b.probability) <= tol
    assert rel(a.mean, b.mean) <= tol
    assert rel(a.second_factorial, b.second_factorial) <= tol


# --- beam splitter ---

def test_beam_splitter_identities():
    bs = BeamSplitterParams.from_reflectivity(0.3)
    assert bs.R + bs.T == pytest.approx(1.0, abs=1e-15)
    assert math.sin(bs.theta) ** 2 == pytest.approx(0.3, abs=1e-14)
    assert BeamSplitterParams.from_theta(bs.theta).R == pytest.approx(0.3, abs=1e-14)


@pytest.mark.parametrize("R", [0.0, 1.0, -0.1, 1.5])
def test_beam_splitter_rejects_degenerate_reflectivity(R):
    with pytest.raises(DomainError):
        BeamSplitterParams.from_reflectivity(R)


# --- exact map ---

def test_single_photon_either_reflects_or_transmits(bs_tenth, rd1):
    record = subtract_exact(fock_distribution(1), bs_tenth, rd1)
    assert record.theta_vector.tolist() == pytest.approx([0.1])
    assert record.probability == pytest.approx(0.1, rel=1e-14)
    assert record.posterior.probs.tolist() == pytest.approx([1.0])


def test_vacuum_cannot_lose_a_photon(bs_tenth, nd1):
    with pytest.raises(ImpossibleOutcomeError) as info:
        subtract_exact(thermal_distribution(0.0), bs_tenth, nd1)
    assert info.value.probability == 0.0


def test_thermal_resolving_probability(bs_small, rd1):
    record = subtract_exact(thermal_distribution(1.0, 1e-14), bs_small, rd1)
    assert record.probability == pytest.approx(0.01 / 1.01 ** 2, rel=1e-10)
    assert record.probability == pytest.approx(9.803e-3, abs=1e-6)


def test_record_invariants(bs_tenth):
    mixed = build_distribution(FieldStateSpec.mixed_light(1.0, 2.0))
    record = subtract_exact(mixed, bs_tenth, detector("n:2"))
    assert math.fsum(record.theta_vector) == pytest.approx(record.probability, rel=1e-12)
    assert record.posterior.total() == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= record.probability <= 1.0 + 1e-12
    assert record.posterior.cutoff == mixed.cutoff - 2
    assert record.posterior.tail_bound == pytest.approx(mixed.tail_bound / record.probability)


@pytest.mark.parametrize("code", ["r:1", "n:1", "r:3", "n:4"])
def test_coherent_posterior_is_insensitive_to_the_detector(code, bs_tenth):
    p = coherent_distribution(5.0, FINE_EPSILON)
    record = subtract_exact(p, bs_tenth, detector(code))
    reference = poisson.pmf(np.arange(record.posterior.probs.size), 5.0 * bs_tenth.T)
    assert np.max(np.abs(record.posterior.probs - reference)) <= 1e-10


# --- models ---

@pytest.mark.parametrize("n0", [0.5, 3.0, 20.0])
def test_model_A_doubles_thermal_mean(n0, bs_small):
    record = subtract_model_A(thermal_distribution(n0, FINE_EPSILON), bs_small, 1)
    assert record.mean == pytest.approx(2 * n0, rel=1e-9)


def test_model_A_keeps_coherent_state(bs_small):
    p = coherent_distribution(4.0, FINE_EPSILON)
    record = subtract_model_A(p, bs_small, 1)
    np.testing.assert_allclose(record.posterior.probs, p.probs[: record.posterior.probs.size], rtol=1e-10, atol=1e-18)


def test_model_A_probability_is_unbounded():
    half = BeamSplitterParams.from_reflectivity(0.5)
    assert subtract_model_A(thermal_distribution(2.0, FINE_EPSILON), half, 1).probability == pytest.approx(1.0, rel=1e-10)
    assert subtract_model_A(thermal_distribution(5.0, FINE_EPSILON), half, 1).probability == pytest.approx(2.5, rel=1e-10)


@pytest.mark.parametrize("n0", [0.5, 3.0, 20.0])
def test_model_E_keeps_thermal_mean(n0):
    assert subtract_model_E(thermal_distribution(n0, FINE_EPSILON), 1).mean == pytest.approx(n0, rel=1e-9)


def test_model_E_shift():
    record = subtract_model_E(fock_distribution(3), 2)
    assert record.probability == 1.0
    assert record.posterior.probs.tolist() == [0.0, 1.0]
    assert subtract_model_E(thermal_distribution(1.0, FINE_EPSILON), 1).probability == pytest.approx(0.5, rel=1e-12)


def test_model_E_impossible_for_too_few_photons():
    with pytest.raises(ImpossibleOutcomeError):
        subtract_model_E(fock_distribution(1), 2)


@pytest.mark.parametrize("spec", [
    FieldStateSpec.thermal(2.0),
    FieldStateSpec.coherent(3.0),
    FieldStateSpec.mixed_light(1.0, 4.0),
])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_model_stats_match_vector_maps(spec, k, bs_tenth):
    p = build_distribution(spec, FINE_EPSILON)
    _assert_stats_close(model_A_stats(spec, bs_tenth.R, k), subtract_model_A(p, bs_tenth, k).stats(), 1e-9)
    _assert_stats_close(model_E_stats(spec, k), subtract_model_E(p, k).stats(), 1e-9)


# --- sequential ---

def test_single_sequential_click_is_nonresolving(bs_tenth, nd1):
    p = thermal_distribution(2.0)
    seq = subtract_sequential(p, bs_tenth, 1)
    exact = subtract_exact(p, bs_tenth, nd1)
    np.testing.assert_array_equal(seq.theta_vector, exact.theta_vector)


def test_sequential_coherent_closed_form(bs_tenth):
    n0, R, T = 2.0, bs_tenth.R, bs_tenth.T
    record = subtract_sequential(coherent_distribution(n0, FINE_EPSILON), bs_tenth, 2)
    expected = math.exp(-n0 * R * (1 + T)) * math.expm1(n0 * R * T) * math.expm1(n0 * R)
    assert record.probability == pytest.approx(expected, rel=1e-10)
    reference = poisson.pmf(np.arange(record.posterior.probs.size), n0 * T ** 2)
    assert np.max(np.abs(record.posterior.probs - reference)) <= 1e-10


def test_sequential_thermal_probability(bs_small):
    a, T = 0.01, bs_small.T
    g1 = 1 - 1 / (1 + a) - 1 / (1 + a * T) + 1 / (1 + a + a * T)
    record = subtract_sequential(thermal_distribution(1.0, FINE_EPSILON), bs_small, 2)
    assert record.probability == pytest.approx(g1, rel=1e-8)
    assert closed_form_sequential_stats(FieldStateSpec.thermal(1.0), bs_small).probability == pytest.approx(g1, rel=1e-8)


@pytest.mark.parametrize("spec", [FieldStateSpec.thermal(0.5), FieldStateSpec.thermal(8.0), FieldStateSpec.coherent(6.0)])
def test_sequential_closed_form_matches_generic(spec, bs_tenth):
    generic = subtract_sequential(build_distribution(spec, FINE_EPSILON), bs_tenth, 2)
    closed = closed_form_sequential(spec, bs_tenth)
    _assert_stats_close(closed.stats(), generic.stats(), 1e-8)
    assert padded_max_diff(closed.posterior.probs, generic.posterior.probs) <= 1e-10


def test_sequential_ordering_against_instantaneous_detection():
    R = 1e-2
    bs = BeamSplitterParams.from_reflectivity(R)
    nd2, rd2 = detector("n:2"), detector("r:2")
    for x in (3.0, 10.0, 30.0):
        spec = FieldStateSpec.thermal(x / R)
        s2 = closed_form_sequential_stats(spec, bs)
        assert closed_form_subtraction_stats(spec, bs, nd2).mean > s2.mean > closed_form_subtraction_stats(spec, bs, rd2).mean
    for x in (0.01, 0.1, 1.0, 10.0):
        spec = FieldStateSpec.thermal(x / R)
        s2 = closed_form_sequential_stats(spec, bs)
        assert s2.probability > closed_form_subtraction_stats(spec, bs, rd2).probability
        assert s2.probability > closed_form_subtraction_stats(spec, bs, nd2).probability


# --- moments ---

def test_factorial_moments_examples():
    assert factorial_moments(thermal_distribution(0.0)) == (0.0, 0.0)
    assert factorial_moments(fock_distribution(3)) == (3.0, 6.0)
    mean, second = factorial_moments(thermal_distribution(2.0, FINE_EPSILON))
    assert mean == pytest.approx(2.0, rel=1e-12)
    assert second == pytest.approx(8.0, rel=1e-12)


# --- closed forms ---

def test_coherent_resolving_closed_form():
    bs = BeamSplitterParams.from_reflectivity(0.04)
    record = closed_form_subtraction(FieldStateSpec.coherent(1.0), bs, detector("r:1"))
    assert record.probability == pytest.approx(0.04 * math.exp(-0.04), rel=1e-14)
    assert record.probability == pytest.approx(3.8432e-2, abs=1e-6)
    exact = subtract_exact(coherent_distribution(1.0, FINE_EPSILON), bs, detector("r:1"))
    assert exact.probability == pytest.approx(record.probability, rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_thermal_nonresolving_mean_ratio(k, bs_tenth):
    n0 = 7.0
    x = n0 * bs_tenth.R
    stats = closed_form_subtraction_stats(FieldStateSpec.thermal(n0), bs_tenth, detector(f"n:{k}"))
    assert stats.mean / n0 == pytest.approx(bs_tenth.T * (1 + k + x) / (1 + x), rel=1e-14)


@pytest.mark.parametrize("code", ["r:1", "r:2", "r:3", "n:1"])
def test_mixed_light_closed_form_reduces_to_thermal(code, bs_tenth):
    mixed = closed_form_subtraction_stats(FieldStateSpec.mixed_light(0.0, 2.0), bs_tenth, detector(code))
    thermal = closed_form_subtraction_stats(FieldStateSpec.thermal(2.0), bs_tenth, detector(code))
    _assert_stats_close(mixed, thermal, 1e-12)


@pytest.mark.parametrize("n0", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("R", [1e-3, 1e-2, 1e-1])
@pytest.mark.parametrize("code", ["r:1", "r:2", "r:3", "n:1", "n:2", "n:3"])
def test_closed_form_matches_generic_thermal_and_coherent(n0, R, code):
    bs = BeamSplitterParams.from_reflectivity(R)
    d = detector(code)
    for spec in (FieldStateSpec.thermal(n0), FieldStateSpec.coherent(n0)):
        exact = subtract_exact(build_distribution(spec, FINE_EPSILON), bs, d)
        _assert_stats_close(closed_form_subtraction_stats(spec, bs, d), exact.stats(), 1e-8)


@pytest.mark.parametrize("n0", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("fraction", [0.2, 10.0 / 11.0])
@pytest.mark.parametrize("code", ["r:1", "r:2", "r:3", "n:1"])
def test_closed_form_matches_generic_mixed_light(n0, fraction, code, bs_small):
    spec = FieldStateSpec.mixed_light(fraction * n0, (1 - fraction) * n0)
    d = detector(code)
    exact = subtract_exact(build_distribution(spec, FINE_EPSILON), bs_small, d)
    _assert_stats_close(closed_form_subtraction_stats(spec, bs_small, d), exact.stats(), 1e-8)


@pytest.mark.parametrize("code", ["r:1", "r:2", "n:1", "n:3"])
def test_thermal_closed_form_posterior_matches_generic(code, bs_tenth):
    spec = FieldStateSpec.thermal(3.0)
    closed = closed_form_subtraction(spec, bs_tenth, detector(code), FINE_EPSILON)
    exact = subtract_exact(build_distribution(spec, FINE_EPSILON), bs_tenth, detector(code))
    assert padded_max_diff(closed.posterior.probs, exact.posterior.probs) <= 1e-10


def test_unsupported_closed_forms(bs_tenth):
    with pytest.raises(UnsupportedCombinationError):
        closed_form_subtraction_stats(FieldStateSpec.mixed_light(1.0, 1.0), bs_tenth, detector("n:2"))
    with pytest.raises(UnsupportedCombinationError):
        closed_form_subtraction_stats(FieldStateSpec.fock(3), bs_tenth, detector("r:1"))
    with pytest.raises(UnsupportedCombinationError):
        closed_form_sequential_stats(FieldStateSpec.thermal(1.0), bs_tenth, 3)
    with pytest.raises(UnsupportedCombinationError):
        closed_form_sequential_stats(FieldStateSpec.mixed_light(1.0, 1.0), bs_tenth)


# --- limits ---

@pytest.mark.parametrize("spec", [FieldStateSpec.thermal(1.0), FieldStateSpec.coherent(1.0), FieldStateSpec.mixed_light(0.2, 0.8)])
@pytest.mark.parametrize("k", [1, 2])
def test_quantum_limit_collapses_to_model_A(spec, k):
    """5*max(n0R, R) bounds the O(n0R) quantum-limit term plus the O(R) floor from the T^n attenuation A omits."""
    R = 1e-3
    bs = BeamSplitterParams.from_reflectivity(R)
    p = build_distribution(spec, FINE_EPSILON)
    tol = 5 * max(spec.n0 * R, R)
    for flavor in ("resolving", "nonresolving"):
        exact = subtract_exact(p, bs, DetectorModel(flavor=flavor, k=k))
        _assert_stats_close(exact.stats(), subtract_model_A(p, bs, k).stats(), tol)


@pytest.mark.parametrize("spec", [FieldStateSpec.thermal(1000.0), FieldStateSpec.mixed_light(200.0, 800.0)])
def test_classical_limit_approaches_model_E(spec, bs_tenth, nd1):
    exact = closed_form_subtraction_stats(spec, bs_tenth, nd1)
    model_e = model_E_stats(spec, 1)
    assert rel(exact.mean, bs_tenth.T * model_e.mean) <= 0.05


# --- partition properties ---

_vectors = st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=25).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=40, deadline=None)
@given(_vectors, st.floats(min_value=1e-3, max_value=0.9), st.integers(min_value=1, max_value=5))
def test_nonresolving_is_sum_of_resolving(values, R, k):
    vec = np.array(values) / sum(values)
    bs = BeamSplitterParams.from_reflectivity(R)
    nd = subtract_theta(vec, bs, k, False)
    if nd.size == 0:
        return
    summed = np.zeros(nd.size)
    for j in range(k, vec.size):
        rd = subtract_theta(vec, bs, j, True)
        summed[: rd.size] += rd
    np.testing.assert_allclose(nd, summed, rtol=1e-12, atol=1e-250)


@settings(max_examples=40, deadline=None)
@given(_vectors, st.floats(min_value=1e-3, max_value=0.9))
def test_resolving_outcomes_partition_unity(values, R):
    vec = np.array(values) / sum(values)
    bs = BeamSplitterParams.from_reflectivity(R)
    total = math.fsum(float(np.sum(subtract_theta(vec, bs, j, True))) for j in range(vec.size))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_no_click_branch_closes_the_partition(bs_tenth):
    p = thermal_distribution(2.0, FINE_EPSILON)
    no_click = subtract_no_click(p, bs_tenth).probability
    click = subtract_exact(p, bs_tenth, detector("n:1")).probability
    assert no_click + click == pytest.approx(p.total(), abs=1e-12)
