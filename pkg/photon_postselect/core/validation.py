# photon_postselect/core/validation.py

"""
Invariant checks over the subtraction, addition and oracle modules.

Every check returns a measured deviation; it passes when the deviation is
within its threshold (ordering checks count violated inequalities against
a threshold of 0). The strict profile divides all thresholds by 10.
"""

import logging
import math
import time
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import eval_laguerre
from scipy.stats import poisson

from . import add, oracle, subtract
from .detectors import DetectorModel
from .numerics import laguerre_sequence
from .states import (
    FieldStateSpec,
    PhotonNumberDistribution,
    build_distribution,
    coherent_distribution,
    fock_distribution,
    mixed_light_distribution,
    thermal_distribution,
)
from .utils import ConfigError, ImpossibleOutcomeError, NumericRangeError

logger = logging.getLogger(__name__)

PROFILES = {"default": 1.0, "strict": 0.1}

# generic inputs for closed-form comparisons are truncated far below the smallest P compared
FINE_EPSILON = 1e-18

_DETECTORS_K3 = [DetectorModel(flavor=f, k=k) for k in (1, 2, 3) for f in ("resolving", "nonresolving")]


def _rel(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def _stats_deviation(a, b) -> float:
    return max(
        _rel(a.probability, b.probability),
        _rel(a.mean, b.mean),
        _rel(a.second_factorial, b.second_factorial),
    )


def _probability_or_zero(compute: Callable[[], object]) -> float:
    try:
        return compute().probability
    except ImpossibleOutcomeError:
        return 0.0


def _padded_diff(a: np.ndarray, b: np.ndarray) -> float:
    size = max(a.size, b.size)
    pa = np.zeros(size)
    pb = np.zeros(size)
    pa[: a.size] = a
    pb[: b.size] = b
    return float(np.max(np.abs(pa - pb), initial=0.0))


# --- Model constants ---

def check_thermal_A_doubling() -> float:
    bs = subtract.BeamSplitterParams.from_reflectivity(0.01)
    return max(
        _rel(subtract.subtract_model_A(thermal_distribution(n0, 1e-16), bs, 1).mean, 2 * n0)
        for n0 in (0.1, 1.0, 10.0)
    )


def check_thermal_E_identity() -> float:
    return max(
        _rel(subtract.subtract_model_E(thermal_distribution(n0, 1e-16), 1).mean, n0)
        for n0 in (0.1, 1.0, 10.0)
    )


def check_addition_model_constants() -> float:
    pdc = add.PdcParams.from_gain(0.01)
    deviations = []
    for n0 in (0.1, 1.0, 10.0):
        p = thermal_distribution(n0, 1e-16)
        deviations.append(_rel(add.add_model_A(p, pdc, 1).probability, pdc.r * (n0 + 1)))
        for k in (1, 2):
            rec = add.add_model_E(p, k)
            deviations.append(abs(rec.probability - 1.0))
            deviations.append(_rel(rec.mean, n0 + k))
    return max(deviations)


# --- Closed forms against the generic Theta sums ---

_N0_GRID = (0.1, 1.0, 10.0, 100.0)
_R_GRID = (1e-3, 1e-2, 1e-1)
_MIXED_COHERENT_FRACTIONS = (0.2, 10.0 / 11.0)


def check_closed_form_subtraction() -> float:
    """n0 in {0.1, 1, 10, 100} x R in {1e-3, 1e-2, 1e-1}, k <= 3; mixed light at n_c/n_t in {1/4, 10} and R = 1e-2."""
    deviations = []
    for R in _R_GRID:
        bs = subtract.BeamSplitterParams.from_reflectivity(R)
        for n0 in _N0_GRID:
            for spec in (FieldStateSpec.thermal(n0), FieldStateSpec.coherent(n0)):
                p = build_distribution(spec, FINE_EPSILON)
                for d in _DETECTORS_K3:
                    closed = subtract.closed_form_subtraction_stats(spec, bs, d)
                    deviations.append(_stats_deviation(closed, subtract.subtract_exact(p, bs, d).stats()))
    bs = subtract.BeamSplitterParams.from_reflectivity(1e-2)
    detectors = [d for d in _DETECTORS_K3 if d.resolving] + [DetectorModel(flavor="nonresolving", k=1)]
    for n0 in _N0_GRID:
        for fraction in _MIXED_COHERENT_FRACTIONS:
            spec = FieldStateSpec.mixed_light(fraction * n0, (1.0 - fraction) * n0)
            p = build_distribution(spec, FINE_EPSILON)
            for d in detectors:
                closed = subtract.closed_form_subtraction_stats(spec, bs, d)
                deviations.append(_stats_deviation(closed, subtract.subtract_exact(p, bs, d).stats()))
    return max(deviations)


def check_closed_form_sequential() -> float:
    bs = subtract.BeamSplitterParams.from_reflectivity(0.1)
    deviations = []
    for spec in (
        FieldStateSpec.thermal(0.5), FieldStateSpec.thermal(5.0),
        FieldStateSpec.coherent(0.5), FieldStateSpec.coherent(5.0),
    ):
        closed = subtract.closed_form_sequential_stats(spec, bs, 2)
        generic = subtract.subtract_sequential(build_distribution(spec, FINE_EPSILON), bs, 2).stats()
        deviations.append(_stats_deviation(closed, generic))
    return max(deviations)


def check_closed_form_addition() -> float:
    """lambda = 1e-2 over n0 in {0.1, 1, 10, 100}, plus the stronger gains 0.05 and 0.1 at small n0."""
    nd1 = DetectorModel(flavor="nonresolving", k=1)
    rd1 = DetectorModel(flavor="resolving", k=1)
    cases = [(1e-2, FieldStateSpec.thermal(n0), d) for n0 in _N0_GRID for d in (nd1, rd1)]
    cases += [(1e-2, FieldStateSpec.coherent(n0), nd1) for n0 in _N0_GRID]
    for gain in (0.05, 0.1):
        cases += [(gain, FieldStateSpec.thermal(n0), d) for n0 in (0.5, 5.0) for d in (nd1, rd1)]
        cases += [(gain, FieldStateSpec.coherent(n0), nd1) for n0 in (0.5, 2.0)]
    deviations = []
    for gain, spec, d in cases:
        pdc = add.PdcParams.from_gain(gain)
        closed = add.closed_form_addition_stats(spec, pdc, d)
        generic = add.add_exact(build_distribution(spec, FINE_EPSILON), pdc, d).stats()
        deviations.append(_stats_deviation(closed, generic))
    return max(deviations)


def check_coherent_addition_range_flag() -> float:
    """The Laguerre-overflow region of coherent addition must raise, not return garbage."""
    try:
        add.closed_form_addition(
            FieldStateSpec.coherent(100.0),
            add.PdcParams.from_gain(0.01),
            DetectorModel(flavor="nonresolving", k=1),
            on_range_error="raise",
        )
    except NumericRangeError:
        return 0.0
    return 1.0


def check_coherent_detector_insensitivity() -> float:
    n0 = 2.0
    bs = subtract.BeamSplitterParams.from_reflectivity(0.1)
    p = coherent_distribution(n0, FINE_EPSILON)
    deviations = []
    for d in _DETECTORS_K3:
        posterior = subtract.subtract_exact(p, bs, d).posterior.probs
        reference = poisson.pmf(np.arange(posterior.size), n0 * bs.T)
        deviations.append(float(np.max(np.abs(posterior - reference))))
    return max(deviations)


# --- Partition of outcomes ---

def _partition_states() -> list[PhotonNumberDistribution]:
    return [
        thermal_distribution(2.0, 1e-14),
        coherent_distribution(3.0, 1e-14),
        mixed_light_distribution(1.0, 1.0, 1e-14),
        fock_distribution(4),
    ]


def check_partition_subtraction() -> float:
    bs = subtract.BeamSplitterParams.from_reflectivity(0.3)
    deviations = []
    for p in _partition_states():
        total = subtract.subtract_no_click(p, bs).probability
        for k in range(1, p.cutoff + 1):
            d = DetectorModel(flavor="resolving", k=k)
            total += _probability_or_zero(lambda: subtract.subtract_exact(p, bs, d))
        deviations.append(abs(total - p.total()))
    return max(deviations)


def check_partition_addition() -> float:
    pdc = add.PdcParams.from_gain(0.1)
    deviations = []
    for p in _partition_states():
        total = add.add_no_click(p, pdc).probability
        for k in range(1, 41):
            d = DetectorModel(flavor="resolving", k=k)
            total += _probability_or_zero(lambda: add.add_exact(p, pdc, d))
        deviations.append(abs(total - p.total()))
    return max(deviations)


# --- Brute-force two-mode oracle ---

def _oracle_subtraction_inputs() -> list[oracle.SingleModeDensityMatrix]:
    inputs = [oracle.diagonal_density_matrix(fock_distribution(m), dim=6) for m in range(4)]
    inputs.append(oracle.diagonal_density_matrix(thermal_distribution(0.5, 1e-11)))
    inputs.append(oracle.coherent_density_matrix(1.0, 20))
    inputs.append(oracle.diagonal_density_matrix(mixed_light_distribution(0.5, 0.5, 1e-11)))
    return inputs


def _oracle_detectors() -> list[DetectorModel]:
    return [DetectorModel(flavor=f, k=k) for f in ("resolving", "nonresolving") for k in (1, 2)]


def check_oracle_subtraction() -> float:
    deviations = []
    for R in (0.01, 0.1, 0.25):
        bs = subtract.BeamSplitterParams.from_reflectivity(R)
        for rho in _oracle_subtraction_inputs():
            for d in _oracle_detectors():
                rho_out, _ = oracle.oracle_subtract(rho, bs, d)
                theta = subtract.subtract_theta(rho.diagonal(), bs, d.k, d.resolving)
                deviations.append(_padded_diff(rho_out.diagonal(), theta))
    return max(deviations)


def _oracle_addition_inputs() -> list[oracle.SingleModeDensityMatrix]:
    inputs = [oracle.diagonal_density_matrix(fock_distribution(m), dim=4) for m in range(4)]
    inputs.append(oracle.diagonal_density_matrix(thermal_distribution(0.5), dim=12))
    inputs.append(oracle.coherent_density_matrix(1.0, 12))
    inputs.append(oracle.diagonal_density_matrix(mixed_light_distribution(0.5, 0.5), dim=12))
    return inputs


def check_oracle_addition() -> float:
    deviations = []
    for gain in (0.05, 0.1):
        pdc = add.PdcParams.from_gain(gain)
        for rho in _oracle_addition_inputs():
            dim_a, dim_b = rho.dim + 13, 14
            for d in _oracle_detectors():
                rho_out, _ = oracle.oracle_add(rho, pdc, d, dim_a=dim_a, dim_b=dim_b)
                theta = add.add_theta(rho.diagonal(), pdc, d.k, d.resolving, 0, dim_a)
                deviations.append(_padded_diff(rho_out.diagonal(), theta))
    return max(deviations)


def check_oracle_diagonal_sufficiency() -> float:
    coherent = oracle.coherent_density_matrix(1.0, 20)
    dephased = oracle.SingleModeDensityMatrix(entries=np.diag(coherent.diagonal()))
    bs = subtract.BeamSplitterParams.from_reflectivity(0.1)
    deviations = []
    for d in _oracle_detectors():
        out_a, p_a = oracle.oracle_subtract(coherent, bs, d)
        out_b, p_b = oracle.oracle_subtract(dephased, bs, d)
        deviations.append(_padded_diff(out_a.diagonal(), out_b.diagonal()))
        deviations.append(abs(p_a - p_b))
    return max(deviations)


def check_oracle_positivity() -> float:
    bs = subtract.BeamSplitterParams.from_reflectivity(0.25)
    pdc = add.PdcParams.from_gain(0.1)
    worst = 0.0
    for d in _oracle_detectors():
        rho = oracle.coherent_density_matrix(1.0, 12)
        out, _ = oracle.oracle_subtract(rho, bs, d)
        worst = max(worst, -out.min_eigenvalue())
        out, _ = oracle.oracle_add(rho, pdc, d, dim_a=25, dim_b=14)
        worst = max(worst, -out.min_eigenvalue())
    return worst


# --- Quantum/classical crossover ---

def _crossover_families() -> list[FieldStateSpec]:
    return [
        FieldStateSpec.thermal(1.0),
        FieldStateSpec.mixed_light(0.2, 0.8),
        FieldStateSpec.mixed_light(10.0, 1.0),
    ]


def check_quantum_limit() -> float:
    """Exact against A at n0R = 1e-3 (R = 1e-3 keeps the O(R) attenuation floor small).

    For the subtraction points 5*max(n0R, R) = 5e-3 bounds the O(n0R) quantum-limit
    term plus the O(R) floor of the T^n attenuation A omits.
    """
    R, n0 = 1e-3, 1.0
    bs = subtract.BeamSplitterParams.from_reflectivity(R)
    deviations = []
    for family in _crossover_families() + [FieldStateSpec.coherent(1.0)]:
        spec = family.with_mean(n0)
        for d in (DetectorModel(flavor="nonresolving", k=1), DetectorModel(flavor="resolving", k=1)):
            exact = subtract.closed_form_subtraction_stats(spec, bs, d)
            deviations.append(_rel(exact.mean, subtract.model_A_stats(spec, R, 1).mean))
    pdc = add.PdcParams.from_gain(0.01)
    for d in (DetectorModel(flavor="nonresolving", k=1), DetectorModel(flavor="resolving", k=1)):
        spec = FieldStateSpec.thermal(1.0)
        exact = add.closed_form_addition_stats(spec, pdc, d)
        deviations.append(_rel(exact.mean, add.model_A_stats(spec, pdc.r, 1).mean))
    return max(deviations)


def check_classical_limit() -> float:
    """Nonresolving exact against the T-scaled E prediction at n0R = 1e2 (and E+ at n0r = 1e2)."""
    R = 1e-2
    bs = subtract.BeamSplitterParams.from_reflectivity(R)
    nd1 = DetectorModel(flavor="nonresolving", k=1)
    deviations = []
    for family in _crossover_families():
        spec = family.with_mean(1e2 / R)
        exact = subtract.closed_form_subtraction_stats(spec, bs, nd1)
        deviations.append(_rel(exact.mean, bs.T * subtract.model_E_stats(spec, 1).mean))
    spec = FieldStateSpec.thermal(1e4)
    exact = add.closed_form_addition_stats(spec, add.PdcParams.from_gain(0.1), nd1)
    deviations.append(_rel(exact.mean, add.model_E_stats(spec, 1).mean))
    return max(deviations)


def check_sequential_ordering() -> float:
    """Thermal k = 2 at R = 1e-2: count of violated orderings between S2, ND2 and RD2."""
    R = 1e-2
    bs = subtract.BeamSplitterParams.from_reflectivity(R)
    nd2 = DetectorModel(flavor="nonresolving", k=2)
    rd2 = DetectorModel(flavor="resolving", k=2)

    def stats_at(x):
        spec = FieldStateSpec.thermal(x / R)
        return (
            subtract.closed_form_sequential_stats(spec, bs, 2),
            subtract.closed_form_subtraction_stats(spec, bs, nd2),
            subtract.closed_form_subtraction_stats(spec, bs, rd2),
        )

    violations = 0
    for x in (3.0, 10.0, 30.0):
        s2, n2, r2 = stats_at(x)
        violations += not (n2.mean > s2.mean > r2.mean)
    for x in (0.01, 0.1, 1.0, 10.0):
        s2, n2, r2 = stats_at(x)
        violations += not (s2.probability > r2.probability)
        violations += not (s2.probability > n2.probability)
    return float(violations)


def check_laguerre_recurrence() -> float:
    deviations = []
    for x in (-5.0, -0.5, 0.5, 3.0):
        ours = laguerre_sequence(30, x)
        reference = eval_laguerre(np.arange(31), x)
        deviations.append(float(np.max(np.abs(ours - reference) / (1.0 + np.abs(reference)))))
    return max(deviations)


# --- Registry ---

VALIDATION_CHECKS = {
    "thermal_A_doubling": {
        "func": check_thermal_A_doubling, "threshold": 1e-10,
        "description": "A_1 on thermal light doubles the mean photon number.",
    },
    "thermal_E_identity": {
        "func": check_thermal_E_identity, "threshold": 1e-10,
        "description": "E_1 on thermal light leaves the mean photon number unchanged.",
    },
    "addition_model_constants": {
        "func": check_addition_model_constants, "threshold": 1e-10,
        "description": "P of A+_1 is r(n0+1); E+_k has P = 1 and mean n0 + k.",
    },
    "closed_form_subtraction": {
        "func": check_closed_form_subtraction, "threshold": 1e-8,
        "description": "Closed subtraction forms agree with the generic Theta sums (thermal, coherent, mixed light).",
    },
    "closed_form_sequential": {
        "func": check_closed_form_sequential, "threshold": 1e-8,
        "description": "Closed S_2 forms agree with two composed ND1 maps.",
    },
    "closed_form_addition": {
        "func": check_closed_form_addition, "threshold": 1e-8,
        "description": "Closed k = 1 addition forms agree with the generic Theta sums.",
    },
    "coherent_addition_range_flag": {
        "func": check_coherent_addition_range_flag, "threshold": 0.0,
        "description": "Coherent addition at n0 = 100, lambda = 0.01 raises a numeric range error.",
    },
    "coherent_detector_insensitivity": {
        "func": check_coherent_detector_insensitivity, "threshold": 1e-10,
        "description": "Subtracting from coherent light leaves Poisson(n0 T) for every detector.",
    },
    "partition_subtraction": {
        "func": check_partition_subtraction, "threshold": 1e-10,
        "description": "Resolving outcome probabilities of subtraction sum to the input mass.",
    },
    "partition_addition": {
        "func": check_partition_addition, "threshold": 1e-10,
        "description": "Resolving outcome probabilities of addition sum to the input mass.",
    },
    "oracle_subtraction": {
        "func": check_oracle_subtraction, "threshold": 1e-9,
        "description": "Two-mode beam-splitter evaluation matches the subtraction Theta entrywise.",
    },
    "oracle_addition": {
        "func": check_oracle_addition, "threshold": 1e-8,
        "description": "Two-mode down-converter evaluation matches the addition Theta entrywise.",
    },
    "oracle_diagonal_sufficiency": {
        "func": check_oracle_diagonal_sufficiency, "threshold": 1e-10,
        "description": "Coherences of the input do not change the output diagonal or P.",
    },
    "oracle_positivity": {
        "func": check_oracle_positivity, "threshold": 1e-9,
        "description": "Oracle outputs are positive semidefinite.",
    },
    "quantum_limit": {
        "func": check_quantum_limit, "threshold": 1e-2,
        "description": "At n0R = 1e-3 the exact mean is within 1% of the A-model mean.",
    },
    "classical_limit": {
        "func": check_classical_limit, "threshold": 5e-2,
        "description": "At n0R = 1e2 the nonresolving exact mean is within 5% of the E-model mean.",
    },
    "sequential_ordering": {
        "func": check_sequential_ordering, "threshold": 0.0,
        "description": "Thermal k = 2: <n> ordered ND2 > S2 > RD2, and S2 is the most probable.",
    },
    "laguerre_recurrence": {
        "func": check_laguerre_recurrence, "threshold": 1e-10,
        "description": "Laguerre recurrence matches scipy's eval_laguerre.",
    },
}


def _run_check(name: str, scale: float) -> dict:
    meta = VALIDATION_CHECKS[name]
    threshold = meta["threshold"] * scale
    start = time.perf_counter()
    try:
        deviation = float(meta["func"]())
        passed = bool(deviation <= threshold)
        error = None
    except Exception as exc:
        logger.exception("validation check %s raised", name)
        deviation, passed, error = None, False, f"{type(exc).__name__}: {exc}"
    entry = {
        "name": name,
        "description": meta["description"],
        "deviation": deviation,
        "threshold": threshold,
        "passed": passed,
        "seconds": round(time.perf_counter() - start, 3),
    }
    if error is not None:
        entry["error"] = error
    logger.info("%s %s (deviation %s, threshold %g)", "PASS" if passed else "FAIL", name, deviation, threshold)
    return entry


def run_validate(tolerance_profile: str = "default", only: Optional[Iterable[str]] = None) -> dict:
    """Run the registered checks; the report is JSON-serializable."""
    if tolerance_profile not in PROFILES:
        raise ConfigError(f"unknown tolerance profile '{tolerance_profile}'; choose from {', '.join(PROFILES)}")
    names = list(VALIDATION_CHECKS) if not only else list(only)
    unknown = [n for n in names if n not in VALIDATION_CHECKS]
    if unknown:
        raise ConfigError(f"unknown validation checks: {', '.join(unknown)}")
    checks = [_run_check(name, PROFILES[tolerance_profile]) for name in names]
    return {
        "profile": tolerance_profile,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
