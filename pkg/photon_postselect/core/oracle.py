# photon_postselect/core/oracle.py

"""
Brute-force two-mode Fock-space check of the distribution-level maps.

The field (mode a) is joined with a vacuum ancilla (mode b), evolved with
the beam-splitter or down-conversion unitary, the detector POVM is applied
to b and b is traced out. Basis index of |n_a, n_b> is n_a * dim_b + n_b.
Only meant for small cutoffs.
"""

import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import gammaln

from .add import PdcParams
from .detectors import DetectorModel
from .states import PhotonNumberDistribution
from .subtract import BeamSplitterParams
from .utils import DomainError, InsufficientCutoffError, TruncationLeakageError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
LEAKAGE_TOL = 1e-8
DEFAULT_ADD_MARGIN = 20


def _square_complex(value) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {arr.shape}")
    if np.max(np.abs(arr - arr.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.abs(arr).max(initial=0.0)):
        raise DomainError("density matrix must be Hermitian")
    arr.setflags(write=False)
    return arr


class SingleModeDensityMatrix(BaseModel):
    """Single-mode density matrix; unnormalized (trace < 1) outputs of post-selection allowed."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _hermitian(cls, value):
        return _square_complex(value)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(self.entries)[0])

    def normalized(self) -> "SingleModeDensityMatrix":
        return SingleModeDensityMatrix(entries=self.entries / self.trace())


class TwoModeDensityMatrix(BaseModel):
    """Joint signal (a) / ancilla (b) density matrix, n_a major."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dim_a: int
    dim_b: int
    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _hermitian(cls, value):
        return _square_complex(value)

    @field_validator("entries")
    @classmethod
    def _shape_matches(cls, value, info):
        dim_a, dim_b = info.data.get("dim_a"), info.data.get("dim_b")
        if dim_a is not None and dim_b is not None and value.shape[0] != dim_a * dim_b:
            raise DomainError(f"joint matrix must be {dim_a * dim_b} square, got {value.shape}")
        return value

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(self.entries)[0])

    def tensor(self) -> np.ndarray:
        """Entries reshaped to (a, b, a', b')."""
        return self.entries.reshape(self.dim_a, self.dim_b, self.dim_a, self.dim_b)


def coherent_density_matrix(n0: float, dim: int) -> SingleModeDensityMatrix:
    """|alpha><alpha| with real alpha = sqrt(n0), truncated to dim levels."""
    if n0 < 0:
        raise DomainError(f"coherent state needs n0 >= 0, got {n0}")
    n = np.arange(dim)
    if n0 == 0:
        amplitudes = (n == 0).astype(np.float64)
    else:
        amplitudes = np.exp(0.5 * (-n0 + n * math.log(n0) - gammaln(n + 1.0)))
    deficit = 1.0 - float(np.sum(amplitudes ** 2))
    if deficit > 1e-8:
        raise InsufficientCutoffError(f"dim={dim} keeps only {1 - deficit:.3e} of a coherent state with n0={n0:g}", deficit)
    return SingleModeDensityMatrix(entries=np.outer(amplitudes, amplitudes))


def diagonal_density_matrix(p: PhotonNumberDistribution, dim: Optional[int] = None) -> SingleModeDensityMatrix:
    dim = p.cutoff + 1 if dim is None else dim
    return SingleModeDensityMatrix(entries=np.diag(p.padded(dim - 1)))


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=np.float64)), k=1)


def _two_mode_ladders(dim_a: int, dim_b: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.kron(_ladder(dim_a), np.eye(dim_b))
    b = np.kron(np.eye(dim_a), _ladder(dim_b))
    return a, b


def _exp_by_sectors(generator: np.ndarray, sector_of: np.ndarray) -> np.ndarray:
    """
    exp(G) for anti-Hermitian G that does not couple different values of
    `sector_of`: each block is diagonalized as the Hermitian -iG.
    """
    dim = generator.shape[0]
    out = np.zeros((dim, dim), dtype=np.complex128)
    for sector in np.unique(sector_of):
        idx = np.flatnonzero(sector_of == sector)
        block = generator[np.ix_(idx, idx)]
        eig_val, eig_vec = la.eigh(-1j * block)
        out[np.ix_(idx, idx)] = np.einsum("ij,j,kj->ik", eig_vec, np.exp(1j * eig_val), eig_vec.conj())
    return out


def _occupations(dim_a: int, dim_b: int) -> tuple[np.ndarray, np.ndarray]:
    n_a, n_b = np.divmod(np.arange(dim_a * dim_b), dim_b)
    return n_a, n_b


def bs_unitary(theta: float, dim_a: int, dim_b: int) -> np.ndarray:
    """exp[theta (a^dag b - a b^dag)]; blocks of fixed n_a + n_b."""
    if dim_a < 2 or dim_b < 2:
        raise DomainError("beam-splitter unitary needs dims >= 2")
    a, b = _two_mode_ladders(dim_a, dim_b)
    generator = theta * (a.T @ b - a @ b.T)
    n_a, n_b = _occupations(dim_a, dim_b)
    return _exp_by_sectors(generator.astype(np.complex128), n_a + n_b)


def pdc_unitary(gain: float, dim_a: int, dim_b: int, n_keep: Optional[int] = None) -> np.ndarray:
    """
    exp[lambda (a b - a^dag b^dag)]; blocks of fixed n_a - n_b.

    The generator is non-compact, so truncation is checked: on the columns
    of vacuum-ancilla inputs |n_a, 0> with n_a <= n_keep, the rows away
    from the truncation edge must form an isometry to LEAKAGE_TOL. Raises
    TruncationLeakageError with the measured max |B^dag B - I| otherwise.
    """
    if dim_a < 2 or dim_b < 2:
        raise DomainError("down-conversion unitary needs dims >= 2")
    if gain < 0:
        raise DomainError(f"PDC gain must be >= 0, got {gain}")
    a, b = _two_mode_ladders(dim_a, dim_b)
    generator = gain * (a @ b - a.T @ b.T)
    n_a, n_b = _occupations(dim_a, dim_b)
    unitary = _exp_by_sectors(generator.astype(np.complex128), n_a - n_b)

    n_keep = dim_a // 2 if n_keep is None else n_keep
    cols = np.flatnonzero((n_b == 0) & (n_a <= n_keep))
    rows = np.flatnonzero((n_a < dim_a - 1) & (n_b < dim_b - 1))
    block = unitary[np.ix_(rows, cols)]
    deviation = float(np.max(np.abs(block.conj().T @ block - np.eye(cols.size)), initial=0.0))
    if deviation > LEAKAGE_TOL:
        raise TruncationLeakageError(
            f"PDC unitary at lambda={gain:g} leaks {deviation:.2e} out of dims ({dim_a}, {dim_b})", deviation
        )
    logger.debug("pdc_unitary lambda=%g dims=(%d, %d) block deviation %.2e", gain, dim_a, dim_b, deviation)
    return unitary


def embed_with_vacuum(rho: SingleModeDensityMatrix, dim_a: int, dim_b: int) -> TwoModeDensityMatrix:
    if dim_a < rho.dim:
        raise DomainError(f"signal dim {dim_a} is smaller than the state dim {rho.dim}")
    padded = np.zeros((dim_a, dim_a), dtype=np.complex128)
    padded[: rho.dim, : rho.dim] = rho.entries
    vacuum = np.zeros((dim_b, dim_b))
    vacuum[0, 0] = 1.0
    return TwoModeDensityMatrix(dim_a=dim_a, dim_b=dim_b, entries=np.kron(padded, vacuum))


def evolve(joint: TwoModeDensityMatrix, unitary: np.ndarray) -> TwoModeDensityMatrix:
    entries = unitary @ joint.entries @ unitary.conj().T
    return TwoModeDensityMatrix(dim_a=joint.dim_a, dim_b=joint.dim_b, entries=0.5 * (entries + entries.conj().T))


def trace_out_ancilla(joint: TwoModeDensityMatrix, levels) -> SingleModeDensityMatrix:
    """sum over l in levels of <l_b| joint |l_b>."""
    levels = np.asarray(levels, dtype=np.int64)
    if levels.size == 0:
        return SingleModeDensityMatrix(entries=np.zeros((joint.dim_a, joint.dim_a)))
    sub = joint.tensor()[:, levels][:, :, :, levels]
    return SingleModeDensityMatrix(entries=np.einsum("ilkl->ik", sub))


def post_select(joint: TwoModeDensityMatrix, d: DetectorModel) -> tuple[SingleModeDensityMatrix, float]:
    """Apply M_k on the ancilla (projectors truncated at dim_b) and trace it out."""
    rho_out = trace_out_ancilla(joint, d.levels(joint.dim_b - 1))
    return rho_out, rho_out.trace()


def oracle_subtract(
    rho: SingleModeDensityMatrix,
    bs: BeamSplitterParams,
    d: DetectorModel,
    dim_b: Optional[int] = None,
) -> tuple[SingleModeDensityMatrix, float]:
    # n_a + n_b is conserved, so an ancilla as large as the signal is exact.
    dim_a = rho.dim
    dim_b = rho.dim if dim_b is None else dim_b
    joint = evolve(embed_with_vacuum(rho, dim_a, dim_b), bs_unitary(bs.theta, dim_a, dim_b))
    return post_select(joint, d)


def oracle_add(
    rho: SingleModeDensityMatrix,
    pdc: PdcParams,
    d: DetectorModel,
    dim_a: Optional[int] = None,
    dim_b: Optional[int] = None,
) -> tuple[SingleModeDensityMatrix, float]:
    dim_a = rho.dim + DEFAULT_ADD_MARGIN if dim_a is None else dim_a
    dim_b = DEFAULT_ADD_MARGIN + 1 if dim_b is None else dim_b
    unitary = pdc_unitary(pdc.gain, dim_a, dim_b, n_keep=rho.dim - 1)
    joint = evolve(embed_with_vacuum(rho, dim_a, dim_b), unitary)
    return post_select(joint, d)
