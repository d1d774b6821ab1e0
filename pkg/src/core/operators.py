"""
Finite-dimensional Hilbert-space linear algebra.

Hermitian operators, pure states, density operators and spectral
decompositions are immutable wrappers around dense complex numpy arrays.
Every other module builds on the operations defined here.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config import config
from ..errors import DecompositionError, DimensionError, HermiticityError, StateError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HilbertDim:
    """Dimension of a Hilbert space, optionally with tensor-factor structure."""
    d: int
    factor_dims: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.d < 1:
            raise DimensionError(f"Dimension must be positive, got {self.d}")
        if self.d > config.MAX_DIM:
            raise DimensionError(f"Dimension {self.d} exceeds cap {config.MAX_DIM}")
        if self.factor_dims is not None:
            factors = tuple(int(f) for f in self.factor_dims)
            if any(f < 1 for f in factors):
                raise DimensionError(f"Factor dimensions must be positive, got {factors}")
            if int(np.prod(factors)) != self.d:
                raise DimensionError(
                    f"Factor dimensions {factors} do not multiply to {self.d}"
                )
            object.__setattr__(self, 'factor_dims', factors)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def fix_phase(vector: np.ndarray) -> np.ndarray:
    """Rotate a vector so its largest-magnitude amplitude is real and positive."""
    k = int(np.argmax(np.abs(vector)))
    pivot = vector[k]
    if abs(pivot) == 0:
        return vector
    return vector * (abs(pivot) / pivot)


def matrix_norm(matrix: np.ndarray) -> float:
    """Spectral (largest singular value) norm of an arbitrary square matrix."""
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


class HermitianOperator:
    """Dense self-adjoint matrix on a finite-dimensional space."""

    def __init__(self, matrix, factor_dims: Optional[Sequence[int]] = None):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"Operator must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise HermiticityError("Operator entries must be finite")
        self.dim = HilbertDim(m.shape[0], tuple(factor_dims) if factor_dims is not None else None)

        residual = float(np.max(np.abs(m - m.conj().T)))
        if residual > 0.0 and residual > config.HERMITIAN_TOL * matrix_norm(m):
            raise HermiticityError(
                f"Operator is not Hermitian: max|M - M^dagger| = {residual:.3e}"
            )
        self._matrix = _frozen(m)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def d(self) -> int:
        return self.dim.d

    @classmethod
    def symmetrized(cls, matrix, factor_dims: Optional[Sequence[int]] = None) -> 'HermitianOperator':
        """Build (M + M^dagger)/2; the result is Hermitian to the last bit."""
        m = np.asarray(matrix, dtype=complex)
        return cls((m + m.conj().T) / 2, factor_dims=factor_dims)

    @classmethod
    def identity(cls, d: int, factor_dims: Optional[Sequence[int]] = None) -> 'HermitianOperator':
        """Identity on C^d."""
        return cls(np.eye(d, dtype=complex), factor_dims=factor_dims)

    @classmethod
    def zero(cls, d: int) -> 'HermitianOperator':
        return cls(np.zeros((d, d), dtype=complex))

    def __repr__(self) -> str:
        return f"HermitianOperator(d={self.d}, factor_dims={self.dim.factor_dims})"


class PureState:
    """Unit vector in a finite-dimensional complex Hilbert space."""

    def __init__(self, amplitudes, factor_dims: Optional[Sequence[int]] = None,
                 normalize: bool = False):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise StateError("State amplitudes must be finite")
        norm = float(np.linalg.norm(v))
        if normalize:
            if norm < 1e-15:
                raise StateError("Cannot normalize the zero vector")
            v = v / norm
            norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > config.STATE_NORM_TOL:
            raise StateError(f"State norm {norm!r} is not 1")
        self.dim = HilbertDim(v.shape[0], tuple(factor_dims) if factor_dims is not None else None)
        self._amplitudes = _frozen(v)

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def d(self) -> int:
        return self.dim.d

    @classmethod
    def basis(cls, d: int, k: int) -> 'PureState':
        """Computational basis vector e_k."""
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        return cls(v)

    def canonical(self) -> 'PureState':
        """Same ray with the largest-magnitude amplitude real and positive."""
        return PureState(fix_phase(self._amplitudes), factor_dims=self.dim.factor_dims,
                         normalize=True)

    def overlap(self, other: 'PureState') -> complex:
        """<self|other>."""
        _check_dims(self.d, other.d)
        return complex(np.vdot(self._amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"PureState(d={self.d})"


class DensityOperator:
    """Positive semidefinite, unit-trace Hermitian operator."""

    def __init__(self, operator: HermitianOperator):
        trace = float(np.real(np.trace(operator.matrix)))
        if abs(trace - 1.0) > config.DENSITY_TOL:
            raise StateError(f"Density operator trace {trace!r} is not 1")
        min_eig = float(np.min(np.linalg.eigvalsh(operator.matrix)))
        if min_eig < -config.DENSITY_TOL:
            raise StateError(f"Density operator has negative eigenvalue {min_eig:.3e}")
        self.operator = operator

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def d(self) -> int:
        return self.operator.d

    @classmethod
    def maximally_mixed(cls, d: int) -> 'DensityOperator':
        """I/d."""
        return cls(HermitianOperator(np.eye(d, dtype=complex) / d))

    def __repr__(self) -> str:
        return f"DensityOperator(d={self.d})"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues with index-aligned orthonormal eigenvectors (columns)."""
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def eigenvectors(self) -> List[PureState]:
        """Eigenvectors as PureStates, in eigenvalue order."""
        return [PureState(self.vectors[:, k]) for k in range(self.vectors.shape[1])]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T

    def clusters(self, tol: float) -> List[List[int]]:
        """Group indices of eigenvalues whose consecutive gaps are at most tol."""
        groups: List[List[int]] = []
        for k, value in enumerate(self.eigenvalues):
            if groups and value - self.eigenvalues[groups[-1][-1]] <= tol:
                groups[-1].append(k)
            else:
                groups.append([k])
        return groups


def _check_dims(d1: int, d2: int):
    if d1 != d2:
        raise DimensionError(f"Dimension mismatch: {d1} vs {d2}")


def symmetrized(matrix, factor_dims: Optional[Sequence[int]] = None) -> HermitianOperator:
    """(M + M^dagger)/2 as a HermitianOperator."""
    return HermitianOperator.symmetrized(matrix, factor_dims=factor_dims)


def tensor_product(x: HermitianOperator, y: HermitianOperator) -> HermitianOperator:
    """Kronecker product X (x) Y carrying factor dimensions [d_X, d_Y]."""
    return HermitianOperator(np.kron(x.matrix, y.matrix), factor_dims=(x.d, y.d))


def tensor_states(psi_a: PureState, psi_b: PureState) -> PureState:
    """Product state psi_A (x) psi_B with factor dimensions [d_A, d_B]."""
    return PureState(np.kron(psi_a.amplitudes, psi_b.amplitudes),
                     factor_dims=(psi_a.d, psi_b.d), normalize=True)


def commutator(x: HermitianOperator, y: HermitianOperator) -> np.ndarray:
    """Raw commutator [X, Y] = XY - YX (anti-Hermitian)."""
    _check_dims(x.d, y.d)
    return x.matrix @ y.matrix - y.matrix @ x.matrix


def commutator_observable(x: HermitianOperator, y: HermitianOperator) -> HermitianOperator:
    """The Hermitian commutator observable M = i[X, Y]."""
    factor_dims = x.dim.factor_dims if x.dim.factor_dims == y.dim.factor_dims else None
    return HermitianOperator.symmetrized(1j * commutator(x, y), factor_dims=factor_dims)


def spectral_norm(x: HermitianOperator) -> float:
    """Largest absolute eigenvalue; equals sup of |<psi|X|psi>| over unit psi."""
    return float(np.max(np.abs(np.linalg.eigvalsh(x.matrix))))


def eig(x: HermitianOperator) -> SpectralDecomposition:
    """
    Eigendecomposition with a deterministic basis inside degenerate eigenspaces.

    Each degenerate block is re-derived from its spectral projector through a
    column-pivoted QR factorisation, then every vector gets the canonical phase.
    """
    try:
        values, vectors = np.linalg.eigh(x.matrix)
    except np.linalg.LinAlgError as e:
        logger.error(f"Eigendecomposition did not converge: {e}")
        raise DecompositionError(f"Eigendecomposition did not converge: {e}") from e

    scale = 1.0 + float(np.max(np.abs(values))) if values.size else 1.0
    decomposition = SpectralDecomposition(values, vectors)
    canonical = np.empty_like(vectors)
    for group in decomposition.clusters(1e-9 * scale):
        block = vectors[:, group]
        if len(group) > 1:
            projector = block @ block.conj().T
            q, _, _ = scipy.linalg.qr(projector, pivoting=True)
            block = q[:, :len(group)]
        for j, k in enumerate(group):
            canonical[:, k] = fix_phase(block[:, j])

    result = SpectralDecomposition(_frozen(values.copy()), _frozen(canonical))
    _validate_decomposition(x, result, scale)
    return result


def _validate_decomposition(x: HermitianOperator, dec: SpectralDecomposition, scale: float):
    error = matrix_norm(x.matrix - dec.reconstruct())
    if error > 1e-9 * scale:
        raise DecompositionError(f"Reconstruction error {error:.3e} exceeds tolerance")
    gram = dec.vectors.conj().T @ dec.vectors
    drift = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    if drift > 1e-9:
        raise DecompositionError(f"Eigenvectors not orthonormal: Gram drift {drift:.3e}")


def expectation(x: HermitianOperator, psi: PureState) -> float:
    """<psi|X|psi>, with the imaginary rounding residue checked and dropped."""
    _check_dims(x.d, psi.d)
    value = complex(np.vdot(psi.amplitudes, x.matrix @ psi.amplitudes))
    if abs(value.imag) > config.EXPECTATION_IMAG_TOL * max(1.0, float(np.linalg.norm(x.matrix))):
        raise HermiticityError(
            f"Expectation has imaginary part {value.imag:.3e}; operator is not Hermitian"
        )
    return value.real


def density_expectation(x: HermitianOperator, rho: DensityOperator) -> float:
    """Tr(rho X)."""
    _check_dims(x.d, rho.d)
    return float(np.real(np.trace(rho.matrix @ x.matrix)))


def density_from_state(psi: PureState) -> DensityOperator:
    """Projector |psi><psi|."""
    v = psi.amplitudes
    return DensityOperator(HermitianOperator.symmetrized(np.outer(v, v.conj()),
                                                         factor_dims=psi.dim.factor_dims))


def schmidt_coefficients(psi: PureState, d_a: int, d_b: int) -> np.ndarray:
    """Singular values of psi reshaped to a d_A x d_B matrix, largest first."""
    if d_a * d_b != psi.d:
        raise DimensionError(f"Cannot split dimension {psi.d} as {d_a} x {d_b}")
    return np.linalg.svd(psi.amplitudes.reshape(d_a, d_b), compute_uv=False)


def schmidt_rank(psi: PureState, d_a: int, d_b: int, tol: float = 1e-9) -> int:
    """Number of Schmidt coefficients above tol; 1 for product states."""
    return int(np.sum(schmidt_coefficients(psi, d_a, d_b) > tol))


# Pauli matrices used by presets and tests
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def pauli(name: str) -> HermitianOperator:
    """Qubit Pauli operator by name (I, X, Y or Z)."""
    table = {'I': np.eye(2, dtype=complex), 'X': SIGMA_X, 'Y': SIGMA_Y, 'Z': SIGMA_Z}
    try:
        return HermitianOperator(table[name.upper()])
    except KeyError:
        raise ValueError(f"Unknown Pauli operator: {name}")
