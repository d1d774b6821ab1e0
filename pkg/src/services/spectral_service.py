"""
Eigenvectors of a Hermitian operator C built from eigenvectors of C^2.

If C^2 u = lambda u and u is not itself an eigenvector of C, then
v = C u / sqrt(lambda) satisfies C v = sqrt(lambda) u, and u +- v are
eigenvectors of C with eigenvalues +-sqrt(lambda).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.operators import HermitianOperator, PureState, eig, expectation, fix_phase, spectral_norm
from ..errors import ConstructionError, DimensionError

logger = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-10
EIGEN_RESIDUAL = 1e-8
DEGENERATE_NORM = 1e-8


@dataclass(frozen=True, eq=False)
class CEntanglePair:
    u: PureState
    v: PureState
    lam: float
    psi_plus: PureState
    psi_minus: PureState


@dataclass(frozen=True, eq=False)
class MaxState:
    phi: PureState
    value: float
    expectation: float
    sign: int
    lam: float


@dataclass(frozen=True, eq=False)
class MaxStateComparison:
    psi_sq: PureState
    phi_lin: PureState
    same: bool
    decomposition: np.ndarray
    basis: np.ndarray
    residual: float


def _square(c: HermitianOperator) -> HermitianOperator:
    return HermitianOperator.symmetrized(c.matrix @ c.matrix, factor_dims=c.dim.factor_dims)


def _canonical(vector: np.ndarray, c: HermitianOperator) -> PureState:
    return PureState(fix_phase(vector / np.linalg.norm(vector)), factor_dims=c.dim.factor_dims,
                     normalize=True)


def _top_eigenspace(c: HermitianOperator):
    dec = eig(_square(c))
    lam = float(dec.eigenvalues[-1])
    tol = 1e-9 * (1.0 + abs(lam))
    top = [k for k in range(len(dec.eigenvalues)) if lam - dec.eigenvalues[k] <= tol]
    return lam, dec.vectors[:, top]


def c_entangle(c: HermitianOperator, u: PureState) -> CEntanglePair:
    """Build v = C u / sqrt(lambda) and the eigenvectors psi_+- = normalize(u +- v)."""
    if c.d != u.d:
        raise DimensionError(f"Operator dimension {c.d} does not match state {u.d}")
    scale = 1.0 + spectral_norm(c)
    x = u.amplitudes
    cu = c.matrix @ x
    c2u = c.matrix @ cu
    lam = float(np.real(np.vdot(x, c2u)))
    if np.linalg.norm(c2u - lam * x) > EIGEN_RESIDUAL * scale ** 2:
        raise ConstructionError("u is not an eigenvector of C^2")
    if lam <= LAMBDA_FLOOR:
        raise ConstructionError(f"Eigenvalue {lam:.3e} of C^2 is below {LAMBDA_FLOOR}")
    mean = float(np.real(np.vdot(x, cu)))
    if np.linalg.norm(cu - mean * x) <= EIGEN_RESIDUAL * scale:
        raise ConstructionError("u is already an eigenvector of C; one of u +- v vanishes")

    root = math.sqrt(lam)
    v = cu / root
    pair = CEntanglePair(
        u=u,
        v=PureState(v, factor_dims=u.dim.factor_dims, normalize=True),
        lam=lam,
        psi_plus=_canonical(x + v, c),
        psi_minus=_canonical(x - v, c),
    )
    for sign, psi in ((1.0, pair.psi_plus), (-1.0, pair.psi_minus)):
        residual = np.linalg.norm(c.matrix @ psi.amplitudes - sign * root * psi.amplitudes)
        if residual > 1e-9 * scale:
            raise ConstructionError(f"Constructed vector misses its eigenvalue by {residual:.3e}")
    return pair


def max_state_from_square(c: HermitianOperator) -> MaxState:
    """
    A maximiser of |<phi|C|phi>| from the top eigenspace of C^2.

    phi_+ = normalize(u + C u / sqrt(lambda)) for the first vector u of that
    eigenspace where it does not vanish; only when +sqrt(lambda) is not in the
    spectrum does it fall back to phi_- with expectation -sqrt(lambda).
    """
    lam, top = _top_eigenspace(c)
    if lam <= LAMBDA_FLOOR:
        raise ConstructionError("C is zero; it has no max-state")
    root = math.sqrt(lam)

    for k in range(top.shape[1]):
        u = top[:, k]
        w = u + (c.matrix @ u) / root
        if np.linalg.norm(w) >= DEGENERATE_NORM:
            phi = _canonical(w, c)
            return MaxState(phi=phi, value=root, expectation=expectation(c, phi), sign=1, lam=lam)

    logger.info("No +sqrt(lambda) eigenvector of C; falling back to the minus combination")
    u = top[:, 0]
    phi = _canonical(u - (c.matrix @ u) / root, c)
    signed = expectation(c, phi)
    return MaxState(phi=phi, value=abs(signed), expectation=signed, sign=-1, lam=lam)


def square_vs_linear_max_states(c: HermitianOperator, psi_sq: Optional[PureState] = None) -> MaxStateComparison:
    """
    Compare a max-state of C^2 with a max-state of C and express the latter in
    the top eigenspace of C^2 (whose first basis vector is psi_sq).
    """
    if spectral_norm(c) <= LAMBDA_FLOOR:
        raise ConstructionError("C is zero; max-states are undefined")
    lam, top = _top_eigenspace(c)

    if psi_sq is None:
        psi_sq = _canonical(top[:, -1], c)
    else:
        inside = top.conj().T @ psi_sq.amplitudes
        if abs(np.linalg.norm(inside) - 1.0) > 1e-9:
            raise ConstructionError("psi_sq does not lie in the top eigenspace of C^2")

    # Gram-Schmidt basis of the top eigenspace starting from psi_sq
    vectors = [psi_sq.amplitudes]
    for k in range(top.shape[1]):
        if len(vectors) == top.shape[1]:
            break
        w = top[:, k] - sum(np.vdot(b, top[:, k]) * b for b in vectors)
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            vectors.append(w / norm)
    basis = np.column_stack(vectors)

    dec = eig(c)
    magnitudes = np.abs(dec.eigenvalues)
    best = float(np.max(magnitudes))
    candidates = [k for k in range(len(magnitudes)) if best - magnitudes[k] <= 1e-9 * (1.0 + best)]
    k = max(candidates, key=lambda idx: dec.eigenvalues[idx])
    phi_lin = PureState(dec.vectors[:, k], factor_dims=c.dim.factor_dims)

    coefficients = basis.conj().T @ phi_lin.amplitudes
    residual = float(np.linalg.norm(phi_lin.amplitudes - basis @ coefficients))
    same = abs(psi_sq.overlap(phi_lin)) > 1.0 - 1e-9
    return MaxStateComparison(psi_sq=psi_sq, phi_lin=phi_lin, same=same,
                              decomposition=coefficients, basis=basis, residual=residual)
