"""
Bell operators and incompatibility analysis of CHSH scenarios.

All CHSH quantities use the 1/2-normalised functional, so the classical bound
is 1 and the qubit maximum is sqrt(2). The conventional S = 2<B> only appears
in reports.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..config import config
from ..core.operators import (
    HermitianOperator,
    PureState,
    commutator,
    commutator_observable,
    eig,
    expectation,
    matrix_norm,
    spectral_norm,
    tensor_product,
    tensor_states,
)
from ..errors import (
    ConstructionError,
    DecompositionError,
    DimensionError,
    InvalidScenarioError,
    StructureError,
)

logger = logging.getLogger(__name__)

GENERAL = 'general'
TENSOR = 'tensor'
AS_GIVEN = 'B1B2'
SWAPPED = 'B2B1'

# Generic mixing weight for the joint diagonalisation of M_A and M_B
GOLDEN_GAMMA = (math.sqrt(5.0) - 1.0) / 2.0


class DichotomicObservable:
    """Observable with spectrum in {-1, +1}, i.e. X^2 = I."""

    def __init__(self, operator):
        if not isinstance(operator, HermitianOperator):
            operator = HermitianOperator(operator)
        deviation = matrix_norm(operator.matrix @ operator.matrix - np.eye(operator.d))
        if deviation > config.DICHOTOMIC_TOL:
            raise InvalidScenarioError(
                f"Observable is not dichotomic: ||X^2 - I|| = {deviation:.3e}"
            )
        self.operator = operator

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def d(self) -> int:
        return self.operator.d


@dataclass(frozen=True, eq=False)
class LocalObservables:
    """Factor-level observables of a tensor scenario: A's act on H_A, B's on H_B."""
    a1: DichotomicObservable
    a2: DichotomicObservable
    b1: DichotomicObservable
    b2: DichotomicObservable

    @property
    def d_a(self) -> int:
        return self.a1.d

    @property
    def d_b(self) -> int:
        return self.b1.d


@dataclass(frozen=True, eq=False)
class BellScenario:
    """Quadruple (A1, A2, B1, B2) of dichotomic observables with [A_i, B_j] = 0."""
    a1: DichotomicObservable
    a2: DichotomicObservable
    b1: DichotomicObservable
    b2: DichotomicObservable
    local: Optional[LocalObservables] = None
    b_order: str = AS_GIVEN

    def __post_init__(self):
        d = self.a1.d
        if any(x.d != d for x in (self.a2, self.b1, self.b2)):
            raise DimensionError("Scenario observables live on different dimensions")

        for i, a in enumerate((self.a1, self.a2), start=1):
            for j, b in enumerate((self.b1, self.b2), start=1):
                residual = matrix_norm(commutator(a.operator, b.operator))
                if residual > config.COMMUTATOR_TOL:
                    raise InvalidScenarioError(
                        f"[A{i}, B{j}] has norm {residual:.3e}; settings are not compatible"
                    )

        if self.local is not None:
            d_a, d_b = self.local.d_a, self.local.d_b
            if d_a * d_b != d:
                raise DimensionError(f"Local dimensions {d_a}x{d_b} do not match {d}")
            if self.local.a2.d != d_a or self.local.b2.d != d_b:
                raise DimensionError("Local observables of a pair differ in dimension")
            pairs = (
                (self.a1, _lift_a(self.local.a1, d_b)),
                (self.a2, _lift_a(self.local.a2, d_b)),
                (self.b1, _lift_b(self.local.b1, d_a)),
                (self.b2, _lift_b(self.local.b2, d_a)),
            )
            for stored, lifted in pairs:
                if np.max(np.abs(stored.matrix - lifted)) > 1e-12:
                    raise InvalidScenarioError(
                        "Local observables do not reproduce the stored global operators"
                    )

    @classmethod
    def general(cls, a1, a2, b1, b2) -> 'BellScenario':
        """Scenario on an unstructured space from four global observables."""
        return cls(*(DichotomicObservable(x) for x in (a1, a2, b1, b2)))

    @classmethod
    def tensor(cls, a1, a2, b1, b2) -> 'BellScenario':
        """Build A_i = a_i (x) I and B_j = I (x) b_j from factor-level observables."""
        local = LocalObservables(*(DichotomicObservable(x) for x in (a1, a2, b1, b2)))
        eye_a = HermitianOperator.identity(local.d_a)
        eye_b = HermitianOperator.identity(local.d_b)
        return cls(
            DichotomicObservable(tensor_product(local.a1.operator, eye_b)),
            DichotomicObservable(tensor_product(local.a2.operator, eye_b)),
            DichotomicObservable(tensor_product(eye_a, local.b1.operator)),
            DichotomicObservable(tensor_product(eye_a, local.b2.operator)),
            local=local,
        )

    @property
    def d(self) -> int:
        return self.a1.d

    @property
    def is_tensor(self) -> bool:
        return self.local is not None

    @property
    def structure(self):
        if self.local is None:
            return GENERAL
        return {TENSOR: [self.local.d_a, self.local.d_b]}

    @property
    def factor_dims(self) -> Optional[Tuple[int, int]]:
        if self.local is None:
            return None
        return (self.local.d_a, self.local.d_b)

    def swap_b(self) -> 'BellScenario':
        """Interchange B1 and B2; this negates M_B."""
        local = None
        if self.local is not None:
            local = LocalObservables(self.local.a1, self.local.a2, self.local.b2, self.local.b1)
        order = SWAPPED if self.b_order == AS_GIVEN else AS_GIVEN
        return BellScenario(self.a1, self.a2, self.b2, self.b1, local=local, b_order=order)

    def swap_a(self) -> 'BellScenario':
        """Interchange A1 and A2; this negates M_A."""
        local = None
        if self.local is not None:
            local = LocalObservables(self.local.a2, self.local.a1, self.local.b1, self.local.b2)
        return BellScenario(self.a2, self.a1, self.b1, self.b2, local=local, b_order=self.b_order)

    def oriented(self, ordering: str) -> 'BellScenario':
        """This scenario with B's in the given ordering relative to self."""
        return self if ordering == AS_GIVEN else self.swap_b()


def _lift_a(x: DichotomicObservable, d_b: int) -> np.ndarray:
    return np.kron(x.matrix, np.eye(d_b))


def _lift_b(x: DichotomicObservable, d_a: int) -> np.ndarray:
    return np.kron(np.eye(d_a), x.matrix)


@dataclass(frozen=True, eq=False)
class BellNorm:
    norm: float
    ordering: str
    norms: Dict[str, float]


@dataclass(frozen=True, eq=False)
class IncompatibilityReport:
    """Commutator observables of both pairs and the bound they predict."""
    m_a: HermitianOperator
    m_b: HermitianOperator
    m_ab: HermitianOperator
    norm_ma: float
    norm_mb: float
    mu: float
    mu_a: float
    mu_b: float
    b_predicted: float
    ordering: str
    structure: object
    m_ab_vanishes: bool
    commuting_residual: float
    eigen_norm: float
    bound_discrepancy: float

    @property
    def violation_possible(self) -> bool:
        return self.mu > config.COMMUTATOR_TOL

    def summary(self) -> Dict[str, object]:
        """JSON-ready view of the report."""
        return {
            'structure': self.structure,
            'norm_MA': self.norm_ma,
            'norm_MB': self.norm_mb,
            'norm_MAB': spectral_norm(self.m_ab),
            'mu': self.mu,
            'mu_A': self.mu_a,
            'mu_B': self.mu_b,
            'b_predicted': self.b_predicted,
            'chsh_S_predicted': 2.0 * self.b_predicted,
            'ordering': self.ordering,
            'M_AB_vanishes': self.m_ab_vanishes,
            'violation_possible': self.violation_possible,
            'commuting_residual': self.commuting_residual,
            'eigen_norm': self.eigen_norm,
            'bound_discrepancy': self.bound_discrepancy,
        }


@dataclass(frozen=True, eq=False)
class MeterReading:
    value: float
    stderr: float
    clamped: bool


@dataclass(frozen=True, eq=False)
class Theorem1Result:
    locally_incompatible: bool
    violation_exists: bool
    agree: bool
    witness: Optional[PureState]
    ordering: str
    bell_norm: float
    witness_value: Optional[float]
    norm_ma: float
    norm_mb: float


@dataclass(frozen=True, eq=False)
class SeparableWitness:
    psi_sep: PureState
    value: float
    mu_a: float
    mu_b: float
    ordering: str


def bell_operator(s: BellScenario) -> HermitianOperator:
    """B = 1/2 [A1 (B1 + B2) + A2 (B1 - B2)]."""
    a1, a2, b1, b2 = s.a1.matrix, s.a2.matrix, s.b1.matrix, s.b2.matrix
    raw = 0.5 * (a1 @ (b1 + b2) + a2 @ (b1 - b2))
    return HermitianOperator.symmetrized(raw, factor_dims=s.factor_dims)


def setting_correlations(s: BellScenario, psi: PureState) -> Dict[Tuple[int, int], float]:
    """<A_i B_j> for the four compatible setting pairs."""
    if psi.d != s.d:
        raise DimensionError(f"State dimension {psi.d} does not match scenario {s.d}")
    correlations = {}
    for i, a in enumerate((s.a1, s.a2), start=1):
        for j, b in enumerate((s.b1, s.b2), start=1):
            product = HermitianOperator.symmetrized(a.matrix @ b.matrix)
            correlations[(i, j)] = expectation(product, psi)
    return correlations


def chsh_correlation(s: BellScenario, psi: PureState) -> float:
    """1/2 [<A1B1> + <A1B2> + <A2B1> - <A2B2>]."""
    c = setting_correlations(s, psi)
    return 0.5 * (c[(1, 1)] + c[(1, 2)] + c[(2, 1)] - c[(2, 2)])


def landau_square(s: BellScenario) -> HermitianOperator:
    """Right-hand side of the Landau identity, I - 1/4 [A1, A2][B1, B2]."""
    product = commutator(s.a1.operator, s.a2.operator) @ commutator(s.b1.operator, s.b2.operator)
    return HermitianOperator.symmetrized(np.eye(s.d) - 0.25 * product, factor_dims=s.factor_dims)


def landau_residual(s: BellScenario) -> float:
    """||B.B - (I - 1/4 [A1, A2][B1, B2])||."""
    b = bell_operator(s).matrix
    return matrix_norm(b @ b - landau_square(s).matrix)


def landau_tolerance(s: BellScenario) -> float:
    """Residual allowed for the Landau identity, scaled by the Bell norm."""
    return 1e-9 * (1.0 + spectral_norm(bell_operator(s)) ** 2)


def bell_norm(s: BellScenario) -> BellNorm:
    """Largest spectral norm of the Bell operator over both B-orderings."""
    norms = {
        AS_GIVEN: spectral_norm(bell_operator(s)),
        SWAPPED: spectral_norm(bell_operator(s.swap_b())),
    }
    ordering = AS_GIVEN if norms[AS_GIVEN] >= norms[SWAPPED] else SWAPPED
    return BellNorm(norm=norms[ordering], ordering=ordering, norms=norms)


def _offdiagonal(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - np.diag(np.diag(m))))) if m.size else 0.0


def common_eigenbasis(m_a: HermitianOperator, m_b: HermitianOperator) -> np.ndarray:
    """
    Orthonormal basis diagonalising two commuting Hermitian operators.

    Tries the generic combination M_A + gamma M_B first; on failure falls back
    to diagonalising M_B inside each eigenspace of M_A.
    """
    scale_a = 1.0 + spectral_norm(m_a)
    scale_b = 1.0 + spectral_norm(m_b)

    def diagonal_in(v: np.ndarray) -> bool:
        return (_offdiagonal(v.conj().T @ m_a.matrix @ v) <= 1e-8 * scale_a
                and _offdiagonal(v.conj().T @ m_b.matrix @ v) <= 1e-8 * scale_b)

    combined = HermitianOperator.symmetrized(m_a.matrix + GOLDEN_GAMMA * m_b.matrix)
    basis = eig(combined).vectors
    if diagonal_in(basis):
        return basis

    logger.debug("Generic combination degenerate; block-diagonalising M_B inside M_A eigenspaces")
    dec_a = eig(m_a)
    blocks = []
    for group in dec_a.clusters(1e-8 * scale_a):
        w = dec_a.vectors[:, group]
        restricted = HermitianOperator.symmetrized(w.conj().T @ m_b.matrix @ w)
        blocks.append(w @ eig(restricted).vectors)
    basis = np.concatenate(blocks, axis=1)
    if not diagonal_in(basis):
        logger.error("Could not find a common eigenbasis of M_A and M_B")
        raise DecompositionError("M_A and M_B have no common eigenbasis within tolerance")
    return basis


def _select_product(mu_a: np.ndarray, mu_b: np.ndarray) -> Tuple[float, int, int, str]:
    """
    Pick the largest eigenvalue product, interchanging B's when the largest
    magnitude product is negative.
    """
    products = np.outer(mu_a, mu_b)
    i_pos, j_pos = np.unravel_index(int(np.argmax(products)), products.shape)
    i_neg, j_neg = np.unravel_index(int(np.argmin(products)), products.shape)
    best_pos = float(products[i_pos, j_pos])
    best_neg = -float(products[i_neg, j_neg])
    if best_pos >= best_neg:
        return max(best_pos, 0.0), int(i_pos), int(j_pos), AS_GIVEN
    return best_neg, int(i_neg), int(j_neg), SWAPPED


def incompatibility_report(s: BellScenario) -> IncompatibilityReport:
    """Commutator observables, their common-eigenvalue product mu and the predicted bound."""
    m_a = commutator_observable(s.a1.operator, s.a2.operator)
    m_b = commutator_observable(s.b1.operator, s.b2.operator)
    norm_ma = spectral_norm(m_a)
    norm_mb = spectral_norm(m_b)
    m_ab = HermitianOperator.symmetrized(m_a.matrix @ m_b.matrix, factor_dims=s.factor_dims)
    commuting_residual = matrix_norm(m_a.matrix @ m_b.matrix - m_b.matrix @ m_a.matrix)
    if commuting_residual > config.COMMUTATOR_TOL:
        logger.warning(f"[M_A, M_B] has norm {commuting_residual:.3e}")

    if s.is_tensor:
        local_ma = commutator_observable(s.local.a1.operator, s.local.a2.operator)
        local_mb = commutator_observable(s.local.b1.operator, s.local.b2.operator)
        mu_a_all = eig(local_ma).eigenvalues
        mu_b_all = eig(local_mb).eigenvalues
        mu, i, j, ordering = _select_product(mu_a_all, mu_b_all)
        mu_a, mu_b = float(mu_a_all[i]), float(mu_b_all[j])
    else:
        basis = common_eigenbasis(m_a, m_b)
        mu_a_all = np.real(np.einsum('ik,ij,jk->k', basis.conj(), m_a.matrix, basis))
        mu_b_all = np.real(np.einsum('ik,ij,jk->k', basis.conj(), m_b.matrix, basis))
        products = mu_a_all * mu_b_all
        k_pos, k_neg = int(np.argmax(products)), int(np.argmin(products))
        if products[k_pos] >= -products[k_neg]:
            mu, k, ordering = max(float(products[k_pos]), 0.0), k_pos, AS_GIVEN
        else:
            mu, k, ordering = -float(products[k_neg]), k_neg, SWAPPED
        mu_a, mu_b = float(mu_a_all[k]), float(mu_b_all[k])
    if ordering == SWAPPED:
        mu_b = -mu_b

    b_predicted = math.sqrt(1.0 + 0.25 * mu)
    eigen_norm = bell_norm(s).norm
    discrepancy = abs(eigen_norm - b_predicted)
    if discrepancy > 1e-9:
        if s.is_tensor:
            logger.error(f"Bound formula disagrees with eigen-solve by {discrepancy:.3e}")
            raise DecompositionError(
                f"Tensor scenario bound {b_predicted!r} disagrees with ||B|| = {eigen_norm!r}"
            )
        logger.warning(f"General scenario: predicted bound off eigen-solve by {discrepancy:.3e}")

    m_ab_vanishes = (spectral_norm(m_ab) <= config.COMMUTATOR_TOL
                     and norm_ma > config.COMMUTATOR_TOL and norm_mb > config.COMMUTATOR_TOL)
    if m_ab_vanishes:
        logger.info("M_A and M_B are both nonzero but their product vanishes; no violation possible")

    return IncompatibilityReport(
        m_a=m_a, m_b=m_b, m_ab=m_ab, norm_ma=norm_ma, norm_mb=norm_mb,
        mu=mu, mu_a=mu_a, mu_b=mu_b, b_predicted=b_predicted, ordering=ordering,
        structure=s.structure, m_ab_vanishes=m_ab_vanishes,
        commuting_residual=commuting_residual, eigen_norm=eigen_norm,
        bound_discrepancy=discrepancy,
    )


def _require_tensor(s: BellScenario, operation: str):
    if not s.is_tensor:
        raise StructureError(f"{operation} needs a tensor-structured scenario")


def local_commutator_norms(s: BellScenario) -> Tuple[float, float]:
    """Spectral norms of the local commutators [a1, a2] and [b1, b2]."""
    _require_tensor(s, "local_commutator_norms")
    norm_a = matrix_norm(commutator(s.local.a1.operator, s.local.a2.operator))
    norm_b = matrix_norm(commutator(s.local.b1.operator, s.local.b2.operator))
    return norm_a, norm_b


def quantum_bound(s: BellScenario) -> float:
    """b = sqrt(1 + 1/4 ||[a1, a2]|| ||[b1, b2]||) for tensor scenarios."""
    _require_tensor(s, "quantum_bound")
    norm_a, norm_b = local_commutator_norms(s)
    return math.sqrt(1.0 + 0.25 * norm_a * norm_b)


def extract_incompatibility(b_observed: float, norm_mb: float) -> float:
    """||[A1, A2]|| = 4 (b^2 - 1) / ||[B1, B2]||, with b clamped to at least 1."""
    return meter_reading(b_observed, norm_mb).value


def meter_reading(b_observed: float, norm_mb: float, b_stderr: float = 0.0) -> MeterReading:
    """
    Incompatibility of the A-pair read off a CHSH value through an auxiliary B-pair.

    The sign of b is a setting convention, so its magnitude is used.
    """
    if norm_mb <= config.COMMUTATOR_TOL:
        raise InvalidScenarioError(
            f"Auxiliary B-pair is compatible (||M_B|| = {norm_mb:.3e}); it cannot act as a meter"
        )
    b = abs(b_observed)
    clamped = b < 1.0
    if clamped:
        logger.warning(f"CHSH value {b!r} below the classical bound; meter clamped to 0")
        b = 1.0
    value = 4.0 * (b * b - 1.0) / norm_mb
    stderr = 8.0 * b * abs(b_stderr) / norm_mb
    return MeterReading(value=value, stderr=stderr, clamped=clamped)


def theorem1_check(s: BellScenario) -> Theorem1Result:
    """Local incompatibility of both pairs versus existence of a violating state."""
    _require_tensor(s, "theorem1_check")
    norm_a, norm_b = local_commutator_norms(s)
    locally_incompatible = norm_a > config.COMMUTATOR_TOL and norm_b > config.COMMUTATOR_TOL

    best = bell_norm(s)
    violation_exists = best.norm > 1.0 + config.COMMUTATOR_TOL

    witness = None
    witness_value = None
    if violation_exists:
        oriented = s.oriented(best.ordering)
        dec = eig(bell_operator(oriented))
        k = int(np.argmax(np.abs(dec.eigenvalues)))
        witness = PureState(dec.vectors[:, k], factor_dims=s.factor_dims)
        witness_value = chsh_correlation(oriented, witness)

    return Theorem1Result(
        locally_incompatible=locally_incompatible,
        violation_exists=violation_exists,
        agree=locally_incompatible == violation_exists,
        witness=witness,
        ordering=best.ordering,
        bell_norm=best.norm,
        witness_value=witness_value,
        norm_ma=norm_a,
        norm_mb=norm_b,
    )


def separable_square_witness(s: BellScenario) -> SeparableWitness:
    """
    Product state psi_A (x) psi_B of local commutator eigenvectors on which
    <B^2> = 1 + mu_A mu_B / 4 exceeds 1.
    """
    _require_tensor(s, "separable_square_witness")
    dec_a = eig(commutator_observable(s.local.a1.operator, s.local.a2.operator))
    dec_b = eig(commutator_observable(s.local.b1.operator, s.local.b2.operator))
    mu, i, j, ordering = _select_product(dec_a.eigenvalues, dec_b.eigenvalues)
    if mu <= config.COMMUTATOR_TOL:
        raise ConstructionError(
            "No positive product of local commutator eigenvalues, even after swapping B's"
        )

    oriented = s.oriented(ordering)
    mu_a = float(dec_a.eigenvalues[i])
    mu_b = float(dec_b.eigenvalues[j]) * (1.0 if ordering == AS_GIVEN else -1.0)
    psi_sep = tensor_states(PureState(dec_a.vectors[:, i]), PureState(dec_b.vectors[:, j]))
    b = bell_operator(oriented).matrix
    value = expectation(HermitianOperator.symmetrized(b @ b), psi_sep)
    return SeparableWitness(psi_sep=psi_sep, value=value, mu_a=mu_a, mu_b=mu_b, ordering=ordering)
