"""
Random operators, states and scenarios for scans and property tests.

Dichotomic observables are Haar-random unitaries conjugating diagonal +-1
matrices; Haar unitaries come from the QR factorisation of a complex Gaussian
matrix with the phases of R's diagonal folded back into Q.
"""
from typing import List, Optional, Sequence

import numpy as np

from ..core.operators import DensityOperator, HermitianOperator
from ..services.chsh_engine import BellScenario


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex normal entries, E|z|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed unitary from the QR factorisation of a complex Gaussian matrix."""
    q, r = np.linalg.qr(complex_normal(rng, (d, d)))
    diagonal = np.diag(r)
    return q * (diagonal / np.abs(diagonal))


def random_hermitian(rng: np.random.Generator, d: int) -> HermitianOperator:
    """Random Hermitian operator (A + A^dagger)/2 with complex Gaussian entries."""
    g = complex_normal(rng, (d, d))
    return HermitianOperator.symmetrized(g)


def random_psd(rng: np.random.Generator, d: int, rank: Optional[int] = None) -> HermitianOperator:
    """Random positive semidefinite operator G G^dagger of the given rank."""
    g = complex_normal(rng, (d, rank or d))
    return HermitianOperator.symmetrized(g @ g.conj().T)


def random_density(rng: np.random.Generator, d: int, rank: Optional[int] = None) -> DensityOperator:
    """Random density operator of the given rank, normalised to unit trace."""
    m = random_psd(rng, d, rank).matrix
    return DensityOperator(HermitianOperator.symmetrized(m / np.real(np.trace(m))))


def random_dichotomic(rng: np.random.Generator, d: int, negatives: Optional[int] = None) -> HermitianOperator:
    """
    U diag(+-1) U^dagger with Haar U.

    Without an explicit signature the observable is non-scalar four times out of five.
    """
    if negatives is None:
        if d > 1 and rng.random() < 0.8:
            negatives = int(rng.integers(1, d))
        else:
            negatives = int(rng.choice([0, d]))
    signs = np.ones(d)
    signs[:negatives] = -1.0
    u = haar_unitary(rng, d)
    return HermitianOperator.symmetrized((u * signs) @ u.conj().T)


def random_tensor_scenario(rng: np.random.Generator, d_a: int, d_b: int,
                           commuting_probability: float = 0.15) -> BellScenario:
    """Random local dichotomic pairs; each pair is forced to commute with the given probability."""
    a1 = random_dichotomic(rng, d_a)
    a2 = a1 if rng.random() < commuting_probability else random_dichotomic(rng, d_a)
    b1 = random_dichotomic(rng, d_b)
    b2 = b1 if rng.random() < commuting_probability else random_dichotomic(rng, d_b)
    return BellScenario.tensor(a1, a2, b1, b2)


def random_general_scenario(rng: np.random.Generator, d_a: int, d_b: int,
                            commuting_probability: float = 0.15) -> BellScenario:
    """A tensor scenario hidden by a global Haar rotation, stored without factor structure."""
    s = random_tensor_scenario(rng, d_a, d_b, commuting_probability)
    u = haar_unitary(rng, d_a * d_b)

    def rotate(x: HermitianOperator) -> HermitianOperator:
        return HermitianOperator.symmetrized(u @ x.matrix @ u.conj().T)

    return BellScenario.general(*(rotate(x.operator) for x in (s.a1, s.a2, s.b1, s.b2)))


def random_commuting_pair_scenario(rng: np.random.Generator, d_a: int, d_b: int,
                                   pair: str = 'A', tensor: bool = True) -> BellScenario:
    """Scenario in which the named pair commutes (A2 = A1 or B2 = B1)."""
    a1 = random_dichotomic(rng, d_a)
    a2 = a1 if pair == 'A' else random_dichotomic(rng, d_a)
    b1 = random_dichotomic(rng, d_b)
    b2 = b1 if pair == 'B' else random_dichotomic(rng, d_b)
    s = BellScenario.tensor(a1, a2, b1, b2)
    if tensor:
        return s
    u = haar_unitary(rng, d_a * d_b)
    return BellScenario.general(*(
        HermitianOperator.symmetrized(u @ x.matrix @ u.conj().T) for x in (s.a1, s.a2, s.b1, s.b2)
    ))


def random_commuting_family(rng: np.random.Generator, d: int, m: int,
                            values: Sequence[float] = (-1.0, 1.0)) -> List[HermitianOperator]:
    """m observables diagonal in one shared Haar basis, with degenerate spectra drawn from values."""
    u = haar_unitary(rng, d)
    family = []
    for _ in range(m):
        spectrum = rng.choice(np.asarray(values, dtype=float), size=d)
        family.append(HermitianOperator.symmetrized((u * spectrum) @ u.conj().T))
    return family


def random_all_commuting_scenario(rng: np.random.Generator, d: int) -> BellScenario:
    """Four dichotomic observables diagonal in one shared basis (a jpd exists for all of them)."""
    u = haar_unitary(rng, d)
    observables = []
    for _ in range(4):
        signs = rng.choice(np.array([-1.0, 1.0]), size=d)
        observables.append(HermitianOperator.symmetrized((u * signs) @ u.conj().T))
    return BellScenario.general(*observables)
