"""
Named scenarios, states, covariances, observables and Bell functionals.

Every regime the command-line tools exercise is reachable by name, so no
matrices have to be written by hand for the standard checks.
"""
import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from ..core.operators import DensityOperator, HermitianOperator, PureState, pauli, tensor_product
from ..errors import DimensionError
from ..services.chsh_engine import BellScenario
from ..services.field_service import CovarianceOperator
from ..services.measurement_service import BellFunctional, ProjectorFamily, mermin_functional, projectors
from .random_operators import random_psd
from .rng import stream


def _optimal_b_pair():
    z, x = pauli('Z').matrix, pauli('X').matrix
    return (HermitianOperator.symmetrized((z + x) / math.sqrt(2.0)),
            HermitianOperator.symmetrized((z - x) / math.sqrt(2.0)))


def optimal_qubit() -> BellScenario:
    """A1 = Z, A2 = X, B1,2 = (Z +- X)/sqrt(2); ||B|| = sqrt(2)."""
    b1, b2 = _optimal_b_pair()
    return BellScenario.tensor(pauli('Z'), pauli('X'), b1, b2)


def commuting_a() -> BellScenario:
    b1, b2 = _optimal_b_pair()
    return BellScenario.tensor(pauli('Z'), pauli('Z'), b1, b2)


def commuting_b() -> BellScenario:
    b1, _ = _optimal_b_pair()
    return BellScenario.tensor(pauli('Z'), pauli('X'), b1, b1)


def zero_product_mab() -> BellScenario:
    """
    Two-block scenario on C^4 where the A-pair only acts on the first block and the
    B-pair only on the second: M_A and M_B are nonzero while M_A M_B = 0.
    """
    z, x, eye = pauli('Z').matrix, pauli('X').matrix, np.eye(2)
    zeros = np.zeros((2, 2))

    def block(top, bottom):
        return np.block([[top, zeros], [zeros, bottom]])

    return BellScenario.general(
        block(z, eye), block(x, eye), block(eye, z), block(eye, x),
    )


SCENARIOS = {
    'optimal-qubit': optimal_qubit,
    'commuting-A': commuting_a,
    'commuting-B': commuting_b,
    'zero-product-MAB': zero_product_mab,
}


def scenario(name: str) -> BellScenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ValueError(f"Unknown scenario preset: {name}")


def _state(amplitudes, factor_dims) -> PureState:
    return PureState(np.asarray(amplitudes, dtype=complex), factor_dims=factor_dims, normalize=True)


def singlet() -> PureState:
    return _state([0, 1, -1, 0], (2, 2))


def phi_plus() -> PureState:
    return _state([1, 0, 0, 1], (2, 2))


def product_00() -> PureState:
    return _state([1, 0, 0, 0], (2, 2))


def ghz_3() -> PureState:
    v = np.zeros(8)
    v[0] = v[7] = 1.0
    return _state(v, (2, 2, 2))


STATES = {
    'singlet': singlet,
    'phi-plus': phi_plus,
    'product-00': product_00,
    'ghz-3': ghz_3,
    'maximally-mixed-4': lambda: DensityOperator.maximally_mixed(4),
}


def state(name: str):
    try:
        return STATES[name]()
    except KeyError:
        raise ValueError(f"Unknown state preset: {name}")


def random_psd_3(seed: int = 0) -> CovarianceOperator:
    return CovarianceOperator(random_psd(stream(seed, 'scenario', 3), 3))


COVARIANCES = {
    'identity-2': lambda: CovarianceOperator(HermitianOperator.identity(2)),
    'thermal-2': lambda: CovarianceOperator(HermitianOperator(np.diag([0.7, 0.3]))),
    'random-psd-3': random_psd_3,
}


def covariance(name: str) -> CovarianceOperator:
    try:
        return COVARIANCES[name]()
    except KeyError:
        raise ValueError(f"Unknown covariance preset: {name}")


OBSERVABLES = ('I', 'X', 'Y', 'Z', 'N')


def observable(name: str, d: int = 2) -> HermitianOperator:
    """
    Observable preset on C^d.

    X, Y and Z act on the first two levels like the Pauli matrices and vanish on
    the rest (the Gell-Mann generators of that pair); for d = 2 they are the
    Pauli matrices. I is the identity and N = diag(0, 1, ..., d - 1).
    """
    if name not in OBSERVABLES:
        raise ValueError(f"Unknown observable preset: {name}")
    if d < 1:
        raise DimensionError(f"Observable dimension must be positive, got {d}")
    if name == 'I':
        return HermitianOperator.identity(d)
    if name == 'N':
        return HermitianOperator(np.diag(np.arange(d, dtype=float)))
    if d < 2:
        raise DimensionError(f"Observable {name} needs at least two levels, got d = {d}")
    m = np.zeros((d, d), dtype=complex)
    m[:2, :2] = pauli(name).matrix
    return HermitianOperator(m)


def _on_qubit(x: HermitianOperator, k: int, n: int) -> HermitianOperator:
    result = None
    for q in range(n):
        factor = x if q == k else pauli('I')
        result = factor if result is None else tensor_product(result, factor)
    return HermitianOperator(result.matrix)


def mermin_3() -> List[List[ProjectorFamily]]:
    """Groups [X_k, Y_k] on each of three qubits; pair with ghz_3 and mermin_functional."""
    return [[projectors(_on_qubit(pauli(name), k, 3)) for name in ('X', 'Y')] for k in range(3)]


@dataclass(frozen=True, eq=False)
class FunctionalPreset:
    """A Bell functional with its measurement groups, a state and the value it attains."""
    functional: BellFunctional
    groups: List[List[ProjectorFamily]]
    state: PureState
    quantum_value: float


def mermin_ghz() -> FunctionalPreset:
    """Mermin functional on GHZ with X/Y settings per qubit: 4 against the classical 2."""
    return FunctionalPreset(mermin_functional(), mermin_3(), ghz_3(), 4.0)


FUNCTIONALS = {
    'mermin-3': mermin_ghz,
}


def functional(name: str) -> FunctionalPreset:
    try:
        return FUNCTIONALS[name]()
    except KeyError:
        raise ValueError(f"Unknown Bell functional preset: {name}")


PRESET_NAMES: Dict[str, tuple] = {
    'scenarios': tuple(SCENARIOS),
    'states': tuple(STATES),
    'covariances': tuple(COVARIANCES),
    'observables': OBSERVABLES,
    'functionals': tuple(FUNCTIONALS),
}
