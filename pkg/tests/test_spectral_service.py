"""
Test eigenvector construction from squares
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.core.operators import HermitianOperator, PureState, expectation, pauli, spectral_norm
from src.errors import ConstructionError
from src.services.chsh_engine import bell_operator, separable_square_witness
from src.services.spectral_service import c_entangle, max_state_from_square, square_vs_linear_max_states
from src.utils.random_operators import random_hermitian
from src.utils.rng import stream

SQRT2 = math.sqrt(2.0)


def test_c_entangle_pauli_x():
    pair = c_entangle(pauli('X'), PureState.basis(2, 0))
    assert_allclose(pair.lam, 1.0)
    assert_allclose(np.abs(pair.v.amplitudes), [0, 1], atol=1e-12)
    assert_allclose(expectation(pauli('X'), pair.psi_plus), 1.0, atol=1e-12)
    assert_allclose(expectation(pauli('X'), pair.psi_minus), -1.0, atol=1e-12)


def test_c_entangle_rejects_eigenvector_of_c():
    with pytest.raises(ConstructionError):
        c_entangle(pauli('Z'), PureState.basis(2, 0))


def test_c_entangle_rejects_non_eigenvector_of_square():
    c = HermitianOperator(np.diag([1.0, 2.0]))
    with pytest.raises(ConstructionError):
        c_entangle(c, PureState([1, 1], normalize=True))


def test_c_entangle_rejects_kernel():
    c = HermitianOperator(np.diag([0.0, 1.0]))
    with pytest.raises(ConstructionError):
        c_entangle(c, PureState.basis(2, 0))


def test_max_state_pauli_x():
    result = max_state_from_square(pauli('X'))
    assert_allclose(result.value, 1.0, atol=1e-12)
    assert_allclose(result.expectation, 1.0, atol=1e-12)


def test_max_state_prefers_positive_eigenvalue():
    result = max_state_from_square(HermitianOperator(-pauli('Z').matrix))
    assert_allclose(result.expectation, 1.0, atol=1e-12)
    assert_allclose(abs(result.phi.amplitudes[1]), 1.0, atol=1e-12)


def test_max_state_negative_only():
    result = max_state_from_square(HermitianOperator(np.diag([-3.0, 1.0])))
    assert result.sign == -1
    assert_allclose(result.value, 3.0, atol=1e-12)
    assert_allclose(result.expectation, -3.0, atol=1e-12)


def test_max_state_of_zero():
    with pytest.raises(ConstructionError):
        max_state_from_square(HermitianOperator.zero(3))


def test_bell_operator_max_state(optimal):
    b = bell_operator(optimal)
    result = max_state_from_square(b)
    assert abs(result.expectation - SQRT2) < 1e-9
    assert abs(result.value - spectral_norm(b)) < 1e-9


def test_separable_witness_builds_bell_maximiser(optimal):
    witness = separable_square_witness(optimal)
    b = bell_operator(optimal.oriented(witness.ordering))
    b2 = HermitianOperator.symmetrized(b.matrix @ b.matrix)
    assert abs(expectation(b2, witness.psi_sep) - 2.0) < 1e-9
    pair = c_entangle(b, witness.psi_sep)
    assert abs(expectation(b, pair.psi_plus) - SQRT2) < 1e-9
    assert abs(expectation(b, pair.psi_minus) + SQRT2) < 1e-9


def test_square_and_linear_max_states_differ(optimal):
    witness = separable_square_witness(optimal)
    b = bell_operator(optimal.oriented(witness.ordering))
    comparison = square_vs_linear_max_states(b, witness.psi_sep)
    assert not comparison.same
    assert comparison.residual < 1e-9
    assert np.sum(np.abs(comparison.decomposition) > 1e-6) == 2
    assert_allclose(np.linalg.norm(comparison.decomposition), 1.0, atol=1e-9)
    assert abs(expectation(b, comparison.phi_lin) - SQRT2) < 1e-9


def test_square_vs_linear_rejects_foreign_state(optimal):
    b = bell_operator(optimal)
    with pytest.raises(ConstructionError):
        square_vs_linear_max_states(b, PureState.basis(4, 0))


def test_random_hermitian_max_states():
    for k in range(100):
        rng = stream(13, 'scenario', k)
        c = random_hermitian(rng, 2 + k % 7)
        result = max_state_from_square(c)
        assert abs(result.value - spectral_norm(c)) < 1e-9
        assert abs(abs(result.expectation) - result.value) < 1e-9


@pytest.mark.slow
def test_random_hermitian_max_states_500():
    for k in range(500):
        rng = stream(17, 'scenario', k)
        c = random_hermitian(rng, 2 + k % 7)
        assert abs(max_state_from_square(c).value - spectral_norm(c)) < 1e-9
