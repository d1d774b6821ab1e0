"""
Test JSON codecs and presets
"""
import json

import numpy as np
import pytest

from src.core.operators import DensityOperator, pauli
from src.errors import DimensionError, FormatError, InvalidScenarioError
from src.services.chsh_engine import BellScenario
from src.utils import presets
from src.utils.random_operators import random_hermitian
from src.utils.rng import stream
from src.utils.serialization import (
    any_state_from_dict,
    density_to_dict,
    load_json_file,
    operator_from_dict,
    operator_to_dict,
    scenario_from_dict,
    scenario_to_dict,
    state_from_dict,
    state_to_dict,
)


def test_operator_round_trip_is_bit_exact():
    x = random_hermitian(stream(0, 'scenario', 0), 5)
    restored = operator_from_dict(json.loads(json.dumps(operator_to_dict(x))))
    assert np.array_equal(restored.matrix, x.matrix)


def test_state_format(singlet):
    data = state_to_dict(singlet)
    assert data['dim'] == 4
    assert set(data) == {'dim', 're', 'im'}
    assert np.array_equal(state_from_dict(data).amplitudes, singlet.amplitudes)


def test_density_wrapper():
    rho = presets.state('maximally-mixed-4')
    restored = any_state_from_dict(density_to_dict(rho))
    assert isinstance(restored, DensityOperator)
    assert np.array_equal(restored.matrix, rho.matrix)


def test_tensor_scenario(optimal):
    data = json.loads(json.dumps(scenario_to_dict(optimal)))
    assert data['structure'] == {'tensor': [2, 2]}
    restored = scenario_from_dict(data)
    assert restored.is_tensor
    assert np.array_equal(restored.a2.matrix, optimal.a2.matrix)


def test_general_scenario():
    s = presets.zero_product_mab()
    restored = scenario_from_dict(scenario_to_dict(s))
    assert restored.structure == 'general'
    assert np.array_equal(restored.b1.matrix, s.b1.matrix)


def test_tensor_scenario_with_inconsistent_global(optimal):
    data = scenario_to_dict(optimal)
    data['A1'] = scenario_to_dict(optimal)['B1']
    with pytest.raises(InvalidScenarioError):
        scenario_from_dict(data)


def test_missing_observable():
    data = scenario_to_dict(presets.zero_product_mab())
    del data['B2']
    with pytest.raises(FormatError):
        scenario_from_dict(data)


def test_declared_dim_mismatch():
    with pytest.raises(FormatError):
        operator_from_dict({'dim': 3, 're': [[1, 0], [0, 1]], 'im': [[0, 0], [0, 0]]})


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"structure": "general", ')
    with pytest.raises(FormatError):
        load_json_file(str(path))


def test_presets_are_valid():
    for name in presets.SCENARIOS:
        assert isinstance(presets.scenario(name), BellScenario)
    for name in presets.STATES:
        presets.state(name)
    for name in presets.COVARIANCES:
        assert presets.covariance(name).trace > 0
    with pytest.raises(ValueError):
        presets.scenario('no-such-scenario')


def test_qubit_observables_are_paulis():
    for name in ('I', 'X', 'Y', 'Z'):
        assert np.array_equal(presets.observable(name).matrix, pauli(name).matrix)


def test_observables_in_higher_dimension():
    x = presets.observable('X', 3).matrix
    assert x.shape == (3, 3)
    assert np.array_equal(x[:2, :2], pauli('X').matrix)
    assert np.all(x[2] == 0) and np.all(x[:, 2] == 0)
    assert np.array_equal(presets.observable('I', 3).matrix, np.eye(3))
    assert np.array_equal(np.diag(presets.observable('N', 4).matrix).real, [0, 1, 2, 3])


def test_two_level_observable_on_one_level():
    assert presets.observable('I', 1).d == 1
    with pytest.raises(DimensionError):
        presets.observable('X', 1)


def test_functional_presets():
    assert 'mermin-3' not in presets.PRESET_NAMES['scenarios']
    assert presets.PRESET_NAMES['functionals'] == ('mermin-3',)
    preset = presets.functional('mermin-3')
    assert preset.quantum_value == 4.0
    assert preset.state.d == 8
    with pytest.raises(ValueError):
        presets.functional('mermin-4')
