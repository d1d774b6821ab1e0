"""JSON codecs for operators, states, scenarios and config files."""
import json
import logging
from typing import Any, Dict

import numpy as np

from ..core.operators import DensityOperator, HermitianOperator, PureState
from ..errors import FormatError, InvalidScenarioError
from ..services.chsh_engine import BellScenario, GENERAL, TENSOR

logger = logging.getLogger(__name__)

SCENARIO_KEYS = ('A1', 'A2', 'B1', 'B2')


def operator_to_dict(x: HermitianOperator) -> Dict[str, Any]:
    """{dim, factor_dims, re, im} with exact float entries."""
    factor_dims = x.dim.factor_dims
    return {
        'dim': x.d,
        'factor_dims': list(factor_dims) if factor_dims is not None else None,
        're': np.real(x.matrix).tolist(),
        'im': np.imag(x.matrix).tolist(),
    }


def _complex_array(data: Dict[str, Any], what: str) -> np.ndarray:
    try:
        re = np.asarray(data['re'], dtype=float)
        im = np.asarray(data.get('im', np.zeros_like(re)), dtype=float)
    except KeyError as e:
        raise FormatError(f"{what} is missing field {e}")
    except (TypeError, ValueError) as e:
        raise FormatError(f"{what} has non-numeric entries: {e}")
    if re.shape != im.shape:
        raise FormatError(f"{what} real and imaginary parts differ in shape")
    return re + 1j * im


def operator_from_dict(data: Dict[str, Any]) -> HermitianOperator:
    """HermitianOperator from {dim, factor_dims, re, im}; the declared dim must match."""
    if not isinstance(data, dict):
        raise FormatError("Operator must be a JSON object")
    m = _complex_array(data, "Operator")
    if 'dim' in data and (m.ndim != 2 or m.shape[0] != data['dim']):
        raise FormatError(f"Operator declares dim {data['dim']} but has shape {m.shape}")
    return HermitianOperator(m, factor_dims=data.get('factor_dims'))


def state_to_dict(psi: PureState) -> Dict[str, Any]:
    """{dim, re, im} with exact float amplitudes."""
    return {
        'dim': psi.d,
        're': np.real(psi.amplitudes).tolist(),
        'im': np.imag(psi.amplitudes).tolist(),
    }


def state_from_dict(data: Dict[str, Any], factor_dims=None) -> PureState:
    """PureState from {dim, re, im}."""
    if not isinstance(data, dict):
        raise FormatError("State must be a JSON object")
    v = _complex_array(data, "State")
    if 'dim' in data and (v.ndim != 1 or v.shape[0] != data['dim']):
        raise FormatError(f"State declares dim {data['dim']} but has shape {v.shape}")
    return PureState(v, factor_dims=factor_dims)


def density_to_dict(rho: DensityOperator) -> Dict[str, Any]:
    """Mixed state wrapped as {"density": operator}."""
    return {'density': operator_to_dict(rho.operator)}


def any_state_from_dict(data: Dict[str, Any], factor_dims=None):
    """A pure state, or a density operator when wrapped as {"density": operator}."""
    if isinstance(data, dict) and 'density' in data:
        return DensityOperator(operator_from_dict(data['density']))
    return state_from_dict(data, factor_dims=factor_dims)


def scenario_to_dict(s: BellScenario) -> Dict[str, Any]:
    """Scenario as JSON, with local observables for tensor structure."""
    data = {'structure': s.structure}
    for key, x in zip(SCENARIO_KEYS, (s.a1, s.a2, s.b1, s.b2)):
        data[key] = operator_to_dict(x.operator)
    if s.local is not None:
        data['local'] = {
            key: operator_to_dict(x.operator)
            for key, x in zip(SCENARIO_KEYS, (s.local.a1, s.local.a2, s.local.b1, s.local.b2))
        }
    data['b_order'] = s.b_order
    return data


def scenario_from_dict(data: Dict[str, Any]) -> BellScenario:
    """
    Decode a scenario. Tensor scenarios are rebuilt from their local observables;
    global observables, when present, must match the lifted ones.
    """
    if not isinstance(data, dict):
        raise FormatError("Scenario must be a JSON object")
    structure = data.get('structure', GENERAL)

    if structure == GENERAL:
        try:
            observables = [operator_from_dict(data[key]) for key in SCENARIO_KEYS]
        except KeyError as e:
            raise FormatError(f"General scenario is missing observable {e}")
        return BellScenario.general(*observables)

    if isinstance(structure, dict) and TENSOR in structure:
        local = data.get('local')
        if not isinstance(local, dict):
            raise FormatError("Tensor scenario needs a 'local' object with A1, A2, B1, B2")
        try:
            observables = [operator_from_dict(local[key]) for key in SCENARIO_KEYS]
        except KeyError as e:
            raise FormatError(f"Tensor scenario is missing local observable {e}")
        d_a, d_b = (int(v) for v in structure[TENSOR])
        if observables[0].d != d_a or observables[2].d != d_b:
            raise FormatError(f"Local observables do not match tensor structure {[d_a, d_b]}")
        s = BellScenario.tensor(*observables)
        for key, x in zip(SCENARIO_KEYS, (s.a1, s.a2, s.b1, s.b2)):
            if key in data and np.max(np.abs(operator_from_dict(data[key]).matrix - x.matrix)) > 1e-12:
                raise InvalidScenarioError(f"Global {key} does not equal its lifted local observable")
        return s

    raise FormatError(f"Unknown scenario structure {structure!r}")


def load_json_file(path: str) -> Any:
    """Parse a JSON file; syntax errors become FormatError with the position."""
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Could not parse {path}: {e}")
        raise FormatError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    except OSError as e:
        raise FormatError(f"Could not read {path}: {e.strerror}")
