"""Randomised property scans over scenarios, commuting families and operators."""
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..config import config
from ..core.operators import commutator, matrix_norm, spectral_norm
from ..errors import DecompositionError
from ..utils import random_operators
from ..utils.rng import stream
from .chsh_engine import (
    BellScenario,
    bell_norm,
    bell_operator,
    incompatibility_report,
    landau_residual,
    landau_tolerance,
    quantum_bound,
    theorem1_check,
)
from .measurement_service import (
    chsh_functional,
    evaluate_bell_functional,
    joint_distribution,
    pairwise_implies_multiple_check,
    projectors,
)
from .spectral_service import max_state_from_square

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-9


class ScanService:
    def __init__(self, workers: Optional[int] = None, progress: Optional[bool] = None):
        """Initialize scan service."""
        self.workers = workers or config.WORKERS
        self.progress = sys.stderr.isatty() if progress is None else progress

    def run(self, job: Callable[[int], Dict[str, Any]], n: int, desc: str) -> List[Dict[str, Any]]:
        """Run job(index) for every index; results come back in index order."""
        logger.info(f"Starting {desc} scan of {n} items with {self.workers} worker(s)")
        with tqdm(total=n, desc=desc, disable=not self.progress, file=sys.stderr) as bar:
            if self.workers > 1 and n > 1:
                results: List[Optional[Dict[str, Any]]] = [None] * n
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {pool.submit(job, k): k for k in range(n)}
                    for future, k in futures.items():
                        results[k] = future.result()
                        bar.update(1)
            else:
                results = []
                for k in range(n):
                    results.append(job(k))
                    bar.update(1)
        logger.info(f"Finished {desc} scan")
        return results


def _pick(rng: np.random.Generator, choices: Sequence[int]) -> int:
    return int(rng.choice(np.asarray(choices)))


def landau_item(seed: int, index: int, dims: Sequence[int] = (2, 3, 4)) -> Dict[str, Any]:
    """Landau residual of one random scenario; odd indices are general, even are tensor."""
    rng = stream(seed, 'scenario', index)
    d_a, d_b = _pick(rng, dims), _pick(rng, dims)
    if index % 2:
        s = random_operators.random_general_scenario(rng, d_a, d_b)
    else:
        s = random_operators.random_tensor_scenario(rng, d_a, d_b)
    residual = landau_residual(s)
    tolerance = landau_tolerance(s)
    row = {
        'index': index,
        'structure': 'general' if index % 2 else 'tensor',
        'dims': [d_a, d_b],
        'landau_residual': residual,
        'passed': residual <= tolerance,
    }
    if _has_commuting_pair(s):
        norm = bell_norm(s).norm
        row['commuting_pair'] = True
        row['bell_norm'] = norm
        row['passed'] = row['passed'] and norm <= 1.0 + BOUND_TOL
    return row


def _has_commuting_pair(s: BellScenario) -> bool:
    return (matrix_norm(commutator(s.a1.operator, s.a2.operator)) <= config.COMMUTATOR_TOL
            or matrix_norm(commutator(s.b1.operator, s.b2.operator)) <= config.COMMUTATOR_TOL)


def theorem1_item(seed: int, index: int, dims: Sequence[int] = (2, 3)) -> Dict[str, Any]:
    """Theorem check and bound formula for one random tensor scenario."""
    rng = stream(seed, 'scenario', index)
    d_a, d_b = _pick(rng, dims), _pick(rng, dims)
    s = random_operators.random_tensor_scenario(rng, d_a, d_b)
    result = theorem1_check(s)
    bound = quantum_bound(s)
    bound_error = abs(result.bell_norm - bound)
    try:
        report = incompatibility_report(s)
        predicted = report.b_predicted
    except DecompositionError:
        predicted = None
    return {
        'index': index,
        'dims': [d_a, d_b],
        'norm_MA': result.norm_ma,
        'norm_MB': result.norm_mb,
        'locally_incompatible': result.locally_incompatible,
        'violation_exists': result.violation_exists,
        'agree': result.agree,
        'bell_norm': result.bell_norm,
        'quantum_bound': bound,
        'bound_error': bound_error,
        'b_predicted': predicted,
        'passed': result.agree and bound_error <= BOUND_TOL and predicted is not None,
    }


def jpd_family_item(seed: int, index: int, dim: int, max_m: int) -> Dict[str, Any]:
    """2 => m check on one random commuting family of m = 2..max_m observables."""
    rng = stream(seed, 'family', index)
    m = 2 + index % (max_m - 1)
    values = (-1.0, 1.0) if index % 2 == 0 else (-1.0, 0.0, 1.0)
    family = [projectors(x) for x in random_operators.random_commuting_family(rng, dim, m, values)]
    rho = random_operators.random_density(rng, dim)
    check = pairwise_implies_multiple_check(family, rho)

    jd = joint_distribution(family, rho)
    order = list(range(m))[::-1]
    reversed_jd = joint_distribution([family[i] for i in order], rho)
    drift = max(abs(reversed_jd.probability(outcome) - p)
                for outcome, p in jd.permuted(order).table.items())
    minimum = float(np.min(jd.probabilities()))
    return {
        'index': index,
        'm': m,
        'outcomes': len(jd.table),
        'min_probability': minimum,
        'permutation_drift': drift,
        'passed': bool(check) and drift <= 1e-9 and minimum >= 0.0,
        'diagnostic': check.diagnostic,
    }


def all_commuting_item(seed: int, index: int, dim: int) -> Dict[str, Any]:
    """CHSH functional on four mutually commuting observables never exceeds its classical bound."""
    rng = stream(seed, 'scenario', index)
    s = random_operators.random_all_commuting_scenario(rng, dim)
    rho = random_operators.random_density(rng, dim)
    groups = [[projectors(s.a1.operator), projectors(s.a2.operator)],
              [projectors(s.b1.operator), projectors(s.b2.operator)]]
    value = evaluate_bell_functional(chsh_functional(), groups, rho)
    return {
        'index': index,
        'value': value.value,
        'classical_bound': value.classical_bound,
        'violated': value.violated,
        'bell_norm': spectral_norm(bell_operator(s)),
        'passed': not value.violated,
    }


def max_state_item(seed: int, index: int, dims: Sequence[int] = (2, 3, 4, 6, 8)) -> Dict[str, Any]:
    """Value of the max-state built from C^2 against ||C|| for one random Hermitian C."""
    rng = stream(seed, 'scenario', index)
    d = _pick(rng, dims)
    c = random_operators.random_hermitian(rng, d)
    result = max_state_from_square(c)
    norm = spectral_norm(c)
    error = abs(result.value - norm)
    return {
        'index': index,
        'dim': d,
        'value': result.value,
        'spectral_norm': norm,
        'error': error,
        'passed': error <= 1e-9,
    }
