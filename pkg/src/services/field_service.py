"""
Classical Gaussian random fields whose covariance, normalised by trace,
plays the role of a density operator.

Fields are mode-truncated: the field space is C^d with d at most the
configured dimension cap.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

import numpy as np

from ..config import config
from ..core.operators import DensityOperator, HermitianOperator
from ..errors import CovarianceError, DimensionError, SamplingError
from ..utils.rng import chunk_sizes, stream

logger = logging.getLogger(__name__)

TRUNCATION = 'mode-truncated'


class CovarianceOperator:
    """Positive semidefinite Hermitian covariance of a complex random field."""

    def __init__(self, operator):
        if not isinstance(operator, HermitianOperator):
            operator = HermitianOperator(operator)
        eigenvalues = np.linalg.eigvalsh(operator.matrix)
        if eigenvalues.size and float(eigenvalues[0]) < -config.DENSITY_TOL:
            raise CovarianceError(
                f"Covariance is not positive semidefinite: eigenvalue {float(eigenvalues[0]):.3e}"
            )
        self.operator = operator

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def d(self) -> int:
        return self.operator.d

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.operator.matrix)))

    def factor(self) -> np.ndarray:
        """U Lambda^(1/2) with B = U Lambda U^dagger; tiny negative eigenvalues are clipped."""
        values, vectors = np.linalg.eigh(self.operator.matrix)
        return vectors * np.sqrt(np.clip(values, 0.0, None))


@dataclass(frozen=True)
class FieldSample:
    phi: np.ndarray
    omega_index: int


@dataclass(frozen=True, eq=False)
class FieldEnsemble:
    """n seeded field draws stored as rows of `fields`."""
    model: CovarianceOperator
    seed: int
    fields: np.ndarray

    @property
    def n(self) -> int:
        return int(self.fields.shape[0])

    @property
    def samples(self) -> Iterator[FieldSample]:
        for k in range(self.n):
            yield FieldSample(phi=self.fields[k], omega_index=k)


@dataclass(frozen=True, eq=False)
class QuadraticFormAverage:
    empirical: float
    theoretical: float
    stderr: float
    z: float


@dataclass(frozen=True, eq=False)
class EquivalenceCheck:
    passed: bool
    empirical: float
    quantum_prediction: float
    stderr: float
    z: float
    under_sampled: bool


def density_from_covariance(b: CovarianceOperator) -> DensityOperator:
    """rho = B / Tr B."""
    trace = b.trace
    if trace <= 1e-12:
        raise CovarianceError(f"Covariance trace {trace:.3e} is zero; no density operator")
    return DensityOperator(HermitianOperator.symmetrized(b.matrix / trace))


def sample_field(b: CovarianceOperator, seed: int, n: int, workers: int = 1) -> FieldEnsemble:
    """
    n circularly-symmetric complex Gaussian fields with E[phi phi^dagger] = B,
    drawn as phi = U Lambda^(1/2) xi with xi standard complex normal.
    """
    if n < 0:
        raise SamplingError("Sample count must be nonnegative")
    factor = b.factor()
    d = b.d
    sizes = chunk_sizes(n)

    def draw(index: int) -> np.ndarray:
        rng = stream(seed, 'field', index)
        xi = (rng.standard_normal((sizes[index], d)) + 1j * rng.standard_normal((sizes[index], d))) / math.sqrt(2.0)
        return xi @ factor.T

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(len(sizes))))
    else:
        parts = [draw(k) for k in range(len(sizes))]

    fields = np.concatenate(parts, axis=0) if parts else np.zeros((0, d), dtype=complex)
    fields.setflags(write=False)
    logger.debug(f"Sampled {n} fields of dimension {d} (seed={seed})")
    return FieldEnsemble(model=b, seed=seed, fields=fields)


def quadratic_form_values(e: FieldEnsemble, a: HermitianOperator) -> np.ndarray:
    """f_A(phi) = <phi|A|phi> for every draw."""
    if a.d != e.model.d:
        raise DimensionError(f"Observable dimension {a.d} does not match field dimension {e.model.d}")
    return np.real(np.einsum('ni,ij,nj->n', e.fields.conj(), a.matrix, e.fields))


def _z(diff: float, stderr: float) -> float:
    if stderr > 0:
        return diff / stderr
    return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)


def quadratic_form_average(e: FieldEnsemble, a: HermitianOperator) -> QuadraticFormAverage:
    """Empirical mean of f_A against Tr(B A)."""
    if e.n == 0:
        raise SamplingError("Cannot average over an empty ensemble")
    values = quadratic_form_values(e, a)
    empirical = float(np.mean(values))
    theoretical = float(np.real(np.trace(e.model.matrix @ a.matrix)))
    stderr = float(np.std(values, ddof=1) / math.sqrt(e.n)) if e.n > 1 else 0.0
    return QuadraticFormAverage(empirical=empirical, theoretical=theoretical,
                                stderr=stderr, z=_z(empirical - theoretical, stderr))


def average_equivalence_check(b: CovarianceOperator, a: HermitianOperator, e: FieldEnsemble,
                              threshold: float = None) -> EquivalenceCheck:
    """
    Field average of f_A against Tr(B) Tr(rho A): the descriptive and observational
    averages must agree up to the energy normalisation.
    """
    threshold = config.PASS_Z if threshold is None else threshold
    average = quadratic_form_average(e, a)
    rho = density_from_covariance(b)
    prediction = b.trace * float(np.real(np.trace(rho.matrix @ a.matrix)))
    z = _z(average.empirical - prediction, average.stderr)
    under_sampled = e.n < config.MIN_FIELD_SAMPLES
    if under_sampled:
        logger.warning(f"Ensemble of {e.n} fields is under-sampled")
    return EquivalenceCheck(passed=abs(z) <= threshold, empirical=average.empirical,
                            quantum_prediction=prediction, stderr=average.stderr, z=z,
                            under_sampled=under_sampled)


def field_energy_check(e: FieldEnsemble) -> QuadraticFormAverage:
    """Mean field energy E||phi||^2 against Tr B."""
    return quadratic_form_average(e, HermitianOperator.identity(e.model.d))


def empirical_covariance(e: FieldEnsemble) -> np.ndarray:
    """(1/n) sum of phi phi^dagger over the ensemble."""
    if e.n == 0:
        raise SamplingError("Cannot estimate a covariance from an empty ensemble")
    return (e.fields.T @ e.fields.conj()) / e.n


def ensemble_summary(e: FieldEnsemble, observables: Optional[Dict[str, HermitianOperator]] = None) -> Dict[str, object]:
    """JSON-ready summary; raw samples are not included."""
    cov = empirical_covariance(e)
    summary = {
        'truncation': TRUNCATION,
        'dim': e.model.d,
        'seed': e.seed,
        'n': e.n,
        'model_trace': e.model.trace,
        'empirical_covariance': {'re': np.real(cov).tolist(), 'im': np.imag(cov).tolist()},
        'energy': _average_dict(field_energy_check(e)),
        'observables': {},
    }
    for name, a in (observables or {}).items():
        summary['observables'][name] = _average_dict(quadratic_form_average(e, a))
    return summary


def _average_dict(average: QuadraticFormAverage) -> Dict[str, float]:
    return {
        'empirical': average.empirical,
        'theoretical': average.theoretical,
        'stderr': average.stderr,
        'z': average.z,
    }


def raw_sample_rows(e: FieldEnsemble) -> List[List[object]]:
    """One CSV row per draw: omega index then re/im pairs of every mode."""
    rows = []
    for sample in e.samples:
        row = [sample.omega_index]
        for amplitude in sample.phi:
            row.extend([float(amplitude.real), float(amplitude.imag)])
        rows.append(row)
    return rows
