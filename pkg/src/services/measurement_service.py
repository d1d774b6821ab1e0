"""
Joint measurement of compatible observables and Monte Carlo Bell tests.

Joint probabilities follow the trace formula Tr[rho E_1(x_1) ... E_m(x_m)],
which is only defined when every pair of observables commutes; asking for it
on a non-commuting pair is an error, never an approximation.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import config
from ..core.operators import (
    DensityOperator,
    HermitianOperator,
    PureState,
    commutator,
    density_expectation,
    density_from_state,
    eig,
    matrix_norm,
)
from ..errors import (
    AssignmentCapError,
    ClusterAmbiguityError,
    DimensionError,
    IncompatibleObservablesError,
    SamplingError,
    StateError,
)
from ..utils.rng import chunk_sizes, stream
from .chsh_engine import BellScenario, bell_operator

logger = logging.getLogger(__name__)

Outcome = Tuple[float, ...]
State = Union[PureState, DensityOperator]


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    """Spectral projectors E(x) of an observable, one per distinct eigenvalue x."""
    observable: HermitianOperator
    outcomes: Tuple[Tuple[float, np.ndarray], ...]

    def __post_init__(self):
        d = self.observable.d
        eye = np.eye(d)
        total = np.zeros((d, d), dtype=complex)
        rebuilt = np.zeros((d, d), dtype=complex)
        for k, (value, e) in enumerate(self.outcomes):
            if matrix_norm(e @ e - e) > config.PROJECTOR_TOL:
                raise ClusterAmbiguityError(f"Projector for outcome {value} is not idempotent")
            for _, f in self.outcomes[k + 1:]:
                if matrix_norm(e @ f) > config.PROJECTOR_TOL:
                    raise ClusterAmbiguityError("Projectors are not mutually orthogonal")
            total += e
            rebuilt += value * e
        if matrix_norm(total - eye) > config.PROJECTOR_TOL:
            raise ClusterAmbiguityError("Projectors do not resolve the identity")
        if matrix_norm(rebuilt - self.observable.matrix) > config.PROJECTOR_TOL:
            raise ClusterAmbiguityError("Projectors do not reconstruct the observable")

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(value for value, _ in self.outcomes)

    def projector(self, value: float) -> np.ndarray:
        for v, e in self.outcomes:
            if v == value:
                return e
        raise KeyError(value)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table over outcome tuples of pairwise-commuting observables."""
    families: Tuple[ProjectorFamily, ...]
    table: Dict[Outcome, float]

    @property
    def m(self) -> int:
        return len(self.families)

    def probability(self, outcome: Sequence[float]) -> float:
        """Probability of one joint outcome (0 for outcomes outside the spectra)."""
        return self.table.get(tuple(outcome), 0.0)

    def outcomes(self) -> List[Outcome]:
        return list(self.table.keys())

    def probabilities(self) -> np.ndarray:
        return np.array([self.table[o] for o in self.table], dtype=float)

    def marginal(self, indices: Sequence[int]) -> Dict[Outcome, float]:
        """Marginal distribution of the members at the given indices."""
        result: Dict[Outcome, float] = {}
        for outcome, p in self.table.items():
            key = tuple(outcome[i] for i in indices)
            result[key] = result.get(key, 0.0) + p
        return result

    def expectation(self) -> float:
        """Covariation sum over outcomes of x_1 ... x_m p(x)."""
        return float(sum(math.prod(outcome) * p for outcome, p in self.table.items()))

    def permuted(self, order: Sequence[int]) -> 'JointDistribution':
        """Distribution of the same family listed in another order."""
        families = tuple(self.families[i] for i in order)
        table = {tuple(o[i] for i in order): p for o, p in self.table.items()}
        return JointDistribution(families, table)


@dataclass(frozen=True, eq=False)
class CompatibilityCheck:
    passed: bool
    diagnostic: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class BellFunctional:
    """
    sum t_{i1..iK} <D^1_{i1} ... D^K_{iK}> + lower-order terms.

    group_sizes[k] is the number of observables in group k; coefficients are keyed
    by full index tuples, lower_order_terms by tuples of (group, index) pairs.
    """
    group_sizes: Tuple[int, ...]
    coefficients: Dict[Tuple[int, ...], float] = field(default_factory=dict)
    lower_order_terms: Dict[Tuple[Tuple[int, int], ...], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, t in self.coefficients.items():
            if len(key) != len(self.group_sizes):
                raise ValueError(f"Coefficient key {key} does not address every group")
            if any(not 0 <= i < n for i, n in zip(key, self.group_sizes)):
                raise ValueError(f"Coefficient key {key} out of range")
            if not math.isfinite(t):
                raise ValueError(f"Coefficient for {key} is not finite")
        for key, t in self.lower_order_terms.items():
            groups = [k for k, _ in key]
            if len(set(groups)) != len(groups):
                raise ValueError(f"Lower-order term {key} uses a group twice")
            if any(not 0 <= i < self.group_sizes[k] for k, i in key):
                raise ValueError(f"Lower-order term {key} out of range")
            if not math.isfinite(t):
                raise ValueError(f"Coefficient for {key} is not finite")

    def value_on(self, assignment: Sequence[Sequence[float]]) -> float:
        """Functional evaluated on one deterministic assignment of values."""
        total = 0.0
        for key, t in self.coefficients.items():
            total += t * math.prod(assignment[k][i] for k, i in enumerate(key))
        for key, t in self.lower_order_terms.items():
            total += t * math.prod(assignment[k][i] for k, i in key)
        return total

    def classical_bound(self, spectra: Sequence[Sequence[Sequence[float]]]) -> float:
        """Maximum over every deterministic assignment of values from each observable's spectrum."""
        choices = [list(values) for group in spectra for values in group]
        count = math.prod(len(c) for c in choices)
        if count > config.MAX_ASSIGNMENTS:
            raise AssignmentCapError(
                f"{count} deterministic assignments exceed cap {config.MAX_ASSIGNMENTS}"
            )
        best = -math.inf
        for flat in itertools.product(*choices):
            assignment, pos = [], 0
            for n in self.group_sizes:
                assignment.append(flat[pos:pos + n])
                pos += n
            best = max(best, self.value_on(assignment))
        return best


@dataclass(frozen=True, eq=False)
class FunctionalValue:
    value: float
    classical_bound: float
    violated: bool


@dataclass(frozen=True, eq=False)
class SettingResult:
    setting: Tuple[int, int]
    counts: Dict[Outcome, int]
    correlation: float
    stderr: float
    quantum_correlation: float


@dataclass(frozen=True, eq=False)
class ExperimentRun:
    """Seeded four-setting CHSH run: tallies, estimates and verdict."""
    seed: int
    state: State
    rounds_per_setting: int
    settings: Tuple[SettingResult, ...]
    chsh_estimate: float
    chsh_stderr: float
    violation_z: float
    quantum_value: float
    deviation_z: float
    violation_observed: bool
    z_threshold: float
    under_sampled: bool

    @property
    def correlations(self) -> Dict[Tuple[int, int], Tuple[float, float]]:
        return {s.setting: (s.correlation, s.stderr) for s in self.settings}

    @property
    def counts(self) -> Dict[Tuple[int, int], Dict[Outcome, int]]:
        return {s.setting: s.counts for s in self.settings}


def as_density(state: State) -> DensityOperator:
    """Density operator of a pure or mixed state."""
    if isinstance(state, DensityOperator):
        return state
    if isinstance(state, PureState):
        return density_from_state(state)
    raise StateError(f"Unsupported state type {type(state).__name__}")


def projectors(x: HermitianOperator, value_tolerance: float = None) -> ProjectorFamily:
    """Spectral projectors of x, grouping eigenvalues closer than value_tolerance."""
    tol = config.CLUSTER_TOL if value_tolerance is None else value_tolerance
    dec = eig(x)
    values = dec.eigenvalues
    for k in range(1, len(values)):
        gap = values[k] - values[k - 1]
        if tol < gap <= 2 * tol:
            raise ClusterAmbiguityError(
                f"Eigenvalues {values[k - 1]!r} and {values[k]!r} straddle a cluster boundary"
            )
    outcomes = []
    for group in dec.clusters(tol):
        v = dec.vectors[:, group]
        e = v @ v.conj().T
        outcomes.append((float(np.mean(values[group])), (e + e.conj().T) / 2))
    outcomes.sort(key=lambda item: -item[0])
    return ProjectorFamily(x, tuple(outcomes))


def _check_pairwise_commuting(observables: Sequence[HermitianOperator], label: str = "Observables"):
    for i, j in itertools.combinations(range(len(observables)), 2):
        residual = matrix_norm(commutator(observables[i], observables[j]))
        if residual > config.COMMUTATOR_TOL:
            logger.error(f"{label} {i} and {j} do not commute (norm {residual:.3e})")
            raise IncompatibleObservablesError(
                f"{label} {i} and {j} do not commute (||[D_i, D_j]|| = {residual:.3e}); "
                f"no joint distribution exists"
            )


def _raw_table(families: Sequence[ProjectorFamily], rho: DensityOperator) -> Dict[Outcome, complex]:
    table = {}
    for combo in itertools.product(*(f.outcomes for f in families)):
        product = rho.matrix
        for _, e in combo:
            product = product @ e
        table[tuple(value for value, _ in combo)] = complex(np.trace(product))
    return table


def joint_distribution(families: Sequence[ProjectorFamily], rho: State) -> JointDistribution:
    """p(x_1, ..., x_m) = Tr[rho E_1(x_1) ... E_m(x_m)] for pairwise-commuting observables."""
    rho = as_density(rho)
    if any(f.observable.d != rho.d for f in families):
        raise DimensionError("Observable and state dimensions differ")
    _check_pairwise_commuting([f.observable for f in families])

    table = {}
    for outcome, p in _raw_table(families, rho).items():
        if abs(p.imag) > config.PROBABILITY_TOTAL_TOL:
            raise IncompatibleObservablesError(f"Probability {p} of {outcome} is not real")
        if p.real < config.PROBABILITY_FLOOR:
            raise StateError(f"Negative probability {p.real:.3e} for outcome {outcome}")
        table[outcome] = max(p.real, 0.0)
    total = sum(table.values())
    if abs(total - 1.0) > config.PROBABILITY_TOTAL_TOL:
        raise StateError(f"Joint distribution sums to {total!r}")
    return JointDistribution(tuple(families), table)


def pairwise_implies_multiple_check(families: Sequence[ProjectorFamily], rho: State) -> CompatibilityCheck:
    """
    Checks that the m-fold trace table is a genuine distribution: the same for
    every ordering of the projectors, nonnegative, and with bivariate marginals
    equal to the pairwise tables.
    """
    rho = as_density(rho)
    _check_pairwise_commuting([f.observable for f in families])
    m = len(families)
    reference = _raw_table(families, rho)

    for outcome, p in reference.items():
        if p.real < config.PROBABILITY_FLOOR:
            return CompatibilityCheck(False, f"negative entry {p.real:.3e} at {outcome}")

    for order in itertools.permutations(range(m)):
        permuted = _raw_table([families[i] for i in order], rho)
        for outcome, p in permuted.items():
            canonical = [0.0] * m
            for pos, i in enumerate(order):
                canonical[i] = outcome[pos]
            if abs(p - reference[tuple(canonical)]) > 1e-9:
                return CompatibilityCheck(
                    False, f"ordering {order} changes p{tuple(canonical)} by {abs(p - reference[tuple(canonical)]):.3e}"
                )

    full = JointDistribution(tuple(families), {o: p.real for o, p in reference.items()})
    for i, j in itertools.combinations(range(m), 2):
        marginal = full.marginal((i, j))
        for outcome, p in _raw_table([families[i], families[j]], rho).items():
            if abs(marginal.get(outcome, 0.0) - p.real) > config.PROBABILITY_TOTAL_TOL:
                return CompatibilityCheck(
                    False, f"marginal ({i}, {j}) differs from the pairwise table at {outcome}"
                )
    return CompatibilityCheck(True)


def evaluate_bell_functional(f: BellFunctional, families: Sequence[Sequence[ProjectorFamily]],
                             rho: State) -> FunctionalValue:
    """Quantum value of a Bell-type functional next to its classical bound."""
    rho = as_density(rho)
    if tuple(len(g) for g in families) != tuple(f.group_sizes):
        raise DimensionError("Observable groups do not match the functional's group sizes")
    for n, m in itertools.combinations(range(len(families)), 2):
        for fa in families[n]:
            for fb in families[m]:
                _check_pairwise_commuting([fa.observable, fb.observable], label="Cross-group observables")

    def correlation(members: Sequence[HermitianOperator]) -> float:
        product = np.eye(rho.d, dtype=complex)
        for x in members:
            product = product @ x.matrix
        return density_expectation(HermitianOperator.symmetrized(product), rho)

    value = 0.0
    for key, t in f.coefficients.items():
        value += t * correlation([families[k][i].observable for k, i in enumerate(key)])
    for key, t in f.lower_order_terms.items():
        value += t * correlation([families[k][i].observable for k, i in key])

    bound = f.classical_bound([[fam.values for fam in group] for group in families])
    return FunctionalValue(value=value, classical_bound=bound, violated=value > bound + 1e-9)


def chsh_functional() -> BellFunctional:
    """1/2 [<A1B1> + <A1B2> + <A2B1> - <A2B2>]."""
    return BellFunctional(
        group_sizes=(2, 2),
        coefficients={(0, 0): 0.5, (0, 1): 0.5, (1, 0): 0.5, (1, 1): -0.5},
    )


def mermin_functional() -> BellFunctional:
    """<XXX> - <XYY> - <YXY> - <YYX>; index 0 is X and index 1 is Y in every group."""
    return BellFunctional(
        group_sizes=(2, 2, 2),
        coefficients={(0, 0, 0): 1.0, (0, 1, 1): -1.0, (1, 0, 1): -1.0, (1, 1, 0): -1.0},
    )


def sample_joint(jd: JointDistribution, seed: int, n: int, stream_key: Sequence[int] = (),
                 workers: int = 1) -> Dict[Outcome, int]:
    """
    n independent draws from the table, tallied per outcome.

    Draws are generated in fixed chunks, each from its own keyed stream, so the
    tallies do not depend on the number of workers.
    """
    outcomes = jd.outcomes()
    probs = jd.probabilities()
    probs = probs / probs.sum()
    sizes = chunk_sizes(n)

    def draw(index: int) -> np.ndarray:
        rng = stream(seed, 'joint', *stream_key, index)
        return rng.multinomial(sizes[index], probs)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(len(sizes))))
    else:
        parts = [draw(k) for k in range(len(sizes))]

    totals = np.sum(parts, axis=0) if parts else np.zeros(len(outcomes), dtype=np.int64)
    return {o: int(c) for o, c in zip(outcomes, totals)}


def _correlation_estimate(counts: Dict[Outcome, int], n: int) -> Tuple[float, float]:
    products = np.array([math.prod(o) for o in counts], dtype=float)
    weights = np.array(list(counts.values()), dtype=float) / n
    mean = float(np.dot(products, weights))
    second = float(np.dot(products ** 2, weights))
    variance = max(second - mean * mean, 0.0)
    return mean, math.sqrt(variance / n)


def _z_score(excess: float, stderr: float) -> float:
    if stderr > 0:
        return excess / stderr
    if excess > 0:
        return math.inf
    if excess < 0:
        return -math.inf
    return 0.0


def run_chsh_experiment(s: BellScenario, state: State, rounds_per_setting: int, seed: int,
                        workers: int = 1, z_threshold: float = None) -> ExperimentRun:
    """Sample the four compatible settings (A_i, B_j) and estimate <B>."""
    if rounds_per_setting < 1:
        raise SamplingError("rounds_per_setting must be positive")
    z_threshold = config.VIOLATION_Z if z_threshold is None else z_threshold
    rho = as_density(state)
    if rho.d != s.d:
        raise DimensionError(f"State dimension {rho.d} does not match scenario {s.d}")

    families_a = [projectors(s.a1.operator), projectors(s.a2.operator)]
    families_b = [projectors(s.b1.operator), projectors(s.b2.operator)]

    results = []
    for index, (i, j) in enumerate(((1, 1), (1, 2), (2, 1), (2, 2))):
        jd = joint_distribution([families_a[i - 1], families_b[j - 1]], rho)
        counts = sample_joint(jd, seed, rounds_per_setting, stream_key=(index,), workers=workers)
        correlation, stderr = _correlation_estimate(counts, rounds_per_setting)
        results.append(SettingResult(
            setting=(i, j), counts=counts, correlation=correlation, stderr=stderr,
            quantum_correlation=jd.expectation(),
        ))

    c = {r.setting: r.correlation for r in results}
    estimate = 0.5 * (c[(1, 1)] + c[(1, 2)] + c[(2, 1)] - c[(2, 2)])
    stderr = 0.5 * math.sqrt(sum(r.stderr ** 2 for r in results))
    quantum_value = density_expectation(bell_operator(s), rho)

    violation_z = _z_score(abs(estimate) - 1.0, stderr)
    deviation_z = _z_score(estimate - quantum_value, stderr)
    if abs(deviation_z) > config.PASS_Z:
        logger.warning(f"CHSH estimate {estimate:.6f} is {deviation_z:.2f} stderr from {quantum_value:.6f}")
    under_sampled = rounds_per_setting < config.MIN_ROUNDS
    if under_sampled:
        logger.warning(f"Only {rounds_per_setting} rounds per setting; run is under-sampled")

    logger.info(f"CHSH run seed={seed}: <B>_EXP = {estimate:.6f} +- {stderr:.6f}, z = {violation_z:.2f}")
    return ExperimentRun(
        seed=seed, state=state, rounds_per_setting=rounds_per_setting, settings=tuple(results),
        chsh_estimate=estimate, chsh_stderr=stderr, violation_z=violation_z,
        quantum_value=quantum_value, deviation_z=deviation_z,
        violation_observed=violation_z >= z_threshold, z_threshold=z_threshold,
        under_sampled=under_sampled,
    )
