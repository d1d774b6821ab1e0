"""
Command-line surface: one subcommand per check, JSON or CSV reports.

Exit codes: 0 when every check passes, 1 when a numerical or statistical
check fails, 2 on bad input.
"""
import functools
import logging
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import config
from .core.operators import expectation, schmidt_rank, spectral_norm
from .errors import ConstructionError, DecompositionError, LabError
from .services import scan_service
from .services.chsh_engine import (
    bell_norm,
    bell_operator,
    incompatibility_report,
    landau_residual,
    local_commutator_norms,
    meter_reading,
    quantum_bound,
    separable_square_witness,
)
from .services.field_service import (
    CovarianceOperator,
    average_equivalence_check,
    density_from_covariance,
    ensemble_summary,
    field_energy_check,
    sample_field,
)
from .services.measurement_service import evaluate_bell_functional, run_chsh_experiment
from .services.report_service import CSV, JSON, Report, ReportService, experiment_results, experiment_rows, write_raw_samples
from .services.scan_service import ScanService
from .services.spectral_service import c_entangle, max_state_from_square, square_vs_linear_max_states
from .utils import presets
from .utils.serialization import (
    any_state_from_dict,
    load_json_file,
    operator_from_dict,
    scenario_from_dict,
    state_to_dict,
)

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 2


class RunConfig(BaseModel):
    """Fields shared by every command; unknown keys are rejected."""
    model_config = ConfigDict(extra='forbid')

    seed: int = Field(0, ge=0, lt=2 ** 64)


class ScanConfig(RunConfig):
    """Random scenarios draw each local dimension from dims."""
    dims: List[int] = [2, 3]

    @field_validator('dims')
    @classmethod
    def check_dims(cls, dims: List[int]) -> List[int]:
        """Local dimensions must be positive and keep d_A d_B within the dimension cap."""
        if not dims:
            raise ValueError("dims must not be empty")
        if any(d < 1 for d in dims):
            raise ValueError(f"dims must be positive, got {dims}")
        if max(dims) ** 2 > config.MAX_DIM:
            raise ValueError(f"dims {dims} allow a total dimension above {config.MAX_DIM}")
        return dims


class LandauCheckConfig(ScanConfig):
    scenario: str = 'optimal-qubit'
    tolerance: float = Field(1e-9, gt=0)
    n_random: int = Field(0, ge=0, le=config.MAX_SCAN)
    dims: List[int] = [2, 3, 4]


class Theorem1ScanConfig(ScanConfig):
    n_scenarios: int = Field(500, ge=0, le=config.MAX_SCAN)


class ChshRunConfig(RunConfig):
    scenario: str = 'optimal-qubit'
    state: str = 'singlet'
    rounds: int = Field(100000, ge=1, le=config.MAX_ROUNDS)
    z_threshold: float = Field(config.VIOLATION_Z, gt=0)


class PcsftCheckConfig(RunConfig):
    covariance: str = 'identity-2'
    observables: List[str] = ['I', 'X', 'Y', 'Z']
    n: int = Field(100000, ge=1, le=config.MAX_FIELD_SAMPLES)
    z_threshold: float = Field(config.PASS_Z, gt=0)
    raw_samples_out: Optional[str] = None


class JpdCheckConfig(RunConfig):
    n_families: int = Field(200, ge=0, le=config.MAX_SCAN)
    max_m: int = Field(4, ge=2, le=4)
    dim: int = Field(4, ge=1, le=8)
    n_scenarios: int = Field(200, ge=0, le=config.MAX_SCAN)
    functional: str = 'mermin-3'

    @field_validator('functional')
    @classmethod
    def check_functional(cls, name: str) -> str:
        """The functional must name a shipped Bell functional preset."""
        if name not in presets.FUNCTIONALS:
            raise ValueError(f"unknown Bell functional preset {name!r}, expected one of {list(presets.FUNCTIONALS)}")
        return name


class SpectralMaxConfig(RunConfig):
    scenario: str = 'optimal-qubit'
    n_random: int = Field(0, ge=0, le=config.MAX_SCAN)


def _load_scenario(source: str):
    if source in presets.SCENARIOS:
        return presets.scenario(source)
    if source in presets.FUNCTIONALS:
        raise LabError(f"{source} is a Bell functional preset, not a CHSH scenario; "
                       f"select it with the functional key of jpd-check")
    return scenario_from_dict(load_json_file(source))


def _load_state(source: str):
    if source in presets.STATES:
        return presets.state(source)
    return any_state_from_dict(load_json_file(source))


def _load_covariance(source: str) -> CovarianceOperator:
    if source in presets.COVARIANCES:
        return presets.covariance(source)
    return CovarianceOperator(operator_from_dict(load_json_file(source)))


def _load_observable(source: str, d: int):
    """Observable preset on C^d, or an operator file."""
    if source in presets.OBSERVABLES:
        return presets.observable(source, d)
    return operator_from_dict(load_json_file(source))


def run_options(f: Callable) -> Callable:
    """--config, --seed, --out, --format and --workers for every subcommand."""
    @click.option('--config', 'config_path', type=click.Path(), default=None,
                  help='JSON run configuration file.')
    @click.option('--seed', type=int, default=None, help='Overrides the seed of the config file.')
    @click.option('--out', type=click.Path(), default=None, help='Write the report here instead of stdout.')
    @click.option('--format', 'fmt', type=click.Choice([JSON, CSV]), default=JSON, show_default=True)
    @click.option('--workers', type=click.IntRange(min=1), default=None,
                  help='Worker threads (default: CHSH_LAB_WORKERS or 1).')
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        return f(*args, **kwargs)
    return wrapper


def _execute(model: type, name: str, config_path: Optional[str], seed: Optional[int],
             out: Optional[str], fmt: str, workers: Optional[int],
             body: Callable[[Any, int], Report]):
    """Validate the run config, run the command body and map the outcome to an exit code."""
    ctx = click.get_current_context()
    try:
        data: Dict[str, Any] = {}
        if config_path:
            data = load_json_file(config_path)
            if not isinstance(data, dict):
                raise LabError(f"{config_path}: run configuration must be a JSON object")
        if seed is not None:
            data['seed'] = seed
        run_config = model.model_validate(data)
        report = body(run_config, workers or config.WORKERS)
        ReportService(fmt, out).emit(report)
    except ValidationError as e:
        click.echo(f"error: invalid {name} configuration:\n{e}", err=True)
        ctx.exit(EXIT_INPUT_ERROR)
    except (LabError, ValueError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_INPUT_ERROR)
    ctx.exit(report.exit_code)


@click.group()
@click.option('-v', '--verbose', is_flag=True, help='Debug logging.')
def cli(verbose: bool):
    """Numerical checks of CHSH correlations as a measure of local incompatibility."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command('landau-check')
@run_options
def landau_check(config_path, seed, out, fmt, workers):
    """Verify B^2 = I - 1/4 [A1, A2][B1, B2] on a scenario (and optionally random ones)."""
    def body(cfg: LandauCheckConfig, n_workers: int) -> Report:
        s = _load_scenario(cfg.scenario)
        b = bell_operator(s)
        norm = spectral_norm(b)
        residual = landau_residual(s)
        identity_holds = residual <= cfg.tolerance * (1.0 + norm ** 2)
        passed = identity_holds
        square_identity = float(np.max(np.abs(b.matrix @ b.matrix - np.eye(s.d))))

        results: Dict[str, Any] = {
            'scenario': cfg.scenario,
            'structure': s.structure,
            'landau_residual': residual,
            'identity_holds': identity_holds,
            'bell_norm': bell_norm(s).norm,
            'square_is_identity': square_identity <= cfg.tolerance,
        }
        try:
            results['incompatibility'] = incompatibility_report(s).summary()
        except DecompositionError as e:
            results['incompatibility'] = {'error': str(e)}
            passed = False

        rows = [{'index': 'preset', 'structure': str(s.structure), 'landau_residual': residual,
                 'passed': identity_holds}]
        if cfg.n_random:
            scan = ScanService(n_workers).run(
                lambda k: scan_service.landau_item(cfg.seed, k, cfg.dims), cfg.n_random, 'landau')
            failures = [r['index'] for r in scan if not r['passed']]
            results['random'] = {
                'n': cfg.n_random,
                'max_residual': max(r['landau_residual'] for r in scan),
                'commuting_pair_scenarios': sum(1 for r in scan if r.get('commuting_pair')),
                'failures': failures,
            }
            rows.extend(scan)
            passed = passed and not failures

        results['passed'] = passed
        summary = [f"landau-check {cfg.scenario}: residual {residual:.3e} -> {'pass' if passed else 'FAIL'}"]
        return Report('landau-check', cfg.model_dump(), passed, results, rows, summary)

    _execute(LandauCheckConfig, 'landau-check', config_path, seed, out, fmt, workers, body)


@cli.command('theorem1-scan')
@run_options
def theorem1_scan(config_path, seed, out, fmt, workers):
    """Local incompatibility of both pairs versus existence of a violating state, on random scenarios."""
    def body(cfg: Theorem1ScanConfig, n_workers: int) -> Report:
        scan = ScanService(n_workers).run(
            lambda k: scan_service.theorem1_item(cfg.seed, k, cfg.dims), cfg.n_scenarios, 'theorem1')
        agree = sum(1 for r in scan if r['agree'])
        failures = [r['index'] for r in scan if not r['passed']]
        results = {
            'n_scenarios': cfg.n_scenarios,
            'agree': agree,
            'locally_incompatible': sum(1 for r in scan if r['locally_incompatible']),
            'max_bound_error': max((r['bound_error'] for r in scan), default=0.0),
            'failures': failures,
        }
        passed = not failures
        summary = [f"theorem1-scan: {agree}/{cfg.n_scenarios} agree, {len(failures)} failure(s)"]
        return Report('theorem1-scan', cfg.model_dump(), passed, results, scan, summary)

    _execute(Theorem1ScanConfig, 'theorem1-scan', config_path, seed, out, fmt, workers, body)


@cli.command('chsh-run')
@run_options
def chsh_run(config_path, seed, out, fmt, workers):
    """Seeded Monte Carlo CHSH experiment and incompatibility read-out."""
    def body(cfg: ChshRunConfig, n_workers: int) -> Report:
        s = _load_scenario(cfg.scenario)
        state = _load_state(cfg.state)
        run = run_chsh_experiment(s, state, cfg.rounds, cfg.seed, workers=n_workers,
                                  z_threshold=cfg.z_threshold)
        results = experiment_results(run)
        results['structure'] = s.structure

        summary = [
            f"chsh-run {cfg.scenario}/{cfg.state}: <B> = {run.chsh_estimate:.6f} +- {run.chsh_stderr:.6f} "
            f"(quantum {run.quantum_value:.6f}), violation z = {run.violation_z:.2f}"
        ]
        if run.under_sampled:
            summary.append(f"warning: {cfg.rounds} rounds per setting is under-sampled")

        if not s.is_tensor:
            results['meter'] = {'error': 'needs tensor structure'}
        else:
            norm_a, norm_b = local_commutator_norms(s)
            if norm_b <= config.COMMUTATOR_TOL:
                results['meter'] = {'error': f"auxiliary B-pair is compatible (||M_B|| = {norm_b:.3e})"}
            else:
                reading = meter_reading(run.chsh_estimate, norm_b, run.chsh_stderr)
                results['meter'] = {
                    'extracted_norm': reading.value,
                    'extracted_stderr': reading.stderr,
                    'clamped': reading.clamped,
                    'true_norm': norm_a,
                    'norm_MB': norm_b,
                }
                summary.append(f"extracted ||[A1, A2]|| = {reading.value:.4f} +- {reading.stderr:.4f} "
                               f"(true {norm_a:.4f}){' [clamped]' if reading.clamped else ''}")

        passed = abs(run.deviation_z) <= config.PASS_Z
        return Report('chsh-run', cfg.model_dump(), passed, results, experiment_rows(run), summary)

    _execute(ChshRunConfig, 'chsh-run', config_path, seed, out, fmt, workers, body)


@cli.command('pcsft-check')
@run_options
def pcsft_check(config_path, seed, out, fmt, workers):
    """Classical field averages of quadratic forms against quantum averages."""
    def body(cfg: PcsftCheckConfig, n_workers: int) -> Report:
        b = _load_covariance(cfg.covariance)
        rho = density_from_covariance(b)
        observables = {name: _load_observable(name, b.d) for name in cfg.observables}
        ensemble = sample_field(b, cfg.seed, cfg.n, workers=n_workers)

        rows = []
        for name, a in observables.items():
            check = average_equivalence_check(b, a, ensemble, threshold=cfg.z_threshold)
            identity = abs(float(np.real(np.trace(b.matrix @ a.matrix)))
                           - b.trace * float(np.real(np.trace(rho.matrix @ a.matrix))))
            rows.append({
                'observable': name,
                'empirical': check.empirical,
                'quantum_prediction': check.quantum_prediction,
                'stderr': check.stderr,
                'z': check.z,
                'identity_residual': identity,
                'passed': check.passed and identity <= 1e-10 * (1.0 + b.trace),
            })
        energy = field_energy_check(ensemble)
        energy_passed = abs(energy.z) <= cfg.z_threshold
        if cfg.raw_samples_out:
            write_raw_samples(ensemble, cfg.raw_samples_out)

        results = {
            'ensemble': ensemble_summary(ensemble, observables),
            'checks': rows,
            'energy_passed': energy_passed,
            'under_sampled': cfg.n < config.MIN_FIELD_SAMPLES,
        }
        passed = energy_passed and all(r['passed'] for r in rows)
        summary = [f"pcsft-check {cfg.covariance}: "
                   + ', '.join(f"{r['observable']} z={r['z']:.2f}" for r in rows)
                   + f", energy z={energy.z:.2f} -> {'pass' if passed else 'FAIL'}"]
        return Report('pcsft-check', cfg.model_dump(), passed, results, rows, summary)

    _execute(PcsftCheckConfig, 'pcsft-check', config_path, seed, out, fmt, workers, body)


@cli.command('jpd-check')
@run_options
def jpd_check(config_path, seed, out, fmt, workers):
    """Joint distributions of pairwise-commuting families and Bell functionals without incompatibility."""
    def body(cfg: JpdCheckConfig, n_workers: int) -> Report:
        service = ScanService(n_workers)
        families = service.run(
            lambda k: scan_service.jpd_family_item(cfg.seed, k, cfg.dim, cfg.max_m), cfg.n_families, 'families')
        scenarios = service.run(
            lambda k: scan_service.all_commuting_item(cfg.seed, k, cfg.dim), cfg.n_scenarios, 'commuting')
        preset = presets.functional(cfg.functional)
        value = evaluate_bell_functional(preset.functional, preset.groups, preset.state)

        family_failures = [r['index'] for r in families if not r['passed']]
        violations = [r['index'] for r in scenarios if not r['passed']]
        functional_ok = abs(value.value - preset.quantum_value) <= 1e-9
        results = {
            'families': {'n': cfg.n_families, 'failures': family_failures,
                         'min_probability': min((r['min_probability'] for r in families), default=0.0),
                         'max_permutation_drift': max((r['permutation_drift'] for r in families), default=0.0)},
            'all_commuting': {'n': cfg.n_scenarios, 'violations': violations,
                              'max_value': max((r['value'] for r in scenarios), default=0.0)},
            'functional': {'name': cfg.functional, 'value': value.value,
                           'expected': preset.quantum_value,
                           'classical_bound': value.classical_bound, 'violated': value.violated},
        }
        passed = not family_failures and not violations and functional_ok
        rows = [dict(r, kind='family') for r in families] + [dict(r, kind='all-commuting') for r in scenarios]
        summary = [f"jpd-check: {len(family_failures)} family failure(s), {len(violations)} violation(s) "
                   f"without incompatibility, {cfg.functional} {value.value:.6f} vs {value.classical_bound:g}"]
        return Report('jpd-check', cfg.model_dump(), passed, results, rows, summary)

    _execute(JpdCheckConfig, 'jpd-check', config_path, seed, out, fmt, workers, body)


@cli.command('spectral-max')
@run_options
def spectral_max(config_path, seed, out, fmt, workers):
    """Maximiser of |<B>| built from eigenvectors of B^2."""
    def body(cfg: SpectralMaxConfig, n_workers: int) -> Report:
        s = _load_scenario(cfg.scenario)
        c = bell_operator(s)
        best = max_state_from_square(c)
        norm = spectral_norm(c)
        error = abs(best.value - norm)
        results: Dict[str, Any] = {
            'scenario': cfg.scenario,
            'phi': state_to_dict(best.phi),
            'value': best.value,
            'expectation': best.expectation,
            'sign': best.sign,
            'spectral_norm': norm,
            'error': error,
        }
        passed = error <= 1e-9

        if s.is_tensor:
            results['quantum_bound'] = quantum_bound(s)
            try:
                witness = separable_square_witness(s)
                oriented = bell_operator(s.oriented(witness.ordering))
                pair = c_entangle(oriented, witness.psi_sep)
                comparison = square_vs_linear_max_states(oriented, witness.psi_sep)
                results['separable_witness'] = {
                    'square_value': witness.value,
                    'ordering': witness.ordering,
                    'schmidt_rank': schmidt_rank(witness.psi_sep, *s.factor_dims),
                    'psi_plus_value': expectation(oriented, pair.psi_plus),
                    'psi_plus_schmidt_rank': schmidt_rank(pair.psi_plus, *s.factor_dims),
                    'same_as_linear_max_state': comparison.same,
                    'decomposition': comparison.decomposition,
                }
            except ConstructionError as e:
                results['separable_witness'] = {'error': str(e)}

        rows = [{'index': 'scenario', 'value': best.value, 'spectral_norm': norm, 'error': error}]
        if cfg.n_random:
            scan = ScanService(n_workers).run(
                lambda k: scan_service.max_state_item(cfg.seed, k), cfg.n_random, 'max-state')
            failures = [r['index'] for r in scan if not r['passed']]
            results['random'] = {'n': cfg.n_random, 'failures': failures,
                                 'max_error': max(r['error'] for r in scan)}
            rows.extend(scan)
            passed = passed and not failures

        summary = [f"spectral-max {cfg.scenario}: <phi|B|phi> = {best.expectation:.12f}, "
                   f"||B|| = {norm:.12f} -> {'pass' if passed else 'FAIL'}"]
        return Report('spectral-max', cfg.model_dump(), passed, results, rows, summary)

    _execute(SpectralMaxConfig, 'spectral-max', config_path, seed, out, fmt, workers, body)


@cli.command('presets')
def list_presets():
    """List the named scenarios, states, covariances and observables."""
    for kind, names in presets.PRESET_NAMES.items():
        click.echo(f"{kind}: {', '.join(names)}")
