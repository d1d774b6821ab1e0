"""
Report emission for every command.

JSON reports are sorted and indented with no timestamps, so re-running a
command with the same config and seed reproduces the same bytes.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import click
import numpy as np

from .field_service import FieldEnsemble, raw_sample_rows
from .measurement_service import ExperimentRun

logger = logging.getLogger(__name__)

JSON = 'json'
CSV = 'csv'


@dataclass
class Report:
    """Outcome of one command: config echo, pass/fail verdict, results and CSV rows."""
    command: str
    config: Dict[str, Any]
    passed: bool
    results: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    summary: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        """0 when every check passed, 1 otherwise."""
        return 0 if self.passed else 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'passed': self.passed,
            'results': self.results,
        }


def _key(key) -> str:
    if isinstance(key, tuple):
        return ','.join(str(_scalar(k)) for k in key)
    return str(_scalar(key))


def _scalar(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        if math.isnan(value):
            return 'nan'
        return 'inf' if value > 0 else '-inf'
    return value


def jsonable(value: Any) -> Any:
    """Convert numpy values, tuples, complex numbers and non-finite floats to plain JSON."""
    if isinstance(value, dict):
        return {_key(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': _scalar(value.real), 'im': _scalar(value.imag)}
    return _scalar(value)


def render_json(report: Report) -> str:
    """Sorted, indented JSON of the report."""
    return json.dumps(jsonable(report.to_dict()), sort_keys=True, indent=2)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """CSV text from a header and value rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _cell(value: Any) -> Any:
    value = jsonable(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return value


def rows_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    """CSV with the union of the row keys as header, in first-seen order."""
    header: List[str] = []
    for row in rows:
        for k in row:
            if k not in header:
                header.append(k)
    return render_csv(header, [[row.get(k, '') for k in header] for row in rows])


class ReportService:
    def __init__(self, fmt: str = JSON, out: Optional[str] = None):
        """Initialize report service."""
        if fmt not in (JSON, CSV):
            raise ValueError(f"Unknown report format: {fmt}")
        self.fmt = fmt
        self.out = out

    def render(self, report: Report) -> str:
        """Report text in the configured format."""
        if self.fmt == CSV:
            return rows_to_csv(report.rows)
        return render_json(report) + '\n'

    def emit(self, report: Report):
        """Write the report to --out or stdout; the human summary goes to the other stream."""
        text = self.render(report)
        if self.out:
            with open(self.out, 'w') as f:
                f.write(text)
            logger.info(f"Wrote {self.fmt} report to {self.out}")
            for line in report.summary:
                click.echo(line)
        else:
            click.echo(text, nl=False)
            for line in report.summary:
                click.echo(line, err=True)


def experiment_results(run: ExperimentRun) -> Dict[str, Any]:
    """Every field of an ExperimentRun, with per-setting tallies."""
    return {
        'seed': run.seed,
        'rounds_per_setting': run.rounds_per_setting,
        'settings': [
            {
                'setting': list(s.setting),
                'counts': [{'outcome': list(o), 'count': c} for o, c in sorted(s.counts.items())],
                'correlation': s.correlation,
                'stderr': s.stderr,
                'quantum_correlation': s.quantum_correlation,
            }
            for s in run.settings
        ],
        'chsh_estimate': run.chsh_estimate,
        'chsh_stderr': run.chsh_stderr,
        'chsh_S_estimate': 2.0 * run.chsh_estimate,
        'tsirelson_S': 2.0 * math.sqrt(2.0),
        'quantum_value': run.quantum_value,
        'violation_z': run.violation_z,
        'deviation_z': run.deviation_z,
        'violation_observed': run.violation_observed,
        'z_threshold': run.z_threshold,
        'under_sampled': run.under_sampled,
    }


def experiment_rows(run: ExperimentRun) -> List[Dict[str, Any]]:
    """One CSV row per setting."""
    return [
        {
            'setting': f"A{s.setting[0]}B{s.setting[1]}",
            'rounds': run.rounds_per_setting,
            'correlation': s.correlation,
            'stderr': s.stderr,
            'quantum_correlation': s.quantum_correlation,
            **{f"n[{','.join(f'{v:+g}' for v in o)}]": c for o, c in sorted(s.counts.items())},
        }
        for s in run.settings
    ]


def write_raw_samples(e: FieldEnsemble, path: str):
    """Write one CSV row per field sample (real and imaginary parts per mode)."""
    header = ['omega'] + [f"{part}{k}" for k in range(e.model.d) for part in ('re', 'im')]
    with open(path, 'w') as f:
        f.write(render_csv(header, raw_sample_rows(e)))
    logger.info(f"Wrote {e.n} raw field samples to {path}")
