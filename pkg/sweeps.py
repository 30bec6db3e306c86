"""
Parameter sweeps over the factory channel families and single-channel
analysis reports.

Grid points are evaluated on a thread pool; rows always come back in grid
order, and every point seeds its own optimizer from the sweep seed, so a
fixed specification reproduces byte-identical output.
"""

import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import yaml

from capacity import (
    closed_form_dephasing_q, closed_form_dephasing_qe,
    combined_channel_q_direct, q_capacity_channel, q_capacity_pcds,
    qe_capacity_channel, qe_capacity_pcds,
)
from channel_core import KrausChannel, validate_cpt
from channel_io import load_channel_document
from degradability import find_degrading_map
from errors import ConsistencyError, DomainError, QcapError
from optimizers import SolverSettings
from pcds_channels import (
    BlockPartition, decay_factorization, from_channel, is_pcds, make_adc,
    make_combined, make_dephasing, make_single_decay,
)

logger = logging.getLogger(__name__)

CROSS_CHECK_TOL = 1e-4
FLOAT_FORMAT = '.9g'
OUTPUT_FORMATS = ('csv', 'json')

DEPHASING_COLUMNS = ['kappa_sq', 'Q', 'Q_optimizer', 'QE', 'QE_optimizer']
MAD_COLUMNS = ['gamma', 'Q', 'QE', 'degradable', 'lower', 'upper', 'method']
COMBINED_COLUMNS = ['gamma', 'kappa', 'Q', 'QE', 'lower', 'upper', 'gap', 'method']
CUSTOM_COLUMNS = ['Q', 'QE', 'degradable', 'lower', 'upper', 'gap', 'method']


class SweepFamily(Enum):
    DEPHASING = 'dephasing'
    MAD_SINGLE = 'mad_single'
    COMBINED = 'combined'
    CUSTOM_JSON = 'custom_json'


@dataclass(frozen=True)
class Grid:
    """Evenly spaced grid start:stop:count, both ends included"""
    start: float
    stop: float
    count: int

    @classmethod
    def parse(cls, value) -> 'Grid':
        if isinstance(value, Grid):
            return value
        if isinstance(value, dict):
            try:
                return cls(float(value['start']), float(value['stop']), int(value['count']))
            except (KeyError, TypeError, ValueError) as e:
                raise DomainError(f"Grid mapping needs numeric start, stop and count: {value!r}") from e
        parts = str(value).split(':')
        if len(parts) != 3:
            raise DomainError(f"Grid must look like start:stop:count, got '{value}'")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as e:
            raise DomainError(f"Grid must look like start:stop:count, got '{value}'") from e

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def validate(self, name: str, low: float = 0.0, high: float = 1.0) -> List[str]:
        errors = []
        if self.count < 2:
            errors.append(f"{name}: count must be at least 2, got {self.count}")
        if self.start > self.stop:
            errors.append(f"{name}: start {self.start} is larger than stop {self.stop}")
        if self.start < low or self.stop > high:
            errors.append(f"{name}: values must lie in [{low}, {high}]")
        return errors

    def __str__(self):
        return f"{self.start:g}:{self.stop:g}:{self.count}"


DEFAULT_GRID = Grid(0.0, 1.0, 11)


def _int_field(data: Dict[str, Any], key: str, default: int) -> int:
    value = data.get(key)
    return default if value is None else int(value)


@dataclass
class SweepSpec:
    family: SweepFamily
    d_a: int = 1
    d_b: int = 1
    d_c: int = 3
    gamma_grid: Grid = DEFAULT_GRID
    kappa_grid: Grid = DEFAULT_GRID
    channel: Optional[str] = None
    out: Optional[str] = None
    format: str = 'csv'
    seed: int = 42
    jobs: int = 1
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> 'SweepSpec':
        """Build from flat keys (family, da, db, dc, gamma_grid, kappa_grid, channel, out, format, seed, jobs)"""
        if 'family' not in data or data['family'] is None:
            raise DomainError("Sweep specification needs a 'family'")
        try:
            family = SweepFamily(str(data['family']))
        except ValueError as e:
            names = ', '.join(f.value for f in SweepFamily)
            raise DomainError(f"Unknown family '{data['family']}', expected one of {names}") from e
        known = {'family', 'da', 'db', 'dc', 'gamma_grid', 'kappa_grid', 'channel', 'out', 'format', 'seed', 'jobs'}
        try:
            return cls(
                family=family,
                d_a=_int_field(data, 'da', 1),
                d_b=_int_field(data, 'db', 1),
                d_c=_int_field(data, 'dc', 3),
                gamma_grid=Grid.parse(data['gamma_grid']) if data.get('gamma_grid') else DEFAULT_GRID,
                kappa_grid=Grid.parse(data['kappa_grid']) if data.get('kappa_grid') else DEFAULT_GRID,
                channel=data.get('channel'),
                out=data.get('out'),
                format=str(data.get('format') or 'csv'),
                seed=_int_field(data, 'seed', 42),
                jobs=_int_field(data, 'jobs', 1),
                extra={k: v for k, v in data.items() if k not in known},
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, QcapError):
                raise
            raise DomainError(f"Invalid sweep specification: {e}") from e

    def validate(self) -> List[str]:
        """Validate the specification and return any errors"""
        errors = []
        if self.format not in OUTPUT_FORMATS:
            errors.append(f"format must be one of {', '.join(OUTPUT_FORMATS)}, got '{self.format}'")
        if self.jobs < 1:
            errors.append("jobs must be at least 1")
        if self.extra:
            errors.append(f"unknown keys: {', '.join(sorted(self.extra))}")

        if self.family == SweepFamily.DEPHASING:
            if self.d_a < 1 or self.d_b < 1:
                errors.append("da and db must be positive")
            errors.extend(self.kappa_grid.validate('kappa_grid'))
        elif self.family == SweepFamily.MAD_SINGLE:
            if self.d_c < 2:
                errors.append("dc must be at least 2")
            errors.extend(self.gamma_grid.validate('gamma_grid'))
        elif self.family == SweepFamily.COMBINED:
            if self.d_c < 3:
                errors.append("dc must be at least 3")
            errors.extend(self.gamma_grid.validate('gamma_grid'))
            errors.extend(self.kappa_grid.validate('kappa_grid'))
        elif not self.channel:
            errors.append("custom_json needs a channel document path")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        data = {'family': self.family.value, 'format': self.format, 'seed': self.seed}
        if self.family == SweepFamily.DEPHASING:
            data.update(da=self.d_a, db=self.d_b, kappa_grid=str(self.kappa_grid))
        elif self.family == SweepFamily.MAD_SINGLE:
            data.update(dc=self.d_c, gamma_grid=str(self.gamma_grid))
        elif self.family == SweepFamily.COMBINED:
            data.update(dc=self.d_c, gamma_grid=str(self.gamma_grid), kappa_grid=str(self.kappa_grid))
        else:
            data.update(channel=self.channel)
        return data


def load_sweep_spec(path: str) -> Dict[str, Any]:
    """Read a YAML sweep file into a flat mapping (validated later by SweepSpec)"""
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise DomainError(f"Cannot read sweep file {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise DomainError(f"Invalid YAML in {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise DomainError(f"Sweep file {path} must hold a mapping")
    return {str(k).replace('-', '_'): v for k, v in data.items()}


def _run_points(points: Sequence, evaluate: Callable[[Any], Dict[str, Any]], jobs: int) -> List[Dict[str, Any]]:
    if jobs <= 1:
        return [evaluate(point) for point in points]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(evaluate, points))


def _settings_for(spec: SweepSpec, settings: Optional[SolverSettings]) -> SolverSettings:
    base = settings or SolverSettings()
    return SolverSettings(seed=spec.seed, restarts=base.restarts, audit_points=base.audit_points)


def _check_agreement(label: str, first: float, second: float):
    if abs(first - second) > CROSS_CHECK_TOL:
        raise ConsistencyError(f"{label}: {first:.9f} vs {second:.9f} differ by {abs(first - second):.3e}")


def run_dephasing_sweep(spec: SweepSpec, settings: Optional[SolverSettings] = None) -> List[Dict[str, Any]]:
    """Q and Q_E of the block dephasing channel against |kappa|^2, closed form and optimizer"""
    settings = _settings_for(spec, settings)

    def evaluate(kappa_sq: float) -> Dict[str, Any]:
        kappa = float(np.sqrt(max(kappa_sq, 0.0)))
        pc = make_dephasing(spec.d_a, spec.d_b, kappa)
        q = closed_form_dephasing_q(spec.d_a, spec.d_b, kappa)
        qe = closed_form_dephasing_qe(spec.d_a, spec.d_b, kappa)
        q_opt = q_capacity_pcds(pc, settings).value
        qe_opt = qe_capacity_pcds(pc, settings).value
        _check_agreement(f"Q at |kappa|^2={kappa_sq:g}", q, q_opt)
        _check_agreement(f"Q_E at |kappa|^2={kappa_sq:g}", qe, qe_opt)
        return {'kappa_sq': float(kappa_sq), 'Q': q, 'Q_optimizer': q_opt, 'QE': qe, 'QE_optimizer': qe_opt}

    logger.info(f"Dephasing sweep (d_A={spec.d_a}, d_B={spec.d_b}) over {spec.kappa_grid.count} points")
    return _run_points(spec.kappa_grid.values(), evaluate, spec.jobs)


def _mad_point(d_c: int, gamma: float, settings: SolverSettings) -> Dict[str, Any]:
    if d_c == 2:
        ch = make_adc(gamma)
        q, qe = q_capacity_channel(ch, settings), qe_capacity_channel(ch, settings)
    else:
        pc = make_single_decay(d_c, gamma)
        dominating = decay_factorization(d_c, gamma) if gamma > 0.5 else None
        q, qe = q_capacity_pcds(pc, settings, dominating=dominating), qe_capacity_pcds(pc, settings)
    return {
        'gamma': float(gamma),
        'Q': q.value,
        'QE': qe.value,
        'degradable': q.degradability.status.value if q.degradability else 'unknown',
        'lower': q.lower_bound,
        'upper': q.upper_bound,
        'method': q.method.value,
    }


def run_mad_sweep(spec: SweepSpec, settings: Optional[SolverSettings] = None) -> List[Dict[str, Any]]:
    """Capacities of the single-decay multi-level damping channel against gamma"""
    settings = _settings_for(spec, settings)
    logger.info(f"MAD sweep (d_C={spec.d_c}) over {spec.gamma_grid.count} points")
    return _run_points(spec.gamma_grid.values(), lambda g: _mad_point(spec.d_c, float(g), settings), spec.jobs)


def _combined_point(d_c: int, gamma: float, kappa: float, settings: SolverSettings) -> Dict[str, Any]:
    pc = make_combined(d_c, gamma, kappa)
    dominating = decay_factorization(d_c, gamma, kappa) if gamma > 0.5 else None
    q = q_capacity_pcds(pc, settings, dominating=dominating)
    qe = qe_capacity_pcds(pc, settings)
    if d_c == 3 and gamma <= 0.5 and q.degradability is not None and q.degradability.is_degradable:
        _check_agreement(f"Q at gamma={gamma:g}, kappa={kappa:g}", combined_channel_q_direct(gamma, kappa), q.value)
    return {
        'gamma': float(gamma),
        'kappa': float(kappa),
        'Q': q.value,
        'QE': qe.value,
        'lower': q.lower_bound,
        'upper': q.upper_bound,
        'gap': q.gap,
        'method': q.method.value,
    }


def run_combined_surface(spec: SweepSpec, settings: Optional[SolverSettings] = None) -> List[Dict[str, Any]]:
    """Q and Q_E of the combined decay/dephasing channel on the gamma x kappa grid, gamma-major"""
    settings = _settings_for(spec, settings)
    points = list(product(spec.gamma_grid.values(), spec.kappa_grid.values()))
    logger.info(f"Combined surface (d_C={spec.d_c}) over {len(points)} points")
    return _run_points(points, lambda gk: _combined_point(spec.d_c, float(gk[0]), float(gk[1]), settings),
                       spec.jobs)


def _capacities(ch: KrausChannel, partition: Optional[BlockPartition], settings: SolverSettings):
    if partition is not None and is_pcds(ch, partition)[0]:
        pc = from_channel(ch, partition)
        return q_capacity_pcds(pc, settings), qe_capacity_pcds(pc, settings)
    return q_capacity_channel(ch, settings), qe_capacity_channel(ch, settings)


def run_custom_channel(spec: SweepSpec, settings: Optional[SolverSettings] = None) -> List[Dict[str, Any]]:
    """Single row for a channel read from a JSON document"""
    settings = _settings_for(spec, settings)
    ch, partition = load_channel_document(spec.channel)
    q, qe = _capacities(ch, partition, settings)
    return [{
        'Q': q.value,
        'QE': qe.value,
        'degradable': q.degradability.status.value if q.degradability else 'unknown',
        'lower': q.lower_bound,
        'upper': q.upper_bound,
        'gap': q.gap,
        'method': q.method.value,
    }]


RUNNERS = {
    SweepFamily.DEPHASING: (run_dephasing_sweep, DEPHASING_COLUMNS),
    SweepFamily.MAD_SINGLE: (run_mad_sweep, MAD_COLUMNS),
    SweepFamily.COMBINED: (run_combined_surface, COMBINED_COLUMNS),
    SweepFamily.CUSTOM_JSON: (run_custom_channel, CUSTOM_COLUMNS),
}


def run_sweep(spec: SweepSpec, settings: Optional[SolverSettings] = None) -> List[Dict[str, Any]]:
    runner, _ = RUNNERS[spec.family]
    rows = runner(spec, settings)
    logger.info(f"Sweep '{spec.family.value}' finished with {len(rows)} rows")
    return rows


def analyze_channel(ch: KrausChannel, partition: Optional[BlockPartition] = None,
                    settings: Optional[SolverSettings] = None) -> Dict[str, Any]:
    """Report on a channel: CPT residual, PCDS test, degradability verdict and capacities"""
    settings = settings or SolverSettings()
    report = {
        'channel': {'dim_in': ch.dim_in, 'dim_out': ch.dim_out, 'num_kraus': ch.num_kraus},
        'cpt': validate_cpt(ch).to_dict(),
        'partition': partition.to_list() if partition is not None else None,
    }
    if partition is not None:
        pcds, largest = is_pcds(ch, partition)
        report['is_pcds'] = pcds
        report['off_block_max'] = largest
    else:
        report['is_pcds'] = None

    q, qe = _capacities(ch, partition, settings)
    if report['is_pcds']:
        report['degradability'] = q.degradability.to_dict()
    else:
        report['degradability'] = find_degrading_map(ch).to_dict()
    report['capacity'] = q.to_dict()
    report['assisted_capacity'] = qe.to_dict()
    return report


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def rows_to_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction='ignore', lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(v) for k, v in row.items()})
    return buffer.getvalue()


def rows_to_json(rows: Sequence[Dict[str, Any]], spec: SweepSpec) -> str:
    return json.dumps({'spec': spec.to_dict(), 'rows': list(rows)}, indent=2) + '\n'


def write_output(text: str, path: Optional[str] = None):
    """Write to a file, or to stdout when no path is given"""
    if path is None or path == '-':
        sys.stdout.write(text)
        return
    with open(path, 'w', newline='') as f:
        f.write(text)
    logger.info(f"Output written to {path}")


def render_rows(rows: Sequence[Dict[str, Any]], spec: SweepSpec) -> str:
    _, columns = RUNNERS[spec.family]
    if spec.format == 'json':
        return rows_to_json(rows, spec)
    return rows_to_csv(rows, columns)
