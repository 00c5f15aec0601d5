"""CSV and JSON emission of experiment rows."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys

from .experiments import ExperimentResult, Row

COLUMNS = ('trial', 'sweep_name', 'sweep_value', 'method', 'user_index_or_blank',
           'rate_bits', 'utility', 'harvested_uW', 'interference_uW',
           'outer_iters', 'inner_iters', 'wall_ms', 'status')

#: Columns that depend on the machine and are ignored by determinism checks.
TIMING_COLUMNS = ('wall_ms',)


def _num(x) -> str:
    if x is None:
        return ''
    if isinstance(x, float):
        # numpy scalars subclass float but repr as np.float64(...)
        return repr(float(x))
    return str(x)


def _vec(v) -> str:
    return ';'.join(repr(float(x)) for x in v)


def row_fields(row: Row) -> list:
    """Row as strings in :data:`COLUMNS` order (floats via ``repr``)."""
    return [str(row.trial), row.sweep_name, _num(row.sweep_value), row.method,
            _num(row.user_index), _num(row.rate_bits), _num(row.utility),
            _vec(row.harvested_uW), _vec(row.interference_uW),
            _num(row.outer_iters), _num(row.inner_iters), _num(row.wall_ms),
            row.status]


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow(row_fields(row))
    return buf.getvalue()


def _json_float(x):
    # JSON has no inf/nan; keep them as strings that float() reads back
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _row_json(row: Row) -> dict:
    d = dataclasses.asdict(row)
    d['user_index_or_blank'] = d.pop('user_index')
    d['harvested_uW'] = [_json_float(float(x)) for x in row.harvested_uW]
    d['interference_uW'] = [_json_float(float(x)) for x in row.interference_uW]
    for k in ('sweep_value', 'rate_bits', 'utility', 'wall_ms'):
        d[k] = _json_float(d[k])
    return {c: d[c] for c in COLUMNS}


def to_json(result: ExperimentResult) -> str:
    cfg = {k: _json_float(v) for k, v in result.config.items()}
    return json.dumps({'config': cfg, 'columns': list(COLUMNS),
                       'rows': [_row_json(r) for r in result.rows]},
                      indent=1, allow_nan=False) + '\n'


def emit(result: ExperimentResult, path=None, format: str = 'csv') -> None:
    """Write ``result`` to ``path`` (stdout when None) as CSV or JSON.

    Raises
    ------
    OSError
        With the offending path in the message.
    """
    if format not in ('csv', 'json'):
        raise ValueError(f"unknown format {format!r}")
    text = to_csv(result.rows) if format == 'csv' else to_json(result)
    if path is None or str(path) == '-':
        sys.stdout.write(text)
        return
    try:
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def strip_timing(csv_text: str) -> str:
    """CSV text with the timing columns removed (for determinism checks)."""
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return ''
    drop = {rows[0].index(c) for c in TIMING_COLUMNS if c in rows[0]}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    for r in rows:
        w.writerow([x for i, x in enumerate(r) if i not in drop])
    return buf.getvalue()
