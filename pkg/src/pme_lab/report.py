"""Deterministic CSV/JSON writers for tables and records."""

import csv
import io
import json
import math
import sys

SPECTRUM_COLUMNS = ("ell", "k", "lambda", "multiplicity", "degree")
EIGENSOLVE_COLUMNS = ("ell", "k", "lambda_closed", "lambda_numeric", "rel_error")
SERIES_COLUMNS = ("t_hat", "d_L1", "d_weightedL2", "d_W2")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if hasattr(value, "item") and not isinstance(value, (list, dict, str)):
        return value.item()
    return value


def _cell(value):
    value = _clean(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_report(record, fmt="csv", columns=None):
    """Render ``record`` (a list of row dicts, or one dict) as CSV or JSON text.

    Column/key order is ``columns`` when given, otherwise the insertion order
    of the first row.  The text always ends with a newline.
    """
    rows = record if isinstance(record, list) else [record]
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    if fmt == "json":
        if isinstance(record, list):
            payload = [{c: _clean(r.get(c)) for c in columns} for r in rows]
        else:
            payload = {c: _clean(record.get(c)) for c in columns}
        return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_report(record, fmt="csv", path=None, columns=None):
    """Write the rendered report to ``path`` (UTF-8) or to standard output."""
    text = format_report(record, fmt, columns)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def dumps_json(obj):
    """JSON for nested structures whose dict order is already fixed."""

    def fix(o):
        if isinstance(o, dict):
            return {k: fix(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [fix(v) for v in o]
        return _clean(o)

    return json.dumps(fix(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"
