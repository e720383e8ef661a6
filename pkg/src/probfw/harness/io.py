"""CSV and report artifacts, written atomically.

Floats are written with ``repr`` so that reruns with identical inputs
produce byte-identical files.
"""
import csv
import io
import math
import os
import tempfile

import numpy as np

from ..measure import from_rows, to_rows

TRACE_HEADER = ("k", "objective", "obj_gap", "fw_gap", "atoms", "eta", "m", "elapsed_ms", "seed")


def fmt(value):
    """Deterministic text for one CSV cell; missing values become empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "" if math.isnan(v) else repr(v)
    return str(value)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trace_csv(trace, seed):
    """Trace rows under :data:`TRACE_HEADER`."""
    rows = (
        (r.k, r.objective, r.obj_gap, r.fw_gap, r.atoms, r.eta, r.m, r.elapsed_ms, seed)
        for r in trace.rows
    )
    return csv_text(TRACE_HEADER, rows)


def measure_csv(mu):
    """One row per atom: coordinates ``x0..x{d-1}`` then ``weight``."""
    header = [f"x{i}" for i in range(mu.dim)] + ["weight"]
    return csv_text(header, to_rows(mu))


def read_measure_csv(path, dom):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return from_rows([[float(v) for v in r] for r in rows], dom)


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_atomic(path, text):
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
