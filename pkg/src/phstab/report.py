"""Serialisation of analysis results: JSON reports and CSV tables."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .stability import CERTIFIED, EVIDENCE, INCONCLUSIVE, NUMERIC, UNSTABLE

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_UNDECIDED = 3

EXIT_CODES = {CERTIFIED: EXIT_OK, NUMERIC: EXIT_OK, UNSTABLE: EXIT_UNSTABLE,
              INCONCLUSIVE: EXIT_UNDECIDED, EVIDENCE: EXIT_UNDECIDED}

SIM_CAVEAT = ("the upwind scheme adds numerical dissipation, so the simulation can confirm decay "
              "but only approximately exhibit modes that do not decay")


def exit_code(verdict):
    return EXIT_CODES.get(verdict, EXIT_ERROR)


def clean(obj):
    """Recursively convert to JSON-safe values; infinities become "Unbounded"."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "Unbounded" if x > 0 else "-Unbounded"
        return None if math.isnan(x) else x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def to_json(doc):
    return json.dumps(clean(doc), sort_keys=True, indent=2) + "\n"


def document(body, reproducible=False):
    doc = {"tool": {"name": "phstab", "version": __version__}}
    doc.update(body)
    if not reproducible:
        doc["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return doc


def error_entry(exc):
    return {"code": getattr(exc, "code", "error"), "type": type(exc).__name__, "message": str(exc)}


def write_json(doc, path):
    Path(path).write_text(to_json(doc))


def write_sweep_csv(sweep, target):
    _write_rows(target, ("t", "abs_det", "sigma_min", "inv_norm", "phi_norm"), sweep.rows())


def write_energy_csv(traj, target):
    _write_rows(target, ("t", "E"), traj.rows())


def _write_rows(target, header, rows):
    def dump(fh):
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow(["nan" if not np.isfinite(v) else repr(float(v)) for v in row])

    if hasattr(target, "write"):
        dump(target)
    else:
        with open(target, "w", newline="") as fh:
            dump(fh)


def summary_lines(doc):
    """Short human-readable summary of an analyze document."""
    out = []
    st = doc.get("stability")
    if st:
        out.append(f"verdict: {st['verdict']}")
        if st.get("criterion"):
            out.append(f"criterion: {st['criterion']['label']}")
        if st.get("witness_t") is not None:
            out.append(f"witness t = {st['witness_t']:.12g}  sigma_min = {st['sigma_at_witness']:.3e}")
        if st.get("min_sigma") is not None:
            out.append(f"min sigma_min(T_t) over sweep = {st['min_sigma']:.6e}")
        cb = st["condition_b"]
        out.append(f"uniform bound on Phi: {cb['certified']} (swept sup {cb['swept_sup']:.4g})")
        for c in st.get("caveats", []):
            out.append(f"note: {c}")
    if doc.get("diophantine"):
        dp = doc["diophantine"]
        out.append(f"diophantine probe: k = {dp['k']}, |det| = {dp['abs_det_closed_form']:.3e}")
    if doc.get("simulation"):
        sm = doc["simulation"]
        out.append(f"simulation: fitted log-energy rate {sm['fitted_rate']:.4g} (r^2 {sm['fit_r2']:.3f})")
    for e in doc.get("errors", []):
        out.append(f"error [{e['code']}]: {e['message']}")
    out.append(f"exit code: {doc.get('exit_code')}")
    return out
