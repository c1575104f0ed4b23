"""Problem specification and TOML ingestion.

A spec file has the sections [p1], [p0], [hamiltonian], [boundary], [sweep]
and [sim].  Matrices are row-major nested arrays.  Every validation problem
is collected and reported together.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .boundary import mk_to_w
from .errors import ParseError, PHStabError, ValidationError
from .hamiltonian import HamiltonianDensity, bounds
from .linalg import spectral_split
from .propagator import check_p0
from .stability import SweepParams


@dataclass
class SimParams:
    n_cells: int = 200
    t_final: float = 10.0
    dt: float | None = None
    init: str = "bump"  # or "eigenmode"


@dataclass(eq=False)
class ProblemSpec:
    p1: np.ndarray
    hamiltonian: HamiltonianDensity
    boundary: dict
    p0: np.ndarray | None = None
    sweep: SweepParams = field(default_factory=SweepParams)
    sim: SimParams | None = None
    name: str = "problem"
    oracle: dict = field(default_factory=dict)
    source: str | None = None

    def __post_init__(self):
        self.p1 = np.asarray(self.p1, dtype=float)
        d = self.p1.shape[0]
        self.p0 = check_p0(self.p0, d)
        if "W" in self.boundary:
            self._w = np.asarray(self.boundary["W"], dtype=float)
        else:
            m = np.asarray(self.boundary["M"], dtype=float)
            k = self.boundary.get("K")
            self._w = mk_to_w(m, None if k is None else np.asarray(k, dtype=float), spectral_split(self.p1))

    @property
    def d(self):
        return self.p1.shape[0]

    @property
    def w(self):
        return self._w

    @property
    def interval(self):
        return self.hamiltonian.a, self.hamiltonian.b

    def with_(self, **kw):
        return replace(self, **kw)


def _matrix(value, name, errors, shape=None):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        errors.append(f"{name}: not a numeric matrix")
        return None
    if arr.ndim == 0 or arr.ndim == 1 and shape == "square":
        arr = np.atleast_2d(arr)
    if shape == "square" and (arr.ndim != 2 or arr.shape[0] != arr.shape[1]):
        errors.append(f"{name}: expected a square matrix, got shape {arr.shape}")
        return None
    if not np.all(np.isfinite(arr)):
        errors.append(f"{name}: non-finite entries")
        return None
    return arr


def _read_csv_density(path, a, b, d, errors):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        errors.append(f"hamiltonian.path: {exc}")
        return None
    rows = list(csv.reader(io.StringIO(text)))
    if rows and rows[0] and not _is_number(rows[0][0]):
        rows = rows[1:]
    iu = np.triu_indices(d)
    ncols = 1 + len(iu[0])
    mats, xs = [], []
    for lineno, row in enumerate(rows, start=1):
        if not row:
            continue
        if len(row) != ncols:
            errors.append(f"hamiltonian csv row {lineno}: expected {ncols} columns, got {len(row)}")
            return None
        vals = [float(v) for v in row]
        xs.append(vals[0])
        hm = np.zeros((d, d))
        hm[iu] = vals[1:]
        hm = hm + np.triu(hm, 1).T
        mats.append(hm)
    n = len(mats)
    if n == 0:
        errors.append("hamiltonian csv: no data rows")
        return None
    mids = a + (np.arange(n) + 0.5) * (b - a) / n
    if not np.allclose(xs, mids, rtol=0, atol=1e-9 * max(1.0, abs(b - a))):
        errors.append("hamiltonian csv: x column must hold the midpoints of uniform cells on [a, b]")
        return None
    return HamiltonianDensity.sampled(a, b, np.array(mats))


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _hamiltonian(sec, d, errors, base_dir):
    kind = sec.get("type")
    a = float(sec.get("a", 0.0))
    b = float(sec.get("b", 1.0))
    if not a < b:
        errors.append(f"interval: need a < b, got a = {a}, b = {b}")
        return None
    try:
        if kind == "constant":
            h0 = _matrix(sec.get("matrix"), "hamiltonian.matrix", errors, "square")
            return None if h0 is None else HamiltonianDensity.constant(h0, a, b)
        if kind == "scalar":
            bp = sec.get("breakpoints", [a, b])
            vals = sec.get("values", [sec.get("value", 1.0)])
            return HamiltonianDensity.scalar(bp, vals, d)
        if kind == "piecewise":
            mats = np.array(sec.get("matrices"), dtype=float)
            return HamiltonianDensity.piecewise(sec.get("breakpoints"), mats)
        if kind == "csv":
            path = Path(sec.get("path", ""))
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            return _read_csv_density(path, a, b, d, errors)
    except ValidationError as exc:
        errors.extend(f"hamiltonian: {e}" for e in exc.errors)
        return None
    except (TypeError, ValueError) as exc:
        errors.append(f"hamiltonian: {exc}")
        return None
    errors.append(f"hamiltonian.type must be constant, scalar, piecewise or csv (got {kind!r})")
    return None


def parse_spec(doc, base_dir=None, source=None):
    errors = []
    p1 = _matrix(doc.get("p1", {}).get("matrix"), "p1.matrix", errors, "square") if "p1" in doc else None
    if "p1" not in doc:
        errors.append("missing section [p1]")
    d = p1.shape[0] if p1 is not None else None
    if p1 is not None:
        try:
            spectral_split(p1)
        except PHStabError as exc:
            errors.append(f"p1: {exc}")

    p0 = None
    if "p0" in doc and d is not None:
        p0 = _matrix(doc["p0"].get("matrix"), "p0.matrix", errors, "square")
        if p0 is not None:
            try:
                check_p0(p0, d)
            except PHStabError as exc:
                errors.append(f"p0: {exc}")

    h = None
    if "hamiltonian" not in doc:
        errors.append("missing section [hamiltonian]")
    elif d is not None:
        h = _hamiltonian(doc["hamiltonian"], d, errors, base_dir)
        if h is not None:
            if h.d != d:
                errors.append(f"hamiltonian has d = {h.d}, p1 has d = {d}")
            else:
                try:
                    bounds(h)
                except PHStabError as exc:
                    errors.append(f"hamiltonian: {exc}")

    boundary = {}
    if "boundary" not in doc:
        errors.append("missing section [boundary]")
    else:
        sec = doc["boundary"]
        if "W" in sec:
            w = _matrix(sec["W"], "boundary.W", errors)
            if w is not None and d is not None and w.shape != (d, 2 * d):
                errors.append(f"boundary.W must be {d} x {2 * d}, got {w.shape}")
            boundary["W"] = w
        elif "M" in sec:
            boundary["M"] = _matrix(sec["M"], "boundary.M", errors, "square")
            if "K" in sec:
                boundary["K"] = _matrix(sec["K"], "boundary.K", errors, "square")
        else:
            errors.append("boundary: give either W or M (and optionally K)")

    sw = doc.get("sweep", {})
    sweep = SweepParams(
        t_max=sw.get("t_max"),
        n_samples=int(sw.get("n_samples", 2048)),
        doubling_rounds=int(sw.get("doubling_rounds", 2)),
        evidence_drop=float(sw.get("evidence_drop", 0.2)),
    )
    if sweep.t_max is not None and not sweep.t_max > 0:
        errors.append("sweep.t_max must be positive")
    if sweep.n_samples < 8:
        errors.append("sweep.n_samples must be at least 8")

    sim = None
    if "sim" in doc:
        s = doc["sim"]
        sim = SimParams(int(s.get("n_cells", 200)), float(s.get("t_final", 10.0)),
                        s.get("dt"), str(s.get("init", "bump")))

    if errors:
        raise ValidationError(errors)
    try:
        return ProblemSpec(p1=p1, hamiltonian=h, boundary=boundary, p0=p0, sweep=sweep, sim=sim,
                           name=str(doc.get("name", "problem")), oracle=dict(doc.get("oracle", {})),
                           source=source)
    except PHStabError as exc:
        raise ValidationError([f"boundary: {exc}"]) from exc


def load_spec(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return loads_spec(text, base_dir=path.parent, source=str(path))


def loads_spec(text, base_dir=None, source=None):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message already carries "(at line L, column C)"
        raise ParseError(f"{source or '<string>'}: {exc}") from exc
    return parse_spec(doc, base_dir, source)


def _fmt(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    x = float(x)
    return repr(int(x)) + ".0" if x == int(x) and abs(x) < 1e15 else repr(x)


def dumps_spec(problem: ProblemSpec):
    """Serialise a ProblemSpec back to TOML (piecewise form for the density)."""
    h = problem.hamiltonian
    lines = [f'name = "{problem.name}"', "", "[p1]", f"matrix = {_fmt(problem.p1)}", ""]
    if np.any(problem.p0):
        lines += ["[p0]", f"matrix = {_fmt(problem.p0)}", ""]
    lines += ["[hamiltonian]"]
    if h.kind == "constant":
        lines += ['type = "constant"', f"a = {_fmt(h.a)}", f"b = {_fmt(h.b)}", f"matrix = {_fmt(h.matrices[0])}"]
    elif h.kind == "scalar":
        lines += ['type = "scalar"', f"breakpoints = {_fmt(h.breakpoints)}", f"values = {_fmt(h.scalar_values)}"]
    else:
        lines += ['type = "piecewise"', f"breakpoints = {_fmt(h.breakpoints)}", f"matrices = {_fmt(h.matrices)}"]
    lines += ["", "[boundary]", f"W = {_fmt(problem.w)}", "", "[sweep]"]
    if problem.sweep.t_max is not None:
        lines.append(f"t_max = {_fmt(problem.sweep.t_max)}")
    lines += [f"n_samples = {problem.sweep.n_samples}", f"doubling_rounds = {problem.sweep.doubling_rounds}"]
    if problem.sim is not None:
        lines += ["", "[sim]", f"n_cells = {problem.sim.n_cells}", f"t_final = {_fmt(problem.sim.t_final)}"]
        if problem.sim.dt is not None:
            lines.append(f"dt = {_fmt(problem.sim.dt)}")
        lines.append(f'init = "{problem.sim.init}"')
    if problem.oracle:
        lines += ["", "[oracle]"] + [f"{k} = {_toml_value(v)}" for k, v in sorted(problem.oracle.items())]
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    return _fmt(v) if not isinstance(v, int) else str(v)

