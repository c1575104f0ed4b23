"""Backend selection for the propagator sweep.

The compiled extension is used when it imports; otherwise (or when
PHSTAB_PURE_PYTHON=1) the numpy fallback takes over.  Work is split into
t-chunks handed to a thread pool; the compiled kernel releases the GIL.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

_compiled = None
if os.environ.get("PHSTAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the sweep function for ``name`` in {None, "cython", "python"}."""
    if name is None:
        name = BACKEND
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel phstab._kernels is not available")
        return _compiled.sweep
    if name == "python":
        return _fallback.sweep
    raise ValueError(f"unknown backend {name!r}")


def sweep(a_mats, b_mat, lengths, ts, n_interior=8, want_sup=True, backend=None, workers=None):
    """Phi_t(b) and sup_x ||Phi_t(x)|| for every t in ``ts``."""
    fn = get_backend(backend)
    a_mats = np.ascontiguousarray(a_mats, dtype=float)
    b_mat = np.ascontiguousarray(b_mat, dtype=float)
    lengths = np.ascontiguousarray(lengths, dtype=float)
    ts = np.ascontiguousarray(np.atleast_1d(ts), dtype=float)
    if workers is None:
        workers = min(os.cpu_count() or 1, 8)
    if workers <= 1 or ts.size < 256:
        return fn(a_mats, b_mat, lengths, ts, n_interior, want_sup)
    chunks = np.array_split(ts, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: fn(a_mats, b_mat, lengths, np.ascontiguousarray(c), n_interior, want_sup), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
