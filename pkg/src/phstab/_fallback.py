"""Pure numpy implementation of the propagator sweep (same contract as the
compiled ``_kernels.sweep``)."""

import numpy as np

from .errors import Overflow
from .linalg import expm

CHUNK = 512


def sweep(a_mats, b_mat, lengths, ts, n_interior=8, want_sup=True):
    a_mats = np.asarray(a_mats, dtype=float)
    b_mat = np.asarray(b_mat, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    ts = np.asarray(ts, dtype=float)
    d = a_mats.shape[1]
    n_sub = n_interior + 1 if want_sup else 1
    out_phi = np.empty((ts.size, d, d), dtype=complex)
    out_sup = np.full(ts.size, np.nan)
    for lo in range(0, ts.size, CHUNK):
        t = ts[lo:lo + CHUNK]
        phi = np.broadcast_to(np.eye(d, dtype=complex), (t.size, d, d)).copy()
        best = np.ones(t.size)
        for a_j, length in zip(a_mats, lengths):
            step = expm((length / n_sub) * (b_mat[None] + 1j * t[:, None, None] * a_j[None]))
            for _ in range(n_sub):
                with np.errstate(over="ignore", invalid="ignore"):
                    phi = step @ phi
                if not np.all(np.isfinite(phi)):
                    raise Overflow("propagator overflowed")
                if want_sup:
                    best = np.maximum(best, np.linalg.norm(phi, 2, axis=(1, 2)))
        out_phi[lo:lo + CHUNK] = phi
        if want_sup:
            out_sup[lo:lo + CHUNK] = best
    return out_phi, out_sup
