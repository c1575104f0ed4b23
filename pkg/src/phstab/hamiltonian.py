"""Piecewise-constant Hamiltonian densities x -> H(x) on [a, b].

Every representation (constant, scalar, piecewise, sampled) is normalised to
a list of breakpoints a = x_0 < ... < x_N = b and symmetric matrices H_j on
the cells [x_{j-1}, x_j).  Continuous densities are handled upstream by
sampling (see ``HamiltonianDensity.from_function``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, OutOfInterval, ValidationError
from .linalg import check_symmetric

KINDS = ("constant", "scalar", "piecewise", "sampled")
INVARIANCE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class HamiltonianDensity:
    breakpoints: np.ndarray
    matrices: np.ndarray  # (N, d, d)
    kind: str = "piecewise"
    scalar_values: np.ndarray | None = field(default=None)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        mats = np.asarray(self.matrices, dtype=float)
        errors = []
        if self.kind not in KINDS:
            errors.append(f"unknown density kind {self.kind!r}")
        if bp.ndim != 1 or bp.size < 2:
            errors.append("need at least two breakpoints")
        elif not np.all(np.diff(bp) > 0):
            errors.append("breakpoints must be strictly increasing (a < b)")
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            errors.append(f"matrices must have shape (N, d, d), got {mats.shape}")
        elif bp.ndim == 1 and mats.shape[0] != bp.size - 1:
            errors.append(f"{bp.size} breakpoints need {bp.size - 1} pieces, got {mats.shape[0]}")
        if errors:
            raise ValidationError(errors)
        sym = []
        for j, hj in enumerate(mats):
            try:
                sym.append(check_symmetric(hj, f"H piece {j}"))
            except Exception as exc:  # collect every offending piece
                errors.append(str(exc))
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "matrices", np.array(sym))

    # constructors

    @classmethod
    def constant(cls, h0, a=0.0, b=1.0):
        h0 = np.atleast_2d(np.asarray(h0, dtype=float))
        return cls(np.array([a, b], dtype=float), h0[None], kind="constant")

    @classmethod
    def scalar(cls, breakpoints, values, d):
        """H(x) = h(x) I_d with h piecewise constant."""
        values = np.asarray(values, dtype=float).ravel()
        mats = values[:, None, None] * np.eye(d)[None]
        return cls(np.asarray(breakpoints, dtype=float), mats, kind="scalar", scalar_values=values)

    @classmethod
    def piecewise(cls, breakpoints, matrices):
        return cls(np.asarray(breakpoints, dtype=float), np.asarray(matrices, dtype=float), kind="piecewise")

    @classmethod
    def sampled(cls, a, b, values):
        """Uniform cells on [a, b]; ``values[j]`` is H at the midpoint of cell j."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        return cls(np.linspace(a, b, n + 1), values, kind="sampled")

    @classmethod
    def from_function(cls, func: Callable[[float], np.ndarray], a, b, n):
        """Sample a continuous density at the midpoints of n uniform cells."""
        mids = a + (np.arange(n) + 0.5) * (b - a) / n
        return cls.sampled(a, b, np.array([np.atleast_2d(func(x)) for x in mids]))

    # basic properties

    @property
    def a(self):
        return float(self.breakpoints[0])

    @property
    def b(self):
        return float(self.breakpoints[-1])

    @property
    def d(self):
        return self.matrices.shape[1]

    @property
    def n_pieces(self):
        return self.matrices.shape[0]

    @property
    def lengths(self):
        return np.diff(self.breakpoints)

    @property
    def is_scalar(self):
        if self.kind == "scalar":
            return True
        # a matrix density may still be a multiple of the identity everywhere
        diag = np.einsum("jii->ji", self.matrices)
        off = self.matrices - diag[:, :, None] * np.eye(self.d)[None]
        return bool(np.all(np.abs(off) <= 1e-14 * np.abs(diag).max())
                    and np.all(np.abs(diag - diag[:, :1]) <= 1e-14 * np.abs(diag).max()))

    def inverses(self):
        return np.linalg.inv(self.matrices)

    def inverse_density(self):
        return HamiltonianDensity(self.breakpoints, self.inverses(), kind="piecewise")

    def piece_index(self, x):
        if not (self.a <= x <= self.b):
            raise OutOfInterval(f"x = {x} outside [{self.a}, {self.b}]")
        j = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return min(j, self.n_pieces - 1)

    def at(self, x):
        return self.matrices[self.piece_index(x)]

    def refine(self, extra_points):
        """Insert breakpoints without changing the represented function."""
        pts = np.union1d(self.breakpoints, np.asarray(extra_points, dtype=float))
        pts = pts[(pts >= self.a) & (pts <= self.b)]
        mats = np.array([self.at(x) for x in pts[:-1]])
        return HamiltonianDensity(pts, mats, kind="piecewise")

    def restrict(self, lo, hi):
        """The density on the subinterval [lo, hi]."""
        if not (self.a <= lo < hi <= self.b):
            raise OutOfInterval(f"[{lo}, {hi}] not inside [{self.a}, {self.b}]")
        inner = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        pts = np.concatenate([[lo], inner, [hi]])
        mats = np.array([self.at(x) for x in pts[:-1]])
        return HamiltonianDensity(pts, mats, kind="piecewise")


def bounds(h: HamiltonianDensity):
    """(m, Mbound): extreme eigenvalues over all pieces."""
    eig = np.linalg.eigvalsh(h.matrices)
    lo = float(eig.min())
    if lo <= 0:
        j = int(np.argmin(eig.min(axis=1)))
        raise NotPositiveDefinite(f"H piece {j} has eigenvalue {lo:.3e} <= 0")
    return lo, float(eig.max())


def total_variation(h: HamiltonianDensity):
    """Entrywise (l1 over matrix entries) variation of the piecewise-constant function."""
    if h.n_pieces < 2:
        return 0.0
    return float(np.abs(np.diff(h.matrices, axis=0)).sum())


@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    max_residual: float

    def __str__(self):
        return "Invariant" if self.invariant else f"NotInvariant({self.max_residual:.3e})"


def invariance_check(h: HamiltonianDensity, split):
    """Does every H_j map E+ into E+?  Checks ||P- H_j P+|| relative to ||H_j||."""
    if split.d != h.d:
        raise DimensionMismatch(f"split has d = {split.d}, density has d = {h.d}")
    if split.dim_plus == 0 or split.dim_minus == 0:
        return InvarianceResult(True, 0.0)
    worst = 0.0
    ok = True
    for hj in h.matrices:
        off = np.linalg.norm(split.iota_minus.T @ hj @ split.iota_plus, 2)
        scale = np.linalg.norm(hj, 2)
        worst = max(worst, off / scale)
        ok &= off <= INVARIANCE_RTOL * scale
    return InvarianceResult(bool(ok), float(worst))


def inverse_at(h: HamiltonianDensity, x):
    """H(x)^{-1}, cells closed on the left (the last cell is closed)."""
    return np.linalg.inv(h.at(x))
