"""Dense small-matrix linear algebra.

Spectral split of the (symmetric, invertible) coefficient matrix P1 into its
positive and negative eigenspaces, the weighted norms on those spaces, and a
batched scaling-and-squaring Pade matrix exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NearSingular, NotSymmetric, Overflow

SYMMETRY_RTOL = 1e-12
SINGULAR_RTOL = 1e-10


def norm2(a):
    """Spectral norm; 0 for empty matrices."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def check_symmetric(a, name="matrix", rtol=SYMMETRY_RTOL):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    resid = np.linalg.norm(a - a.T, 2)
    scale = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    if resid > rtol * scale:
        raise NotSymmetric(
            f"{name} is not symmetric: ||A - A^T|| = {resid:.3e} (relative {resid / scale:.3e})"
        )
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Orthogonal decomposition R^d = E+ (+) E- by the sign of P1's eigenvalues.

    ``iota_plus`` / ``iota_minus`` have orthonormal columns; ``p1_plus`` and
    ``p1_minus`` are the (positive definite) compressions of P1 and -P1.
    """

    p1: np.ndarray
    eigvals_plus: np.ndarray
    eigvals_minus: np.ndarray  # positive numbers: magnitudes of P1's negative eigenvalues
    iota_plus: np.ndarray
    iota_minus: np.ndarray

    @property
    def d(self):
        return self.p1.shape[0]

    @property
    def dim_plus(self):
        return self.iota_plus.shape[1]

    @property
    def dim_minus(self):
        return self.iota_minus.shape[1]

    @property
    def p1_plus(self):
        return np.diag(self.eigvals_plus)

    @property
    def p1_minus(self):
        return np.diag(self.eigvals_minus)

    def _lift(self, fplus, fminus):
        return (self.iota_plus * fplus) @ self.iota_plus.T + (self.iota_minus * fminus) @ self.iota_minus.T

    @property
    def q_plus(self):
        return (self.iota_plus * np.sqrt(self.eigvals_plus)) @ self.iota_plus.T

    @property
    def q_minus(self):
        return (self.iota_minus * np.sqrt(self.eigvals_minus)) @ self.iota_minus.T

    @property
    def p_plus(self):
        return self.iota_plus @ self.iota_plus.T

    @property
    def p_minus(self):
        return self.iota_minus @ self.iota_minus.T

    @property
    def abs_inv_sqrt(self):
        """iota+ (P1+)^{-1/2} iota+^T + iota- (P1-)^{-1/2} iota-^T."""
        return self._lift(self.eigvals_plus ** -0.5, self.eigvals_minus ** -0.5)

    @property
    def plus_weight_inv(self):
        """iota+ (P1+)^{-1} iota+^T, the E+ norm as a quadratic form on R^d."""
        return (self.iota_plus / self.eigvals_plus) @ self.iota_plus.T

    @property
    def minus_weight_inv(self):
        return (self.iota_minus / self.eigvals_minus) @ self.iota_minus.T

    @property
    def p1_inv(self):
        return self._lift(1.0 / self.eigvals_plus, -1.0 / self.eigvals_minus)

    def block_condition(self, sign):
        ev = self.eigvals_plus if sign == "plus" else self.eigvals_minus
        if ev.size == 0:
            return 1.0
        return float(ev.max() / ev.min())


def spectral_split(p1):
    """Split P1 into its positive and negative eigenspaces.

    Raises NotSymmetric for a non-symmetric input and NearSingular when the
    smallest eigenvalue magnitude is below 1e-10 times the largest.
    """
    p1 = check_symmetric(p1, "P1")
    lam, vec = np.linalg.eigh(p1)
    amax = np.abs(lam).max() if lam.size else 0.0
    if lam.size == 0 or amax == 0.0 or np.abs(lam).min() < SINGULAR_RTOL * amax:
        raise NearSingular(
            f"P1 is numerically singular (eigenvalues {lam})"
        )
    pos = lam > 0
    return SpectralSplit(
        p1=p1,
        eigvals_plus=lam[pos],
        eigvals_minus=-lam[~pos],
        iota_plus=vec[:, pos],
        iota_minus=vec[:, ~pos],
    )


def e_norm(split, sign, x):
    """Weighted norm ||(P1^{+-})^{-1/2} x|| of a vector given in E+- coordinates."""
    x = np.asarray(x)
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    ev = split.eigvals_plus if sign == "plus" else split.eigvals_minus
    x = np.atleast_1d(x)
    if x.shape != ev.shape:
        raise DimensionMismatch(f"expected a vector of length {ev.size}, got shape {x.shape}")
    # iota has orthonormal columns and p1_+- is diagonal in these coordinates
    return float(np.linalg.norm(x / np.sqrt(ev)))


# Higham (2005) scaling-and-squaring constants.
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068e0, 13: 5.371920351148152e0}
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
         33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0),
}


def _pade_uv(a, m):
    b = _PADE[m]
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    powers = [eye, a2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    v = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return a @ u, v


def expm(a):
    """Matrix exponential by scaling and squaring with a Pade approximant.

    Accepts a single (d, d) matrix or a stack (..., d, d); each matrix in a
    stack gets its own Pade degree and scaling exponent.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"expm needs square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise Overflow("expm input has non-finite entries")
    dtype = np.result_type(a.dtype, np.float64)
    single = a.ndim == 2
    stack = a.reshape((-1,) + a.shape[-2:]).astype(dtype, copy=True)
    out = np.empty_like(stack)
    if stack.shape[-1] == 0:
        return out.reshape(a.shape)
    norms = np.abs(stack).sum(axis=-2).max(axis=-1)  # 1-norm

    degree = np.full(norms.shape, 13)
    for m in (9, 7, 5, 3):
        degree[norms <= _THETA[m]] = m
    squarings = np.zeros(norms.shape, dtype=int)
    big = norms > _THETA[13]
    squarings[big] = np.ceil(np.log2(norms[big] / _THETA[13])).astype(int)

    for m in (3, 5, 7, 9, 13):
        idx = np.nonzero(degree == m)[0]
        if idx.size == 0:
            continue
        scaled = stack[idx] / (2.0 ** squarings[idx])[:, None, None]
        u, v = _pade_uv(scaled, m)
        out[idx] = np.linalg.solve(v - u, v + u)

    with np.errstate(over="ignore", invalid="ignore"):  # overflow is reported below
        for k in range(1, int(squarings.max(initial=0)) + 1):
            idx = np.nonzero(squarings >= k)[0]
            out[idx] = out[idx] @ out[idx]

    if not np.all(np.isfinite(out)):
        raise Overflow("matrix exponential overflowed")
    return out[0] if single else out.reshape(a.shape)


def sqrtm_spd(a):
    lam, vec = np.linalg.eigh(a)
    return (vec * np.sqrt(lam)) @ vec.T


def inv_sqrtm_spd(a):
    lam, vec = np.linalg.eigh(a)
    return (vec / np.sqrt(lam)) @ vec.T
