"""Boundary data: rank and dissipativity checks, the W <-> (K, M) conversion,
dissipation rates and the boundary energy rate.

A boundary condition is W [(Hu)(b); (Hu)(a)] = 0 with W = (W1 W2) of size
d x 2d.  Equivalently Q+(Hu)(a) + Q-(Hu)(b) = M (Q+(Hu)(b) + Q-(Hu)(a)) with
||M|| <= 1, and W = K (Q- - M Q+, Q+ - M Q-) for an invertible K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DissipativityViolated,
    DomainViolation,
    KSingular,
    MNotContraction,
    RankDeficient,
    SSingular,
    ZSingular,
)
from .linalg import norm2

RANK_RTOL = 1e-10
CLASS_RTOL = 1e-10
CONTRACTION_TOL = 1e-10
PSD_RTOL = 1e-12
BISECTION_STEPS = 60

STRICT = "StrictlyPositive"
PSD = "PositiveSemidefinite"
INDEFINITE = "Indefinite"

UNBOUNDED = math.inf


@dataclass(frozen=True, eq=False)
class DissipativityReport:
    gram: np.ndarray
    classification: str
    min_eigenvalue: float
    m_norm: float

    @property
    def accretive(self):
        return self.classification in (STRICT, PSD)

    def to_dict(self):
        return {
            "gram": self.gram.tolist(),
            "classification": self.classification,
            "min_eigenvalue": self.min_eigenvalue,
            "m_norm": self.m_norm,
        }


def _split_w(w, d=None):
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2 * w.shape[0]:
        raise DimensionMismatch(f"W must be d x 2d, got shape {w.shape}")
    if d is not None and w.shape[0] != d:
        raise DimensionMismatch(f"W has {w.shape[0]} rows, expected d = {d}")
    n = w.shape[0]
    return w, w[:, :n], w[:, n:]


def check_rank(w):
    w, _, _ = _split_w(w)
    s = np.linalg.svd(w, compute_uv=False)
    if s[0] == 0 or s[-1] < RANK_RTOL * s[0]:
        raise RankDeficient(f"rank W < d (singular values {s})")
    return w


def dissipativity_check(w, p1):
    """Gram matrix W Z^{-1} J (W Z^{-1})^T with Z = [[-P1, P1], [I, I]]."""
    p1 = np.asarray(p1, dtype=float)
    w, _, _ = _split_w(w, p1.shape[0])
    check_rank(w)
    d = p1.shape[0]
    eye = np.eye(d)
    z = np.block([[-p1, p1], [eye, eye]])
    sz = np.linalg.svd(z, compute_uv=False)
    if sz[-1] < RANK_RTOL * sz[0]:
        raise ZSingular("Z = [[-P1, P1], [I, I]] is singular")
    j = np.block([[np.zeros((d, d)), eye], [eye, np.zeros((d, d))]])
    wz = np.linalg.solve(z.T, w.T).T
    gram = wz @ j @ wz.T
    gram = 0.5 * (gram + gram.T)
    lam = np.linalg.eigvalsh(gram)
    # relative to ||W Z^{-1}||^2: a conservative boundary has gram = 0
    tol = CLASS_RTOL * max(norm2(wz) ** 2, np.finfo(float).tiny)
    lam_min = float(lam[0])
    if lam_min > tol:
        cls = STRICT
    elif lam_min >= -tol:
        cls = PSD
    else:
        cls = INDEFINITE

    m_norm = math.nan
    if cls != INDEFINITE:
        from .linalg import spectral_split

        try:
            _, m = _construct_mk(w, spectral_split(p1))
            m_norm = norm2(m)
        except SSingular:
            pass
    return DissipativityReport(gram, cls, lam_min, m_norm)


def _construct_mk(w, split):
    _, w1, w2 = _split_w(w, split.d)
    s = split.p_minus @ w1.T + split.p_plus @ w2.T
    sv = np.linalg.svd(s, compute_uv=False)
    if sv[-1] < RANK_RTOL * sv[0]:
        raise SSingular(f"S = P- W1^T + P+ W2^T is singular (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})")
    c = np.linalg.solve(s.T, (split.p_plus @ w1.T + split.p_minus @ w2.T).T).T
    m = -(split.q_plus + split.q_minus) @ c.T @ split.abs_inv_sqrt
    w_tilde = _w_tilde(m, split)
    gram = w_tilde @ w_tilde.T
    k = np.linalg.solve(gram.T, (w @ w_tilde.T).T).T
    return k, m


def _w_tilde(m, split):
    return np.hstack([split.q_minus - m @ split.q_plus, split.q_plus - m @ split.q_minus])


def w_to_mk(w, split):
    """Recover (K, M) with W = K (Q- - M Q+, Q+ - M Q-) and ||M|| <= 1."""
    w = check_rank(w)
    rep = dissipativity_check(w, split.p1)
    if not rep.accretive:
        raise DissipativityViolated(
            f"boundary gram matrix is indefinite (min eigenvalue {rep.min_eigenvalue:.3e})"
        )
    k, m = _construct_mk(w, split)
    mn = norm2(m)
    if mn > 1 + CONTRACTION_TOL:
        raise DissipativityViolated(f"recovered ||M|| = {mn:.12g} > 1")
    resid = norm2(w - k @ _w_tilde(m, split))
    if resid > 1e-8 * norm2(w):
        raise SSingular(f"W is not reproduced by the recovered (K, M): residual {resid:.3e}")
    return k, m


def mk_to_w(m, k, split):
    """W = K (Q- - M Q+, Q+ - M Q-)."""
    m = np.asarray(m, dtype=float)
    d = split.d
    k = np.eye(d) if k is None else np.asarray(k, dtype=float)
    if m.shape != (d, d) or k.shape != (d, d):
        raise DimensionMismatch(f"M and K must be {d} x {d}")
    if norm2(m) > 1 + CONTRACTION_TOL:
        raise MNotContraction(f"||M|| = {norm2(m):.12g} > 1")
    sk = np.linalg.svd(k, compute_uv=False)
    if sk[0] == 0 or sk[-1] < RANK_RTOL * sk[0]:
        raise KSingular("K is singular")
    return k @ _w_tilde(m, split)


def rate_forms(m, split):
    """(G0, G_a, G_b): the quadratic forms of the dissipation-rate inequality."""
    m = np.asarray(m, dtype=float)
    g0 = np.eye(split.d) - m.T @ m
    wp, wm = split.plus_weight_inv, split.minus_weight_inv
    g_a = m.T @ wp @ m + wm
    g_b = wp + m.T @ wm @ m
    sym = lambda x: 0.5 * (x + x.T)  # noqa: E731
    return sym(g0), sym(g_a), sym(g_b)


def _is_psd(a, scale):
    return np.linalg.eigvalsh(a)[0] >= -PSD_RTOL * scale


def dissipation_rate(m, split, endpoint):
    """Largest c >= 0 with G0 - 2c G_eta >= 0; ``math.inf`` when G_eta = 0."""
    if endpoint not in ("a", "b"):
        raise ValueError(f"endpoint must be 'a' or 'b', got {endpoint!r}")
    g0, g_a, g_b = rate_forms(m, split)
    g = g_a if endpoint == "a" else g_b
    gnorm = norm2(g)
    if gnorm <= 1e-14:
        return UNBOUNDED
    lam0, vec0 = np.linalg.eigh(g0)
    scale = max(1.0, norm2(g0))
    kernel = vec0[:, lam0 <= PSD_RTOL * scale]
    if kernel.size and norm2(g @ kernel) > 1e-10 * gnorm:
        return 0.0
    lam_g = np.linalg.eigvalsh(g)
    pos = lam_g[lam_g > 1e-12 * gnorm]
    lo, hi = 0.0, max(lam0[-1], 0.0) / (2.0 * pos[0])
    if not _is_psd(g0, scale):
        return 0.0
    if _is_psd(g0 - 2 * hi * g, scale + 2 * hi * gnorm):
        return float(hi)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _is_psd(g0 - 2 * mid * g, scale + 2 * mid * gnorm):
            lo = mid
        else:
            hi = mid
    return float(lo)


def boundary_traces(y, m, split):
    """Boundary values ((Hu)(b), (Hu)(a)) of an admissible state with trace y."""
    y = np.asarray(y, dtype=float)
    my = np.asarray(m, dtype=float) @ y
    ip, im = split.iota_plus, split.iota_minus
    sp, sm = split.eigvals_plus ** -0.5, split.eigvals_minus ** -0.5
    z_b = ip @ (sp * (ip.T @ y)) + im @ (sm * (im.T @ my))
    z_a = ip @ (sp * (ip.T @ my)) + im @ (sm * (im.T @ y))
    return z_b, z_a


def boundary_energy_rate(trace_b, trace_a, m, split):
    """<Au, u>_H = (||tau||^2 - ||M tau||^2) / 2 with tau = Q+ z_b + Q- z_a."""
    z_b = np.asarray(trace_b, dtype=float)
    z_a = np.asarray(trace_a, dtype=float)
    m = np.asarray(m, dtype=float)
    if z_b.shape != (split.d,) or z_a.shape != (split.d,):
        raise DimensionMismatch(f"traces must be vectors of length {split.d}")
    tau = split.q_plus @ z_b + split.q_minus @ z_a
    lhs = split.q_plus @ z_a + split.q_minus @ z_b
    resid = np.linalg.norm(lhs - m @ tau)
    tn = np.linalg.norm(tau)
    if resid > 1e-6 * tn or (tn == 0 and resid > 0):
        raise DomainViolation(f"boundary relation violated: residual {resid:.3e}, ||tau|| = {tn:.3e}")
    return 0.5 * float(tau @ tau - (m @ tau) @ (m @ tau))
