"""Fundamental matrix of u' = -P1^{-1}(it H(x)^{-1} + P0) u, Phi_t(a) = I,
and estimates/certificates for the uniform bound sup_t ||Phi_t||_inf < inf
(condition (B)).

For piecewise-constant H the solution is an exact ordered product of matrix
exponentials; the batched t-sweep runs in ``kernels``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InvalidP0
from .hamiltonian import HamiltonianDensity, bounds, invariance_check, total_variation
from .linalg import norm2, spectral_split, sqrtm_spd

N_INTERIOR = 8
GROWTH_RATIO = 1.05

SCALAR = "Scalar"
INVARIANT = "InvariantSubspace"
BV = "BoundedVariation"
NONE = "None"


def check_p0(p0, d):
    if p0 is None:
        return np.zeros((d, d))
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (d, d):
        raise DimensionMismatch(f"P0 must be {d} x {d}, got {p0.shape}")
    resid = norm2(p0 + p0.T)
    if resid > 1e-12 * max(norm2(p0), 1.0):
        raise InvalidP0(f"P0 is not skew-symmetric: ||P0 + P0^T|| = {resid:.3e}")
    return 0.5 * (p0 - p0.T)


def coefficients(h: HamiltonianDensity, p1, p0=None):
    """Per-piece generator data: A_j = -P1^{-1} H_j^{-1}, B = -P1^{-1} P0."""
    p1 = np.asarray(p1, dtype=float)
    if p1.shape != (h.d, h.d):
        raise DimensionMismatch(f"P1 is {p1.shape}, density has d = {h.d}")
    p0 = check_p0(p0, h.d)
    p1_inv = np.linalg.inv(p1)
    a_mats = -np.einsum("ik,jkl->jil", p1_inv, h.inverses())
    return a_mats, -p1_inv @ p0, h.lengths


@dataclass(frozen=True, eq=False)
class PropagatorResult:
    t: float
    phi_b: np.ndarray
    sup_norm: float
    inverse_residual: float


@dataclass(frozen=True, eq=False)
class PhiSweep:
    ts: np.ndarray
    phi_b: np.ndarray
    sup_norm: np.ndarray

    def merge(self, other):
        return PhiSweep(np.concatenate([self.ts, other.ts]),
                        np.concatenate([self.phi_b, other.phi_b]),
                        np.concatenate([self.sup_norm, other.sup_norm]))


def inverse_identity_residual(result, p1):
    """||Phi^{-1} - P1^{-1} Phi^* P1||_2 (zero for an exact fundamental matrix)."""
    phi = result.phi_b if isinstance(result, PropagatorResult) else np.asarray(result)
    p1 = np.asarray(p1, dtype=float)
    inv = np.linalg.inv(phi)
    resid = norm2(inv - np.linalg.solve(p1, phi.conj().T @ p1))
    # sanity: ||Phi^{-1}|| <= ||P1^{-1}|| ||P1|| ||Phi||
    assert norm2(inv) <= norm2(np.linalg.inv(p1)) * norm2(p1) * norm2(phi) * (1 + 1e-6) + 1e-12
    return resid


def sweep(h, p1, p0, ts, want_sup=True, n_interior=N_INTERIOR, backend=None):
    a_mats, b_mat, lengths = coefficients(h, p1, p0)
    ts = np.asarray(ts, dtype=float)
    phi, sup = kernels.sweep(a_mats, b_mat, lengths, ts, n_interior, want_sup, backend=backend)
    return PhiSweep(ts, phi, sup)


def fundamental_matrix(h, p1, p0, t, n_interior=N_INTERIOR, backend=None):
    """Phi_t(b) plus the sup of ||Phi_t(x)|| over breakpoints and interior points."""
    res = sweep(h, p1, p0, [t], True, n_interior, backend)
    phi = res.phi_b[0]
    return PropagatorResult(float(t), phi, float(res.sup_norm[0]), inverse_identity_residual(phi, p1))


def phi_at(h, p1, p0, t, x, backend=None):
    """Phi_t(x) for a point x in [a, b]."""
    if x == h.a:
        return np.eye(h.d, dtype=complex)
    return fundamental_matrix(h.restrict(h.a, x), p1, p0, t, 0, backend).phi_b


def default_t_max(h, p1):
    """Time horizon giving 100 full rotations of the fastest phase
    (b - a) t ||P1^{-1}|| / m."""
    m, _ = bounds(h)
    return 200.0 * math.pi * m / ((h.b - h.a) * norm2(np.linalg.inv(p1)))


def t_grid(t_max, n_samples=2048):
    """Half uniform on [0, t_max], half geometric on [1e-4 t_max, t_max]."""
    n_lin = n_samples - n_samples // 2
    lin = np.linspace(0.0, t_max, n_lin)
    geo = np.geomspace(1e-4 * t_max, t_max, n_samples // 2) if n_samples // 2 else np.empty(0)
    return np.unique(np.concatenate([lin, geo]))


def extension_grid(t_lo, t_hi, n_samples=2048, t_max=None):
    """Uniform points in (t_lo, t_hi] with the linear density of the base grid."""
    t_max = t_lo if t_max is None else t_max
    n_lin = n_samples - n_samples // 2
    spacing = t_max / max(n_lin - 1, 1)
    n = max(int(math.ceil((t_hi - t_lo) / spacing)), 1)
    return np.linspace(t_lo, t_hi, n + 1)[1:]


def gronwall_factor(h, p1, p0, base_bound):
    """exp((b-a) B^2 ||P1|| ||P1^{-1}||^2 ||P0||), transferring a bound between P0 and 0."""
    p0n = 0.0 if p0 is None else norm2(p0)
    if p0n == 0.0:
        return 1.0
    if not math.isfinite(base_bound):
        return math.inf
    log_expo = (math.log(h.b - h.a) + 2 * math.log(base_bound) + math.log(norm2(p1))
                + 2 * math.log(norm2(np.linalg.inv(p1))) + math.log(p0n))
    return math.exp(math.exp(log_expo)) if log_expo < math.log(700.0) else math.inf


def scalar_bound(split):
    """sqrt(cond P1); for scalar H and P0 = 0 the flow is in fact unitary."""
    mags = np.concatenate([split.eigvals_plus, split.eigvals_minus])
    return math.sqrt(mags.max() / mags.min())


def invariant_bound(split):
    return math.sqrt(max(split.block_condition("plus"), split.block_condition("minus")))


def bv_bound(h):
    """Bound on ||Phi_t||_inf from the bounded-variation argument with O = H^{-1},
    c = 1/Mbound:  (Mbound/m) (1 + (Mbound/2) mu exp((Mbound/2) mu)), square-rooted."""
    m, mb = bounds(h)
    mu = total_variation(h.inverse_density())
    k = 0.5 * mb * mu
    if k > 700:
        return math.inf
    return math.sqrt(mb / m * (1.0 + k * math.exp(k)))


def piecewise_bound(h):
    """Bound for P0 = 0 from piecewise conservation of <v, H_j^{-1} v>.

    Inside a piece the form is constant; crossing from H_j to H_{j+1} it grows by
    at most lambda_max(H_j^{1/2} H_{j+1}^{-1} H_j^{1/2}).
    """
    mats = h.matrices
    lam_max = np.linalg.eigvalsh(mats)[:, -1]
    form0 = 1.0 / np.linalg.eigvalsh(mats[0])[0]  # lambda_max(H_1^{-1})
    best = lam_max[0] * form0
    acc = form0
    for j in range(len(mats) - 1):
        r = sqrtm_spd(mats[j])
        jump = np.linalg.eigvalsh(r @ np.linalg.inv(mats[j + 1]) @ r)[-1]
        acc *= jump
        best = max(best, lam_max[j + 1] * acc)
    return math.sqrt(best)


@dataclass(frozen=True, eq=False)
class ConditionBReport:
    certified: str
    certified_bound: float | None
    swept_sup: float
    growth_flag: bool
    swept_sup_doubled: float = math.nan
    total_variation: float = 0.0
    total_variation_inverse: float = 0.0
    piecewise_bound: float = math.nan
    gronwall: float = 1.0
    criteria: dict = field(default_factory=dict)
    t_max: float = math.nan

    @property
    def is_certified(self):
        return self.certified != NONE

    def to_dict(self):
        return {
            "certified": self.certified,
            "certified_bound": self.certified_bound,
            "swept_sup": self.swept_sup,
            "swept_sup_doubled": self.swept_sup_doubled,
            "growth_flag": self.growth_flag,
            "total_variation": self.total_variation,
            "total_variation_inverse": self.total_variation_inverse,
            "variation_norm": "entrywise l1 of the represented piecewise-constant function",
            "piecewise_bound": self.piecewise_bound,
            "gronwall_factor": self.gronwall,
            "criteria": dict(self.criteria),
            "t_max": self.t_max,
        }


def certify_b(h, p1, p0=None):
    """All (B) certificates that apply, in priority order, with their bounds
    (already multiplied by the P0 transfer factor)."""
    split = spectral_split(p1)
    p0 = check_p0(p0, h.d)
    found = {}
    if h.is_scalar:
        found[SCALAR] = scalar_bound(split)
    if invariance_check(h, split).invariant:
        found[INVARIANT] = invariant_bound(split)
    found[BV] = bv_bound(h)  # piecewise-constant densities always have finite variation
    return {k: v * gronwall_factor(h, p1, p0, v) for k, v in found.items()}


def condition_b_estimate(h, p1, p0=None, t_max=None, n_samples=2048, backend=None, return_sweeps=False):
    """Certify (B) if possible and sweep sup_x ||Phi_t(x)|| over t in [0, t_max]
    and over the doubled range [0, 2 t_max]."""
    p0 = check_p0(p0, h.d)
    if t_max is None:
        t_max = default_t_max(h, p1)
    crit = certify_b(h, p1, p0)
    finite = {k: v for k, v in crit.items() if math.isfinite(v)}
    certified = next(iter(finite), NONE)
    base = sweep(h, p1, p0, t_grid(t_max, n_samples), True, backend=backend)
    ext = sweep(h, p1, p0, extension_grid(t_max, 2 * t_max, n_samples, t_max), True, backend=backend)
    sup1 = float(base.sup_norm.max())
    sup2 = max(sup1, float(ext.sup_norm.max()))
    pw = piecewise_bound(h)
    report = ConditionBReport(
        certified=certified,
        certified_bound=finite.get(certified),
        swept_sup=sup1,
        growth_flag=bool(sup2 > GROWTH_RATIO * sup1),
        swept_sup_doubled=sup2,
        total_variation=total_variation(h),
        total_variation_inverse=total_variation(h.inverse_density()),
        piecewise_bound=pw * gronwall_factor(h, p1, p0, pw),
        gronwall=gronwall_factor(h, p1, p0, finite.get(certified, 1.0)),
        criteria=crit,
        t_max=float(t_max),
    )
    if return_sweeps:
        return report, base, ext
    return report


def p0_invariance_probe(h, p1, p0, t_max=None, n_samples=2048, backend=None):
    """(sup_t ||Phi_{t,P0}||_inf, sup_t ||Phi_{t,0}||_inf) over the same grid."""
    if t_max is None:
        t_max = default_t_max(h, p1)
    ts = t_grid(t_max, n_samples)
    with_p0 = sweep(h, p1, p0, ts, True, backend=backend).sup_norm.max()
    without = sweep(h, p1, None, ts, True, backend=backend).sup_norm.max()
    return float(with_p0), float(without)
