"""Stability verdicts from the test matrices T_t = W1 Phi_t(b) + W2.

Exponential stability (under the uniform bound on Phi_t) is equivalent to T_t
being invertible for every real t with sup_t ||T_t^{-1}|| finite.  Only the
certified sufficient criteria give a mathematical yes, and only a numerically
singular T_t gives a mathematical no; everything else is labelled evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import propagator
from .boundary import dissipation_rate, dissipativity_check, w_to_mk
from .errors import NotAGenerator, NotFound, PHStabError, VSingular
from .linalg import norm2, spectral_split

SINGULAR_RTOL = 1e-10
INV_FLOOR = 1e-14
STRICT_MARGIN = 1e-8
RATE_FLOOR = 1e-10

CERTIFIED = "CertifiedStable"
UNSTABLE = "Unstable"
NUMERIC = "NumericallyStable"
EVIDENCE = "NotExponentiallyStableEvidence"
INCONCLUSIVE = "Inconclusive"

STRICT_CONTRACTION = "StrictContraction"
DISSIPATION_RATE = "DissipationRate"

LABELS = {
    STRICT_CONTRACTION: "strict boundary contraction (||M|| < 1)",
    DISSIPATION_RATE: "boundary dissipation rate: <Au,u> >= c ||(Hu)(eta)||^2",
}

B_CAVEAT = (
    "The equivalence between exponential stability and uniformly invertible T_t "
    "assumes the uniform bound on Phi_t. It is not certified here, so sweep "
    "results are heuristic."
)


def t_matrix(w, phi_b):
    """T_t = W1 Phi_t(b) + W2; ``phi_b`` may be a stack (..., d, d)."""
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    return w[:, :d] @ phi_b + w[:, d:]


@dataclass(frozen=True, eq=False)
class SweepResult:
    ts: np.ndarray
    det_abs: np.ndarray
    sigma_min: np.ndarray
    inv_norm: np.ndarray
    phi_norm: np.ndarray

    def __len__(self):
        return self.ts.size

    def rows(self):
        return zip(self.ts, self.det_abs, self.sigma_min, self.inv_norm, self.phi_norm)

    def summary(self):
        i = int(np.argmin(self.sigma_min))
        return {
            "n_samples": int(self.ts.size),
            "t_range": [float(self.ts.min()), float(self.ts.max())],
            "min_sigma": float(self.sigma_min[i]),
            "t_at_min_sigma": float(self.ts[i]),
            "min_abs_det": float(self.det_abs.min()),
            "max_inv_norm": float(np.nanmax(self.inv_norm)) if np.any(np.isfinite(self.inv_norm)) else None,
            "max_phi_norm": float(self.phi_norm.max()),
        }


def evaluate_sweep(w, ts, phi_b):
    tm = t_matrix(w, phi_b)
    sv = np.linalg.svd(tm, compute_uv=False)
    sigma = sv[:, -1]
    det_abs = np.abs(np.linalg.det(tm))
    inv_norm = np.full(sigma.shape, np.nan)
    ok = sigma >= INV_FLOOR
    if np.any(ok):
        inv_norm[ok] = np.linalg.norm(np.linalg.inv(tm[ok]), 2, axis=(1, 2))
    phi_norm = np.linalg.norm(phi_b, 2, axis=(1, 2))
    order = np.argsort(ts, kind="stable")
    return SweepResult(np.asarray(ts)[order], det_abs[order], sigma[order], inv_norm[order], phi_norm[order])


def merge_sweeps(*parts):
    ts = np.concatenate([p.ts for p in parts])
    order = np.argsort(ts, kind="stable")
    fields = [np.concatenate([getattr(p, f) for p in parts])[order]
              for f in ("det_abs", "sigma_min", "inv_norm", "phi_norm")]
    return SweepResult(ts[order], *fields)


# V/U factorization

@dataclass(frozen=True, eq=False)
class VUFactorization:
    v: np.ndarray
    u: np.ndarray
    v_inv_norm: float
    v_inv_bound: float
    v_inv_bound_corrected: float
    unitarity_residual: float


def v_inv_bound(split, phi_norm):
    """The published bound on ||V^{-1}||; an empty block contributes 0."""
    ip = 1.0 / split.eigvals_plus.min() if split.dim_plus else 0.0
    if split.dim_minus:
        cm = math.sqrt(split.eigvals_minus.max() / split.eigvals_minus.min())
    else:
        cm = 0.0
    return math.sqrt(ip) * (1.0 + cm * phi_norm) + cm


def v_inv_bound_corrected(split):
    """sqrt(||(P1+)^{-1}|| + ||(P1-)^{-1}||).

    From Phi^* P1 Phi = P1:  ||V y||^2 = ||Q+ y||^2 + ||Q- Phi y||^2
    = ||Q+ Phi y||^2 + ||Q- y||^2, which dominates both ||Q+ y||^2 and ||Q- y||^2.
    """
    ip = 1.0 / split.eigvals_plus.min() if split.dim_plus else 0.0
    im = 1.0 / split.eigvals_minus.min() if split.dim_minus else 0.0
    return math.sqrt(ip + im)


def vu_factorization(phi_b, split):
    """V = Q+ + Q- Phi(b) and the unitary U = (Q+ Phi(b) + Q-) V^{-1}."""
    phi_b = np.asarray(phi_b)
    v = split.q_plus + split.q_minus @ phi_b
    s = np.linalg.svd(v, compute_uv=False)
    if s[-1] <= 1e-13 * max(s[0], 1.0):
        raise VSingular(f"V is numerically singular (sigma_min = {s[-1]:.3e}); this contradicts Phi^* P1 Phi = P1")
    v_inv = np.linalg.inv(v)
    u = (split.q_plus @ phi_b + split.q_minus) @ v_inv
    resid = norm2(u @ u.conj().T - np.eye(split.d))
    return VUFactorization(v, u, 1.0 / s[-1], v_inv_bound(split, norm2(phi_b)),
                           v_inv_bound_corrected(split), resid)


def factorization_residual(w, k, m, phi_b, split):
    """||T_t - K (I - M U_t) V_t|| relative to ||T_t||."""
    vu = vu_factorization(phi_b, split)
    tm = t_matrix(w, phi_b)
    rhs = k @ (np.eye(split.d) - m @ vu.u) @ vu.v
    return norm2(tm - rhs) / max(norm2(tm), 1e-300)


# sufficient criteria

@dataclass(frozen=True)
class Criterion:
    name: str
    endpoint: str | None = None
    rate: float | None = None
    m_norm: float | None = None

    @property
    def label(self):
        return LABELS[self.name]

    def to_dict(self):
        return {"name": self.name, "label": self.label, "endpoint": self.endpoint,
                "rate": _jsonable(self.rate), "m_norm": self.m_norm}


def _jsonable(x):
    if x is None:
        return None
    return "Unbounded" if math.isinf(x) else float(x)


def certify_sufficient(m, split, condition_b):
    """StrictContraction if ||M|| <= 1 - 1e-8, else DissipationRate(eta, c) when
    some endpoint has a positive rate; both need a certified (B)."""
    if condition_b is not None and not condition_b.is_certified:
        return None
    mn = norm2(m)
    if mn <= 1 - STRICT_MARGIN:
        return Criterion(STRICT_CONTRACTION, m_norm=mn)
    for eta in ("a", "b"):
        c = dissipation_rate(m, split, eta)
        if c > RATE_FLOOR:
            return Criterion(DISSIPATION_RATE, endpoint=eta, rate=c, m_norm=mn)
    return None


# verdict

@dataclass
class SweepParams:
    t_max: float | None = None
    n_samples: int = 2048
    doubling_rounds: int = 2
    evidence_drop: float = 0.2
    backend: str | None = None


@dataclass(eq=False)
class StabilityReport:
    verdict: str
    accretivity: object
    condition_b: object
    sweep: SweepResult
    criterion: Criterion | None = None
    witness_t: float | None = None
    sigma_at_witness: float | None = None
    min_sigma: float | None = None
    t_max: float | None = None
    evidence: list = field(default_factory=list)
    m_matrix: np.ndarray | None = None
    k_matrix: np.ndarray | None = None
    rates: dict = field(default_factory=dict)
    threshold: float | None = None
    caveats: list = field(default_factory=list)
    interval: tuple = (0.0, 1.0)

    @property
    def witness_closed_form_t(self):
        """Witness in the parametrisation exp(i s P1^{-1} H^{-1}) with no (b - a) factor."""
        if self.witness_t is None:
            return None
        return -self.witness_t * (self.interval[1] - self.interval[0])

    def to_dict(self):
        out = {
            "verdict": self.verdict,
            "criterion": self.criterion.to_dict() if self.criterion else None,
            "witness_t": self.witness_t,
            "witness_t_closed_form": self.witness_closed_form_t,
            "sigma_at_witness": self.sigma_at_witness,
            "min_sigma": self.min_sigma,
            "t_max": self.t_max,
            "singularity_threshold": self.threshold,
            "evidence": self.evidence,
            "accretivity": self.accretivity.to_dict(),
            "condition_b": self.condition_b.to_dict(),
            "sweep": self.sweep.summary(),
            "m_matrix": None if self.m_matrix is None else self.m_matrix.tolist(),
            "k_matrix": None if self.k_matrix is None else self.k_matrix.tolist(),
            "m_norm": None if self.m_matrix is None else norm2(self.m_matrix),
            "dissipation_rates": {k: _jsonable(v) for k, v in self.rates.items()},
            "caveats": list(self.caveats),
        }
        return out


def sigma_min_many(problem, ts, backend=None):
    phi = propagator.sweep(problem.hamiltonian, problem.p1, problem.p0, ts, False, backend=backend).phi_b
    return np.linalg.svd(t_matrix(problem.w, phi), compute_uv=False)[:, -1]


def _local_minima(sigma, starts_at_zero=False):
    """Interior local minima; the first sample counts too when it sits at t = 0,
    since sigma_min is even in t."""
    if sigma.size < 3:
        return np.array([int(np.argmin(sigma))])
    inner = np.nonzero((sigma[1:-1] <= sigma[:-2]) & (sigma[1:-1] <= sigma[2:]))[0] + 1
    if starts_at_zero and sigma[0] <= sigma[1]:
        inner = np.concatenate([[0], inner])
    return inner.astype(int)


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_batch(f, lo, hi, tol=1e-12, max_iter=200):
    """Golden-section search run on many brackets [lo_i, hi_i] at once.

    ``f`` maps an array of abscissae to an array of values; each iteration
    costs one call on one new point per bracket.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(a))):
            break
        left = fc < fd
        # minimum lies in [a, d] when f(c) < f(d), else in [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_x = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
        f_new = f(new_x)
        c, d, fc, fd = (np.where(left, new_x, d), np.where(left, c, new_x),
                        np.where(left, f_new, fd), np.where(left, fc, f_new))
    use_c = fc < fd
    return np.where(use_c, c, d), np.where(use_c, fc, fd)


def refine_minima(problem, sweep, backend=None, tol=1e-12):
    """Refine every interior local minimum of the sampled sigma_min.

    Returns (t, sigma) arrays; a refined value never exceeds the sample it
    started from.
    """
    ts, sig = sweep.ts, sweep.sigma_min
    idx = _local_minima(sig, ts[0] == 0.0)
    if idx.size == 0:
        i = int(np.argmin(sig))
        return ts[[i]], sig[[i]]
    lo = ts[np.maximum(idx - 1, 0)]
    hi = ts[np.minimum(idx + 1, ts.size - 1)]
    t_star, s_star = golden_batch(lambda x: sigma_min_many(problem, x, backend), lo, hi, tol)
    worse = s_star > sig[idx]
    return np.where(worse, ts[idx], t_star), np.where(worse, sig[idx], s_star)


def sigma_min_at(problem, t, backend=None):
    return float(sigma_min_many(problem, [t], backend)[0])


def evidence_ladder(rungs, t_ref, s_ref, t_sampled, s_sampled):
    """Running minima of sigma_min over [0, 2^k t_max], k = 0..R, using the
    refined local minima and the samples."""
    ladder = []
    running, t_run = math.inf, None
    lo = -math.inf
    for k, t_hi in enumerate(rungs):
        sel = (t_ref > lo) & (t_ref <= t_hi)
        sel_s = (t_sampled > lo) & (t_sampled <= t_hi)
        cand_t = np.concatenate([t_ref[sel], t_sampled[sel_s]])
        cand_s = np.concatenate([s_ref[sel], s_sampled[sel_s]])
        j = int(np.argmin(cand_s))
        if cand_s[j] < running:
            running, t_run = float(cand_s[j]), float(cand_t[j])
        ladder.append({"round": k, "t_max": float(t_hi), "rung_min": float(cand_s[j]),
                       "t_at_rung_min": float(cand_t[j]), "running_min": running, "t_at_running_min": t_run})
        lo = t_hi
    return ladder


def evidence_fires(ladder, drop=0.2):
    """(fires, reason).  Either two consecutive doublings each lower the running
    minimum by more than ``drop``, or over R doublings the running minimum falls
    below (1 - drop)^R times its first value."""
    mins = [r["running_min"] for r in ladder]
    streak = 0
    for prev, cur in zip(mins, mins[1:]):
        streak = streak + 1 if cur < (1 - drop) * prev else 0
        if streak >= 2:
            return True, "consecutive"
    r = len(mins) - 1
    if r >= 1 and mins[-1] < (1 - drop) ** r * mins[0]:
        return True, "geometric"
    return False, None


def sweep_and_verdict(problem, params: SweepParams | None = None):
    params = params or SweepParams()
    h, p1, p0, w = problem.hamiltonian, problem.p1, problem.p0, problem.w
    try:
        acc = dissipativity_check(w, p1)
    except PHStabError as exc:
        raise NotAGenerator(f"boundary data do not define a generator: {exc}") from exc
    if not acc.accretive:
        raise NotAGenerator(f"boundary gram matrix indefinite (min eigenvalue {acc.min_eigenvalue:.3e})")
    split = spectral_split(p1)
    k, m = w_to_mk(w, split)
    rates = {eta: dissipation_rate(m, split, eta) for eta in ("a", "b")}

    t_max = params.t_max if params.t_max is not None else propagator.default_t_max(h, p1)
    cond_b, base, ext = propagator.condition_b_estimate(
        h, p1, p0, t_max, params.n_samples, params.backend, return_sweeps=True)
    crit = certify_sufficient(m, split, cond_b)

    rungs_raw = [(t_max, evaluate_sweep(w, base.ts, base.phi_b)), (2 * t_max, evaluate_sweep(w, ext.ts, ext.phi_b))]
    lo = 2 * t_max
    for _ in range(1, params.doubling_rounds):
        ts = propagator.extension_grid(lo, 2 * lo, params.n_samples, t_max)
        phi = propagator.sweep(h, p1, p0, ts, False, backend=params.backend).phi_b
        rungs_raw.append((2 * lo, evaluate_sweep(w, ts, phi)))
        lo *= 2
    full = merge_sweeps(*[sw for _, sw in rungs_raw])

    threshold = SINGULAR_RTOL * norm2(w) * max(1.0, float(full.phi_norm.max()))
    report = StabilityReport(
        verdict=NUMERIC, accretivity=acc, condition_b=cond_b, sweep=full, criterion=crit,
        t_max=float(full.ts.max()), m_matrix=m, k_matrix=k, rates=rates, threshold=threshold,
        interval=(h.a, h.b),
    )
    if not cond_b.is_certified:
        report.caveats.append(B_CAVEAT)

    # witness: the first refined local minimum (in t) below the threshold
    t_ref, s_ref = refine_minima(problem, full, params.backend)
    below = np.nonzero(s_ref < threshold)[0]
    witness = (float(t_ref[below[0]]), float(s_ref[below[0]])) if below.size else None

    report.evidence = evidence_ladder([t for t, _ in rungs_raw], t_ref, s_ref, full.ts, full.sigma_min)
    report.min_sigma = report.evidence[-1]["running_min"]

    if crit is not None:
        report.verdict = CERTIFIED
        if witness is not None:
            report.caveats.append("a numerically singular T_t was found despite the certificate")
            report.witness_t, report.sigma_at_witness = witness
        return report
    if witness is not None:
        report.verdict = UNSTABLE
        report.witness_t, report.sigma_at_witness = witness
        return report
    if not cond_b.is_certified and cond_b.growth_flag:
        report.verdict = INCONCLUSIVE
        return report
    fires, reason = evidence_fires(report.evidence, params.evidence_drop)
    if fires:
        report.verdict = EVIDENCE
        report.caveats.append(f"evidence heuristic ({reason} decrease of the running minimum); not a certificate")
        return report
    report.verdict = NUMERIC
    return report


# Closed form for the quadratic-alpha benchmark fixture

ALPHA_43 = -3.0 + 2.0 * math.sqrt(2.0)


def diophantine_t(k):
    """t_k = 4 k pi / (1 + sqrt 2) in the closed-form parametrisation."""
    return 4.0 * np.asarray(k, dtype=float) * math.pi / (1.0 + math.sqrt(2.0))


def diophantine_closed_form(k):
    """det(-T_{t_k}) = 1 + cos(2 pi alpha k), alpha = -3 + 2 sqrt 2."""
    return 1.0 + np.cos(2.0 * math.pi * ALPHA_43 * np.asarray(k, dtype=float))


def diophantine_probe(problem=None, k_max=10**6, eps=1e-2, chunk=65536, backend=None):
    """Smallest k <= k_max with |det(-T_{t_k})| < eps by the closed form, checked
    against the numeric pipeline (internal t = -t_k) to 1e-9."""
    found = None
    for lo in range(1, k_max + 1, chunk):
        ks = np.arange(lo, min(lo + chunk, k_max + 1))
        vals = np.abs(diophantine_closed_form(ks))
        hit = np.nonzero(vals < eps)[0]
        if hit.size:
            found = int(ks[hit[0]])
            break
    if found is None:
        raise NotFound(f"no k <= {k_max} with |det(-T_t_k)| < {eps}")
    closed = float(diophantine_closed_form(found))
    out = {"k": found, "t_k": float(diophantine_t(found)), "abs_det_closed_form": abs(closed)}
    if problem is not None:
        phi = propagator.sweep(problem.hamiltonian, problem.p1, problem.p0,
                               [-float(diophantine_t(found))], False, backend=backend).phi_b[0]
        numeric = complex(np.linalg.det(-t_matrix(problem.w, phi)))
        out["det_numeric"] = [numeric.real, numeric.imag]
        out["agreement"] = abs(numeric - closed)
    return out
