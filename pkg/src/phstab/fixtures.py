"""Fixture corpus: named problems with closed-form determinant oracles.

Closed forms are written in the internal parametrisation
Phi_t(b) = exp(-i t (b - a) P1^{-1} H^{-1}) for constant H.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .errors import NotFound
from .hamiltonian import HamiltonianDensity
from .problem import ProblemSpec, SimParams, loads_spec
from .stability import SweepParams

SHIPPED = ("example_4_3", "example_4_4_theta0", "example_4_4_theta_half", "example_6_5", "scalar_transport_d1")


def det_example_4_3(t):
    """det(-T_t) = det T_t = 1 + (e^{-it} + e^{-i sqrt2 t}) / 2."""
    t = np.asarray(t, dtype=float)
    return 1.0 + 0.5 * (np.exp(-1j * t) + np.exp(-1j * math.sqrt(2.0) * t))


def det_example_4_4(t, theta):
    """det T_t for T_t = -diag(p, q) + M with p = e^{it/(1+theta)}, q = e^{it}.

    Expanding the 2 x 2 determinant gives pq + (p - q)/2 - 1/2.
    """
    t = np.asarray(t, dtype=float)
    p = np.exp(1j * t / (1.0 + theta))
    q = np.exp(1j * t)
    return p * q + 0.5 * (p - q) - 0.5


def det_s_published(s, theta):
    """The determinant 1 - (e^{is/(1+theta)} - e^{is})/2 as printed for the
    rescaled matrix S_s (parameter s = -t).  Kept to document the discrepancy
    with ``det_example_4_4``; it omits the pq cross term."""
    s = np.asarray(s, dtype=float)
    return 1.0 - 0.5 * (np.exp(1j * s / (1.0 + theta)) - np.exp(1j * s))


def det_example_6_5(t):
    """det tau_t = e^{-it}/2 - 1 + e^{it} (h = 1 on [0, 1])."""
    t = np.asarray(t, dtype=float)
    return 0.5 * np.exp(-1j * t) - 1.0 + np.exp(1j * t)


def det_scalar_transport(t):
    return np.ones_like(np.asarray(t, dtype=float), dtype=complex)


def closed_form_det(problem):
    """Callable t -> det T_t for fixtures that carry an oracle, else None."""
    kind = problem.oracle.get("kind")
    if kind == "example_4_3":
        return det_example_4_3
    if kind == "example_4_4":
        theta = float(problem.oracle.get("theta", 0.0))
        return lambda t: det_example_4_4(t, theta)
    if kind == "example_6_5":
        return det_example_6_5
    if kind == "scalar_transport":
        return det_scalar_transport
    return None


def list_fixtures():
    return list(SHIPPED) + ["example_4_4:<theta>", "random:<seed>"]


def fixture_text(name):
    return resources.files("phstab").joinpath("fixtures", f"{name}.toml").read_text()


def load_fixture(name):
    if name in SHIPPED:
        return loads_spec(fixture_text(name), source=f"fixture:{name}")
    if name.startswith("example_4_4:"):
        return example_4_4(float(name.split(":", 1)[1]))
    if name.startswith("random:"):
        return random_problem(int(name.split(":", 1)[1]))
    raise NotFound(f"unknown fixture {name!r}; available: {', '.join(list_fixtures())}")


def example_4_4(theta):
    if not theta > -1:
        raise ValueError("theta must exceed -1")
    m = 0.5 * np.array([[1.0, 1.0], [1.0, -1.0]])
    w = np.hstack([-np.eye(2), m])
    h = HamiltonianDensity.constant(np.diag([1.0 + theta, 1.0]), 0.0, 1.0)
    return ProblemSpec(p1=-np.eye(2), hamiltonian=h, boundary={"W": w}, name=f"example_4_4:{theta:g}",
                       oracle={"kind": "example_4_4", "theta": theta},
                       sim=SimParams(n_cells=1000, t_final=20.0, dt=0.01))


def random_spd(rng, d, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (q * rng.uniform(lo, hi, d)) @ q.T


def random_p1(rng, d, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(lo, hi, d) * rng.choice([-1.0, 1.0], d)
    return (q * lam) @ q.T


def random_contraction(rng, d, max_norm=1.0):
    a = rng.standard_normal((d, d))
    return a / np.linalg.norm(a, 2) * rng.uniform(0.0, max_norm)


def random_problem(seed, d_max=6, pieces_max=8, with_p0=False, m_norm=None):
    """Seeded random problem: d <= d_max, up to pieces_max pieces, ||M|| <= 1."""
    from .boundary import mk_to_w
    from .linalg import spectral_split

    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, d_max + 1))
    n = int(rng.integers(1, pieces_max + 1))
    p1 = random_p1(rng, d)
    length = rng.uniform(0.5, 2.0)
    inner = np.sort(rng.uniform(0.0, length, n - 1))
    bp = np.concatenate([[0.0], inner, [length]])
    if np.any(np.diff(bp) < 1e-3):
        bp = np.linspace(0.0, length, n + 1)
    h = HamiltonianDensity.piecewise(bp, np.array([random_spd(rng, d) for _ in range(n)]))
    m = random_contraction(rng, d)
    if m_norm is not None:
        m = m / max(np.linalg.norm(m, 2), 1e-300) * m_norm
    k = np.eye(d) + 0.3 * rng.standard_normal((d, d))
    w = mk_to_w(m, k, spectral_split(p1))
    p0 = None
    if with_p0:
        a = rng.standard_normal((d, d))
        p0 = 0.5 * (a - a.T)
    return ProblemSpec(p1=p1, hamiltonian=h, boundary={"W": w}, p0=p0, name=f"random:{seed}",
                       sweep=SweepParams(n_samples=512))
