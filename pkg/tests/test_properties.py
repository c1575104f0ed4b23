"""Property-based checks of the structural identities."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from phstab import propagator
from phstab.boundary import (STRICT, boundary_energy_rate, boundary_traces, dissipation_rate,
                             dissipativity_check, mk_to_w, rate_forms, w_to_mk)
from phstab.fixtures import random_contraction, random_p1, random_problem, random_spd
from phstab.hamiltonian import HamiltonianDensity
from phstab.linalg import expm, norm2, spectral_split
from phstab.stability import t_matrix, vu_factorization

seeds = st.integers(0, 2**32 - 1)
freqs = st.floats(-150.0, 150.0, allow_nan=False)


def _problem(seed, with_p0=False):
    return random_problem(seed % 10_000, d_max=4, pieces_max=4, with_p0=with_p0)


@given(seeds, st.integers(1, 6), st.floats(0.0, 1.0))
def test_mk_round_trip(seed, d, scale):
    rng = np.random.default_rng(seed)
    split = spectral_split(random_p1(rng, d))
    m = random_contraction(rng, d) * scale
    k = rng.standard_normal((d, d)) + 3 * np.eye(d)
    w = mk_to_w(m, k, split)
    k2, m2 = w_to_mk(w, split)
    assert norm2(m2 - m) < 1e-8
    assert np.max(subspace_angles(w.T, mk_to_w(m2, k2, split).T)) < 1e-8


@given(seeds, st.integers(1, 5))
def test_strict_dissipativity_iff_strict_contraction(seed, d):
    rng = np.random.default_rng(seed)
    split = spectral_split(random_p1(rng, d))
    m = random_contraction(rng, d, 0.999)
    strict = dissipativity_check(mk_to_w(m, None, split), split.p1).classification == STRICT
    assert strict == (norm2(m) < 1 - 1e-9)


@given(seeds, freqs, st.booleans())
def test_flux_form_is_conserved(seed, t, with_p0):
    # Phi^* P1 Phi = P1, equivalently Phi^{-1} = P1^{-1} Phi^* P1
    p = _problem(seed, with_p0)
    phi = propagator.fundamental_matrix(p.hamiltonian, p.p1, p.p0, t).phi_b
    assert norm2(phi.conj().T @ p.p1 @ phi - p.p1) <= 1e-9 * norm2(p.p1) * norm2(phi) ** 2


@given(seeds, freqs)
def test_sigma_min_is_even_in_t(seed, t):
    p = _problem(seed)
    res = propagator.sweep(p.hamiltonian, p.p1, None, [t, -t], False).phi_b
    s = [np.linalg.svd(t_matrix(p.w, phi), compute_uv=False)[-1] for phi in res]
    assert abs(s[0] - s[1]) <= 1e-9 * max(1.0, norm2(res[0]))


@given(seeds, freqs, st.booleans())
def test_u_is_unitary(seed, t, with_p0):
    p = _problem(seed, with_p0)
    split = spectral_split(p.p1)
    phi = propagator.fundamental_matrix(p.hamiltonian, p.p1, p.p0, t).phi_b
    vu = vu_factorization(phi, split)
    assert vu.unitarity_residual < 1e-9
    assert vu.v_inv_norm <= vu.v_inv_bound_corrected * (1 + 1e-9)


@given(seeds, st.integers(1, 5))
def test_energy_rate_nonnegative_and_matches_flux(seed, d):
    rng = np.random.default_rng(seed)
    p1 = random_p1(rng, d)
    split = spectral_split(p1)
    m = random_contraction(rng, d)
    z_b, z_a = boundary_traces(rng.standard_normal(d), m, split)
    rate = boundary_energy_rate(z_b, z_a, m, split)
    assert rate >= -1e-12
    assert abs(rate - 0.5 * (z_b @ p1 @ z_b - z_a @ p1 @ z_a)) <= 1e-10 * max(1.0, abs(rate))


@given(seeds, st.integers(1, 5), st.sampled_from(["a", "b"]))
def test_dissipation_rate_is_feasible(seed, d, eta):
    rng = np.random.default_rng(seed)
    split = spectral_split(random_p1(rng, d))
    m = random_contraction(rng, d)
    c = dissipation_rate(m, split, eta)
    g0, g_a, g_b = rate_forms(m, split)
    g = g_a if eta == "a" else g_b
    if np.isfinite(c):
        assert np.linalg.eigvalsh(g0 - 2 * c * g)[0] >= -1e-9 * max(1.0, norm2(g0) + 2 * c * norm2(g))
    # a more contractive M never has a smaller rate at the same endpoint
    c_half = dissipation_rate(0.5 * m, split, eta)
    assert c_half >= c * (1 - 1e-9) or np.isinf(c_half)


@given(seeds, freqs, st.floats(0.05, 0.95))
def test_cocycle(seed, t, frac):
    p = _problem(seed, True)
    h = p.hamiltonian
    c = h.a + frac * (h.b - h.a)
    left = propagator.fundamental_matrix(h.restrict(h.a, c), p.p1, p.p0, t).phi_b
    right = propagator.fundamental_matrix(h.restrict(c, h.b), p.p1, p.p0, t).phi_b
    full = propagator.fundamental_matrix(h, p.p1, p.p0, t).phi_b
    assert norm2(right @ left - full) <= 1e-10 * max(1.0, norm2(full)) * max(1.0, norm2(left) * norm2(right))


@given(seeds, st.integers(1, 5), st.floats(-40.0, 40.0))
def test_expm_group_property(seed, d, t):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    e = expm(1j * t * (a + a.T))
    assert norm2(e @ expm(-1j * t * (a + a.T)) - np.eye(d)) < 1e-10


@given(seeds, st.integers(1, 4))
def test_scalar_density_flow_is_bounded_by_scalar_certificate(seed, d):
    rng = np.random.default_rng(seed)
    p1 = random_p1(rng, d)
    vals = rng.uniform(0.5, 2.0, 3)
    h = HamiltonianDensity.scalar([0.0, 0.2, 0.7, 1.0], vals, d)
    bound = propagator.certify_b(h, p1)[propagator.SCALAR]
    sup = propagator.sweep(h, p1, None, np.linspace(0, 60, 25), True).sup_norm.max()
    assert sup <= bound * (1 + 1e-9)


@given(seeds)
def test_density_refinement_is_invisible(seed):
    rng = np.random.default_rng(seed)
    d = 2
    h = HamiltonianDensity.piecewise([0.0, 0.4, 1.0], np.array([random_spd(rng, d), random_spd(rng, d)]))
    p1 = np.diag([1.0, -1.0])
    t = rng.uniform(-50, 50)
    a = propagator.fundamental_matrix(h, p1, None, t).phi_b
    b = propagator.fundamental_matrix(h.refine(rng.uniform(0, 1, 3)), p1, None, t).phi_b
    assert norm2(a - b) <= 1e-10 * max(1.0, norm2(a))
