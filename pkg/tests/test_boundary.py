import math

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from phstab.boundary import (INDEFINITE, PSD, STRICT, boundary_energy_rate, boundary_traces,
                             dissipation_rate, dissipativity_check, mk_to_w, rate_forms, w_to_mk)
from phstab.errors import (DimensionMismatch, DissipativityViolated, DomainViolation, KSingular,
                           MNotContraction, RankDeficient)
from phstab.fixtures import load_fixture, random_contraction, random_p1
from phstab.linalg import norm2, spectral_split

M44 = 0.5 * np.array([[1.0, 1.0], [1.0, -1.0]])


def test_example_4_4_w_gives_its_contraction():
    p = load_fixture("example_4_4_theta0")
    k, m = w_to_mk(p.w, spectral_split(p.p1))
    assert np.allclose(m, M44, atol=1e-12)
    assert np.allclose(k, -np.eye(2), atol=1e-12)
    assert norm2(m) == pytest.approx(1 / math.sqrt(2))


def test_example_4_3_is_conservative_boundary():
    p = load_fixture("example_4_3")
    rep = dissipativity_check(p.w, p.p1)
    assert rep.classification == PSD
    assert rep.m_norm == pytest.approx(1.0)
    _, m = w_to_mk(p.w, spectral_split(p.p1))
    assert np.allclose(m, -0.5 * np.ones((2, 2)), atol=1e-12)


def test_mk_to_w_formula_with_identity_k():
    split = spectral_split(-np.eye(2))
    w = mk_to_w(M44, None, split)
    assert np.allclose(w, np.hstack([np.eye(2), -M44]))  # (Q- - M Q+, Q+ - M Q-) with Q+ = 0


def test_scalar_transport_inflow_condition():
    p = load_fixture("scalar_transport_d1")
    rep = dissipativity_check(p.w, p.p1)
    assert rep.classification == STRICT
    _, m = w_to_mk(p.w, spectral_split(p.p1))
    assert abs(m[0, 0]) < 1e-14


def test_rank_and_shape_errors():
    with pytest.raises(RankDeficient):
        dissipativity_check(np.array([[1.0, 0, 1.0, 0], [2.0, 0, 2.0, 0]]), np.eye(2))
    with pytest.raises(DimensionMismatch):
        dissipativity_check(np.ones((2, 3)), np.eye(2))


def test_indefinite_boundary_is_rejected():
    p1 = np.eye(1)
    w = np.array([[1.0, 0.0]])  # (Hu)(b) = 0 with P1 > 0 feeds energy in
    rep = dissipativity_check(w, p1)
    assert rep.classification == INDEFINITE and not rep.accretive
    with pytest.raises(DissipativityViolated):
        w_to_mk(w, spectral_split(p1))


def test_mk_to_w_errors():
    split = spectral_split(np.diag([1.0, -1.0]))
    with pytest.raises(MNotContraction):
        mk_to_w(2 * np.eye(2), None, split)
    with pytest.raises(KSingular):
        mk_to_w(np.zeros((2, 2)), np.zeros((2, 2)), split)


def test_round_trip_row_spaces():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(1, 6))
        split = spectral_split(random_p1(rng, d))
        m = random_contraction(rng, d)
        k = rng.standard_normal((d, d)) + 3 * np.eye(d)
        w = mk_to_w(m, k, split)
        k2, m2 = w_to_mk(w, split)
        assert norm2(m2 - m) < 1e-9
        assert np.max(subspace_angles(w.T, mk_to_w(m2, np.eye(d), split).T)) < 1e-8


def test_dissipation_rate_closed_form_for_zero_m():
    # M = 0: G0 = I and G_b = iota+ (P1+)^{-1} iota+^T, so c = lambda_min(P1+) / 2
    split = spectral_split(np.diag([2.0, 0.5, -1.0]))
    assert dissipation_rate(np.zeros((3, 3)), split, "b") == pytest.approx(0.25, rel=1e-12)
    assert dissipation_rate(np.zeros((3, 3)), split, "a") == pytest.approx(0.5, rel=1e-12)


def test_dissipation_rate_special_values():
    split = spectral_split(np.eye(2))
    assert math.isinf(dissipation_rate(np.zeros((2, 2)), split, "a"))  # G_a = 0
    assert dissipation_rate(np.eye(2), split, "b") == 0.0  # conservative boundary
    with pytest.raises(ValueError):
        dissipation_rate(np.zeros((2, 2)), split, "c")


def test_dissipation_rate_is_maximal_by_sampling():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        split = spectral_split(random_p1(rng, d))
        m = random_contraction(rng, d, 0.9)
        g0, g_a, g_b = rate_forms(m, split)
        for eta, g in (("a", g_a), ("b", g_b)):
            c = dissipation_rate(m, split, eta)
            y = rng.standard_normal((10_000, d))
            lhs = np.einsum("ij,jk,ik->i", y, g0 - 2 * c * g, y)
            assert lhs.min() >= -1e-10 * np.einsum("ij,ij->i", y, y).max()
            # slightly larger c breaks semidefiniteness
            assert np.linalg.eigvalsh(g0 - 2 * c * (1 + 1e-6) * g)[0] < 0


def test_energy_rate_matches_integration_by_parts_oracle():
    rng = np.random.default_rng(12)
    for _ in range(30):
        d = int(rng.integers(1, 6))
        p1 = random_p1(rng, d)
        split = spectral_split(p1)
        m = random_contraction(rng, d)
        z_b, z_a = boundary_traces(rng.standard_normal(d), m, split)
        rate = boundary_energy_rate(z_b, z_a, m, split)
        oracle = 0.5 * (z_b @ p1 @ z_b - z_a @ p1 @ z_a)
        assert rate == pytest.approx(oracle, rel=1e-10, abs=1e-12)
        assert rate >= -1e-12


def test_energy_rate_rejects_states_outside_the_domain():
    split = spectral_split(np.diag([1.0, -1.0]))
    with pytest.raises(DomainViolation):
        boundary_energy_rate(np.array([1.0, 0.0]), np.array([0.0, 0.0]), 0.5 * np.eye(2), split)
