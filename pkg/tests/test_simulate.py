import math

import numpy as np
import pytest

from phstab.boundary import boundary_energy_rate, w_to_mk
from phstab.errors import BoundaryRowSingular, BudgetExceeded, GridMisaligned
from phstab.fixtures import example_4_4, load_fixture, random_problem
from phstab.hamiltonian import HamiltonianDensity
from phstab.linalg import spectral_split
from phstab.problem import ProblemSpec
from phstab.simulate import (bump, discretize, eigen_abscissa, energy_step_identity, evolve, fit_tail,
                             slowest_mode, slowest_mode_sparse, wave_basis, write_triplets)


def test_scalar_transport_is_standard_upwind():
    gen = discretize(load_fixture("scalar_transport_d1"), 8)
    n, dx = 8, 1 / 8
    expected = (np.eye(n) - np.eye(n, k=-1)) / dx
    assert np.allclose(gen.matrix.toarray(), expected)
    assert eigen_abscissa(gen) < 0


def test_wave_basis_diagonalizes_h_p1(rng):
    a = rng.standard_normal((3, 3))
    h = a @ a.T + np.eye(3)
    p1 = np.diag([1.0, -2.0, 0.5])
    s_plus, s_minus = wave_basis(h, p1)
    assert s_plus.shape[1] == 2 and s_minus.shape[1] == 1
    s = np.hstack([s_plus, s_minus])
    lam = np.linalg.solve(s, h @ p1 @ s)
    assert np.allclose(lam, np.diag(np.diag(lam)), atol=1e-12)


def test_discrete_accretivity_on_random_problems():
    for seed in range(8):
        p = random_problem(seed, pieces_max=1)
        absc = eigen_abscissa(discretize(p, 60))
        assert absc <= 1e-8


def test_misaligned_grid():
    h = HamiltonianDensity.piecewise([0.0, 0.33, 1.0], np.array([np.eye(1), 2 * np.eye(1)]))
    p = ProblemSpec(p1=np.eye(1), hamiltonian=h, boundary={"W": np.array([[0.0, 1.0]])})
    with pytest.raises(GridMisaligned):
        discretize(p, 10)
    discretize(p, 100)


def test_boundary_row_singular():
    # W fixes the outgoing value at b and says nothing about the inflow at a
    p = ProblemSpec.__new__(ProblemSpec)
    p.p1, p.p0 = np.eye(1), np.zeros((1, 1))
    p.hamiltonian = HamiltonianDensity.constant(np.eye(1))
    p._w = np.array([[1.0, 0.0]])
    with pytest.raises(BoundaryRowSingular):
        discretize(p, 10)


def test_zero_initial_data():
    gen = discretize(load_fixture("example_6_5"), 50)
    tr = evolve(gen, np.zeros(gen.size), 1.0, 0.1)
    assert np.all(tr.energy == 0) and tr.fitted_rate == 0.0


def test_energy_identity_per_step():
    for name in ("example_4_4_theta0", "example_6_5", "example_4_3"):
        gen = discretize(load_fixture(name), 100)
        u = bump(gen)
        change, predicted, _ = energy_step_identity(gen, u, 0.02)
        assert change == pytest.approx(predicted, rel=1e-8)
        assert change < 0


def test_full_absorption_boundary_flux():
    # M = 0: the boundary term of the energy balance equals 2 * (||tau||^2 / 2)
    p = example_4_4(0.0)
    p = ProblemSpec(p1=p.p1, hamiltonian=p.hamiltonian, boundary={"M": np.zeros((2, 2)), "K": -np.eye(2)})
    split = spectral_split(p.p1)
    _, m = w_to_mk(p.w, split)
    gen = discretize(p, 200)
    u = bump(gen)
    change, predicted, mid = energy_step_identity(gen, u, 0.01)
    assert change == pytest.approx(predicted, rel=1e-8)
    boundary, numerical = gen.energy_rate_terms(mid)
    z_b, z_a = gen.trace_b @ mid, gen.trace_a @ mid
    assert boundary == pytest.approx(2 * boundary_energy_rate(z_b, z_a, m, split), rel=1e-8, abs=1e-14)
    assert numerical >= 0


def test_energy_nonincreasing():
    gen = discretize(load_fixture("example_4_3"), 100)
    tr = evolve(gen, bump(gen), 5.0, 0.01)
    assert tr.energy[0] > 0
    assert np.all(np.diff(tr.energy) <= 1e-10 * tr.energy[:-1])


def test_stable_fixture_decays_and_converges():
    p = load_fixture("example_6_5")
    rates = []
    for n in (200, 400):
        gen = discretize(p, n)
        tr = evolve(gen, bump(gen), 10.0, 0.01)
        assert tr.fitted_rate < 0 and tr.fit_r2 > 0.9
        rates.append(tr.fitted_rate)
    assert abs(rates[1] / rates[0] - 1) < 0.25


def test_abscissa_theta0_negative_and_budget():
    gen = discretize(load_fixture("example_4_4_theta0"), 200)
    assert eigen_abscissa(gen) < -0.1
    with pytest.raises(BudgetExceeded):
        eigen_abscissa(discretize(load_fixture("example_4_4_theta0"), 2001))


def test_slowest_mode_dense_and_sparse_agree():
    gen = discretize(load_fixture("example_4_4_theta_half"), 200)
    lam_d, vec = slowest_mode(gen)
    lam_s, _ = slowest_mode_sparse(gen)
    assert lam_d.real == pytest.approx(eigen_abscissa(gen))
    assert lam_s.real == pytest.approx(lam_d.real, rel=1e-6)
    assert np.linalg.norm(-gen.matrix @ vec - lam_d * vec) < 1e-8


def test_complex_eigenmode_decays_at_its_rate():
    gen = discretize(load_fixture("example_4_4_theta_half"), 100)
    lam, vec = slowest_mode(gen)
    tr = evolve(gen, vec, 2.0, 1e-3)
    assert tr.energy[-1] / tr.energy[0] == pytest.approx(math.exp(2 * lam.real * 2.0), rel=1e-3)


def test_fit_tail_exact_exponential():
    t = np.linspace(0, 10, 101)
    rate, r2 = fit_tail(t, np.exp(-0.3 * t))
    assert rate == pytest.approx(-0.3) and r2 == pytest.approx(1.0)


def test_triplet_dump(tmp_path):
    gen = discretize(load_fixture("scalar_transport_d1"), 4)
    path = tmp_path / "a.txt"
    write_triplets(gen, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "4 4 7"
    r, c, v = lines[1].split()
    assert gen.matrix[int(r), int(c)] == float(v)
