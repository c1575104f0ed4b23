import numpy as np
import pytest

from phstab.errors import NotPositiveDefinite, OutOfInterval, ValidationError
from phstab.hamiltonian import HamiltonianDensity, bounds, invariance_check, inverse_at, total_variation
from phstab.linalg import spectral_split


def test_constant_density():
    h = HamiltonianDensity.constant(np.diag([2.0, 1.0]), 0.0, 3.0)
    assert (h.a, h.b, h.d, h.n_pieces) == (0.0, 3.0, 2, 1)
    assert bounds(h) == (1.0, 2.0)
    assert total_variation(h) == 0.0
    assert not h.is_scalar


def test_scalar_density_and_lookup():
    h = HamiltonianDensity.scalar([0.0, 0.5, 1.0], [1.0, 3.0], 2)
    assert h.is_scalar
    assert np.array_equal(h.at(0.25), np.eye(2))
    assert np.array_equal(h.at(0.5), 3 * np.eye(2))  # cells closed on the left
    assert np.array_equal(h.at(1.0), 3 * np.eye(2))  # last cell closed
    assert total_variation(h) == pytest.approx(4.0)
    assert np.allclose(inverse_at(h, 0.75), np.eye(2) / 3)
    with pytest.raises(OutOfInterval):
        h.at(1.5)


def test_validation_collects_all_errors():
    bad = np.array([[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [5.0, 1.0]]])
    with pytest.raises(ValidationError) as info:
        HamiltonianDensity.piecewise([0.0, 0.5, 1.0], bad)
    assert len(info.value.errors) == 2
    with pytest.raises(ValidationError, match="strictly increasing"):
        HamiltonianDensity.constant(np.eye(2), 1.0, 1.0)


def test_bounds_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        bounds(HamiltonianDensity.constant(np.diag([1.0, -1.0])))


def test_sampled_uses_cell_midpoints():
    h = HamiltonianDensity.from_function(lambda x: np.array([[1.0 + x]]), 0.0, 1.0, 4)
    assert np.allclose(h.matrices[:, 0, 0], [1.125, 1.375, 1.625, 1.875])
    assert np.allclose(h.breakpoints, np.linspace(0.0, 1.0, 5))


def test_refine_and_restrict_preserve_values(rng):
    mats = np.array([np.diag([1.0, 2.0]), np.diag([3.0, 1.0]), np.eye(2)])
    h = HamiltonianDensity.piecewise([0.0, 0.3, 0.7, 1.0], mats)
    r = h.refine([0.1, 0.5, 0.9])
    for x in rng.uniform(0, 1, 50):
        assert np.array_equal(r.at(x), h.at(x))
    s = h.restrict(0.2, 0.8)
    assert np.allclose(s.breakpoints, [0.2, 0.3, 0.7, 0.8])
    assert np.array_equal(s.at(0.75), h.at(0.75))
    with pytest.raises(OutOfInterval):
        h.restrict(0.5, 1.2)


def test_total_variation_is_entrywise_l1():
    h = HamiltonianDensity.piecewise([0, 1, 2], np.array([[[1.0, 0.5], [0.5, 2.0]], [[2.0, 0.0], [0.0, 1.0]]]))
    assert total_variation(h) == pytest.approx(1 + 0.5 + 0.5 + 1)


def test_invariance_check():
    split = spectral_split(np.diag([1.0, -1.0]))
    diag = HamiltonianDensity.piecewise([0, 1, 2], np.array([np.diag([1.0, 2.0]), np.diag([3.0, 1.0])]))
    assert invariance_check(diag, split).invariant
    coupled = HamiltonianDensity.constant(np.array([[2.0, 0.5], [0.5, 1.0]]))
    res = invariance_check(coupled, split)
    assert not res.invariant and res.max_residual > 0.1
    assert str(res).startswith("NotInvariant")
    # a definite P1 has a trivial split, so every density is invariant
    assert invariance_check(coupled, spectral_split(np.eye(2))).invariant
