import math

import numpy as np
import pytest

from phstab.errors import DimensionMismatch, NearSingular, NotSymmetric, Overflow
from phstab.fixtures import random_p1
from phstab.linalg import (check_symmetric, e_norm, expm, inv_sqrtm_spd, norm2, spectral_split,
                           sqrtm_spd)


def taylor_expm(a, terms=60):
    """Independent oracle: scale to norm <= 1/2, truncated Taylor, then square."""
    s = max(0, int(math.ceil(math.log2(max(np.abs(a).sum(axis=0).max(), 1e-300) / 0.5))))
    b = a / 2.0 ** s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def test_norm2_of_empty_matrix_is_zero():
    assert norm2(np.zeros((0, 0))) == 0.0
    assert norm2(np.diag([3.0, -4.0])) == pytest.approx(4.0)


@pytest.mark.parametrize("scale", [1e-3, 0.3, 2.0, 12.0, 80.0])
def test_expm_matches_taylor_oracle(rng, scale):
    for d in (1, 2, 4, 6):
        a = scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(d)
        ref = taylor_expm(a)
        assert norm2(expm(a) - ref) <= 1e-12 * max(1.0, norm2(ref)) * max(1.0, scale)


def test_expm_batched_uses_per_matrix_degree(rng):
    stack = np.array([1e-4 * rng.standard_normal((3, 3)), 30.0j * np.diag([1.0, -1.0, 0.5])])
    out = expm(stack)
    for a, e in zip(stack, out):
        assert np.allclose(e, taylor_expm(a), atol=1e-12)


def test_expm_skew_hermitian_is_unitary(rng):
    a = rng.standard_normal((5, 5))
    e = expm(1j * (a + a.T) * 17.0)
    assert norm2(e @ e.conj().T - np.eye(5)) < 1e-12


def test_expm_errors():
    with pytest.raises(DimensionMismatch):
        expm(np.zeros((2, 3)))
    with pytest.raises(Overflow):
        expm(np.array([[np.inf]]))
    with pytest.raises(Overflow):
        expm(np.array([[800.0]]))


def test_check_symmetric():
    a = np.array([[1.0, 2.0], [2.0 + 1e-15, 1.0]])
    assert np.array_equal(check_symmetric(a), check_symmetric(a).T)
    with pytest.raises(NotSymmetric, match="A - A\\^T"):
        check_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        check_symmetric(np.zeros((2, 3)))


def test_spectral_split_reconstruction_on_seeded_matrices():
    rng = np.random.default_rng(100)
    for _ in range(100):
        d = int(rng.integers(1, 8))
        p1 = random_p1(rng, d)
        sp = spectral_split(p1)
        assert sp.dim_plus + sp.dim_minus == d
        rec = sp.p_plus @ p1 @ sp.p_plus + sp.p_minus @ p1 @ sp.p_minus
        assert norm2(rec - p1) <= 1e-12 * norm2(p1)
        assert norm2(sp.p_plus + sp.p_minus - np.eye(d)) <= 1e-12
        # Q+^T Q+ - Q-^T Q- reproduces P1
        assert norm2(sp.q_plus.T @ sp.q_plus - sp.q_minus.T @ sp.q_minus - p1) <= 1e-12 * norm2(p1)
        assert norm2(sp.p1_inv @ p1 - np.eye(d)) <= 1e-10


def test_spectral_split_of_definite_matrices():
    sp = spectral_split(np.eye(2))
    assert sp.dim_minus == 0 and sp.block_condition("minus") == 1.0
    sp = spectral_split(-np.diag([1.0, 4.0]))
    assert sp.dim_plus == 0 and sp.block_condition("minus") == pytest.approx(4.0)


def test_spectral_split_errors():
    with pytest.raises(NearSingular):
        spectral_split(np.diag([1.0, 1e-12]))
    with pytest.raises(NotSymmetric):
        spectral_split(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_e_norm_matches_ambient_oracle(rng):
    p1 = random_p1(rng, 5)
    sp = spectral_split(p1)
    lam, vec = np.linalg.eigh(p1)
    abs_inv_sqrt = (vec / np.sqrt(np.abs(lam))) @ vec.T  # |P1|^{-1/2} built independently
    for sign, iota in (("plus", sp.iota_plus), ("minus", sp.iota_minus)):
        if iota.shape[1] == 0:
            continue
        x = rng.standard_normal(iota.shape[1])
        assert e_norm(sp, sign, x) == pytest.approx(np.linalg.norm(abs_inv_sqrt @ iota @ x), rel=1e-12)
    with pytest.raises(ValueError):
        e_norm(sp, "zero", np.zeros(1))
    with pytest.raises(DimensionMismatch):
        e_norm(sp, "plus", np.zeros(sp.dim_plus + 1))


def test_spd_roots(rng):
    a = rng.standard_normal((4, 4))
    h = a @ a.T + np.eye(4)
    r = sqrtm_spd(h)
    assert np.allclose(r @ r, h)
    assert np.allclose(inv_sqrtm_spd(h) @ r, np.eye(4))
