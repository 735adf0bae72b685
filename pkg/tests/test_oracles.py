from __future__ import annotations

import numpy as np
import pytest

from bandred import band_check, jacobi_eigen, jacobi_svd, orth_residual, spectra_match


def _sym(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    return (g + g.T) / 2.0


def test_eigen_diagonal_input_is_sorted_exactly():
    vals = jacobi_eigen(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(vals, [3.0, 2.0, 1.0])


def test_eigen_2x2_known_values():
    vals = jacobi_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.max(np.abs(vals - np.array([3.0, 1.0]))) <= 1e-13


def test_eigen_sum_matches_trace():
    S = _sym(16, 7)
    vals = jacobi_eigen(S)
    assert abs(vals.sum() - np.trace(S)) <= 1e-12 * np.linalg.norm(S)


def test_eigen_rejects_nonsymmetric():
    a = np.arange(9.0).reshape(3, 3)
    with pytest.raises(ValueError):
        jacobi_eigen(a)


def test_eigen_rejects_oversize():
    with pytest.raises(ValueError):
        jacobi_eigen(np.eye(257))


def test_eigen_reports_nonconvergence():
    with pytest.raises(RuntimeError):
        jacobi_eigen(_sym(16, 3), max_sweeps=1)


def test_svd_diagonal_input_exact():
    vals = jacobi_svd(np.diag([5.0, 2.0]))
    assert np.array_equal(vals, [5.0, 2.0])


def test_svd_permutation_matrix():
    vals = jacobi_svd(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(vals, [1.0, 1.0])


def test_svd_squares_match_gram_eigenvalues():
    # independent route: sigma(A)^2 against eigenvalues of A^T A
    rng = np.random.default_rng(11)
    A = rng.standard_normal((12, 8))
    sv = jacobi_svd(A)
    ev = jacobi_eigen(A.T @ A)
    assert np.max(np.abs(sv**2 - ev)) <= 1e-10 * ev[0]


def test_svd_wide_input_transposed_internally():
    rng = np.random.default_rng(12)
    A = rng.standard_normal((5, 9))
    assert np.allclose(jacobi_svd(A), jacobi_svd(A.T), rtol=0, atol=1e-12)


def test_svd_rejects_oversize():
    with pytest.raises(ValueError):
        jacobi_svd(np.ones((200, 129)))


def test_svd_reports_nonconvergence():
    rng = np.random.default_rng(5)
    with pytest.raises(RuntimeError):
        jacobi_svd(rng.standard_normal((16, 16)), max_sweeps=1)


def test_band_check_identity_is_zero():
    assert band_check(np.eye(6), 0, 0) == 0.0


def test_band_check_is_exact_not_a_norm():
    B = np.array(
        [
            [1.0, 2.0, 0.5, 0.0],
            [3.0, 1.0, 2.0, -7.0],
            [0.25, 3.0, 1.0, 2.0],
            [0.0, -0.125, 3.0, 1.0],
        ]
    )
    # bandwidth (1,1): offband entries are 0.5, 0.0, -7.0, 0.25, 0.0, -0.125
    assert band_check(B, 1, 1) == 7.0
    assert band_check(B, 3, 3) == 0.0


def test_band_check_whole_matrix_in_band():
    assert band_check(np.full((3, 5), 9.0), 4, 4) == 0.0


def test_orth_residual_identity():
    assert orth_residual(np.eye(7)) == 0.0


def test_orth_residual_rotation_tiny():
    c, s = np.cos(0.3), np.sin(0.3)
    Q = np.array([[c, -s], [s, c]])
    assert orth_residual(Q) <= 4 * np.finfo(np.float64).eps


def test_spectra_match_identical():
    a = np.array([3.0, 2.0, -1.0])
    ok, dev = spectra_match(a, a.copy(), 1e-15)
    assert ok and dev == 0.0


def test_spectra_match_inside_and_outside_tol():
    a = np.array([3.0, 2.0, -1.0])
    b = a + 5e-13
    ok, dev = spectra_match(a, b, 1e-12)
    assert ok and 4e-13 <= dev <= 1e-12
    ok2, _ = spectra_match(a, a + 2e-12, 1e-12)
    assert not ok2


def test_spectra_match_shape_mismatch():
    ok, dev = spectra_match(np.zeros(3), np.zeros(4), 1.0)
    assert not ok and dev == float("inf")
