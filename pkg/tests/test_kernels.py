from __future__ import annotations

import numpy as np
import pytest

from bandred import (
    ExecGroups,
    Workers,
    apply_wy_left,
    apply_wy_right,
    build_w,
    house_gen,
    jacobi_eigen,
    lq_panel,
    matmul,
    orth_residual,
    qr_panel,
    reset_flops,
    snapshot_flops,
    sym_two_sided_update,
)
from bandred.kernels import symm_lower, syr2k_lower

EPS = np.finfo(np.float64).eps


def _rand(m, n, seed):
    rng = np.random.default_rng(seed)
    return np.asfortranarray(rng.standard_normal((m, n)))


def _matmul_naive(alpha, A, B, beta, C):
    """Scalar triple loop with the same fixed inner order and the same
    rounding events as matmul: scale C by beta, then one multiply and one
    add per inner index. Oracle for bitwise comparison."""
    m, k = A.shape
    n = B.shape[1]
    out = C.copy()
    for i in range(m):
        for j in range(n):
            if beta == 0.0:
                acc = 0.0
            elif beta == 1.0:
                acc = out[i, j]
            else:
                acc = out[i, j] * beta
            for p in range(k):
                if alpha == 1.0:
                    acc = acc + A[i, p] * B[p, j]
                else:
                    acc = acc + (A[i, p] * alpha) * B[p, j]
            out[i, j] = acc
    return out


# --- matmul ----------------------------------------------------------------


def test_matmul_matches_triple_loop_bitwise():
    A = _rand(7, 5, 1)
    B = _rand(5, 4, 2)
    C0 = _rand(7, 4, 3)
    want = _matmul_naive(1.0, A, B, 0.0, C0)
    got = C0.copy()
    matmul(1.0, A, B, 0.0, got)
    assert np.array_equal(got, want)


def test_matmul_scaled_accumulate_matches_triple_loop_bitwise():
    A = _rand(6, 3, 4)
    B = _rand(3, 8, 5)
    C0 = _rand(6, 8, 6)
    want = _matmul_naive(1.7, A, B, 0.3, C0)
    got = C0.copy()
    matmul(1.7, A, B, 0.3, got)
    assert np.array_equal(got, want)


def test_matmul_alpha_zero_beta_one_is_identity():
    C0 = _rand(5, 5, 7)
    C = C0.copy()
    reset_flops()
    matmul(0.0, _rand(5, 9, 8), _rand(9, 5, 9), 1.0, C)
    assert np.array_equal(C, C0)
    assert snapshot_flops()["total"] == 0  # early-out does no counted work


def test_matmul_identity_left_factor():
    B = _rand(6, 4, 10)
    C = np.zeros((6, 4), order="F")
    matmul(1.0, np.eye(6, order="F"), B, 0.0, C)
    assert np.array_equal(C, B)


def test_matmul_flop_count_exact():
    reset_flops()
    matmul(1.0, _rand(4, 4, 11), _rand(4, 4, 12), 0.0, np.zeros((4, 4), order="F"))
    assert snapshot_flops()["matmul"] == 128
    reset_flops()
    matmul(2.0, _rand(9, 5, 13), _rand(5, 7, 14), 1.0, _rand(9, 7, 15))
    assert snapshot_flops()["matmul"] == 2 * 9 * 5 * 7


def test_matmul_output_split_invariance():
    """Any partition of C computes the same bits as one full call: the
    contract the look-ahead schedules are built on."""
    A = _rand(12, 9, 16)
    B = _rand(9, 10, 17)
    base = _rand(12, 10, 18)
    whole = base.copy()
    matmul(1.0, A, B, 1.0, whole)

    by_cols = base.copy()
    matmul(1.0, A, B[:, :3], 1.0, by_cols[:, :3])
    matmul(1.0, A, B[:, 3:], 1.0, by_cols[:, 3:])
    assert np.array_equal(by_cols, whole)

    by_rows = base.copy()
    for r0, r1 in ((0, 5), (5, 11), (11, 12)):
        matmul(1.0, A[r0:r1, :], B, 1.0, by_rows[r0:r1, :])
    assert np.array_equal(by_rows, whole)


def test_matmul_worker_count_invariance():
    A = _rand(300, 20, 19)
    B = _rand(20, 6, 20)
    serial = np.zeros((300, 6), order="F")
    matmul(1.0, A, B, 0.0, serial)
    with ExecGroups(3, 0) as groups:
        threaded = np.zeros((300, 6), order="F")
        matmul(1.0, A, B, 0.0, threaded, Workers(groups._all, 3))
    assert np.array_equal(threaded, serial)


def test_matmul_shape_errors():
    with pytest.raises(ValueError):
        matmul(1.0, _rand(3, 4, 0), _rand(5, 2, 0), 0.0, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        matmul(1.0, _rand(3, 4, 0), _rand(4, 2, 0), 0.0, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        matmul(1.0, np.zeros(3), _rand(3, 2, 0), 0.0, np.zeros((1, 2)))


# --- householder -----------------------------------------------------------


def test_house_three_four_five():
    v, tau, beta = house_gen(np.array([3.0, 4.0]))
    assert abs(beta) == 5.0
    assert beta == -5.0  # sign flip away from x[0]
    y = np.array([3.0, 4.0]) - tau * v * (v @ np.array([3.0, 4.0]))
    assert abs(y[0] - beta) <= 16 * EPS * 5.0
    assert abs(y[1]) <= 16 * EPS * 5.0


def test_house_zero_vector_is_identity():
    v, tau, beta = house_gen(np.zeros(4))
    assert tau == 0.0 and beta == 0.0
    assert np.array_equal(v, [1.0, 0.0, 0.0, 0.0])


def test_house_always_flips_even_with_zero_tail():
    v, tau, beta = house_gen(np.array([2.0, 0.0, 0.0]))
    assert beta == -2.0 and tau == 2.0
    assert np.array_equal(v, [1.0, 0.0, 0.0])


def test_house_random_residual():
    rng = np.random.default_rng(21)
    x = rng.standard_normal(5)
    v, tau, beta = house_gen(x)
    assert v[0] == 1.0
    y = x - tau * v * (v @ x)
    nrm = np.linalg.norm(x)
    assert abs(y[0] - beta) <= 16 * EPS * nrm
    assert np.max(np.abs(y[1:])) <= 16 * EPS * nrm


def test_house_length_one():
    v, tau, beta = house_gen(np.array([-3.0]))
    assert beta == 3.0 and tau == 2.0


# --- panels ----------------------------------------------------------------


def _q_explicit(f):
    j = f.y.shape[0]
    return np.eye(j) + f.w @ f.y.T


def test_qr_already_triangular_panel_flips_signs_only():
    P0 = np.triu(_rand(5, 3, 22)[:3, :3])
    P = np.zeros((5, 3), order="F")
    P[:3, :] = P0
    f = qr_panel(P.copy(order="F"))
    assert np.array_equal(np.abs(f.r_or_l), np.abs(P0))


def test_qr_factor_is_orthogonal():
    f = qr_panel(_rand(6, 2, 23))
    assert orth_residual(_q_explicit(f)) <= 1e-14


def test_qr_reconstruction():
    P0 = _rand(8, 3, 24)
    f = qr_panel(P0.copy(order="F"))
    top = _q_explicit(f).T @ P0
    scale = np.linalg.norm(P0)
    assert np.linalg.norm(top[:3, :] - f.r_or_l) <= 1e-13 * scale
    assert np.max(np.abs(top[3:, :])) <= 1e-13 * scale


def test_qr_inner_blocking_agrees():
    P0 = _rand(8, 3, 25)
    rs = [qr_panel(P0.copy(order="F"), inner_b=ib).r_or_l for ib in (1, 2, 3)]
    scale = np.linalg.norm(P0)
    for r in rs[1:]:
        assert np.array_equal(np.sign(np.diag(r)), np.sign(np.diag(rs[0])))
        assert np.max(np.abs(r - rs[0])) <= 1e-13 * scale


def test_qr_panel_factor_invariants():
    f = qr_panel(_rand(9, 4, 26))
    assert np.array_equal(np.diag(f.y)[:4], np.ones(4))
    assert np.array_equal(np.triu(f.y, 1), np.zeros_like(f.y))
    assert np.array_equal(np.tril(f.t, -1), np.zeros_like(f.t))
    assert np.array_equal(f.w, build_w(f.y, f.t))
    assert f.j == 9 and f.b == 4


def test_qr_shape_errors():
    with pytest.raises(ValueError):
        qr_panel(_rand(2, 3, 0))
    with pytest.raises(ValueError):
        qr_panel(_rand(4, 2, 0), inner_b=0)


def test_lq_duality_with_qr_of_transpose():
    P0 = _rand(3, 7, 27)
    fl = lq_panel(P0.copy(order="F"))
    fq = qr_panel(np.asfortranarray(P0.T.copy()))
    scale = np.linalg.norm(P0)
    assert np.array_equal(np.sign(np.diag(fl.r_or_l)), np.sign(np.diag(fq.r_or_l)))
    assert np.max(np.abs(fl.r_or_l - fq.r_or_l.T)) <= 1e-13 * scale


def test_lq_factor_is_orthogonal():
    f = lq_panel(_rand(2, 7, 28))
    assert orth_residual(_q_explicit(f)) <= 1e-14


def test_lq_reconstruction():
    P0 = _rand(3, 8, 29)
    f = lq_panel(P0.copy(order="F"))
    right = P0 @ _q_explicit(f)
    scale = np.linalg.norm(P0)
    assert np.linalg.norm(right[:, :3] - f.r_or_l) <= 1e-13 * scale
    assert np.max(np.abs(right[:, 3:])) <= 1e-13 * scale


# --- compact WY ------------------------------------------------------------


def test_build_w_single_reflector():
    v = np.zeros((6, 1), order="F")
    v[:, 0] = [1.0, 0.5, -0.25, 2.0, 0.0, 1.5]
    tau = 1.25
    W = build_w(v, np.array([[-tau]], order="F"))
    assert np.array_equal(W, -tau * v)


def test_build_w_zero_y_gives_zero_w():
    T = np.triu(_rand(3, 3, 30))
    W = build_w(np.zeros((7, 3), order="F"), np.asfortranarray(T))
    assert np.array_equal(W, np.zeros((7, 3)))


def test_wy_form_equals_reflector_product():
    f = qr_panel(_rand(9, 4, 31))
    Q = np.eye(9)
    for i in range(4):
        vi = f.y[:, i : i + 1]
        Q = Q @ (np.eye(9) - f.tau[i] * (vi @ vi.T))
    assert np.max(np.abs(_q_explicit(f) - Q)) <= 1e-13


def test_build_w_shape_error():
    with pytest.raises(ValueError):
        build_w(np.zeros((5, 3), order="F"), np.zeros((2, 2), order="F"))


# --- WY application --------------------------------------------------------


def test_apply_wy_left_matches_dense_oracle():
    f = qr_panel(_rand(10, 3, 32))
    A0 = _rand(10, 6, 33)
    A = A0.copy(order="F")
    apply_wy_left(A, f)
    want = _q_explicit(f).T @ A0
    assert np.max(np.abs(A - want)) <= 1e-13 * np.linalg.norm(A0)


def test_apply_wy_left_zero_factors_identity():
    f = qr_panel(_rand(5, 2, 34))
    f.w[...] = 0.0
    A0 = _rand(5, 4, 35)
    A = A0.copy(order="F")
    apply_wy_left(A, f)
    assert np.array_equal(A, A0)


def test_apply_wy_left_column_split_invariance():
    f = qr_panel(_rand(10, 3, 36))
    A0 = _rand(10, 9, 37)
    whole = A0.copy(order="F")
    apply_wy_left(whole, f)
    split = A0.copy(order="F")
    apply_wy_left(split[:, :4], f)
    apply_wy_left(split[:, 4:], f)
    assert np.array_equal(split, whole)


def test_apply_wy_right_matches_dense_oracle():
    f = lq_panel(_rand(3, 10, 38))
    A0 = _rand(6, 10, 39)
    A = A0.copy(order="F")
    apply_wy_right(A, f)
    want = A0 @ _q_explicit(f)
    assert np.max(np.abs(A - want)) <= 1e-13 * np.linalg.norm(A0)


def test_apply_wy_right_row_split_invariance():
    f = lq_panel(_rand(3, 10, 40))
    A0 = _rand(9, 10, 41)
    whole = A0.copy(order="F")
    apply_wy_right(whole, f)
    split = A0.copy(order="F")
    apply_wy_right(split[:5, :], f)
    apply_wy_right(split[5:, :], f)
    assert np.array_equal(split, whole)


def test_apply_wy_row_mismatch_errors():
    f = qr_panel(_rand(6, 2, 42))
    with pytest.raises(ValueError):
        apply_wy_left(_rand(5, 3, 0), f)
    with pytest.raises(ValueError):
        apply_wy_right(_rand(3, 5, 0), f)


# --- symmetric kernels -----------------------------------------------------


def _sym_lower(n, seed):
    """Random symmetric matrix with garbage in the strict upper triangle; the
    symmetric kernels must never read it."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    s = np.asfortranarray(np.tril(g) + np.tril(g, -1).T)
    s[np.triu_indices(n, 1)] = 1e9  # poison
    return s


def _densify(s):
    n = s.shape[0]
    return np.tril(s) + np.tril(s, -1).T


def test_symm_lower_reads_lower_triangle_only():
    S = _sym_lower(12, 43)
    W = _rand(12, 3, 44)
    out = np.zeros((12, 3), order="F")
    symm_lower(S, W, out)
    want = _densify(S) @ W
    assert np.max(np.abs(out - want)) <= 1e-13 * np.linalg.norm(want)


def test_syr2k_lower_matches_dense_and_split():
    n, b = 10, 3
    S0 = np.asfortranarray(np.tril(_rand(n, n, 45)))
    X = _rand(n, b, 46)
    Y = _rand(n, b, 47)

    whole = S0.copy(order="F")
    syr2k_lower(whole, X, Y, 0, n)

    parts = S0.copy(order="F")
    syr2k_lower(parts, X, Y, 0, 4)
    syr2k_lower(parts, X, Y, 4, n)
    assert np.array_equal(parts, whole)

    dense = _densify(S0) + X @ Y.T + Y @ X.T
    got = _densify(whole)
    assert np.max(np.abs(np.tril(got) - np.tril(dense))) <= 1e-12 * np.linalg.norm(
        dense
    )


def test_sym_two_sided_zero_factors_identity():
    f = qr_panel(_rand(8, 2, 48))
    f.w[...] = 0.0
    f.y[...] = 0.0
    A0 = _sym_lower(8, 49)
    A = A0.copy(order="F")
    sym_two_sided_update(A, f)
    assert np.array_equal(np.tril(A), np.tril(A0))


def test_sym_two_sided_identity_stays_identity():
    f = qr_panel(_rand(9, 3, 50))
    A = np.eye(9, order="F")
    sym_two_sided_update(A, f)
    assert np.max(np.abs(np.tril(A) - np.tril(np.eye(9)))) <= 1e-13


def test_sym_two_sided_matches_dense_similarity():
    f = qr_panel(_rand(12, 3, 51))
    A0 = _sym_lower(12, 52)
    dense0 = _densify(A0)
    A = A0.copy(order="F")
    sym_two_sided_update(A, f)
    Q = _q_explicit(f)
    want = Q.T @ dense0 @ Q
    scale = np.linalg.norm(dense0)
    assert np.max(np.abs(np.tril(_densify(A)) - np.tril(want))) <= 1e-12 * scale
    ev_in = jacobi_eigen(dense0)
    ev_out = jacobi_eigen(_densify(A))
    assert np.max(np.abs(ev_in - ev_out)) <= 1e-12 * np.max(np.abs(ev_in))
