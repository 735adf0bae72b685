"""Deterministic dense kernels: Householder reflectors, blocked left-looking
QR/LQ panel factorizations, compact-WY construction and application, and the
Level-3 primitives every reduction update routes through.

Determinism contract: matmul accumulates over the inner dimension in strict
sequential order via elementwise outer-product steps. numpy ufuncs round the
multiply and the add separately (no FMA contraction), so each output element's
bit pattern depends only on its own row of A, column of B, alpha, beta, and
the inner order -- never on how the output happens to be tiled across workers
or split across tasks. That property is what lets the look-ahead variants
repartition updates freely while staying bitwise comparable to the reference
schedule. BLAS gemm is deliberately not used: it vectorizes the inner loop
with shape-dependent groupings and does not have this stability.

Vector norms and dots (np.linalg.norm, @ on vectors) appear only inside panel
factorizations, where every schedule issues the identical call on identical
data.
"""

from dataclasses import dataclass

import numpy as np

from .flops import FLOPS

# Fixed tile edges for internal worker parallelism. Constants, never derived
# from worker counts: the work decomposition must not depend on resources.
ROW_TILE = 128
COL_TILE = 128
SYM_STRIP = 64


def _as2d(a, name):
    if not isinstance(a, np.ndarray) or a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array")
    return a


def matmul(alpha, A, B, beta, C, workers=None):
    """C := alpha*A*B + beta*C with a fixed summation order over the inner
    dimension (strictly sequential, one rank-1 step per inner index).

    Pass transposed views (A.T / B.T) for transposed operands. Parallelism,
    when a Workers handle is given, is only across disjoint row tiles of C;
    results are bitwise identical for any worker count.
    """
    _as2d(A, "A"), _as2d(B, "B"), _as2d(C, "C")
    m, k = A.shape
    k2, n = B.shape
    if k != k2 or C.shape != (m, n):
        raise ValueError(f"matmul shape mismatch: {A.shape} x {B.shape} -> {C.shape}")

    if beta == 0.0:
        C[...] = 0.0
    elif beta != 1.0:
        np.multiply(C, beta, out=C)
    if alpha == 0.0 or k == 0 or m == 0 or n == 0:
        return C

    FLOPS.add("matmul", 2 * m * k * n)

    def run_tile(r0, r1):
        Ct = C[r0:r1, :]
        At = A[r0:r1, :]
        tmp = np.empty((r1 - r0, n), dtype=np.float64)
        if alpha == 1.0:
            for p in range(k):
                np.multiply(At[:, p : p + 1], B[p : p + 1, :], out=tmp)
                np.add(Ct, tmp, out=Ct)
        else:
            # alpha folded into the left factor at every step; still one
            # fixed order, just one extra rounding on the product.
            for p in range(k):
                np.multiply(At[:, p : p + 1] * alpha, B[p : p + 1, :], out=tmp)
                np.add(Ct, tmp, out=Ct)

    tiles = [(r0, min(r0 + ROW_TILE, m)) for r0 in range(0, m, ROW_TILE)]
    if workers is None or len(tiles) == 1:
        for r0, r1 in tiles:
            run_tile(r0, r1)
    else:
        workers.map(lambda t: run_tile(*t), tiles)
    return C


def house_gen(x):
    """Householder reflector for a vector: (I - tau*v*v^T) x = beta*e1.

    v[0] = 1. Sign convention: beta = -sign(x[0]) * ||x||, with x[0] = 0
    treated as positive -- applied unconditionally, so a vector with zero
    tail still gets its sign flipped (tau = 2). The all-zero vector yields
    tau = 0, beta = 0 (identity reflector).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("house_gen needs a vector of length >= 1")
    L = x.size
    FLOPS.add("house", 3 * L)
    v = np.zeros(L)
    v[0] = 1.0
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return v, 0.0, 0.0
    sign = -1.0 if x[0] < 0 else 1.0
    beta = -sign * nrm
    v0 = x[0] - beta  # = x[0] + sign*nrm: same signs, no cancellation
    if L > 1:
        np.divide(x[1:], v0, out=v[1:])
    tau = (beta - x[0]) / beta
    return v, float(tau), float(beta)


@dataclass
class PanelFactors:
    """Compact-WY factors of a blocked panel: Q = I + W * Y^T, W = Y * T.

    y: j x b unit lower-trapezoidal reflector vectors (column i is v_i).
    t: b x b upper triangular, accumulated so that W = Y*T directly (for a
       single reflector, W = -tau*v, i.e. T[0,0] = -tau).
    r_or_l: the b x b triangular panel factor (R for QR, L for LQ).
    tau: the b reflector scalars.
    """

    y: np.ndarray
    t: np.ndarray
    w: np.ndarray
    r_or_l: np.ndarray
    tau: np.ndarray

    @property
    def j(self):
        return self.y.shape[0]

    @property
    def b(self):
        return self.y.shape[1]


def build_w(Y, T):
    """W = Y * T, column by column (T is upper triangular, so column i only
    involves Y's first i+1 columns)."""
    _as2d(Y, "Y"), _as2d(T, "T")
    j, b = Y.shape
    if T.shape != (b, b):
        raise ValueError("build_w: T must be b x b")
    W = np.zeros((j, b), order="F")
    for i in range(b):
        matmul(1.0, Y[:, : i + 1], T[: i + 1, i : i + 1], 0.0, W[:, i : i + 1])
    return W


def _t_extend(T, Y, v, tau, i):
    """Grow the compact-WY triangle by one reflector:
    T[0:i, i] = -tau * T[0:i, 0:i] * (Y[:, 0:i]^T v), T[i, i] = -tau.

    v is the stored reflector tail (rows i ownward), zero above, so the dot
    against the earlier columns only needs their tail rows."""
    if i > 0:
        tmp = np.zeros((i, 1), order="F")
        matmul(1.0, Y[i:, :i].T, v.reshape(-1, 1), 0.0, tmp)
        matmul(-tau, T[:i, :i], tmp, 0.0, T[:i, i : i + 1])
    T[i, i] = -tau


def qr_panel(P, inner_b=16):
    """Blocked left-looking QR of a j x b panel (j >= b >= 1), in place.

    P's top b x b becomes R (reflector tails remain below it, as usual).
    Returns fresh PanelFactors; the panel view can be mutated afterwards
    without invalidating them.
    """
    _as2d(P, "P")
    j, b = P.shape
    if j < b or b < 1:
        raise ValueError(f"qr_panel needs j >= b >= 1, got {j} x {b}")
    if inner_b < 1:
        raise ValueError("inner_b >= 1")
    Y = np.zeros((j, b), order="F")
    T = np.zeros((b, b), order="F")
    tau = np.zeros(b)
    for s in range(0, b, inner_b):
        e = min(s + inner_b, b)
        if s > 0:
            # left-looking: apply the s accumulated reflectors to this block,
            # Q^T A = A + Y (T^T (Y^T A))
            blk = P[:, s:e]
            t1 = np.zeros((s, e - s), order="F")
            matmul(1.0, Y[:, :s].T, blk, 0.0, t1)
            t2 = np.zeros((s, e - s), order="F")
            matmul(1.0, T[:s, :s].T, t1, 0.0, t2)
            matmul(1.0, Y[:, :s], t2, 1.0, blk)
        for i in range(s, e):
            v, ti, beta = house_gen(P[i:, i].copy())
            tau[i] = ti
            Y[i:, i] = v
            P[i, i] = beta
            P[i + 1 :, i] = v[1:]
            if i + 1 < e and ti != 0.0:
                # apply H_i to the unfactored columns of this inner block
                rest = P[i:, i + 1 : e]
                vcol = v.reshape(-1, 1)
                t1 = np.zeros((1, e - i - 1), order="F")
                matmul(1.0, vcol.T, rest, 0.0, t1)
                matmul(-ti, vcol, t1, 1.0, rest)
            _t_extend(T, Y, Y[i:, i], ti, i)
    W = build_w(Y, T)
    R = np.triu(P[:b, :b]).copy(order="F")
    return PanelFactors(y=Y, t=T, w=W, r_or_l=R, tau=tau)


def lq_panel(P, inner_b=16):
    """Blocked left-looking LQ of a b x j panel (j >= b >= 1), in place;
    reflectors act on rows. P's leftmost b x b becomes L (lower triangular).

    Factors contract: V = I + W * Y^T applied from the right,
    A := A + (A*W)*Y^T. Same recurrence as qr_panel, authored on rows rather
    than delegated to qr_panel(P^T) so the two stay independent checks of
    each other.
    """
    _as2d(P, "P")
    b, j = P.shape
    if j < b or b < 1:
        raise ValueError(f"lq_panel needs b x j with j >= b >= 1, got {b} x {j}")
    if inner_b < 1:
        raise ValueError("inner_b >= 1")
    Y = np.zeros((j, b), order="F")
    T = np.zeros((b, b), order="F")
    tau = np.zeros(b)
    for s in range(0, b, inner_b):
        e = min(s + inner_b, b)
        if s > 0:
            # right-apply the s accumulated row reflectors to this row block:
            # A V = A + ((A Y) T) Y^T
            blk = P[s:e, :]
            t1 = np.zeros((e - s, s), order="F")
            matmul(1.0, blk, Y[:, :s], 0.0, t1)
            t2 = np.zeros((e - s, s), order="F")
            matmul(1.0, t1, T[:s, :s], 0.0, t2)
            matmul(1.0, t2, Y[:, :s].T, 1.0, blk)
        for i in range(s, e):
            v, ti, beta = house_gen(P[i, i:].copy())
            tau[i] = ti
            Y[i:, i] = v
            P[i, i] = beta
            P[i, i + 1 :] = v[1:]
            if i + 1 < e and ti != 0.0:
                rest = P[i + 1 : e, i:]
                vcol = v.reshape(-1, 1)
                t1 = np.zeros((e - i - 1, 1), order="F")
                matmul(1.0, rest, vcol, 0.0, t1)
                matmul(-ti, t1, vcol.T, 1.0, rest)
            _t_extend(T, Y, Y[i:, i], ti, i)
    W = build_w(Y, T)
    L = np.tril(P[:b, :b]).copy(order="F")
    return PanelFactors(y=Y, t=T, w=W, r_or_l=L, tau=tau)


def apply_wy_left(A, factors, workers=None):
    """A := A + Y*(W^T*A), the left application of Q^T = (I + W*Y^T)^T.

    Column-tiled; each tile is an independent pair of matmuls, so the result
    is bitwise invariant under any column split of A.
    """
    _as2d(A, "A")
    j, b = factors.y.shape
    if A.shape[0] != j:
        raise ValueError(f"apply_wy_left: A has {A.shape[0]} rows, factors have j={j}")
    c = A.shape[1]
    if c == 0 or j == 0:
        return A

    def run_tile(c0, c1):
        blk = A[:, c0:c1]
        t1 = np.zeros((b, c1 - c0), order="F")
        matmul(1.0, factors.w.T, blk, 0.0, t1)
        matmul(1.0, factors.y, t1, 1.0, blk)

    tiles = [(c0, min(c0 + COL_TILE, c)) for c0 in range(0, c, COL_TILE)]
    if workers is None or len(tiles) == 1:
        for t in tiles:
            run_tile(*t)
    else:
        workers.map(lambda t: run_tile(*t), tiles)
    return A


def apply_wy_right(A, factors, workers=None):
    """A := A + (A*W)*Y^T, the right application of I + W*Y^T. Row-tiled."""
    _as2d(A, "A")
    j, b = factors.y.shape
    if A.shape[1] != j:
        raise ValueError(f"apply_wy_right: A has {A.shape[1]} cols, factors have j={j}")
    r = A.shape[0]
    if r == 0 or j == 0:
        return A

    def run_tile(r0, r1):
        blk = A[r0:r1, :]
        t1 = np.zeros((r1 - r0, b), order="F")
        matmul(1.0, blk, factors.w, 0.0, t1)
        matmul(1.0, t1, factors.y.T, 1.0, blk)

    tiles = [(r0, min(r0 + ROW_TILE, r)) for r0 in range(0, r, ROW_TILE)]
    if workers is None or len(tiles) == 1:
        for t in tiles:
            run_tile(*t)
    else:
        workers.map(lambda t: run_tile(*t), tiles)
    return A


def symm_lower(A2, W, out, workers=None):
    """out := sym(A2) * W where only A2's lower triangle is authoritative.

    Row-tiled: each tile assembles its full symmetric row block (lower part,
    mirrored diagonal block, transposed column block) into a scratch buffer
    and runs one matmul over the full inner range, so the inner summation
    order is global and tile-independent.
    """
    _as2d(A2, "A2"), _as2d(W, "W"), _as2d(out, "out")
    j = A2.shape[0]
    if A2.shape != (j, j) or W.shape[0] != j or out.shape != (j, W.shape[1]):
        raise ValueError("symm_lower shape mismatch")
    if j == 0:
        return out

    def run_tile(r0, r1):
        rows = np.empty((r1 - r0, j), order="F")
        rows[:, :r0] = A2[r0:r1, :r0]
        d = A2[r0:r1, r0:r1]
        rows[:, r0:r1] = np.tril(d) + np.tril(d, -1).T
        rows[:, r1:] = A2[r1:, r0:r1].T
        matmul(1.0, rows, W, 0.0, out[r0:r1, :])

    tiles = [(r0, min(r0 + SYM_STRIP, j)) for r0 in range(0, j, SYM_STRIP)]
    if workers is None or len(tiles) == 1:
        for t in tiles:
            run_tile(*t)
    else:
        workers.map(lambda t: run_tile(*t), tiles)
    return out


def syr2k_lower(A2, X3, Y, c0, c1, workers=None):
    """A2[:, c0:c1] += X3*Y^T + Y*X3^T, lower triangle only, exactly.

    Column-strip decomposition: for each strip, the rectangular body below
    the strip's diagonal block is two matmuls; the triangular head is one
    column-pair of matmuls per column, so not a single off-triangle flop is
    spent or counted. Always X3*Y^T first, then Y*X3^T -- a fixed order that
    any column split of the range preserves per element.
    """
    _as2d(A2, "A2"), _as2d(X3, "X3"), _as2d(Y, "Y")
    j = A2.shape[0]
    if A2.shape != (j, j) or X3.shape[0] != j or Y.shape != X3.shape:
        raise ValueError("syr2k_lower shape mismatch")
    if not (0 <= c0 <= c1 <= j):
        raise ValueError("syr2k_lower bad column range")
    if c0 == c1:
        return A2

    def run_strip(s0, s1):
        if s1 < j:
            body = A2[s1:j, s0:s1]
            matmul(1.0, X3[s1:j, :], Y[s0:s1, :].T, 1.0, body)
            matmul(1.0, Y[s1:j, :], X3[s0:s1, :].T, 1.0, body)
        for cc in range(s0, s1):
            head = A2[cc:s1, cc : cc + 1]
            matmul(1.0, X3[cc:s1, :], Y[cc : cc + 1, :].T, 1.0, head)
            matmul(1.0, Y[cc:s1, :], X3[cc : cc + 1, :].T, 1.0, head)

    strips = [(s0, min(s0 + SYM_STRIP, c1)) for s0 in range(c0, c1, SYM_STRIP)]
    if workers is None or len(strips) == 1:
        for s in strips:
            run_strip(*s)
    else:
        workers.map(lambda s: run_strip(*s), strips)
    return A2


def sym_two_sided_update(A2, factors, workers=None):
    """A2 := (I + W*Y^T)^T * A2 * (I + W*Y^T) on the lower triangle only.

    The standard four-step form: X1 = sym(A2)*W, X2 = (1/2)*X1^T*W,
    X3 = X1 + Y*X2, A2 += X3*Y^T + Y*X3^T.
    """
    _as2d(A2, "A2")
    j, b = factors.y.shape
    if A2.shape != (j, j):
        raise ValueError(f"sym_two_sided_update: A2 must be {j} x {j}")
    if j == 0 or b == 0:
        return A2
    W, Y = factors.w, factors.y
    X1 = np.zeros((j, b), order="F")
    symm_lower(A2, W, X1, workers)
    X2 = np.zeros((b, b), order="F")
    matmul(0.5, X1.T, W, 0.0, X2)
    X3 = X1.copy(order="F")
    matmul(1.0, Y, X2, 1.0, X3)
    syr2k_lower(A2, X3, Y, 0, j, workers)
    return A2
