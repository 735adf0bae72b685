"""Independent, slow, simple verification oracles.

Everything here is deliberately naive: cyclic Jacobi for eigenvalues,
one-sided Jacobi for singular values, exact band-pattern scans, residual
norms. None of it shares code with the reduction kernels, so agreement
between the two is meaningful evidence. Desk scale only.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class SpectrumReport:
    values: np.ndarray  # sorted descending
    max_abs_offband: float
    residual: float


def _offdiag_fro(S):
    d = np.diag(np.diag(S))
    return float(np.linalg.norm(S - d))


def jacobi_eigen(S, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm falls below 1e-14 * ||S||_F.
    Raises on non-symmetric input or non-convergence. Returns eigenvalues
    sorted descending. Intended for n <= 256.
    """
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("jacobi_eigen needs a square matrix")
    n = S.shape[0]
    if n > 256:
        raise ValueError("oracle scale is n <= 256")
    nrm = float(np.linalg.norm(S))
    if float(np.linalg.norm(S - S.T)) > 1e-12 * max(nrm, 1.0):
        raise ValueError("input is not symmetric")
    S = (S + S.T) / 2.0
    if n == 1:
        return S[0, :1].copy()
    tol = 1e-14 * max(nrm, np.finfo(np.float64).tiny)
    for _ in range(max_sweeps):
        if _offdiag_fro(S) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if apq == 0.0:
                    continue
                app, aqq = S[p, p], S[q, q]
                # classic stable rotation: t = sign/(|theta| + sqrt(theta^2+1))
                theta = (aqq - app) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp = S[p, :].copy()
                rq = S[q, :].copy()
                S[p, :] = c * rp - s * rq
                S[q, :] = s * rp + c * rq
                cp = S[:, p].copy()
                cq = S[:, q].copy()
                S[:, p] = c * cp - s * cq
                S[:, q] = s * cp + c * cq
                S[p, q] = 0.0
                S[q, p] = 0.0
    else:
        raise RuntimeError("jacobi_eigen did not converge in %d sweeps" % max_sweeps)
    return np.sort(np.diag(S))[::-1].copy()


def jacobi_svd(A, max_sweeps=100):
    """Singular values by one-sided Jacobi on columns, sorted descending.

    Rotates column pairs until every pairwise dot product is below
    1e-14 * ||A||_F^2. Intended for min(m, n) <= 128.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("jacobi_svd needs a matrix")
    if A.shape[0] < A.shape[1]:
        A = A.T.copy()
    m, n = A.shape
    if n > 128:
        raise ValueError("oracle scale is min(m, n) <= 128")
    if n == 0:
        return np.zeros(0)
    scale = float(np.sum(A * A))
    if scale == 0.0:
        return np.zeros(n)
    tol = 1e-14 * scale
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                d = float(A[:, p] @ A[:, q])
                if abs(d) <= tol:
                    continue
                rotated = True
                npp = float(A[:, p] @ A[:, p])
                nqq = float(A[:, q] @ A[:, q])
                theta = (nqq - npp) / (2.0 * d)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
        if not rotated:
            break
    else:
        raise RuntimeError("jacobi_svd did not converge in %d sweeps" % max_sweeps)
    vals = np.sqrt(np.sum(A * A, axis=0))
    return np.sort(vals)[::-1].copy()


def band_check(B, lower_bw, upper_bw):
    """Exact max |entry| outside the band (i-j > lower_bw or j-i > upper_bw).

    Reads stored values; no tolerance. Empty off-band set gives 0.0.
    """
    B = np.asarray(B)
    m, n = B.shape
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    mask = (i - j > lower_bw) | (j - i > upper_bw)
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(B[mask])))


def orth_residual(Q):
    """|| Q^T Q - I ||_F."""
    Q = np.asarray(Q, dtype=np.float64)
    n = Q.shape[1]
    return float(np.linalg.norm(Q.T @ Q - np.eye(n)))


def spectra_match(a, b, tol):
    """Compare two sorted spectra; returns (within_tol, max_deviation)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return False, float("inf")
    if a.size == 0:
        return True, 0.0
    dev = float(np.max(np.abs(a - b)))
    return dev <= tol, dev
