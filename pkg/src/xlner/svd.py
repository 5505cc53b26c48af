"""One-sided Jacobi SVD for the small dense matrices used in embedding
alignment. Deterministic: fixed sweep order, fixed sign convention."""

from __future__ import annotations

import numpy as np


def jacobi_svd(a: np.ndarray, max_sweeps: int = 60, tol: float = 1e-14):
    """Full SVD a = U @ diag(s) @ V.T for an n x d matrix with n >= d.

    Columns of the working copy are orthogonalized in place by plane
    rotations; V accumulates the rotations. Singular values come out in
    descending order and each column of U has its largest-magnitude entry
    positive (the matching V column is flipped with it).
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in SVD input")
    n, d = a.shape
    if n < d:
        u, s, v = jacobi_svd(a.T, max_sweeps, tol)
        return v, s, u

    v = np.eye(d)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                alpha = a[:, p] @ a[:, p]
                beta = a[:, q] @ a[:, q]
                gamma = a[:, p] @ a[:, q]
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s_ = c * t
                ap = a[:, p].copy()
                a[:, p] = c * ap - s_ * a[:, q]
                a[:, q] = s_ * ap + c * a[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s_ * v[:, q]
                v[:, q] = s_ * vp + c * v[:, q]
        if not rotated:
            break

    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros((n, d))
    cutoff = max(n, d) * np.finfo(np.float64).eps * (sigma[0] if d else 0.0)
    rank = 0
    for j in range(d):
        if sigma[j] > cutoff:
            u[:, j] = a[:, j] / sigma[j]
            rank = j + 1
        else:
            sigma[j] = 0.0
    # Complete the null columns of U to an orthonormal set (rank-deficient
    # input): Gram-Schmidt of standard basis vectors against earlier columns.
    j = rank
    cand = 0
    while j < d:
        w = np.zeros(n)
        w[cand] = 1.0
        cand += 1
        w -= u[:, :j] @ (u[:, :j].T @ w)
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            u[:, j] = w / norm
            j += 1

    for j in range(d):
        k = int(np.argmax(np.abs(u[:, j])))
        if u[k, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, sigma, v
