"""Pure numpy implementations of the hot loops.

Same signatures as the compiled ``_kernels`` module; used when the extension
is not built or ``TREEFUSION_PURE_PYTHON=1`` is set.

Shared argument conventions
---------------------------
members, offsets : intp arrays
    Group ``g`` covers columns ``members[offsets[g]:offsets[g + 1]]``.
gweights : float64 array
    Per-group weight; the threshold applied to group ``g`` is
    ``scale * gweights[g]``.
X : float64 array, shape (sum n_s, N)
    Dictionaries of all modalities stacked vertically; modality ``s`` owns rows
    ``row_offsets[s]:row_offsets[s + 1]``.
"""

import numpy as np


def prox_tree_rows(V, members, offsets, gweights, scale):
    U = np.array(V, dtype=np.float64, order="C")
    for g in range(offsets.size - 1):
        idx = members[offsets[g]:offsets[g + 1]]
        tau = scale * gweights[g]
        sub = U[:, idx]
        norms = np.sqrt(np.einsum("ij,ij->i", sub, sub))
        over = norms > tau
        # residual minus the projection onto the radius-tau ball
        factor = np.zeros_like(norms)
        factor[over] = 1.0 - tau / norms[over]
        U[:, idx] = sub * factor[:, None]
    return U


def tree_penalty(A, members, offsets, gweights):
    total = 0.0
    for g in range(offsets.size - 1):
        sub = A[:, members[offsets[g]:offsets[g + 1]]]
        total += gweights[g] * np.sqrt(np.einsum("ij,ij->i", sub, sub)).sum()
    return float(total)


def _residuals(X, y, A, row_offsets):
    S = row_offsets.size - 1
    R = np.empty_like(y)
    for s in range(S):
        lo, hi = row_offsets[s], row_offsets[s + 1]
        R[lo:hi] = X[lo:hi] @ A[:, s] - y[lo:hi]
    return R


def _smooth(R, w, row_offsets):
    total = 0.0
    for s in range(w.size):
        r = R[row_offsets[s]:row_offsets[s + 1]]
        total += 0.5 * w[s] * float(r @ r)
    return total


def _gradient(X, R, w, row_offsets, N):
    G = np.empty((N, w.size))
    for s in range(w.size):
        lo, hi = row_offsets[s], row_offsets[s + 1]
        G[:, s] = w[s] * (X[lo:hi].T @ R[lo:hi])
    return G


def fista(X, y, row_offsets, w, members, offsets, gweights, lam, A0,
          step, backtrack, shrink, max_iter, tol, patience):
    """Accelerated proximal gradient with ``k / (k + 3)`` extrapolation.

    Returns ``(A, trace, n_iter, status)`` where status is 0 on convergence,
    1 when ``max_iter`` was reached and -1 on a non-finite objective.
    """
    N = A0.shape[0]
    A = np.array(A0, dtype=np.float64, order="C")
    A_prev = A.copy()
    R = _residuals(X, y, A, row_offsets)
    R_prev = R.copy()
    F_old = _smooth(R, w, row_offsets) + lam * tree_penalty(A, members, offsets, gweights)
    trace = np.empty(max_iter)
    t = step
    streak = 0
    status = 1
    k = 0
    while k < max_iter:
        rho = k / (k + 3.0)
        B = A + rho * (A - A_prev)
        RB = R + rho * (R - R_prev)
        fB = _smooth(RB, w, row_offsets)
        G = _gradient(X, RB, w, row_offsets, N)
        while True:
            A_new = prox_tree_rows(B - t * G, members, offsets, gweights, lam * t)
            R_new = _residuals(X, y, A_new, row_offsets)
            f_new = _smooth(R_new, w, row_offsets)
            if not backtrack:
                break
            D = A_new - B
            bound = fB + float(np.sum(G * D)) + float(np.sum(D * D)) / (2.0 * t)
            if f_new <= bound or not np.isfinite(f_new):
                break
            t *= shrink
        F_new = f_new + lam * tree_penalty(A_new, members, offsets, gweights)
        trace[k] = F_new
        k += 1
        if not np.isfinite(F_new):
            status = -1
            break
        A_prev, A = A, A_new
        R_prev, R = R, R_new
        if abs(F_new - F_old) < tol * max(abs(F_old), 1e-300):
            streak += 1
        else:
            streak = 0
        F_old = F_new
        if streak >= patience:
            status = 0
            break
    return A, trace[:k].copy(), k, status, t
