"""POD/DEIM approximation of the nonaffine boundary term ``b(mu)``.

The interpolant is ``b~(mu) = U (P^T U)^{-1} P^T b(mu)``. A few extra POD
vectors beyond the truncation rank give a cheap estimate of the
interpolation error, ``e = Pi2 (I - Pi) b``, from additional sampled
entries only.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DEIMDegeneracyError

__all__ = [
    "build_snapshots_b",
    "truncation_rank",
    "pod_truncate",
    "deim_indices",
    "DeimModel",
    "build_deim",
    "deim_apply",
    "deim_error_estimate",
    "NOISE_PLATEAU",
]

NOISE_PLATEAU = 1e-14
EXTRA_VECTORS = 2


def build_snapshots_b(op, train):
    """Snapshot matrix with columns ``b(mu_i)`` over the training samples."""
    mus = np.atleast_1d(np.asarray(train, dtype=float))
    if mus.size == 0:
        raise ValueError("empty training set")
    return np.column_stack([op.b(mu) for mu in mus])


def truncation_rank(sigma, eps_svd):
    """Smallest ``r`` whose discarded singular-value mass is below ``eps_svd``.

    Singular values under ``NOISE_PLATEAU * sigma[0]`` are dropped before
    the sums are formed.
    """
    if not 0 < eps_svd < 1:
        raise ValueError("eps_svd must lie in (0, 1)")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0 or sigma[0] <= 0:
        raise DEIMDegeneracyError("snapshot matrix is zero")
    kept = sigma[sigma >= NOISE_PLATEAU * sigma[0]]
    total = kept.sum()
    # tail[r] = sum of kept[r:]
    tail = np.concatenate([np.cumsum(kept[::-1])[::-1], [0.0]])
    for r in range(1, kept.size + 1):
        if tail[r] / total < eps_svd:
            return r, kept.size
    return kept.size, kept.size


def pod_truncate(F, eps_svd):
    """Thin SVD of ``F`` and the truncation rank.

    Returns
    -------
    U : (n, k) array
        Left singular vectors above the noise plateau (``k >= r``; the
        columns past ``r`` feed the error estimator).
    sigma : (l,) array
        All singular values, descending.
    r : int
    """
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if not np.any(F):
        raise DEIMDegeneracyError("snapshot matrix is zero")
    # economy QR first: O(n l^2) and as accurate as a direct SVD
    Q, R = la.qr(F, mode="economic")
    Ur, sigma, _ = la.svd(R)
    U = Q @ Ur
    r, k = truncation_rank(sigma, eps_svd)
    return U[:, :k], sigma, r


def deim_indices(U):
    """Greedy DEIM interpolation indices for the columns of ``U``.

    Returns the index array and the LU factorization of ``P^T U``. Ties in
    the argmax go to the lowest index.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    m = U.shape[1]
    idx = [int(np.argmax(np.abs(U[:, 0])))]
    for i in range(1, m):
        PtU = U[idx, :i]
        _check_nonsingular(PtU)
        alpha = la.solve(PtU, U[idx, i])
        res = U[:, i] - U[:, :i] @ alpha
        idx.append(int(np.argmax(np.abs(res))))
    idx = np.array(idx, dtype=np.int64)
    PtU = U[idx, :]
    _check_nonsingular(PtU)
    return idx, la.lu_factor(PtU)


def _check_nonsingular(M, rtol=1e-13):
    s = np.linalg.svd(M, compute_uv=False)
    if len(set(M.shape)) != 1 or s[-1] <= rtol * s[0]:
        raise DEIMDegeneracyError("P^T U is singular")


@dataclass
class DeimModel:
    """Interpolation basis, indices and the error-estimator extension.

    Attributes
    ----------
    U : (n, r) array
    indices : (r,) int array
    lu : LU factorization of ``U[indices]``
    U_ext : (n, r* - r) array
        Extra POD vectors; ``ext_indices`` are their DEIM points.
    W_ext : (n, r* - r) array
        ``(I - Pi) U_ext``, precomputed.
    singular_values : (l,) array
    """

    U: np.ndarray
    indices: np.ndarray
    lu: tuple
    U_ext: np.ndarray
    ext_indices: np.ndarray
    W_ext: np.ndarray
    ext_lu: tuple
    PtU_ext: np.ndarray  # U[ext_indices], needed to form P~^T (I - Pi) b
    singular_values: np.ndarray

    @property
    def r(self):
        return self.U.shape[1]

    @property
    def r_star(self):
        return self.r + self.U_ext.shape[1]

    @property
    def all_indices(self):
        return np.concatenate([self.indices, self.ext_indices])

    def coefficients(self, b_sampled):
        return deim_apply(self, b_sampled)

    def approximate(self, b_sampled):
        return self.U @ deim_apply(self, b_sampled)

    def error_vector(self, b_sampled_ext, c):
        return deim_error_estimate(self, b_sampled_ext, c)


def build_deim(F, eps_svd=1e-10, extra=EXTRA_VECTORS):
    """POD truncation plus DEIM point selection on snapshot matrix ``F``.

    ``r* = min(r + extra, k)`` vectors are run through the greedy point
    selection; the first ``r`` points belong to the interpolant and the rest
    to the error estimator (the selection is nested, so they agree with a
    run on ``r`` vectors alone).
    """
    U_all, sigma, r = pod_truncate(F, eps_svd)
    r_star = min(r + extra, U_all.shape[1])
    idx_all, _ = deim_indices(U_all[:, :r_star])
    U = U_all[:, :r]
    idx = idx_all[:r]
    lu = la.lu_factor(U[idx])
    U_ext = U_all[:, r:r_star]
    ext_idx = idx_all[r:r_star]
    if U_ext.shape[1]:
        # (I - Pi) U_ext = U_ext - U (P^T U)^{-1} P^T U_ext
        W_ext = U_ext - U @ la.lu_solve(lu, U_ext[idx])
        M = W_ext[ext_idx]
        _check_nonsingular(M, rtol=1e-15)
        ext_lu = la.lu_factor(M)
    else:
        W_ext = np.zeros((U.shape[0], 0))
        ext_lu = None
    return DeimModel(
        U=U,
        indices=idx,
        lu=lu,
        U_ext=U_ext,
        ext_indices=ext_idx,
        W_ext=W_ext,
        ext_lu=ext_lu,
        PtU_ext=U[ext_idx],
        singular_values=sigma,
    )


def deim_apply(model, b_sampled):
    """Coefficients ``c = (P^T U)^{-1} P^T b`` from the sampled entries."""
    return la.lu_solve(model.lu, np.asarray(b_sampled, dtype=float))


def deim_error_estimate(model, b_sampled_ext, c):
    """``Pi2 (I - Pi) b`` using only ``b`` at the extension points.

    ``P~^T (I - Pi) b = P~^T b - P~^T U c``, so nothing beyond the extra
    ``r* - r`` entries of ``b`` is needed.
    """
    if model.ext_lu is None:
        return np.zeros(model.U.shape[0])
    rhs = np.asarray(b_sampled_ext, dtype=float) - model.PtU_ext @ c
    gamma = la.lu_solve(model.ext_lu, rhs)
    return model.W_ext @ gamma
