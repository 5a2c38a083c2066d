"""Greedy reduced basis, Galerkin projection, reduced solves and residual estimates."""

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .deim import deim_apply, deim_error_estimate
from .errors import ConditioningError, DEIMDegeneracyError, DegenerateSnapshotError
from .solver import solve_spd

__all__ = [
    "TrainingSet",
    "ReducedBasis",
    "ReducedModel",
    "ErrorEstimate",
    "GreedyStep",
    "orthonormalize_append",
    "project",
    "rom_solve",
    "ResidualEstimator",
    "estimate_error",
    "rigorous_bound",
    "greedy_build",
]

log = logging.getLogger(__name__)

DEFLATION_TOL = 1e-10


@dataclass(frozen=True)
class TrainingSet:
    samples: np.ndarray
    domain: tuple

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.samples, dtype=float))
        if s.size == 0:
            raise ValueError("training set is empty")
        if np.unique(s).size != s.size:
            raise ValueError("training samples must be distinct")
        lo, hi = self.domain
        if np.any(s < lo) or np.any(s > hi):
            raise ValueError("training samples outside the parameter domain")
        object.__setattr__(self, "samples", s)

    @classmethod
    def uniform(cls, lo=0.05, hi=0.15, count=11):
        return cls(np.linspace(lo, hi, count), (lo, hi))

    def __len__(self):
        return self.samples.size

    def __iter__(self):
        return iter(self.samples)


@dataclass
class ReducedBasis:
    V: np.ndarray
    selected_mus: list = field(default_factory=list)

    @property
    def N(self):
        return self.V.shape[1]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)), [])


def orthonormalize_append(basis, snapshot, mu=None):
    """Append ``snapshot`` by modified Gram-Schmidt with one re-orthogonalization.

    Returns ``(basis, accepted)``. A vector whose remainder after projection
    is below ``1e-10 * ||snapshot||`` is rejected and the basis returned
    unchanged.
    """
    v = np.array(snapshot, dtype=float)
    norm0 = np.linalg.norm(v)
    if norm0 == 0.0:
        raise DegenerateSnapshotError("zero snapshot")
    V = basis.V
    for _ in range(2):
        for j in range(V.shape[1]):
            v -= (V[:, j] @ v) * V[:, j]
    nv = np.linalg.norm(v)
    if nv < DEFLATION_TOL * norm0:
        return basis, False
    V_new = np.column_stack([V, v / nv])
    return ReducedBasis(V_new, list(basis.selected_mus) + [mu]), True


@dataclass
class ReducedModel:
    """Parameter-independent reduced quantities.

    ``sampler`` evaluates ``b`` at the DEIM points only; ``ext_sampler``
    does the same for the estimator's extra points.
    """

    A1_hat: np.ndarray
    A2_hat: np.ndarray
    rho_hat: np.ndarray
    deim_block: np.ndarray
    deim_indices: np.ndarray
    sampler: object
    ext_indices: np.ndarray = None
    ext_sampler: object = None
    selected_mus: list = field(default_factory=list)
    domain: tuple = (0.05, 0.15)
    V: np.ndarray = None

    @property
    def N(self):
        return self.A1_hat.shape[0]

    def lift(self, u_N):
        if self.V is None:
            raise ValueError("reduced model carries no basis to lift with")
        return self.V @ u_N


def project(op, basis, deim):
    """Galerkin projection of the affine operator and the DEIM interpolant."""
    V = basis.V
    if V.shape[0] != op.size:
        raise ValueError("basis and operator dimensions differ")
    A1V = op.A1 @ V
    A2V = op.A2 @ V
    A1_hat = V.T @ A1V
    A2_hat = V.T @ A2V
    # symmetrize away round-off so the reduced matrices stay exactly symmetric
    A1_hat = 0.5 * (A1_hat + A1_hat.T)
    A2_hat = 0.5 * (A2_hat + A2_hat.T)
    PtU = deim.U[deim.indices]
    s = np.linalg.svd(PtU, compute_uv=False)
    if s[-1] <= 1e-14 * s[0]:
        raise DEIMDegeneracyError("P^T U is singular")
    # V^T U (P^T U)^{-1} = ((P^T U)^{-T} U^T V)^T
    deim_block = la.lu_solve(deim.lu, (deim.U.T @ V), trans=1).T
    return ReducedModel(
        A1_hat=A1_hat,
        A2_hat=A2_hat,
        rho_hat=V.T @ op.rho_vec,
        deim_block=deim_block,
        deim_indices=np.asarray(deim.indices),
        sampler=op.sampler(deim.indices),
        ext_indices=np.asarray(deim.ext_indices),
        ext_sampler=op.sampler(deim.ext_indices) if len(deim.ext_indices) else None,
        selected_mus=list(basis.selected_mus),
        V=V,
    )


def _reduced_solve(A1_hat, A2_hat, rhs, mu):
    M = A1_hat + mu * A2_hat
    if M.shape == (1, 1):
        if M[0, 0] == 0.0:
            raise ConditioningError("reduced matrix is singular")
        return rhs / M[0, 0]
    try:
        c = la.cho_factor(M)
    except la.LinAlgError:
        raise ConditioningError(f"reduced matrix at mu={mu} is not positive definite") from None
    return la.cho_solve(c, rhs)


def rom_solve(rm, mu, b_sampled=None):
    """Solve the DEIM-reduced system at ``mu``; returns the N coefficients."""
    lo, hi = rm.domain
    if not lo <= mu <= hi:
        warnings.warn(f"mu={mu} outside the training domain [{lo}, {hi}]", stacklevel=2)
    if b_sampled is None:
        b_sampled = rm.sampler(mu)
    rhs = rm.rho_hat + rm.deim_block @ b_sampled
    return _reduced_solve(rm.A1_hat, rm.A2_hat, rhs, mu)


@dataclass
class ErrorEstimate:
    delta: float
    delta_rig: float = None
    residual_deim_norm: float = None
    deim_error_norm: float = None


class ResidualEstimator:
    """Residual norm of lifted reduced solutions, ``||r_N^DEIM + e_DEIM||``.

    ``A1 V`` and ``A2 V`` are formed once, so each query costs one
    ``O(N * n)`` combination plus ``r*`` sampled boundary entries.
    """

    def __init__(self, op, basis, deim):
        self.op = op
        self.deim = deim
        self.V = basis.V
        self.A1V = op.A1 @ basis.V
        self.A2V = op.A2 @ basis.V
        self.rho = op.rho_vec
        self.sampler = op.sampler(deim.all_indices)

    def sample(self, mu):
        return self.sampler(mu)

    def residuals(self, u_N, mu, b_all):
        r = self.deim.r
        c = deim_apply(self.deim, b_all[:r])
        e = deim_error_estimate(self.deim, b_all[r:], c)
        r_deim = self.rho + self.deim.U @ c - (self.A1V @ u_N + mu * (self.A2V @ u_N))
        return r_deim, e

    def __call__(self, u_N, mu, b_all=None):
        if b_all is None:
            b_all = self.sample(mu)
        r_deim, e = self.residuals(u_N, mu, b_all)
        return ErrorEstimate(
            delta=float(np.linalg.norm(r_deim + e)),
            residual_deim_norm=float(np.linalg.norm(r_deim)),
            deim_error_norm=float(np.linalg.norm(e)),
        )

    def exact(self, rm, mu):
        """Estimator without DEIM: full ``b(mu)`` in the reduced solve and residual."""
        b = self.op.b(mu)
        u_N = _reduced_solve(rm.A1_hat, rm.A2_hat, rm.rho_hat + self.V.T @ b, mu)
        res = self.rho + b - (self.A1V @ u_N + mu * (self.A2V @ u_N))
        return u_N, ErrorEstimate(delta=float(np.linalg.norm(res)))


def estimate_error(op, rm, basis, u_N, mu, deim):
    return ResidualEstimator(op, basis, deim)(u_N, mu)


def rigorous_bound(op, mu, delta):
    """``delta / sigma_min(A(mu))`` by a dense eigensolve; small grids only."""
    A = op.matrix(mu).toarray()
    lam_min = la.eigvalsh(A, subset_by_index=[0, 0])[0]
    return delta / lam_min


@dataclass
class GreedyStep:
    N: int
    mu_star: float
    delta_max: float
    argmax_mu: float
    true_error_max: float = None
    wall_time: float = 0.0


def greedy_build(
    op,
    train,
    eps_tol=1e-3,
    max_N=20,
    deim=None,
    solver_tol=1e-10,
    solver_kwargs=None,
    verify=False,
):
    """Greedy basis construction driven by the residual estimator.

    Parameters
    ----------
    op : ParametricOperator
    train : TrainingSet or sequence of float
    eps_tol : float
        Stop once ``max over the training set of Delta_N < eps_tol``.
    max_N : int
    deim : DeimModel
    verify : bool
        Also solve the full model on every training sample and record the
        maximal true error per iteration. Test use only.

    Returns
    -------
    basis : ReducedBasis
    rom : ReducedModel
    history : list of GreedyStep
    """
    if deim is None:
        raise ValueError("greedy_build needs a DeimModel")
    if not eps_tol > 0:
        raise ValueError("eps_tol must be positive")
    if not isinstance(train, TrainingSet):
        train = np.asarray(train, dtype=float)
        train = TrainingSet(train, (train.min(), train.max()))
    mus = train.samples
    solver_kwargs = dict(solver_kwargs or {})

    def fom(mu):
        A, f = op.matrix(mu), op.rhs(mu)
        u, _ = solve_spd(A, f, tol=solver_tol, **solver_kwargs)
        return u

    truth = {}
    if verify:
        truth = {float(mu): fom(mu) for mu in mus}

    t0 = time.perf_counter()
    basis = ReducedBasis.empty(op.size)
    mu_star = float(mus[0])
    history = []
    # sampled boundary entries do not depend on the basis: evaluate once
    sampler = op.sampler(deim.all_indices)
    samples = [sampler(mu) for mu in mus]
    r = deim.r
    while True:
        snap = truth[mu_star] if verify else fom(mu_star)
        basis, accepted = orthonormalize_append(basis, snap, mu_star)
        if not accepted:
            raise DegenerateSnapshotError(
                f"snapshot at mu={mu_star} lies in the current basis span"
            )
        rm = project(op, basis, deim)
        rm.domain = train.domain
        est = ResidualEstimator(op, basis, deim)
        deltas = np.empty(mus.size)
        errs = np.empty(mus.size) if verify else None
        for i, mu in enumerate(mus):
            u_N = _reduced_solve(rm.A1_hat, rm.A2_hat, rm.rho_hat + rm.deim_block @ samples[i][:r], mu)
            deltas[i] = est(u_N, mu, samples[i]).delta
            if verify:
                errs[i] = np.linalg.norm(truth[float(mu)] - basis.V @ u_N)
        k = int(np.argmax(deltas))
        step = GreedyStep(
            N=basis.N,
            mu_star=mu_star,
            delta_max=float(deltas[k]),
            argmax_mu=float(mus[k]),
            true_error_max=float(errs.max()) if verify else None,
            wall_time=time.perf_counter() - t0,
        )
        history.append(step)
        log.info("greedy N=%d mu*=%.4g max delta=%.3e", step.N, mu_star, step.delta_max)
        if deltas[k] < eps_tol or basis.N >= max_N:
            break
        mu_star = float(mus[k])
    return basis, rm, history
