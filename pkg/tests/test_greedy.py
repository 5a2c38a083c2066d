import warnings

import numpy as np
import pytest

from pbrom.deim import build_deim, build_snapshots_b
from pbrom.discretization import build_operator
from pbrom.errors import ConditioningError, DegenerateSnapshotError
from pbrom.greedy import (
    ReducedBasis,
    ResidualEstimator,
    TrainingSet,
    _reduced_solve,
    estimate_error,
    greedy_build,
    orthonormalize_append,
    project,
    rigorous_bound,
    rom_solve,
)
from pbrom.grid import GridSpec
from pbrom.solver import solve_spd

TOL = 1e-10


@pytest.fixture(scope="module")
def setup(globule):
    op = build_operator(globule, GridSpec.around(globule, 17, box_length=60.0))
    train = TrainingSet.uniform()
    deim = build_deim(build_snapshots_b(op, train.samples), 1e-10)
    basis, rm, hist = greedy_build(op, train, 1e-3, 20, deim, verify=True)
    return op, train, deim, basis, rm, hist


def fom(op, mu):
    return solve_spd(op.matrix(mu), op.rhs(mu), tol=TOL)[0]


def test_training_set_checks():
    ts = TrainingSet.uniform()
    assert len(ts) == 11 and ts.samples[0] == 0.05 and ts.samples[-1] == 0.15
    with pytest.raises(ValueError):
        TrainingSet([0.1, 0.1], (0.05, 0.15))
    with pytest.raises(ValueError):
        TrainingSet([0.2], (0.05, 0.15))
    with pytest.raises(ValueError):
        TrainingSet([], (0.05, 0.15))


def test_append_unit_vector():
    e1 = np.zeros(5)
    e1[0] = 1.0
    basis, ok = orthonormalize_append(ReducedBasis.empty(5), e1, 0.1)
    assert ok and basis.N == 1
    np.testing.assert_array_equal(basis.V[:, 0], e1)
    assert basis.selected_mus == [0.1]


def test_append_in_span_rejected():
    rng = np.random.default_rng(0)
    basis = ReducedBasis.empty(20)
    for _ in range(3):
        basis, _ = orthonormalize_append(basis, rng.standard_normal(20))
    again, ok = orthonormalize_append(basis, basis.V @ [1.0, -2.0, 0.5])
    assert not ok and again.N == 3


def test_append_zero_vector():
    with pytest.raises(DegenerateSnapshotError):
        orthonormalize_append(ReducedBasis.empty(4), np.zeros(4))


def test_random_basis_orthonormal():
    rng = np.random.default_rng(1)
    basis = ReducedBasis.empty(100)
    for _ in range(4):
        basis, _ = orthonormalize_append(basis, rng.standard_normal(100))
    assert np.abs(basis.V.T @ basis.V - np.eye(4)).max() <= 1e-13


def test_nearly_dependent_vectors_stay_orthonormal():
    rng = np.random.default_rng(2)
    base = rng.standard_normal(200)
    basis = ReducedBasis.empty(200)
    for k in range(6):
        basis, ok = orthonormalize_append(basis, base + 1e-7 * rng.standard_normal(200))
        assert ok
    assert np.abs(basis.V.T @ basis.V - np.eye(6)).max() <= 1e-12


def test_single_column_projection(setup):
    op, _, deim, _, _, _ = setup
    v = np.random.default_rng(3).standard_normal(op.size)
    basis, _ = orthonormalize_append(ReducedBasis.empty(op.size), v)
    rm = project(op, basis, deim)
    w = basis.V[:, 0]
    assert rm.A1_hat.shape == (1, 1)
    assert rm.A1_hat[0, 0] == pytest.approx(w @ (op.A1 @ w), rel=1e-13)
    assert rm.A1_hat[0, 0] > 0
    u = rom_solve(rm, 0.1, rm.sampler(0.1))
    rhs = rm.rho_hat + rm.deim_block @ rm.sampler(0.1)
    assert u[0] == pytest.approx(rhs[0] / (rm.A1_hat[0, 0] + 0.1 * rm.A2_hat[0, 0]), rel=1e-14)


def test_projection_matches_dense_triple_products(small_molecule, small_grid):
    op = build_operator(small_molecule, small_grid)
    train = TrainingSet.uniform()
    deim = build_deim(build_snapshots_b(op, train.samples), 1e-10)
    basis, rm, _ = greedy_build(op, train, 1e-6, 10, deim)
    V = basis.V
    A1, A2 = op.A1.toarray(), op.A2.toarray()
    np.testing.assert_allclose(rm.A1_hat, V.T @ A1 @ V, rtol=0, atol=1e-12 * np.abs(A1).max())
    np.testing.assert_allclose(rm.A2_hat, V.T @ A2 @ V, rtol=0, atol=1e-12 * max(np.abs(A2).max(), 1))
    np.testing.assert_allclose(rm.rho_hat, V.T @ op.rho_vec, rtol=0, atol=1e-12 * np.abs(op.rho_vec).max())
    block = V.T @ deim.U @ np.linalg.inv(deim.U[deim.indices])
    np.testing.assert_allclose(rm.deim_block, block, rtol=0, atol=1e-12 * np.abs(block).max())


def test_reduced_matrices_symmetric_and_spd(setup):
    _, train, _, _, rm, _ = setup
    assert np.array_equal(rm.A1_hat, rm.A1_hat.T)
    assert np.array_equal(rm.A2_hat, rm.A2_hat.T)
    for mu in train.samples:
        assert np.linalg.eigvalsh(rm.A1_hat + mu * rm.A2_hat)[0] > 0


def test_greedy_history(setup):
    _, train, _, basis, rm, hist = setup
    assert 1 <= basis.N <= 10 and len(hist) == basis.N == rm.N
    assert hist[0].mu_star == train.samples[0]
    assert hist[-1].delta_max < 1e-3
    assert hist[0].delta_max / hist[-1].delta_max >= 100
    assert basis.selected_mus == [h.mu_star for h in hist]
    assert np.abs(basis.V.T @ basis.V - np.eye(basis.N)).max() <= 1e-12
    for h in hist:
        assert h.true_error_max is not None and h.true_error_max <= h.delta_max


def test_argmax_drives_next_sample(setup):
    _, _, _, _, _, hist = setup
    for prev, nxt in zip(hist, hist[1:]):
        assert nxt.mu_star == prev.argmax_mu


def test_single_training_sample(setup):
    op, _, _, _, _, _ = setup
    train = TrainingSet([0.1], (0.05, 0.15))
    deim = build_deim(build_snapshots_b(op, train.samples), 1e-10)
    basis, rm, hist = greedy_build(op, train, 1e-3, 5, deim)
    assert basis.N == 1
    assert hist[-1].delta_max <= 2 * TOL * np.linalg.norm(op.rhs(0.1))


def test_loose_tolerance_gives_one_vector(setup):
    op, train, deim, _, _, _ = setup
    basis, _, hist = greedy_build(op, train, 1e12, 10, deim)
    assert basis.N == 1 and len(hist) == 1


def test_max_n_caps_basis(setup):
    op, train, deim, _, _, _ = setup
    basis, _, hist = greedy_build(op, train, 1e-30, 3, deim)
    assert basis.N == 3


def test_greedy_argument_checks(setup):
    op, train, deim, _, _, _ = setup
    with pytest.raises(ValueError):
        greedy_build(op, train, 1e-3, 5, None)
    with pytest.raises(ValueError):
        greedy_build(op, train, 0.0, 5, deim)


def test_galerkin_orthogonality(setup):
    op, _, deim, basis, rm, _ = setup
    est = ResidualEstimator(op, basis, deim)
    for mu in np.linspace(0.05, 0.15, 7):
        u_N = rom_solve(rm, mu)
        r_deim, _ = est.residuals(u_N, mu, est.sample(mu))
        assert np.linalg.norm(basis.V.T @ r_deim) <= 1e-10 * np.linalg.norm(op.rhs(mu))


def test_estimator_dominates_true_error(setup):
    op, _, deim, basis, rm, _ = setup
    for mu in np.random.default_rng(4).uniform(0.05, 0.15, 10):
        u_N = rom_solve(rm, mu)
        est = estimate_error(op, rm, basis, u_N, mu, deim)
        assert est.delta >= 0
        assert np.linalg.norm(fom(op, mu) - basis.V @ u_N) <= est.delta


def test_estimator_zero_residual_limit(setup):
    op, _, deim, basis, rm, _ = setup
    est = ResidualEstimator(op, basis, deim)
    mu = basis.selected_mus[0]
    _, e = est.exact(rm, mu)
    assert e.delta <= 2 * TOL * np.linalg.norm(op.rhs(mu))


def test_rigorous_bound(small_molecule, small_grid):
    op = build_operator(small_molecule, small_grid)
    train = TrainingSet.uniform()
    deim = build_deim(build_snapshots_b(op, train.samples), 1e-10)
    basis, rm, _ = greedy_build(op, train, 1e-3, 2, deim)
    est = ResidualEstimator(op, basis, deim)
    for mu in (0.06, 0.12):
        u_N = rom_solve(rm, mu)
        e = est(u_N, mu)
        bound = rigorous_bound(op, mu, e.delta)
        assert bound >= np.linalg.norm(fom(op, mu) - basis.V @ u_N)


def test_rom_solve_warns_outside_domain(setup):
    _, _, _, _, rm, _ = setup
    with pytest.warns(UserWarning, match="outside"):
        u = rom_solve(rm, 0.3)
    assert np.all(np.isfinite(u))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rom_solve(rm, 0.1)


def test_singular_reduced_matrix():
    with pytest.raises(ConditioningError):
        _reduced_solve(np.zeros((1, 1)), np.zeros((1, 1)), np.ones(1), 0.1)
    with pytest.raises(ConditioningError):
        _reduced_solve(-np.eye(2), np.zeros((2, 2)), np.ones(2), 0.1)


def test_reproduction_at_snapshots(setup):
    op, _, deim, basis, rm, _ = setup
    for mu in basis.selected_mus:
        u = fom(op, mu)
        u_N = rom_solve(rm, mu)
        b = op.b(mu)
        deim_err = np.linalg.norm(b - deim.approximate(b[deim.indices])) / np.linalg.norm(b)
        assert np.linalg.norm(u - basis.V @ u_N) <= 10 * (TOL + deim_err) * np.linalg.norm(u)


def test_lift(setup):
    _, _, _, basis, rm, _ = setup
    u_N = rom_solve(rm, 0.1)
    np.testing.assert_array_equal(rm.lift(u_N), basis.V @ u_N)
