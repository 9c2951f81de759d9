import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktvgl.tvgl import (AdmmState, NotPositiveDefiniteError, PenaltySpec, TvglConfig,
                        is_positive_definite, prox_logdet, prox_offdiag_l1, prox_temporal_pair,
                        soft_threshold, solve_tvgl, tvgl_objective)


def random_spd(rng, d, shift=0.5):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + shift * np.eye(d)


def glasso_kkt_violation(S, theta, lam):
    """Largest violation of the graphical-lasso optimality conditions."""
    W = np.linalg.inv(theta)
    G = S - W
    off = ~np.eye(len(S), dtype=bool)
    viol = np.abs(np.diag(G)).max()
    nz = off & (np.abs(theta) > 1e-8)
    z = off & ~nz
    if nz.any():
        viol = max(viol, np.abs(G[nz] + lam * np.sign(theta[nz])).max())
    if z.any():
        viol = max(viol, (np.abs(G[z]) - lam).max())
    return viol


def test_prox_logdet_scalar():
    # 1x1, S=0, A=3, eta=1: x - 1/x = 3  ->  x = (3 + sqrt(13)) / 2
    x = prox_logdet(np.zeros((1, 1)), np.full((1, 1), 3.0), 1.0)
    assert x[0, 0] == pytest.approx((3 + np.sqrt(13)) / 2, abs=1e-12)
    assert x[0, 0] == pytest.approx(3.30278, abs=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 20.0), st.integers(0, 10 ** 6))
def test_prox_logdet_stationarity(d, eta, seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, d, 0.0)
    A = rng.standard_normal((d, d)) * 3
    A = A + A.T
    X = prox_logdet(S, A, eta)
    resid = eta * X - np.linalg.inv(X) - (eta * A - S)
    assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.linalg.norm(eta * A - S))
    assert is_positive_definite(X)


def test_prox_logdet_large_negative_eigenvalue_stays_accurate():
    # w = -1e8: naive (w + sqrt(w^2 + 4 eta)) / (2 eta) cancels to 0
    X = prox_logdet(np.zeros((1, 1)), np.full((1, 1), -1e8), 1.0)
    assert X[0, 0] == pytest.approx(1e-8, rel=1e-9)


def test_prox_logdet_batched_eta():
    rng = np.random.default_rng(1)
    S = np.stack([random_spd(rng, 3) for _ in range(4)])
    A = np.stack([random_spd(rng, 3) for _ in range(4)])
    eta = np.array([1.0, 2.0, 2.0, 3.0])
    X = prox_logdet(S, A, eta)
    for t in range(4):
        np.testing.assert_allclose(X[t], prox_logdet(S[t], A[t], eta[t]), atol=1e-12)


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), 1.0),
                                  [-2.0, -0.0, 0.0, 0.0, 2.0])


def test_prox_offdiag_keeps_diagonal():
    A = np.array([[5.0, 0.3], [-2.0, -4.0]])
    out = prox_offdiag_l1(A, 1.0)
    np.testing.assert_array_equal(out, [[5.0, 0.0], [-1.0, -4.0]])


def _brute_pair(a1, a2, kind, rho, eta):
    """Grid search over the difference ``d = z2 - z1`` with the mean fixed at the optimum."""
    s = a1 + a2
    grid = np.arange(-12.0, 12.0, 1e-4)
    z1 = (s - grid) / 2
    z2 = (s + grid) / 2
    pen = grid ** 2 if kind == "laplacian" else np.abs(grid)
    f = rho * pen + eta / 2 * ((z1 - a1) ** 2 + (z2 - a2) ** 2)
    k = np.argmin(f)
    return z1[k], z2[k]


@pytest.mark.parametrize("kind", ["laplacian", "l1"])
@settings(max_examples=40, deadline=None)
@given(a1=st.floats(-3, 3), a2=st.floats(-3, 3), rho=st.floats(0, 3), eta=st.floats(0.2, 5))
def test_prox_temporal_pair_matches_brute_force(kind, a1, a2, rho, eta):
    z1, z2 = prox_temporal_pair(np.array([a1]), np.array([a2]), PenaltySpec(kind, rho), eta)
    b1, b2 = _brute_pair(a1, a2, kind, rho, eta)
    assert abs(z1[0] - b1) <= 1e-3 and abs(z2[0] - b2) <= 1e-3


def test_prox_temporal_pair_zero_rho_is_identity():
    rng = np.random.default_rng(2)
    A1, A2 = rng.standard_normal((2, 3, 3))
    for kind in ("laplacian", "l1"):
        z1, z2 = prox_temporal_pair(A1, A2, PenaltySpec(kind, 0.0), 1.0)
        np.testing.assert_allclose(z1, A1, atol=1e-14)
        np.testing.assert_allclose(z2, A2, atol=1e-14)


def test_l1_pair_fuses_small_differences():
    z1, z2 = prox_temporal_pair(np.array([1.0]), np.array([1.5]), PenaltySpec("l1", 1.0), 1.0)
    assert z1[0] == z2[0] == pytest.approx(1.25)


def test_penalty_validation():
    with pytest.raises(ValueError):
        PenaltySpec("group", 1.0)
    with pytest.raises(ValueError):
        PenaltySpec("l1", -1.0)
    with pytest.raises(ValueError):
        TvglConfig(lam=-0.1)


def test_objective_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        tvgl_objective(np.eye(2)[None], -np.eye(2)[None], 0.1, PenaltySpec())


@pytest.mark.parametrize("seed", range(5))
def test_single_step_is_graphical_lasso(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 5))
    S = (X.T @ X / 40)[None]
    lam = 0.1
    res = solve_tvgl(S, TvglConfig(lam=lam, eps_abs=1e-8, eps_rel=1e-8, max_admm_iters=20000))
    assert res.converged
    assert glasso_kkt_violation(S[0], res.precision[0], lam) <= 1e-3


def test_zero_lambda_single_step_inverts_covariance():
    rng = np.random.default_rng(7)
    S = random_spd(rng, 4)[None]
    res = solve_tvgl(S, TvglConfig(lam=0.0, eps_abs=1e-9, eps_rel=1e-9, max_admm_iters=20000))
    np.testing.assert_allclose(res.precision[0], np.linalg.inv(S[0]), atol=1e-5)


def test_large_rho_couples_path():
    rng = np.random.default_rng(8)
    S = np.stack([random_spd(rng, 3) for _ in range(6)])
    res = solve_tvgl(S, TvglConfig(lam=0.05, penalty=PenaltySpec("laplacian", 1e4),
                                   adaptive_step=True))
    spread = np.abs(np.diff(res.precision, axis=0)).max()
    assert spread < 1e-2


def test_large_lambda_removes_all_edges():
    rng = np.random.default_rng(10)
    S = np.stack([random_spd(rng, 4) for _ in range(5)])
    off = ~np.eye(4, dtype=bool)
    lam = np.abs(S[:, off]).max()
    res = solve_tvgl(S, TvglConfig(lam=lam, penalty=PenaltySpec("l1", 0.5)))
    assert np.abs(res.precision[:, off]).max() < 1e-4


def test_objective_not_worse_than_init():
    rng = np.random.default_rng(9)
    S = np.stack([random_spd(rng, 4) for _ in range(10)])
    cfg = TvglConfig(lam=0.1, penalty=PenaltySpec("l1", 1.0), max_admm_iters=3)
    res = solve_tvgl(S, cfg)
    assert res.objective <= res.initial_objective


def test_warm_start_from_own_state_converges_immediately():
    rng = np.random.default_rng(10)
    S = np.stack([random_spd(rng, 4) for _ in range(8)])
    cfg = TvglConfig(lam=0.1, penalty=PenaltySpec("laplacian", 1.0))
    cold = solve_tvgl(S, cfg)
    warm = solve_tvgl(S, cfg, warm_start=cold.state)
    assert cold.converged and warm.converged
    assert warm.iterations <= 3 < cold.iterations
    np.testing.assert_allclose(warm.precision, cold.precision, atol=1e-3)


def test_adaptive_step_reaches_same_solution():
    rng = np.random.default_rng(11)
    S = np.stack([random_spd(rng, 4) for _ in range(8)])
    tight = dict(eps_abs=1e-8, eps_rel=1e-8, max_admm_iters=20000)
    a = solve_tvgl(S, TvglConfig(lam=0.1, penalty=PenaltySpec("laplacian", 1.0), **tight))
    b = solve_tvgl(S, TvglConfig(lam=0.1, penalty=PenaltySpec("laplacian", 1.0),
                                 adaptive_step=True, **tight))
    assert b.objective == pytest.approx(a.objective, rel=1e-6)


def test_lost_definiteness_falls_back_to_start(monkeypatch):
    import ktvgl.tvgl as tvgl
    rng = np.random.default_rng(12)
    S = np.stack([random_spd(rng, 3) for _ in range(4)])
    start = np.stack([2.0 * np.eye(3)] * 4)
    calls = iter([False, False])
    monkeypatch.setattr(tvgl, "is_positive_definite", lambda th: next(calls, True))
    res = solve_tvgl(S, TvglConfig(lam=0.1, max_admm_iters=20), warm_start=start)
    assert res.returned == "init"
    np.testing.assert_array_equal(res.precision, start)


def test_solve_is_deterministic():
    rng = np.random.default_rng(12)
    S = np.stack([random_spd(rng, 3) for _ in range(5)])
    cfg = TvglConfig(lam=0.1, penalty=PenaltySpec("l1", 0.5))
    np.testing.assert_array_equal(solve_tvgl(S, cfg).precision, solve_tvgl(S, cfg).precision)


def test_bad_covariance_inputs():
    with pytest.raises(ValueError):
        solve_tvgl(np.zeros((3, 2, 3)))
    with pytest.raises(ValueError):
        solve_tvgl(np.array([[[1.0, 2.0], [0.0, 1.0]]]))
    with pytest.raises(ValueError):
        solve_tvgl(np.eye(2)[None], warm_start=np.tile(np.eye(2), (2, 1, 1)))


def test_state_shift_keeps_tail_and_pads():
    path = np.stack([np.eye(2) * (t + 1) for t in range(4)])
    st_ = AdmmState.from_path(path)
    moved = st_.shifted(1, 4)
    assert moved.T == 4
    np.testing.assert_array_equal(moved.precision[:3], path[1:])
    np.testing.assert_array_equal(moved.precision[3], path[3])
    assert moved.z1.shape == (3, 2, 2) and np.all(moved.u1 == 0)
    with pytest.raises(ValueError):
        st_.shifted(4, 4)
