import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdcopt.blocks import BlockPartition
from bdcopt.model import BallProductDomain, BdcProblem
from bdcopt.problems import (QuadraticDcProblem, QuadraticMinusL1Problem,
                             SdlInstance, SdlProblem, sdl_synthetic)
from bdcopt.solvers import (InnerSolverDivergence, SolverConfig,
                            audit_step_bound, bdca_step, compute_E, gap_L,
                            inner_frank_wolfe_ball_product,
                            inner_prox_gradient, plan_rho, prox_bdca_step,
                            rho_from, run, smoothness_estimate,
                            stoch_prox_bdca_step, substream)
from bdcopt.problems.mlp import MlpTask, MlpTaskProblem, gaussian_blobs
from bdcopt.model import SampleHandle
from bdcopt import relu


def identity_quadratic(part, c):
    """g = 0.5 ||theta - c||^2, h = 0."""
    d = part.total_dim
    return QuadraticDcProblem(part, np.eye(d), np.asarray(c, dtype=float))


class TestBdcaStep:
    def test_quadratic_block_reaches_center_in_one_step(self):
        part = BlockPartition([2, 3])
        c = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
        prob = identity_quadratic(part, c)
        theta = np.zeros(5)
        theta, info = bdca_step(prob, theta, 0)
        assert info["inner_iters"] == 1
        np.testing.assert_allclose(theta[:2], c[:2], atol=1e-12)
        theta, _ = bdca_step(prob, theta, 1)
        np.testing.assert_allclose(theta, c, atol=1e-12)

    def test_scalar_soft_threshold(self):
        # min 0.5 (x - 1)^2 + |x| has the closed form soft(1, 1) = 0
        def value_grad(x):
            return 0.5 * float((x[0] - 1.0) ** 2), np.array([x[0] - 1.0])

        def prox(x, t):
            return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)

        x, _, _ = inner_prox_gradient(value_grad, prox, np.array([0.7]), 200, 1e-12)
        assert x[0] == pytest.approx(0.0, abs=1e-12)

    def test_divergent_inner_solver_aborts(self):
        class Broken(QuadraticDcProblem):
            def minimize_block_surrogate(self, i, theta, u, rho, budget, tol, sample=None):
                sl = self.partition.slice_of(i)
                return np.asarray(theta)[sl] + 10.0, 1

        part = BlockPartition([2])
        prob = Broken(part, np.eye(2), np.zeros(2))
        with pytest.raises(InnerSolverDivergence):
            bdca_step(prob, np.ones(2), 0)


class TestProxStep:
    def test_scalar_balance(self):
        # min 0.5 x^2 + 0.5 (x - 1)^2 = 0.5 at x = 1/2
        part = BlockPartition([1])
        prob = identity_quadratic(part, [0.0])
        theta, _ = prox_bdca_step(prob, np.array([1.0]), 0, rho=1.0)
        assert theta[0] == pytest.approx(0.5, abs=1e-12)

    def test_huge_rho_freezes_iterate(self):
        part = BlockPartition([3])
        prob = identity_quadratic(part, [1.0, 2.0, 3.0])
        theta0 = np.array([5.0, -5.0, 0.0])
        theta, _ = prox_bdca_step(prob, theta0, 0, rho=1e12)
        assert np.linalg.norm(theta - theta0) <= 1e-9

    def test_rho_must_be_positive(self):
        part = BlockPartition([1])
        prob = identity_quadratic(part, [0.0])
        with pytest.raises(ValueError):
            prox_bdca_step(prob, np.zeros(1), 0, rho=0.0)

    def test_step_bound_on_sdl_prox_run(self):
        Y, D, X = sdl_synthetic(6, 8, 10, 3, seed=1)
        inst = SdlInstance(Y=Y, D=D, X=np.zeros_like(X), alpha=0.15, Q=3,
                           variant="l1_lq")
        prob = SdlProblem(inst)
        rho = 0.8
        trace = run(prob, SolverConfig(n_iters=40, rho=rho, seed=2,
                                       inner_budget=30))
        assert audit_step_bound(trace, rho) >= 0.0


class TestStochasticStep:
    def build(self):
        xs, ys = gaussian_blobs(24, 3, seed=3)
        net = relu.random_params((2, 5, 3), np.random.default_rng(4))
        return MlpTaskProblem(MlpTask(inputs=xs, labels=ys, net=net, loss="ce"))

    def test_full_batch_handle_matches_deterministic_step(self):
        prob = self.build()
        theta = prob.initial_point()
        full = SampleHandle(key=0, indices=range(prob.n_data))
        det, _ = prox_bdca_step(prob, theta, 1, rho=2.0, budget=20, tol=1e-10)
        sto, _ = stoch_prox_bdca_step(prob, theta, 1, rho=2.0, handle=full,
                                      budget=20, tol=1e-10)
        np.testing.assert_allclose(sto, det, atol=1e-12)

    def test_requires_stochastic_oracle(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [0.0, 0.0])
        cfg = SolverConfig(n_iters=2, rho=1.0, batch_size=4, seed=0)
        with pytest.raises(NotImplementedError):
            run(prob, cfg)

    def test_stochastic_replay_on_shared_problem_object(self):
        prob = self.build()
        cfg = SolverConfig(n_iters=10, rho=1.5, seed=9, batch_size=8,
                           inner_budget=8)
        t1 = run(prob, cfg)
        t2 = run(prob, cfg)  # same object: no hidden state may leak between runs
        for a, b in zip(t1.records, t2.records):
            assert a.sample_key == b.sample_key
            assert a.f == b.f and a.step_norm == b.step_norm


class TestRun:
    def test_zero_iterations_gives_empty_trace(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [1.0, 1.0])
        trace = run(prob, SolverConfig(n_iters=0, seed=0))
        assert len(trace) == 0
        assert trace.final_f == pytest.approx(prob.eval_f(prob.initial_point()))

    def test_single_iteration_single_record(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [1.0, 1.0])
        trace = run(prob, SolverConfig(n_iters=1, seed=0))
        assert len(trace) == 1

    def test_fixed_seed_replay_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(5)
        part = BlockPartition([2, 2, 2])
        prob = QuadraticMinusL1Problem(part, rng.standard_normal((9, 6)),
                                       rng.standard_normal(9), 0.15)
        cfg = SolverConfig(n_iters=25, rho=0.7, seed=11)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run(prob, cfg).write_csv(p1, timing=False)
        run(prob, cfg).write_csv(p2, timing=False)
        assert p1.read_bytes() == p2.read_bytes()

    def test_monotone_descent_deterministic(self):
        rng = np.random.default_rng(6)
        part = BlockPartition([3, 3])
        prob = QuadraticMinusL1Problem(part, rng.standard_normal((10, 6)),
                                       rng.standard_normal(10), 0.2)
        cfg = SolverConfig(n_iters=60, seed=1, inner_tol=1e-10)
        trace = run(prob, cfg)
        fs = np.append(trace.column("f"), trace.final_f)
        assert np.all(np.diff(fs) <= 2 * cfg.inner_tol + 1e-12)

    def test_cyclic_rule_visits_blocks_in_order(self):
        part = BlockPartition([1, 1, 1])
        prob = identity_quadratic(part, [1.0, 2.0, 3.0])
        trace = run(prob, SolverConfig(n_iters=6, seed=0, block_rule="cyclic"))
        assert [r.block for r in trace.records] == [0, 1, 2, 0, 1, 2]

    def test_trace_csv_columns(self, tmp_path):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [1.0, 1.0])
        trace = run(prob, SolverConfig(n_iters=3, seed=0))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == ("k,block,f,g_block,h_block,residual_upper,"
                          "step_norm,inner_iters,wall_ms")


class TestInnerProxGradient:
    def test_least_squares_matches_normal_equations(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((12, 5))
        b = rng.standard_normal(12)

        def value_grad(x):
            r = A @ x - b
            return 0.5 * float(r @ r), A.T @ r

        x, _, _ = inner_prox_gradient(value_grad, None, np.zeros(5), 3000, 1e-12)
        want = np.linalg.solve(A.T @ A, A.T @ b)
        np.testing.assert_allclose(x, want, atol=1e-8)

    def test_projection_onto_unit_ball(self):
        z = np.array([3.0, 4.0])

        def value_grad(x):
            d = x - z
            return 0.5 * float(d @ d), d

        def project(x, t):
            n = np.linalg.norm(x)
            return x / max(1.0, n)

        x, _, _ = inner_prox_gradient(value_grad, project, np.zeros(2), 500, 1e-12)
        np.testing.assert_allclose(x, z / 5.0, atol=1e-10)


class TestFrankWolfe:
    def test_identity_codes_recover_targets(self):
        # separable projection; the boundary optimum makes the rate sublinear,
        # so assert convergence rather than machine precision
        rng = np.random.default_rng(8)
        Y = rng.standard_normal((4, 6))
        Y /= np.linalg.norm(Y, axis=0)
        D0 = rng.standard_normal((4, 6))
        D0 /= np.linalg.norm(D0, axis=0) * 1.5
        err0 = np.linalg.norm(D0 - Y)
        D, _, gap, gap0 = inner_frank_wolfe_ball_product(Y, np.eye(6), D0, 400)
        assert np.linalg.norm(D - Y) <= min(1e-3, 1e-2 * err0)
        assert gap <= gap0

    def test_matches_projected_gradient_long_run(self):
        rng = np.random.default_rng(9)
        m, l, n = 4, 5, 7
        Y = 0.15 * rng.standard_normal((m, n))  # interior optimum: linear rate
        X = rng.standard_normal((l, n))
        D0 = np.zeros((m, l))
        D_fw, *_ = inner_frank_wolfe_ball_product(Y, X, D0, 4000)

        # oracle: projected gradient descent on the same objective
        dom = BallProductDomain(m, l)
        L = np.linalg.norm(X @ X.T, 2)
        D = D0.copy()
        for _ in range(4000):
            G = (D @ X - Y) @ X.T
            D = dom.project((D - G / L).ravel()).reshape(m, l)
        f_fw = 0.5 * np.sum((Y - D_fw @ X) ** 2)
        f_pg = 0.5 * np.sum((Y - D @ X) ** 2)
        assert abs(f_fw - f_pg) <= 1e-6 * (1 + abs(f_pg))

    def test_zero_gradient_column_keeps_current(self):
        # code row of zeros makes one dictionary column irrelevant
        Y = np.zeros((2, 3))
        X = np.vstack([np.zeros((1, 3)), np.ones((1, 3))])
        D0 = np.array([[0.3, 0.0], [0.1, -0.5]])
        D, *_ = inner_frank_wolfe_ball_product(Y, X, D0, 50)
        np.testing.assert_allclose(D[:, 0], D0[:, 0])


class TestPlanner:
    def test_constant_growth_closed_form(self):
        G, L0 = 2.5, 3.0
        E = compute_E(lambda u: L0, G)
        assert E == pytest.approx(np.sqrt(2 * L0 * G), rel=1e-8)

    def test_affine_growth_closed_form(self):
        G, a, c = 1.7, 0.8, 0.6
        E = compute_E(lambda u: a + c * u, G)
        want = 2 * G * c + np.sqrt(4 * G * G * c * c + 2 * a * G)
        assert E == pytest.approx(want, rel=1e-8)

    def test_zero_lipschitz_h_gives_twice_smoothness(self):
        plan = plan_rho(lambda u: 4.0, 1.0, 0.0)
        assert plan.rho_min == pytest.approx(2 * plan.L_eff)

    def test_fixed_point_residual(self):
        plan = plan_rho(lambda u: 1.0 + 0.3 * u, 2.0, 0.5)
        assert abs(plan.E ** 2 - 2 * plan.ell(2 * plan.E) * plan.G) <= 1e-8 * (1 + plan.E ** 2)

    def test_quadratic_growth_rejected(self):
        with pytest.raises(ValueError, match="subquadratic"):
            compute_E(lambda u: 1.0 + u * u, 1.0)

    def test_rho_from_requires_positive_E(self):
        with pytest.raises(ValueError):
            rho_from(0.0, 1.0, 1.0)


class TestSmoothnessEstimate:
    def test_quadratic_is_gamma_independent(self):
        rng = np.random.default_rng(10)
        part = BlockPartition([3, 2])
        prob = QuadraticDcProblem.random(part, rng, concave=False)
        theta = rng.standard_normal(5)
        theta_next = theta.copy()
        d = rng.standard_normal(3)
        theta_next[:3] += d
        Q = prob.A[:, :3].T @ prob.A[:, :3]
        want = np.linalg.norm(Q @ d) / np.linalg.norm(d)
        got = smoothness_estimate(prob, theta, theta_next, 0, delta=0.25)
        assert got == pytest.approx(want, rel=1e-10)

    def test_quartic_scalar_example(self):
        class Quartic(BdcProblem):
            partition = BlockPartition([1])

            def eval_f(self, theta):
                return float(theta[0] ** 4)

            def eval_g(self, i, theta, sample=None):
                return float(theta[0] ** 4)

            def eval_h(self, i, theta, sample=None):
                return 0.0

            def grad_g_block(self, i, theta, sample=None):
                return np.array([4.0 * theta[0] ** 3])

            def subgrad_h_block(self, i, theta, sample=None):
                return np.zeros(1)

        prob = Quartic()
        got = smoothness_estimate(prob, np.array([1.0]), np.array([2.0]), 0, delta=0.25)
        assert got == pytest.approx(28.0, rel=1e-12)
        single = smoothness_estimate(prob, np.array([1.0]), np.array([2.0]), 0, delta=1.0)
        assert single == pytest.approx(abs(4 * 2.0 ** 3 - 4.0), rel=1e-12)

    def test_zero_update_gives_zero(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [0.0, 0.0])
        theta = np.ones(2)
        assert smoothness_estimate(prob, theta, theta, 0) == 0.0


class TestGapL:
    def test_unconstrained_closed_form(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [0.0, 0.0])
        val = gap_L(prob, np.zeros(2), np.array([3.0, 4.0]), 1.0)
        assert val == pytest.approx(12.5)

    def test_zero_residual_gives_zero(self):
        part = BlockPartition([2])
        prob = identity_quadratic(part, [0.0, 0.0])
        assert gap_L(prob, np.ones(2), np.zeros(2), 2.0) == 0.0

    def test_ball_constraint_shrinks_gap(self):
        class BallProblem(QuadraticDcProblem):
            def block_domain(self, i):
                return BallProductDomain(self.partition.total_dim, 1)

        part = BlockPartition([3])
        prob = BallProblem(part, np.eye(3), np.zeros(3))
        theta = np.array([1.0, 0.0, 0.0])
        z = 3.0 * theta  # outward normal, strong enough to hit the far side
        L = 1.0
        got = gap_L(prob, theta, z, L)
        # analytic 1-D maximization along the diameter: max_t 3t - t^2/2, t in [0, 2]
        want = 3.0 * 2.0 - 0.5 * L * 4.0
        assert got == pytest.approx(want)
        assert got < np.dot(z, z) / (2 * L)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=2, max_size=4),
       st.integers(0, 2 ** 16), st.floats(0.05, 1.0), st.floats(0.0, 3.0))
def test_descent_and_step_bound_hold_on_random_problems(dims, seed, mu, rho):
    rng = np.random.default_rng(seed)
    part = BlockPartition(dims)
    d = part.total_dim
    prob = QuadraticMinusL1Problem(part, rng.standard_normal((d + 3, d)),
                                   rng.standard_normal(d + 3), mu)
    cfg = SolverConfig(n_iters=15, rho=rho, seed=seed)
    trace = run(prob, cfg, theta0=rng.standard_normal(d))
    fs = np.append(trace.column("f"), trace.final_f)
    assert np.all(np.diff(fs) <= 1e-9 * (1 + np.abs(fs[:-1])))
    if rho > 0:
        assert audit_step_bound(trace, rho) >= 0.0


def test_substreams_are_independent_and_replayable():
    a1 = substream(7, "blocks").integers(0, 100, size=5)
    a2 = substream(7, "blocks").integers(0, 100, size=5)
    b = substream(7, "minibatches").integers(0, 100, size=5)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, b)
