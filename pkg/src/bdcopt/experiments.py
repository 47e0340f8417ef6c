"""Reproducible desk-scale experiment drivers.

Every driver is deterministic given its master seed: data generation,
initialization, block choices and minibatches each draw from a named
substream, so component-level replay is possible.  Drivers return plain
arrays/rows; CSV emission lives with the command-line harness.
"""

from dataclasses import dataclass

import numpy as np

from . import relu
from .model import residual_upper
from .problems.mlp import MlpTask, MlpTaskProblem, gaussian_blobs, sine_regression
from .problems.sdl import SdlInstance, SdlProblem, gd_baseline_sdl, sdl_synthetic
from .problems.cp import CpInstance, CpProblem, cp_reconstruct
from .solvers import SolverConfig, bdca_step, run, smoothness_estimate, sqrt_k_preset, substream

__all__ = [
    "SdlExperimentResult",
    "run_sdl_experiment",
    "sdl_band_columns",
    "run_sdl_gd_comparison",
    "ReluRunResult",
    "run_relu_experiment",
    "run_tensor_experiment",
]

# ---------------------------------------------------------------------------
# sparse dictionary learning
# ---------------------------------------------------------------------------

@dataclass
class SdlExperimentResult:
    n_outer: int
    true_sparsity: float
    rec: dict      # variant -> (n_seeds, n_outer + 1)
    sparsity: dict # variant -> (n_seeds, n_outer + 1)


def _sdl_single_run(variant, data_rng, init_rng, m, l, n, k_nonzero, alpha, q,
                    n_outer, inner_x, inner_d, inner_tol):
    Y, _, _ = sdl_synthetic(m, l, n, k_nonzero, seed=data_rng)
    D0 = init_rng.standard_normal((m, l))
    D0 /= np.linalg.norm(D0, axis=0)
    inst = SdlInstance(Y=Y, D=D0, X=np.zeros((l, n)), alpha=alpha, Q=q, variant=variant)
    prob = SdlProblem(inst)
    theta = prob.initial_point()

    def metrics(th):
        D, X = prob.unpack(th)
        rec = float(np.linalg.norm(Y - D @ X) / np.linalg.norm(Y))
        return rec, float(np.mean(X == 0.0))

    recs, spars = [], []
    r, s = metrics(theta)
    recs.append(r); spars.append(s)
    oracle_calls = 0
    for _ in range(n_outer):
        # codes first, then the dictionary, matching the alternating protocol
        theta, info = bdca_step(prob, theta, 1, budget=inner_x, tol=inner_tol)
        oracle_calls += info["inner_iters"]
        theta, info = bdca_step(prob, theta, 0, budget=inner_d, tol=inner_tol)
        oracle_calls += info["inner_iters"]
        r, s = metrics(theta)
        recs.append(r); spars.append(s)
    return np.array(recs), np.array(spars), prob, theta, oracle_calls, inst


def run_sdl_experiment(m=10, l=32, n=100, k_nonzero=5, alpha=0.1, q=5,
                       n_outer=700, n_seeds=10, seed=0,
                       inner_x=10, inner_d=5, inner_tol=1e-8,
                       variants=("l1", "l1_lq")):
    """Alternating block-DC runs of both code penalties over a seed sweep.

    Reconstruction error is ``||Y - D X||_F / ||Y||_F``; sparsity counts exact
    zeros in the code matrix (the soft-threshold step produces exact zeros).
    """
    rec = {v: [] for v in variants}
    spars = {v: [] for v in variants}
    for v in variants:
        for j in range(n_seeds):
            r, s, *_ = _sdl_single_run(
                v, substream(seed, "data%d" % j), substream(seed, "init%d" % j),
                m, l, n, k_nonzero, alpha, q, n_outer, inner_x, inner_d, inner_tol)
            rec[v].append(r)
            spars[v].append(s)
    return SdlExperimentResult(
        n_outer=n_outer,
        true_sparsity=1.0 - k_nonzero / l,
        rec={v: np.array(a) for v, a in rec.items()},
        sparsity={v: np.array(a) for v, a in spars.items()})


def sdl_band_columns(arr):
    """Seed-sweep summary: mean, min/max band, and mean +/- 2 sd band."""
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0)
    return {
        "mean": mean,
        "lower_minmax": arr.min(axis=0),
        "upper_minmax": arr.max(axis=0),
        "lower_2sd": mean - 2.0 * sd,
        "upper_2sd": mean + 2.0 * sd,
    }


def run_sdl_gd_comparison(m=10, l=32, n=100, k_nonzero=5, alpha=0.1, q=5,
                          n_outer=300, n_seeds=3, seed=0,
                          inner_x=10, inner_d=5, inner_tol=1e-8):
    """Block-DC against joint adaptive-step gradient descent on the nonconvex
    code penalty, at equal first-order oracle budgets.

    One oracle call is one block-gradient evaluation: block-DC spends its
    inner iterations, the baseline spends one call per joint step.  Returns
    per-seed final objectives and the call budget.
    """
    rows = []
    for j in range(n_seeds):
        _, _, prob, theta, calls, inst = _sdl_single_run(
            "l1_lq", substream(seed, "data%d" % j), substream(seed, "init%d" % j),
            m, l, n, k_nonzero, alpha, q, n_outer, inner_x, inner_d, inner_tol)
        gd_vals = gd_baseline_sdl(inst, calls)
        rows.append({"seed": j, "oracle_calls": calls,
                     "bdca_final": float(prob.eval_f(theta)),
                     "gd_final": float(gd_vals[-1])})
    return rows


# ---------------------------------------------------------------------------
# toy network training
# ---------------------------------------------------------------------------

@dataclass
class ReluRunResult:
    trace: object
    loss_rows: list      # (k, loss, residual_upper)
    scatter_rows: list   # (logG, logLhat, t, block)
    problem: MlpTaskProblem
    rho: float
    batch_size: int


def _build_task(task, layer_dims, n_data, n_classes, rng_data, rng_init):
    if task == "blobs":
        x, y = gaussian_blobs(n_data, n_classes, seed=rng_data)
        dims = (2,) + tuple(layer_dims) + (n_classes,)
        loss = "ce"
    elif task == "sine":
        x, y = sine_regression(n_data, seed=rng_data)
        dims = (1,) + tuple(layer_dims) + (1,)
        loss = "mse"
    else:
        raise ValueError("task must be 'blobs' or 'sine'")
    net = relu.random_params(dims, rng_init)
    return MlpTask(inputs=x, labels=y, net=net, loss=loss)


def run_relu_experiment(task="blobs", layer_dims=(16, 8), n_data=200, n_classes=3,
                        epochs=5, batch_size=16, rho=1.0, theory_preset=False,
                        rho_coeff=0.5, batch_coeff=0.5, inner_budget=25,
                        inner_tol=1e-8, stride=10, delta=0.25, seed=0):
    """Stochastic proximal block-DC training of a toy network.

    Records the loss curve and, every ``stride`` iterations, the local
    smoothness estimate of the convex side along the realized update of the
    selected block (log gradient norm vs log estimate scatter).
    With ``theory_preset`` the proximal weight and minibatch size scale with
    sqrt(total iterations).
    """
    mlp_task = _build_task(task, layer_dims, n_data, n_classes,
                           substream(seed, "data"), substream(seed, "init"))
    problem = MlpTaskProblem(mlp_task)
    n_iters = epochs * max(1, int(np.ceil(n_data / max(1, batch_size))))
    if theory_preset and n_iters > 0:
        rho, batch_size = sqrt_k_preset(n_iters, rho_coeff, batch_coeff)

    scatter = []
    state = {"prev": problem.initial_point()}

    def callback(k, theta_next, record):
        prev = state["prev"]
        if stride > 0 and k % stride == 0:
            i = record.block
            lhat = smoothness_estimate(problem, prev, theta_next, i, delta=delta)
            gnorm = float(np.linalg.norm(problem.grad_g_block(i, prev)))
            if lhat > 0 and gnorm > 0:
                scatter.append((float(np.log(gnorm)), float(np.log(lhat)), k, i))
        state["prev"] = np.array(theta_next)

    cfg = SolverConfig(n_iters=n_iters, rho=rho, inner_budget=inner_budget,
                       inner_tol=inner_tol, seed=seed, batch_size=batch_size)
    trace = run(problem, cfg, callback=callback)
    loss_rows = [(r.k, r.f, r.residual_upper) for r in trace.records]
    if trace.final_f is not None and trace.records:
        loss_rows.append((len(trace.records), trace.final_f,
                          residual_upper(problem, trace.final_theta)))
    return ReluRunResult(trace=trace, loss_rows=loss_rows, scatter_rows=scatter,
                         problem=problem, rho=rho, batch_size=batch_size)


# ---------------------------------------------------------------------------
# tensor factorization
# ---------------------------------------------------------------------------

def run_tensor_experiment(dims=(4, 5, 6), rank=2, sweeps=200, seed=0, noise=0.0,
                          stop_rel_error=0.0):
    """Alternating exact block minimization on a planted low-rank tensor.

    Returns per-sweep rows ``(sweep, objective, rel_error)``, the per-block
    objective values (for monotonicity audits), and the problem.
    """
    if len(dims) < 2 or len(dims) > 4 or any(d < 1 for d in dims):
        raise ValueError("dims must be 2 to 4 positive mode sizes")
    rng_data = substream(seed, "data")
    true = [rng_data.standard_normal((m, rank)) for m in dims]
    T = cp_reconstruct(true)
    if noise:
        T = T + noise * rng_data.standard_normal(T.shape)
    rng_init = substream(seed, "init")
    factors = [rng_init.standard_normal((m, rank)) for m in dims]
    prob = CpProblem(CpInstance(tensor=T, rank=rank, factors=factors))

    theta = prob.initial_point()
    rows = [(0, prob.eval_f(theta), prob.relative_error(theta))]
    per_update = [prob.eval_f(theta)]
    for sweep in range(1, sweeps + 1):
        for i in range(len(dims)):
            theta, _ = bdca_step(prob, theta, i)
            per_update.append(prob.eval_f(theta))
        rel = prob.relative_error(theta)
        rows.append((sweep, per_update[-1], rel))
        if stop_rel_error and rel <= stop_rel_error:
            break
    return rows, per_update, prob, theta
