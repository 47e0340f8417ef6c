"""Block DC solvers and their supporting machinery.

Three outer loops share one skeleton: pick a block, take one deterministic
subgradient of the concave part, and minimize the resulting convex surrogate
over that block (optionally with a proximal term, optionally on a minibatch).
The module also houses the generic inner solvers the problems delegate to, the
rho/E planning utility, the local smoothness estimator, and the projected
stationarity gap.
"""

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .model import residual_blocks

__all__ = [
    "SolverConfig",
    "IterRecord",
    "IterTrace",
    "RhoPlan",
    "InnerSolverDivergence",
    "substream",
    "bdca_step",
    "prox_bdca_step",
    "stoch_prox_bdca_step",
    "run",
    "inner_prox_gradient",
    "inner_frank_wolfe_ball_product",
    "compute_E",
    "rho_from",
    "plan_rho",
    "sqrt_k_preset",
    "smoothness_estimate",
    "gap_L",
    "audit_step_bound",
]


class InnerSolverDivergence(RuntimeError):
    """Inner solver failed to descend on the block surrogate within budget."""


def substream(master_seed, name):
    """Named, replayable random substream derived from one master seed."""
    return np.random.default_rng([int(master_seed), zlib.crc32(name.encode())])


@dataclass
class SolverConfig:
    """Outer-loop configuration.

    ``rho`` is the proximal weight (0 disables the proximal term);
    ``batch_size`` switches on minibatch sampling through the problem's
    stochastic oracle.  Block selection is uniform with replacement by
    default; ``cyclic`` visits blocks round-robin.
    """

    n_iters: int
    rho: float = 0.0
    inner_budget: int = 100
    inner_tol: float = 1e-8
    seed: int = 0
    block_rule: str = "uniform"
    batch_size: int | None = None

    def __post_init__(self):
        if self.n_iters < 0:
            raise ValueError("n_iters must be >= 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.inner_budget < 1:
            raise ValueError("inner_budget must be >= 1")
        if self.block_rule not in ("uniform", "cyclic"):
            raise ValueError("block_rule must be 'uniform' or 'cyclic'")


@dataclass
class IterRecord:
    k: int
    block: int
    f: float
    g_block: float
    h_block: float
    residual_upper: float
    step_norm: float
    inner_iters: int
    wall_ms: float
    block_grad_gap: float
    noise_norm: float | None = None
    sample_key: int | None = None


@dataclass
class IterTrace:
    """Per-iteration record of one solver run plus the final state."""

    records: list = field(default_factory=list)
    final_theta: np.ndarray | None = None
    final_f: float | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path, timing=True):
        """Write the trace; ``timing=False`` drops the wall-clock column so
        reruns of the same configuration are byte-identical."""
        cols = ["k", "block", "f", "g_block", "h_block", "residual_upper",
                "step_norm", "inner_iters"]
        if timing:
            cols.append("wall_ms")
        lines = [",".join(cols)]
        for r in self.records:
            vals = [str(r.k), str(r.block), repr(r.f), repr(r.g_block),
                    repr(r.h_block), repr(r.residual_upper), repr(r.step_norm),
                    str(r.inner_iters)]
            if timing:
                vals.append(repr(r.wall_ms))
            lines.append(",".join(vals))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _surrogate_value(problem, i, theta, x, u, rho, x_anchor, sample=None):
    trial = np.array(theta, dtype=float, copy=True)
    trial[problem.partition.slice_of(i)] = x
    val = problem.eval_g(i, trial, sample=sample) - float(np.dot(u, x))
    if rho:
        val += 0.5 * rho * float(np.sum((x - x_anchor) ** 2))
    return val


def _block_step(problem, theta, i, rho, budget, tol, sample=None):
    theta = np.asarray(theta, dtype=float)
    sl = problem.partition.slice_of(i)
    x0 = theta[sl].copy()
    u = problem.subgrad_h_block(i, theta, sample=sample)
    x_new, inner = problem.minimize_block_surrogate(
        i, theta, u, rho, budget, tol, sample=sample)
    s_old = _surrogate_value(problem, i, theta, x0, u, rho, x0, sample=sample)
    s_new = _surrogate_value(problem, i, theta, x_new, u, rho, x0, sample=sample)
    if s_new > s_old + max(tol, 1e-12) * (1.0 + abs(s_old)):
        raise InnerSolverDivergence(
            "no surrogate descent on block %d (%.6g -> %.6g)" % (i, s_old, s_new))
    theta_new = theta.copy()
    theta_new[sl] = x_new
    return theta_new, u, inner


def bdca_step(problem, theta, i, budget=100, tol=1e-8):
    """One plain block-DC step: linearize h on block ``i`` and minimize the
    convex surrogate over that block.  Returns ``(theta_new, info)``."""
    theta_new, u, inner = _block_step(problem, theta, i, 0.0, budget, tol)
    return theta_new, {"u": u, "inner_iters": inner}


def prox_bdca_step(problem, theta, i, rho, budget=100, tol=1e-8):
    """Proximal block step; additionally guarantees
    ``||theta_new - theta|| <= (2/rho) ||grad g_i - u_i||``."""
    if rho <= 0:
        raise ValueError("prox step needs rho > 0")
    theta_new, u, inner = _block_step(problem, theta, i, rho, budget, tol)
    return theta_new, {"u": u, "inner_iters": inner}


def stoch_prox_bdca_step(problem, theta, i, rho, handle, budget=100, tol=1e-8):
    """Proximal block step on the stochastic surrogate defined by ``handle``."""
    if rho <= 0:
        raise ValueError("prox step needs rho > 0")
    theta_new, u, inner = _block_step(problem, theta, i, rho, budget, tol, sample=handle)
    return theta_new, {"u_hat": u, "inner_iters": inner, "sample_key": handle.key}


def run(problem, config, theta0=None, callback=None):
    """Run the configured solver and return the iteration trace.

    The run is deterministic given the config: block choices and minibatch
    draws flow from named substreams of ``config.seed``.  Each record holds
    the state *before* the step (f, per-block g/h, residual) plus the step
    itself (norm, inner iterations).  ``callback(k, theta_next, record)`` is
    invoked after every iteration.
    """
    theta = np.array(
        theta0 if theta0 is not None else problem.initial_point(), dtype=float)
    rng_blocks = substream(config.seed, "blocks")
    rng_batches = substream(config.seed, "minibatches")
    stochastic = config.batch_size is not None
    n = problem.n_blocks

    trace = IterTrace()
    for k in range(config.n_iters):
        if config.block_rule == "cyclic":
            i = k % n
        else:
            i = int(rng_blocks.integers(n))
        zs = residual_blocks(problem, theta)
        resid = float(np.linalg.norm(np.concatenate(zs)))
        block_gap = float(np.linalg.norm(zs[i]))
        f_val = float(problem.eval_f(theta))
        g_val = float(problem.eval_g(i, theta))
        h_val = float(problem.eval_h(i, theta))

        handle = None
        noise_norm = None
        if stochastic:
            handle = problem.sample(rng_batches, config.batch_size)
            z_hat = (problem.grad_g_block(i, theta, sample=handle)
                     - problem.subgrad_h_block(i, theta, sample=handle))
            noise_norm = float(np.linalg.norm(z_hat - zs[i]))

        t0 = time.perf_counter()
        theta_next, _, inner = _block_step(
            problem, theta, i, config.rho, config.inner_budget,
            config.inner_tol, sample=handle)
        wall_ms = (time.perf_counter() - t0) * 1e3

        trace.records.append(IterRecord(
            k=k, block=i, f=f_val, g_block=g_val, h_block=h_val,
            residual_upper=resid,
            step_norm=float(np.linalg.norm(theta_next - theta)),
            inner_iters=inner, wall_ms=wall_ms,
            block_grad_gap=block_gap, noise_norm=noise_norm,
            sample_key=None if handle is None else handle.key))
        theta = theta_next
        if callback is not None:
            callback(k, theta, trace.records[-1])

    trace.final_theta = theta
    trace.final_f = float(problem.eval_f(theta))
    return trace


def audit_step_bound(trace, rho, slack=1e-9):
    """Check ``step_norm <= (2/rho)(||grad g - u|| + ||noise||) + slack`` on
    every record; the noise term is zero for deterministic runs.  Returns the
    worst margin (nonnegative means the audit passed everywhere)."""
    worst = np.inf
    for r in trace.records:
        bound = (2.0 / rho) * (r.block_grad_gap + (r.noise_norm or 0.0)) + slack
        worst = min(worst, bound - r.step_norm)
    return worst


# ---------------------------------------------------------------------------
# inner solvers
# ---------------------------------------------------------------------------

def inner_prox_gradient(value_grad, prox, x0, budget, tol, lipschitz=None):
    """Monotone proximal-gradient descent with backtracking.

    Parameters
    ----------
    value_grad : callable
        ``x -> (value, gradient)`` of the smooth part.
    prox : callable or None
        ``(x, t) -> prox`` of the nonsmooth part with step ``t`` (a projection
        may ignore ``t``); ``None`` means the identity.
    x0 : array
    budget : int
        Maximum number of proximal-gradient iterations.
    tol : float
        Stop once the prox-gradient mapping norm falls below ``tol``.
    lipschitz : float, optional
        Initial curvature estimate; grown by backtracking as needed.

    Returns
    -------
    (x, iterations, mapping_norm)
    """
    if prox is None:
        prox = lambda x, t: x
    x = np.array(x0, dtype=float, copy=True)
    L = float(lipschitz) if lipschitz else 1.0
    val, grad = value_grad(x)
    iters = 0
    mapping_norm = np.inf
    for _ in range(budget):
        iters += 1
        while True:
            z = prox(x - grad / L, 1.0 / L)
            dz = z - x
            sq = float(np.sum(dz * dz))
            val_z, grad_z = value_grad(z)
            # slack only absorbs rounding noise of the value comparison;
            # L never shrinks within a call, so acceptance stays honest
            if val_z <= val + float(np.dot(grad.ravel(), dz.ravel())) + 0.5 * L * sq + 1e-15 * (1 + abs(val)):
                break
            L *= 2.0
            if L > 1e18:
                raise RuntimeError("backtracking underflow: step size vanished")
        mapping_norm = L * float(np.sqrt(sq))
        x, val, grad = z, val_z, grad_z
        if mapping_norm <= tol:
            break
    return x, iters, mapping_norm


def inner_frank_wolfe_ball_product(Y, X, D0, budget, rho=0.0, anchor=None, tol=0.0):
    """Frank-Wolfe over a product of unit column balls for the objective

        0.5 ||Y - D X||_F^2 + rho/2 ||D - anchor||_F^2 .

    The linear minimization oracle is columnwise ``-grad / ||grad||`` (a
    zero-gradient column keeps its current value) and the step size comes from
    exact minimization of the one-dimensional quadratic, clamped to [0, 1].

    Returns
    -------
    (D, iterations, final_gap, initial_gap)
    """
    D = np.array(D0, dtype=float, copy=True)
    if rho and anchor is None:
        anchor = D.copy()
    R = Y - D @ X
    first_gap = None
    gap = np.inf
    iters = 0
    for _ in range(budget):
        iters += 1
        G = -(R @ X.T)
        if rho:
            G = G + rho * (D - anchor)
        norms = np.linalg.norm(G, axis=0)
        S = D.copy()
        nz = norms > 0
        S[:, nz] = -G[:, nz] / norms[nz]
        Delta = S - D
        gap = float(np.sum(G * (D - S)))
        if first_gap is None:
            first_gap = gap
        curv = float(np.sum((Delta @ X) ** 2))
        if rho:
            curv += rho * float(np.sum(Delta * Delta))
        if curv <= 0 or gap <= tol:
            break
        step = min(max(gap / curv, 0.0), 1.0)
        if step == 0.0:
            break
        D = D + step * Delta
        R = R - step * (Delta @ X)
    return D, iters, gap, first_gap if first_gap is not None else 0.0


# ---------------------------------------------------------------------------
# rho / E planning
# ---------------------------------------------------------------------------

@dataclass
class RhoPlan:
    """Proximal-weight plan from a gap bound and a smoothness growth function.

    ``E`` solves ``u^2 = 2 ell(2u) G`` (gradient-norm bound along the run),
    ``L_eff = ell(2E)`` is the effective smoothness, and
    ``rho_min = L_eff * 2 (E + R) / E`` is the weight that keeps every update
    inside the validity ball.  These constants are conservative; they are a
    planning aid, not enforced at run time.
    """

    G: float
    R: float
    ell: object
    E: float
    L_eff: float
    rho_min: float


def compute_E(ell, G, rel_tol=1e-10, max_doublings=1024):
    """Largest ``u`` with ``u^2 <= 2 ell(2u) G`` via doubling plus bisection.

    ``ell`` must be continuous, nondecreasing and positive, and subquadratic
    (``ell(t)/t^2 -> 0``); the caller asserts this.
    """
    if G <= 0:
        raise ValueError("G must be positive")

    def excess(u):
        return u * u - 2.0 * float(ell(2.0 * u)) * G

    hi = 1.0
    count = 0
    # nan (overflow minus overflow) compares false, so keep doubling on it
    while not excess(hi) > 0:
        hi *= 2.0
        count += 1
        if count > max_doublings or not np.isfinite(hi):
            raise ValueError("ell not subquadratic on probed range")
    lo = hi / 2.0
    while excess(lo) > 0:
        lo /= 2.0
        if lo < 1e-300:
            raise ValueError("no positive solution: ell(0+) * G vanishes")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def rho_from(E, L_eff, R):
    """Minimal proximal weight ``L_eff * 2 (E + R) / E``."""
    if E <= 0:
        raise ValueError("E must be positive")
    return L_eff * 2.0 * (E + R) / E


def plan_rho(ell, G, R, rel_tol=1e-10):
    E = compute_E(ell, G, rel_tol=rel_tol)
    L_eff = float(ell(2.0 * E))
    plan = RhoPlan(G=float(G), R=float(R), ell=ell, E=E, L_eff=L_eff,
                   rho_min=rho_from(E, L_eff, R))
    # fixed-point sanity: E sits on the feasible side of the boundary
    assert plan.E ** 2 <= 2.0 * L_eff * G + 1e-9 * (1.0 + plan.E ** 2)
    assert plan.rho_min >= 2.0 * L_eff
    return plan


def sqrt_k_preset(n_iters, rho_coeff=0.5, batch_coeff=0.5):
    """sqrt(K)-scaled proximal weight and minibatch size for stochastic runs."""
    root = float(np.sqrt(n_iters))
    return rho_coeff * root, max(1, int(np.ceil(batch_coeff * root)))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def smoothness_estimate(problem, theta_k, theta_next, i, delta=0.25):
    """Secant estimate of the local smoothness of g_i along the last update.

    Probes ``gamma in {delta, 2 delta, ..., 1}`` along ``d = block update``
    and returns the largest gradient-variation ratio
    ``||grad g_i(theta + gamma d) - grad g_i(theta)|| / (gamma ||d||)``.
    Returns 0 when the block did not move.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    theta_k = np.asarray(theta_k, dtype=float)
    sl = problem.partition.slice_of(i)
    d = np.asarray(theta_next, dtype=float)[sl] - theta_k[sl]
    dnorm = float(np.linalg.norm(d))
    if dnorm == 0.0:
        return 0.0
    g0 = problem.grad_g_block(i, theta_k)
    best = 0.0
    n_steps = int(np.floor(1.0 / delta + 1e-12))
    for step in range(1, n_steps + 1):
        gamma = step * delta
        trial = theta_k.copy()
        trial[sl] = theta_k[sl] + gamma * d
        g1 = problem.grad_g_block(i, trial)
        best = max(best, float(np.linalg.norm(g1 - g0)) / (gamma * dnorm))
    return best


def gap_L(problem, theta, z, L):
    """Projected stationarity gap ``max_x <z, theta - x> - L/2 ||x - theta||^2``
    over the problem's (block-separable) domain.

    The maximizer is the blockwise projection of ``theta - z / L``; without
    constraints the gap equals ``||z||^2 / (2 L)``.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    x_star = theta - z / L
    for i in range(problem.n_blocks):
        dom = problem.block_domain(i)
        if dom is not None:
            sl = problem.partition.slice_of(i)
            try:
                x_star[sl] = dom.project(x_star[sl])
            except NotImplementedError as exc:
                raise ValueError("block %d domain has no projection oracle" % i) from exc
    diff = theta - x_star
    return float(np.dot(z, diff) - 0.5 * L * np.dot(diff, diff))
