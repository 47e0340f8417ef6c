"""Toy network-training tasks wired into the block DC interface.

One block per layer; the blockwise-convex loss split comes from the split
forward recursion.  Scalar oracles report dataset means (the per-sample sums
divided by the evaluated set size), and minibatch handles replay exactly:
a handle is just a recorded index tuple, drawn i.i.d. with replacement.
"""

from dataclasses import dataclass, field

import numpy as np

from ..model import BdcProblem, SampleHandle
from .. import relu

__all__ = [
    "sine_regression",
    "gaussian_blobs",
    "MlpTask",
    "MlpTaskProblem",
    "mlp_task_problem",
]


def sine_regression(n, seed=0, noise=0.05):
    """1-D regression on an offset sine wave; labels are naturally >= 0."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(n, 1))
    y = 1.5 + np.sin(np.pi * x[:, 0]) + noise * rng.standard_normal(n)
    return x, y


def gaussian_blobs(n, n_classes=3, seed=0, radius=2.0, spread=0.5):
    """Gaussian clusters with centers on a circle; returns (x, labels)."""
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    labels = rng.integers(0, n_classes, size=n)
    x = centers[labels] + spread * rng.standard_normal((n, 2))
    return x, labels


@dataclass
class MlpTask:
    """Dataset plus network plus loss kind.

    For regression, labels are shifted by ``label_shift = max(0, -min y)`` so
    the squared-error split applies; report predictions minus the shift.
    """

    inputs: np.ndarray
    labels: np.ndarray
    net: relu.MlpParams
    loss: str = "mse"
    label_shift: float = field(default=0.0)

    def __post_init__(self):
        if self.loss not in ("mse", "ce"):
            raise ValueError("loss must be 'mse' or 'ce'")
        if self.loss == "mse":
            shift = max(0.0, -float(np.min(self.labels)))
            if shift > 0:
                self.labels = np.asarray(self.labels, dtype=float) + shift
                self.label_shift = shift


class MlpTaskProblem(BdcProblem):
    def __init__(self, task):
        self.task = task
        self.template = task.net
        self.partition = task.net.partition()
        self.n_data = len(task.labels)

    def initial_point(self):
        return self.template.to_vector()

    def params(self, theta):
        return self.template.with_vector(theta)

    def _subset(self, sample):
        if sample is None:
            return self.task.inputs, self.task.labels, self.n_data
        idx = list(sample.indices)
        return self.task.inputs[idx], self.task.labels[idx], len(idx)

    def sample(self, rng, batch_size=None):
        # key drawn from the caller's generator: replayable, no shared state
        batch_size = batch_size or 1
        idx = rng.integers(0, self.n_data, size=batch_size)  # i.i.d. draws
        return SampleHandle(key=int(rng.integers(2 ** 31)), indices=idx)

    # -- oracles -------------------------------------------------------------
    def _loss_parts(self, theta, sample):
        X, y, count = self._subset(sample)
        params = self.params(theta)
        if self.task.loss == "mse":
            g, h = relu.mse_bdc(params, X, y)
        else:
            g, h = relu.ce_bdc(params, X, y)
        return g / count, h / count

    def eval_f(self, theta):
        g, h = self._loss_parts(theta, None)
        return g - h

    def eval_g(self, i, theta, sample=None):
        return self._loss_parts(theta, sample)[0]

    def eval_h(self, i, theta, sample=None):
        return self._loss_parts(theta, sample)[1]

    def _block_flat(self, pair):
        return np.concatenate([pair[0].ravel(), pair[1]])

    def grad_g_block(self, i, theta, sample=None):
        X, y, count = self._subset(sample)
        grads = relu.block_grad_g(self.params(theta), X, y, self.task.loss, i)
        return self._block_flat(grads) / count

    def subgrad_h_block(self, i, theta, sample=None):
        X, y, count = self._subset(sample)
        grads = relu.block_grad_h(self.params(theta), X, y, self.task.loss, i)
        return self._block_flat(grads) / count

    # -- inner solver ----------------------------------------------------------
    def minimize_block_surrogate(self, i, theta, u, rho, budget, tol, sample=None):
        """Descent on the block surrogate, robust to the split's convex kinks.

        The surrogate is convex but only piecewise smooth: entrywise relu
        terms put kinks on coordinate hyperplanes, where the fixed
        subgradient selection may not be a descent direction.  The loop takes
        line-searched subgradient steps; when jammed it probes coordinates
        sitting exactly on a kink and finally hops non-monotonically across
        the kink with a shrinking step.  The best visited point is returned,
        so the surrogate never increases.
        """
        theta = np.asarray(theta, dtype=float)
        sl = self.partition.slice_of(i)
        x0 = theta[sl].copy()
        trial = theta.copy()

        def value(x):
            trial[sl] = x
            val = self.eval_g(i, trial, sample=sample) - float(np.dot(u, x))
            if rho:
                val += 0.5 * rho * float(np.sum((x - x0) ** 2))
            return val

        def gradient(x):
            trial[sl] = x
            grad = self.grad_g_block(i, trial, sample=sample) - u
            if rho:
                grad = grad + rho * (x - x0)
            return grad

        x = x0.copy()
        val = value(x)
        best_x, best_val = x.copy(), val
        tol_eff = tol * (1.0 + abs(val))
        step = 1.0 / (1.0 + rho)
        escape = step
        evals = 0
        def probe_kinks(x, val):
            # coordinates sitting exactly on a kink have selected slope 0 but
            # may still admit one-sided descent
            for j in np.flatnonzero(x == 0.0):
                for direction in (1.0, -1.0):
                    probe = step
                    for _ in range(8):
                        cand = x.copy()
                        cand[j] = direction * probe
                        cand_val = value(cand)
                        if cand_val <= val - 1e-12 * (1 + abs(val)):
                            return cand, cand_val
                        probe *= 0.25
            return None

        while evals < budget:
            grad = gradient(x)
            evals += 1
            gnorm = float(np.linalg.norm(grad))
            moved = False
            if gnorm > tol_eff:
                s = step
                for _ in range(20):
                    cand = x - s * grad
                    cand_val = value(cand)
                    if cand_val <= val - 1e-12 * (1 + abs(val)):
                        x, val, step = cand, cand_val, s * 1.5
                        moved = True
                        break
                    s *= 0.5
            if not moved:
                hit = probe_kinks(x, val)
                if hit is not None:
                    x, val = hit
                    moved = True
            if not moved:
                if gnorm <= tol_eff:
                    break  # approximately stationary, kinks probed
                # cross the kink: shrinking non-monotone hop along -grad
                if escape * gnorm <= 1e-14 * (1.0 + float(np.linalg.norm(x))):
                    break
                x = x - escape * grad
                val = value(x)
                escape *= 0.5
            if val < best_val:
                best_x, best_val = x.copy(), val
        return best_x, max(evals, 1)


def mlp_task_problem(task):
    return MlpTaskProblem(task)
