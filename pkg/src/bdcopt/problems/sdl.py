"""Sparse dictionary learning as a two-block DC problem.

Data ``Y`` (m x n) is approximated by ``D X`` with dictionary columns in the
unit 2-ball and either a plain ``l1`` code penalty or the tighter nonconvex
surrogate ``l1 - largest_Q``.  Both blocks share the convex side
``0.5 ||Y - D X||_F^2 + alpha ||X||_1``; the concave side is the columnwise
largest-Q norm (zero for the plain variant, and constant in ``D``).

Inner solvers: soft-threshold proximal gradient on the code block,
Frank-Wolfe with exact line search over the column-ball product on the
dictionary block.
"""

from dataclasses import dataclass

import numpy as np

from ..model import BallProductDomain, BdcProblem
from ..blocks import BlockPartition
from ..solvers import inner_frank_wolfe_ball_product, inner_prox_gradient

__all__ = [
    "sdl_synthetic",
    "lq_norm",
    "lq_subgrad",
    "SdlInstance",
    "SdlProblem",
    "sdl_problem",
    "gd_baseline_sdl",
]

VARIANTS = ("l1", "l1_lq")


def sdl_synthetic(m=10, l=32, n=100, k_nonzero=5, seed=0):
    """Planted dictionary-learning data ``Y = D* X*``.

    ``D*`` has i.i.d. standard normal entries with unit-normalized columns;
    every column of ``X*`` has exactly ``k_nonzero`` standard normal entries
    at uniformly chosen positions.  Deterministic given ``seed``.
    """
    if k_nonzero > l:
        raise ValueError("k_nonzero cannot exceed the number of atoms")
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, l))
    D /= np.linalg.norm(D, axis=0)
    X = np.zeros((l, n))
    for j in range(n):
        rows = rng.choice(l, size=k_nonzero, replace=False)
        X[rows, j] = rng.standard_normal(k_nonzero)
    return D @ X, D, X


def lq_norm(x, Q):
    """Sum of the Q largest absolute entries."""
    x = np.asarray(x, dtype=float)
    if not 1 <= Q <= x.size:
        raise ValueError("Q must lie in [1, len(x)]")
    idx = np.argsort(-np.abs(x), kind="stable")[:Q]
    return float(np.sum(np.abs(x[idx])))


def lq_subgrad(x, Q):
    """One subgradient of the largest-Q norm: the sign pattern on the top-Q
    set, zero elsewhere.  Ties break to the lowest index; a selected zero
    entry contributes +1."""
    x = np.asarray(x, dtype=float)
    if not 1 <= Q <= x.size:
        raise ValueError("Q must lie in [1, len(x)]")
    idx = np.argsort(-np.abs(x), kind="stable")[:Q]
    s = np.zeros_like(x)
    s[idx] = np.where(x[idx] >= 0, 1.0, -1.0)
    return s


@dataclass
class SdlInstance:
    """Problem data plus the current (D, X) state used as the initial point."""

    Y: np.ndarray
    D: np.ndarray
    X: np.ndarray
    alpha: float = 0.1
    Q: int = 5
    variant: str = "l1_lq"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError("variant must be one of %r" % (VARIANTS,))
        m, l = self.D.shape
        if self.Y.shape[0] != m or self.X.shape != (l, self.Y.shape[1]):
            raise ValueError("inconsistent Y/D/X shapes")
        norms = np.linalg.norm(self.D, axis=0)
        if np.any(norms > 1.0 + 1e-10):
            raise ValueError("dictionary columns must satisfy ||d_j|| <= 1")


class SdlProblem(BdcProblem):
    """Two blocks: 0 = dictionary (flat m*l), 1 = codes (flat l*n)."""

    def __init__(self, instance):
        self.instance = instance
        m, l = instance.D.shape
        n = instance.Y.shape[1]
        self.m, self.l, self.n = m, l, n
        self.partition = BlockPartition([m * l, l * n])
        self._domain = BallProductDomain(m, l)

    # -- packing -------------------------------------------------------------
    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        D = theta[: self.m * self.l].reshape(self.m, self.l)
        X = theta[self.m * self.l:].reshape(self.l, self.n)
        return D, X

    def pack(self, D, X):
        return np.concatenate([D.ravel(), X.ravel()])

    def initial_point(self):
        return self.pack(self.instance.D, self.instance.X)

    def block_domain(self, i):
        return self._domain if i == 0 else None

    # -- oracles ---------------------------------------------------------------
    def _penalty(self, X):
        inst = self.instance
        l1 = float(np.sum(np.abs(X)))
        if inst.variant == "l1":
            return l1, 0.0
        lq = sum(lq_norm(X[:, j], inst.Q) for j in range(X.shape[1]))
        return l1, lq

    def eval_f(self, theta):
        D, X = self.unpack(theta)
        l1, lq = self._penalty(X)
        fit = 0.5 * float(np.sum((self.instance.Y - D @ X) ** 2))
        return fit + self.instance.alpha * (l1 - lq)

    def eval_g(self, i, theta, sample=None):
        D, X = self.unpack(theta)
        fit = 0.5 * float(np.sum((self.instance.Y - D @ X) ** 2))
        return fit + self.instance.alpha * float(np.sum(np.abs(X)))

    def eval_h(self, i, theta, sample=None):
        _, X = self.unpack(theta)
        _, lq = self._penalty(X)
        return self.instance.alpha * lq

    def grad_g_block(self, i, theta, sample=None):
        D, X = self.unpack(theta)
        R = D @ X - self.instance.Y
        if i == 0:
            return (R @ X.T).ravel()
        return (D.T @ R + self.instance.alpha * np.sign(X)).ravel()

    def subgrad_h_block(self, i, theta, sample=None):
        if i == 0 or self.instance.variant == "l1":
            return np.zeros(self.partition.block_dims[i])
        _, X = self.unpack(theta)
        S = np.column_stack([lq_subgrad(X[:, j], self.instance.Q)
                             for j in range(X.shape[1])])
        return (self.instance.alpha * S).ravel()

    # -- inner solvers ---------------------------------------------------------
    def minimize_block_surrogate(self, i, theta, u, rho, budget, tol, sample=None):
        D, X = self.unpack(theta)
        Y = self.instance.Y
        alpha = self.instance.alpha
        if i == 0:
            # u == 0 on this block; Frank-Wolfe over the column balls
            anchor = D if rho else None
            D_new, iters, _, _ = inner_frank_wolfe_ball_product(
                Y, X, D, budget, rho=rho, anchor=anchor, tol=tol)
            return D_new.ravel(), iters

        U = np.asarray(u).reshape(self.l, self.n)
        X0 = X
        lip = float(np.linalg.norm(D, 2)) ** 2 + rho

        def value_grad(x):
            Xc = x.reshape(self.l, self.n)
            R = D @ Xc - Y
            val = 0.5 * float(np.sum(R * R)) - float(np.sum(U * Xc))
            grad = D.T @ R - U
            if rho:
                val += 0.5 * rho * float(np.sum((Xc - X0) ** 2))
                grad = grad + rho * (Xc - X0)
            return val, grad.ravel()

        def prox(x, t):
            return np.sign(x) * np.maximum(np.abs(x) - alpha * t, 0.0)

        x_new, iters, _ = inner_prox_gradient(
            value_grad, prox, X0.ravel(), budget, tol, lipschitz=lip)
        return x_new, iters


def sdl_problem(instance):
    """Wrap an :class:`SdlInstance` as a block DC problem."""
    return SdlProblem(instance)


def gd_baseline_sdl(instance, n_steps):
    """Joint full-batch subgradient descent baseline.

    Every step updates D and X together with the adaptive step size
    ``1 / (||D||_2^2 + ||X||_2^2)`` and re-projects dictionary columns onto
    the unit ball.  Returns the objective value before each step plus the
    final one (length ``n_steps + 1``).
    """
    prob = SdlProblem(instance)
    theta = prob.initial_point()
    vals = [prob.eval_f(theta)]
    dom = prob.block_domain(0)
    sl_d = prob.partition.slice_of(0)
    sl_x = prob.partition.slice_of(1)
    for _ in range(n_steps):
        D, X = prob.unpack(theta)
        eta = 1.0 / (np.linalg.norm(D, 2) ** 2 + np.linalg.norm(X, 2) ** 2)
        gd = prob.grad_g_block(0, theta) - prob.subgrad_h_block(0, theta)
        gx = prob.grad_g_block(1, theta) - prob.subgrad_h_block(1, theta)
        theta = theta.copy()
        theta[sl_d] -= eta * gd
        theta[sl_x] -= eta * gx
        theta[sl_d] = dom.project(theta[sl_d])
        vals.append(prob.eval_f(theta))
    return np.array(vals)
