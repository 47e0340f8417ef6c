"""Canonical polyadic tensor factorization as an all-convex-blocks problem.

One block per factor matrix; the concave side is identically zero and the
block surrogate has a closed-form least-squares solution, so block steps are
exact minimizations (the alternating least-squares update).
"""

from dataclasses import dataclass
from functools import reduce
import string

import numpy as np
from scipy.linalg import khatri_rao

from ..model import BdcProblem
from ..blocks import BlockPartition

__all__ = ["cp_reconstruct", "CpInstance", "CpProblem", "cp_problem"]


def cp_reconstruct(factors):
    """Full tensor ``sum_r outer(theta_1[:, r], ..., theta_n[:, r])``."""
    n = len(factors)
    letters = string.ascii_lowercase[:n]
    expr = ",".join(c + "z" for c in letters) + "->" + letters
    return np.einsum(expr, *factors)


def _unfold(T, mode):
    """Mode unfolding consistent with row-major flattening of the other axes."""
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1)


def _khatri_rao_others(factors, mode):
    others = [factors[j] for j in range(len(factors)) if j != mode]
    return reduce(khatri_rao, others)


@dataclass
class CpInstance:
    tensor: np.ndarray
    rank: int
    factors: list

    def __post_init__(self):
        if self.tensor.ndim != len(self.factors):
            raise ValueError("one factor matrix per tensor mode required")
        for ax, F in enumerate(self.factors):
            if F.shape != (self.tensor.shape[ax], self.rank):
                raise ValueError("factor %d has shape %r, want %r"
                                 % (ax, F.shape, (self.tensor.shape[ax], self.rank)))


class CpProblem(BdcProblem):
    """0.5 ||T - reconstruction||_F^2; convex in each factor, zero concave side."""

    def __init__(self, instance):
        self.instance = instance
        self.shape = instance.tensor.shape
        self.rank = instance.rank
        self.partition = BlockPartition([m * instance.rank for m in self.shape])

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        factors = []
        pos = 0
        for m in self.shape:
            factors.append(theta[pos:pos + m * self.rank].reshape(m, self.rank))
            pos += m * self.rank
        return factors

    def pack(self, factors):
        return np.concatenate([F.ravel() for F in factors])

    def initial_point(self):
        return self.pack(self.instance.factors)

    def eval_f(self, theta):
        R = cp_reconstruct(self.unpack(theta)) - self.instance.tensor
        return 0.5 * float(np.sum(R * R))

    def eval_g(self, i, theta, sample=None):
        return self.eval_f(theta)

    def eval_h(self, i, theta, sample=None):
        return 0.0

    def grad_g_block(self, i, theta, sample=None):
        factors = self.unpack(theta)
        K = _khatri_rao_others(factors, i)
        R = _unfold(cp_reconstruct(factors) - self.instance.tensor, i)
        return (R @ K).ravel()

    def subgrad_h_block(self, i, theta, sample=None):
        return np.zeros(self.partition.block_dims[i])

    def minimize_block_surrogate(self, i, theta, u, rho, budget, tol, sample=None):
        factors = self.unpack(theta)
        K = _khatri_rao_others(factors, i)
        Ti = _unfold(self.instance.tensor, i)
        if rho == 0 and not np.any(u):
            sol, *_ = np.linalg.lstsq(K, Ti.T, rcond=None)  # exact block minimizer
            Fi = sol.T
        else:
            M = K.T @ K + rho * np.eye(self.rank)
            rhs = Ti @ K + np.asarray(u).reshape(factors[i].shape) + rho * factors[i]
            Fi = np.linalg.solve(M, rhs.T).T
        return Fi.ravel(), 1

    def relative_error(self, theta):
        T = self.instance.tensor
        R = cp_reconstruct(self.unpack(theta)) - T
        return float(np.linalg.norm(R) / np.linalg.norm(T))


def cp_problem(T, rank, seed=0):
    """Random-start CP problem for a dense tensor."""
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((m, rank)) for m in T.shape]
    return CpProblem(CpInstance(tensor=np.asarray(T, dtype=float), rank=rank,
                                factors=factors))
