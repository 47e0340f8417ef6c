"""The multi-block DC problem abstraction and constructive combinators.

A problem exposes, for every coordinate block ``i``, a decomposition
``f(theta) = g_i(theta_i; rest) - h_i(theta_i; rest)`` with both parts convex
in block ``i`` while the remaining coordinates are frozen.  Solvers only ever
touch problems through this capability surface:

* scalar evaluations ``eval_f``, ``eval_g(i, .)``, ``eval_h(i, .)``,
* first-order oracles ``grad_g_block`` and ``subgrad_h_block``,
* an optional per-block domain (projection / linear-minimization oracles),
* an optional replayable sampling interface for stochastic variants.

``subgrad_h_block`` must return one *deterministic* element of the convex
subdifferential; any fixed selection is valid for the majorization step, and
determinism is what makes runs replayable.
"""

import numpy as np

from .blocks import BlockPartition

__all__ = [
    "BdcProblem",
    "SampleHandle",
    "BlockDomain",
    "BallProductDomain",
    "BoxDomain",
    "residual_blocks",
    "residual_upper",
    "combine_linear",
    "combine_max",
    "combine_min",
    "ComponentwiseBdcMap",
    "AffineBdcMap",
    "ConjugateOracle",
    "LogSumExpOracle",
    "SingletonConjugate",
    "conjugate_compose",
]


class SampleHandle:
    """Replayable identifier of one stochastic draw (e.g. a minibatch).

    Two evaluations with the same handle must return identical values.
    """

    __slots__ = ("key", "indices")

    def __init__(self, key, indices=()):
        self.key = int(key)
        self.indices = tuple(int(j) for j in indices)

    def __repr__(self):
        return "SampleHandle(key=%d, n=%d)" % (self.key, len(self.indices))


class BlockDomain:
    """Constraint set of one block; unconstrained blocks use ``None`` instead."""

    def project(self, x):
        raise NotImplementedError

    def lmo(self, c):
        """Feasible minimizer of ``<c, x>`` (Frank-Wolfe primitive)."""
        raise NotImplementedError


class BallProductDomain(BlockDomain):
    """Columns of an ``m x l`` matrix (stored flat) each in the unit 2-ball."""

    def __init__(self, m, l, radius=1.0):
        self.m = int(m)
        self.l = int(l)
        self.radius = float(radius)

    def _cols(self, x):
        return np.asarray(x, dtype=float).reshape(self.m, self.l)

    def project(self, x):
        D = self._cols(x).copy()
        norms = np.linalg.norm(D, axis=0)
        over = norms > self.radius
        if np.any(over):
            D[:, over] *= self.radius / norms[over]
        return D.ravel()

    def lmo(self, c):
        C = self._cols(c)
        norms = np.linalg.norm(C, axis=0)
        S = np.zeros_like(C)
        nz = norms > 0
        S[:, nz] = -self.radius * C[:, nz] / norms[nz]
        return S.ravel()


class BoxDomain(BlockDomain):
    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def lmo(self, c):
        c = np.asarray(c, dtype=float)
        return np.where(c > 0, self.lower, self.upper)


class BdcProblem:
    """Abstract capability for multi-block DC objectives.

    Implementors set ``partition`` (a :class:`BlockPartition`) and provide the
    oracles below.  All oracles receive the full parameter vector ``theta`` as
    a flat 1-D array of length ``partition.total_dim``.

    Deterministic problems ignore the optional ``sample`` argument; stochastic
    problems must be replayable: identical handles yield identical values.
    """

    partition: BlockPartition

    @property
    def n_blocks(self):
        return self.partition.n_blocks

    # -- scalar oracles ----------------------------------------------------
    def eval_f(self, theta):
        raise NotImplementedError

    def eval_g(self, i, theta, sample=None):
        raise NotImplementedError

    def eval_h(self, i, theta, sample=None):
        raise NotImplementedError

    # -- first-order oracles (length d_i arrays) ---------------------------
    def grad_g_block(self, i, theta, sample=None):
        raise NotImplementedError

    def subgrad_h_block(self, i, theta, sample=None):
        raise NotImplementedError

    # -- structure ----------------------------------------------------------
    def block_domain(self, i):
        """Constraint set of block ``i`` or ``None`` when unconstrained."""
        return None

    def initial_point(self):
        """The problem's natural starting vector (flat, length ``total_dim``)."""
        raise NotImplementedError("problem declares no initial point")

    def sample(self, rng, batch_size=None):
        """Draw a replayable :class:`SampleHandle`; stochastic problems only."""
        raise NotImplementedError("problem has no stochastic oracle")

    def minimize_block_surrogate(self, i, theta, u, rho, budget, tol, sample=None):
        """Approximately minimize the block surrogate

            g_i(x; rest) - <u, x> + rho/2 ||x - theta_i||^2   over the block domain,

        warm-started at the current block value.  Must not increase the
        surrogate.  Returns ``(x_new, inner_iterations)``.
        """
        raise NotImplementedError("problem declares no inner solver")


def residual_blocks(problem, theta, sample=None):
    """Per-block stationarity vectors ``z_i = grad g_i - chosen subgrad h_i``."""
    return [
        problem.grad_g_block(i, theta, sample=sample)
        - problem.subgrad_h_block(i, theta, sample=sample)
        for i in range(problem.n_blocks)
    ]


def residual_upper(problem, theta):
    """Upper bound on the Clarke stationarity residual at ``theta``.

    Stacks the per-block vectors ``grad g_i - u_i`` built from the problem's
    deterministic subgradient selection and returns the 2-norm.  The bound is
    tight whenever every ``h_i`` is differentiable at ``theta``.
    """
    z = np.concatenate(residual_blocks(problem, theta))
    return float(np.linalg.norm(z))


def _check_shared_partition(problems):
    if not problems:
        raise ValueError("need at least one problem")
    part = problems[0].partition
    for p in problems[1:]:
        if p.partition != part:
            raise ValueError("all problems must share one block partition")
    return part


class _LinearCombination(BdcProblem):
    """Signed linear combination with the sign-split decomposition.

    Writing each weight as ``a = a+ - a-``, the positive parts keep the
    (g, h) roles and the negative parts swap them, so both sides stay convex.
    """

    def __init__(self, problems, weights):
        self.partition = _check_shared_partition(problems)
        if len(weights) != len(problems):
            raise ValueError("one weight per problem required")
        self.problems = list(problems)
        self.weights = [float(a) for a in weights]

    def eval_f(self, theta):
        return sum(a * p.eval_f(theta) for a, p in zip(self.weights, self.problems))

    def _combine(self, pos_oracle, neg_oracle, i, theta, sample):
        total = None
        for a, p in zip(self.weights, self.problems):
            ap, am = max(a, 0.0), max(-a, 0.0)
            term = 0.0
            if ap:
                term = ap * pos_oracle(p, i, theta, sample)
            if am:
                term = term + am * neg_oracle(p, i, theta, sample)
            total = term if total is None else total + term
        return total

    def eval_g(self, i, theta, sample=None):
        return self._combine(
            lambda p, i, t, s: p.eval_g(i, t, sample=s),
            lambda p, i, t, s: p.eval_h(i, t, sample=s),
            i, theta, sample)

    def eval_h(self, i, theta, sample=None):
        return self._combine(
            lambda p, i, t, s: p.eval_h(i, t, sample=s),
            lambda p, i, t, s: p.eval_g(i, t, sample=s),
            i, theta, sample)

    def grad_g_block(self, i, theta, sample=None):
        out = np.zeros(self.partition.block_dims[i])
        for a, p in zip(self.weights, self.problems):
            if a > 0:
                out += a * p.grad_g_block(i, theta, sample=sample)
            elif a < 0:
                out += -a * p.subgrad_h_block(i, theta, sample=sample)
        return out

    def subgrad_h_block(self, i, theta, sample=None):
        out = np.zeros(self.partition.block_dims[i])
        for a, p in zip(self.weights, self.problems):
            if a > 0:
                out += a * p.subgrad_h_block(i, theta, sample=sample)
            elif a < 0:
                out += -a * p.grad_g_block(i, theta, sample=sample)
        return out


def combine_linear(problems, weights):
    """Weighted sum of multi-block DC problems, again multi-block DC."""
    return _LinearCombination(problems, weights)


class _PointwiseMax(BdcProblem):
    """Pointwise maximum: g_i = max_r (g_i^r + sum_{s != r} h_i^s), h_i = sum h_i^s."""

    def __init__(self, problems):
        self.partition = _check_shared_partition(problems)
        self.problems = list(problems)

    def eval_f(self, theta):
        return max(p.eval_f(theta) for p in self.problems)

    def eval_g(self, i, theta, sample=None):
        hs = [p.eval_h(i, theta, sample=sample) for p in self.problems]
        total_h = sum(hs)
        gs = [p.eval_g(i, theta, sample=sample) for p in self.problems]
        return max(g + total_h - h for g, h in zip(gs, hs))

    def eval_h(self, i, theta, sample=None):
        return sum(p.eval_h(i, theta, sample=sample) for p in self.problems)

    def _argmax(self, i, theta, sample):
        # g_r + sum_{s!=r} h_s differs from f_r by the common sum of h's,
        # so the achieving index is the lowest r maximizing f_r.
        vals = [p.eval_f(theta) for p in self.problems]
        return int(np.argmax(vals))

    def grad_g_block(self, i, theta, sample=None):
        r = self._argmax(i, theta, sample)
        out = self.problems[r].grad_g_block(i, theta, sample=sample).copy()
        for s, p in enumerate(self.problems):
            if s != r:
                out += p.subgrad_h_block(i, theta, sample=sample)
        return out

    def subgrad_h_block(self, i, theta, sample=None):
        out = np.zeros(self.partition.block_dims[i])
        for p in self.problems:
            out += p.subgrad_h_block(i, theta, sample=sample)
        return out


def combine_max(problems):
    """Pointwise maximum of multi-block DC problems."""
    if not problems:
        raise ValueError("need at least one problem")
    return _PointwiseMax(problems)


def combine_min(problems):
    """Pointwise minimum, realized as the negated maximum of negations."""
    if not problems:
        raise ValueError("need at least one problem")
    negated = [combine_linear([p], [-1.0]) for p in problems]
    return combine_linear([combine_max(negated)], [-1.0])


class ComponentwiseBdcMap:
    """Vector map ``E(theta)`` whose components split as ``a_ij - b_ij`` per block.

    For every component ``j`` and block ``i``, ``a_ij`` and ``b_ij`` are convex
    in block ``i`` with the other blocks frozen.
    """

    partition: BlockPartition
    n_components: int

    def value(self, theta):
        """All component values, shape ``(n_components,)``."""
        return self.pos_part(0, theta) - self.neg_part(0, theta)

    def pos_part(self, i, theta):
        raise NotImplementedError

    def neg_part(self, i, theta):
        raise NotImplementedError

    def pos_jacobian(self, i, theta):
        """Rows are (sub)gradients of ``a_ij`` w.r.t. block ``i``; shape (m, d_i)."""
        raise NotImplementedError

    def neg_jacobian(self, i, theta):
        raise NotImplementedError


class AffineBdcMap(ComponentwiseBdcMap):
    """Affine map ``M theta + q`` split entrywise into positive/negative parts."""

    def __init__(self, partition, M, q=None):
        self.partition = partition
        M = np.asarray(M, dtype=float)
        if M.shape[1] != partition.total_dim:
            raise ValueError("matrix width must match partition dimension")
        self.M = M
        self.q = np.zeros(M.shape[0]) if q is None else np.asarray(q, dtype=float)
        self.n_components = M.shape[0]
        self._Mp = np.maximum(M, 0.0)
        self._Mm = np.maximum(-M, 0.0)

    def value(self, theta):
        return self.M @ np.asarray(theta, dtype=float) + self.q

    def pos_part(self, i, theta):
        return self._Mp @ np.asarray(theta, dtype=float) + self.q

    def neg_part(self, i, theta):
        return self._Mm @ np.asarray(theta, dtype=float)

    def pos_jacobian(self, i, theta):
        return self._Mp[:, self.partition.slice_of(i)]

    def neg_jacobian(self, i, theta):
        return self._Mm[:, self.partition.slice_of(i)]


class ConjugateOracle:
    """Support-function style oracle: value and an achieving maximizer.

    ``value(t) = max_{u in U} <u, t> - f(u)`` and ``maximizer(t)`` returns a
    ``u*`` attaining it, so ``value(t) == <maximizer(t), t> - f(maximizer(t))``.
    """

    def value(self, t):
        raise NotImplementedError

    def maximizer(self, t):
        raise NotImplementedError


class LogSumExpOracle(ConjugateOracle):
    """log-sum-exp as the conjugate of negative entropy over the simplex."""

    def value(self, t):
        t = np.asarray(t, dtype=float)
        m = float(np.max(t))
        return m + float(np.log(np.sum(np.exp(t - m))))

    def maximizer(self, t):
        t = np.asarray(t, dtype=float)
        e = np.exp(t - np.max(t))
        return e / e.sum()


class SingletonConjugate(ConjugateOracle):
    """Conjugate over a one-point set ``U = {u0}``: an affine function of ``t``."""

    def __init__(self, u0, f0=0.0):
        self.u0 = np.asarray(u0, dtype=float)
        self.f0 = float(f0)

    def value(self, t):
        return float(np.dot(self.u0, t)) - self.f0

    def maximizer(self, t):
        return self.u0


class _ConjugateComposition(BdcProblem):
    def __init__(self, emap, fstar, u_bounds):
        lower, upper = (np.asarray(b, dtype=float) for b in u_bounds)
        if lower.shape != (emap.n_components,) or upper.shape != (emap.n_components,):
            raise ValueError("one (lower, upper) pair per map component required")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("coordinate bounds of U must be finite (U compact)")
        self.partition = emap.partition
        self.emap = emap
        self.fstar = fstar
        self.c_plus = np.maximum(-lower, 0.0)
        self.d_plus = np.maximum(upper, 0.0)

    def eval_f(self, theta):
        return float(self.fstar.value(self.emap.value(theta)))

    def eval_h(self, i, theta, sample=None):
        return float(
            self.c_plus @ self.emap.pos_part(i, theta)
            + self.d_plus @ self.emap.neg_part(i, theta)
        )

    def eval_g(self, i, theta, sample=None):
        return self.eval_f(theta) + self.eval_h(i, theta)

    def subgrad_h_block(self, i, theta, sample=None):
        Ja = self.emap.pos_jacobian(i, theta)
        Jb = self.emap.neg_jacobian(i, theta)
        return Ja.T @ self.c_plus + Jb.T @ self.d_plus

    def grad_g_block(self, i, theta, sample=None):
        # Danskin direction through the achieving maximizer u*, plus grad h.
        u_star = self.fstar.maximizer(self.emap.value(theta))
        Ja = self.emap.pos_jacobian(i, theta)
        Jb = self.emap.neg_jacobian(i, theta)
        return Ja.T @ (u_star + self.c_plus) + Jb.T @ (self.d_plus - u_star)


def conjugate_compose(emap, fstar, u_bounds):
    """Compose a conjugate-function oracle with a componentwise-split map.

    Builds the multi-block DC problem representing ``t -> fstar(t)`` evaluated
    at ``E(theta)``: with per-coordinate bounds ``lower <= u <= upper`` on the
    conjugate's feasible set, the concave side is

        h_i = <max(-lower, 0), a_i> + <max(upper, 0), b_i>

    and ``g_i = fstar(E(theta)) + h_i``, both convex per block.

    Parameters
    ----------
    emap : ComponentwiseBdcMap
    fstar : ConjugateOracle
    u_bounds : (lower, upper)
        Arrays of per-coordinate extremes of the conjugate's feasible set.
    """
    return _ConjugateComposition(emap, fstar, u_bounds)
