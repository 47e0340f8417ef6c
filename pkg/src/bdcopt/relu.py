"""Split formulation of ReLU multilayer perceptrons.

The forward pass tracks, per hidden layer, a pair of nonnegative vectors
``(Z+, Z-)`` whose difference equals the usual ReLU activation and whose
coordinates are each convex in any single layer's parameters when the other
layers are frozen.  The network output splits the same way into ``A - B``,
which is what makes squared-error and cross-entropy objectives decompose
into differences of blockwise-convex parts:

* squared error (scalar output, label ``y >= 0``):
  ``(F - y)^2 = 2 (A^2 + (B + y)^2) - (A + B + y)^2``
* cross-entropy (logits ``F``, class ``y``):
  ``LSE(F) - F_y = [LSE(F) + 1'B + B_y] - [A_y + 1'B]``

Gradients are hand-rolled reverse mode over this fixed graph.  Kink
selections are deterministic: entrywise ``relu'(0) := 0``, and ties in
``max(p, Z-)`` take the ``p`` branch.  For a block ``l`` only layers ``>= l``
are traversed.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockPartition

__all__ = [
    "MlpParams",
    "SplitState",
    "random_params",
    "forward_split",
    "forward_standard",
    "mse_bdc",
    "ce_bdc",
    "block_grad_g",
    "block_grad_h",
    "block_subgrad_h",
    "log_sum_exp",
    "save_params_csv",
    "load_params_csv",
]


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_deriv(x):
    # relu'(0) := 0
    return (x > 0).astype(float)


@dataclass
class MlpParams:
    """Fully-connected ReLU network parameters; one block per layer.

    ``layers[l] = (W, b)`` with ``W`` of shape ``(d_out, d_in)``.  The last
    layer is linear with ``class_count`` outputs (1 for regression).
    """

    layers: list

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("need at least two layers")
        self.layers = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float))
                       for W, b in self.layers]
        for l, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError("layer %d has inconsistent shapes" % l)
            if l > 0 and W.shape[1] != self.layers[l - 1][0].shape[0]:
                raise ValueError("layer %d input dim does not chain" % l)

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def input_dim(self):
        return self.layers[0][0].shape[1]

    @property
    def class_count(self):
        return self.layers[-1][0].shape[0]

    def partition(self):
        return BlockPartition([W.size + b.size for W, b in self.layers])

    def to_vector(self):
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    def shapes(self):
        return [W.shape for W, _ in self.layers]

    def with_vector(self, theta):
        """New parameter set with values taken from a flat vector."""
        theta = np.asarray(theta, dtype=float)
        layers = []
        pos = 0
        for W, b in self.layers:
            w_new = theta[pos:pos + W.size].reshape(W.shape)
            pos += W.size
            b_new = theta[pos:pos + b.size].copy()
            pos += b.size
            layers.append((w_new, b_new))
        if pos != theta.size:
            raise ValueError("vector length does not match parameter count")
        return MlpParams(layers)

def random_params(layer_dims, rng, scale=None):
    """Random network with the given neuron counts, e.g. ``(2, 8, 8, 3)``."""
    layers = []
    for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
        s = scale if scale is not None else 1.0 / np.sqrt(d_in)
        layers.append((s * rng.standard_normal((d_out, d_in)),
                       s * rng.standard_normal(d_out)))
    return MlpParams(layers)


@dataclass
class SplitState:
    """Per-layer split activations of one (batched) forward pass.

    Lists are indexed by hidden layer; arrays carry a leading batch axis.
    ``z_plus - z_minus`` equals the standard ReLU activations, both parts are
    entrywise nonnegative, and ``a_out - b_out`` is the network output.
    """

    pre: list
    z_plus: list
    z_minus: list
    a_out: np.ndarray
    b_out: np.ndarray

    @property
    def output(self):
        return self.a_out - self.b_out


def _as_batch(x, input_dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise ValueError("input shape %r does not match input dim %d" % (x.shape, input_dim))
    return x


def forward_split(params, x):
    """Run the split forward recursion; returns the full :class:`SplitState`."""
    X = _as_batch(x, params.input_dim)
    W0, b0 = params.layers[0]
    pre = [X @ W0.T + b0]
    z_plus = [_relu(pre[0])]
    z_minus = [np.zeros_like(pre[0])]
    for l in range(1, params.n_layers - 1):
        W, b = params.layers[l]
        Wp, Wm = _relu(W), _relu(-W)
        p = z_plus[-1] @ Wp.T + z_minus[-1] @ Wm.T + b
        zm = z_minus[-1] @ Wp.T + z_plus[-1] @ Wm.T
        pre.append(p)
        z_minus.append(zm)
        z_plus.append(np.maximum(p, zm))
    WL, bL = params.layers[-1]
    WLp, WLm = _relu(WL), _relu(-WL)
    a_out = z_plus[-1] @ WLp.T + z_minus[-1] @ WLm.T + _relu(bL)
    b_out = z_minus[-1] @ WLp.T + z_plus[-1] @ WLm.T + _relu(-bL)
    return SplitState(pre=pre, z_plus=z_plus, z_minus=z_minus, a_out=a_out, b_out=b_out)


def forward_standard(params, x):
    """Reference forward pass ``W_L a_{L-1} + b_L`` with ReLU activations."""
    X = _as_batch(x, params.input_dim)
    a = X
    for W, b in params.layers[:-1]:
        a = _relu(a @ W.T + b)
    WL, bL = params.layers[-1]
    return a @ WL.T + bL


def log_sum_exp(t):
    """Rowwise stable log-sum-exp."""
    t = np.asarray(t, dtype=float)
    m = np.max(t, axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(t - m), axis=-1, keepdims=True)))[..., 0]


def mse_bdc(params, x, y, state=None):
    """Blockwise-convex split of the batch-summed squared error.

    Labels must be nonnegative; shift labels (and un-shift reported outputs)
    by a recorded constant when they are not.  Returns ``(g, h)`` with
    ``g - h == sum (F - y)^2`` exactly.
    """
    if params.class_count != 1:
        raise ValueError("squared-error split expects a scalar output")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y < 0):
        raise ValueError("labels must be >= 0; shift labels and outputs by a "
                         "common constant first")
    st = state if state is not None else forward_split(params, x)
    A = st.a_out[:, 0]
    B = st.b_out[:, 0]
    g = float(np.sum(2.0 * (A ** 2 + (B + y) ** 2)))
    h = float(np.sum((A + B + y) ** 2))
    return g, h


def ce_bdc(params, x, y, state=None):
    """Blockwise-convex split of the batch-summed cross-entropy.

    ``y`` holds integer class indices.  Returns ``(g, h)`` with
    ``g - h == sum LSE(F) - F_y`` exactly.
    """
    C = params.class_count
    if C < 2:
        raise ValueError("classification split expects >= 2 outputs")
    y = np.atleast_1d(np.asarray(y))
    if y.dtype.kind not in "iu" or np.any(y < 0) or np.any(y >= C):
        raise ValueError("labels must be integer class indices in [0, %d)" % C)
    st = state if state is not None else forward_split(params, x)
    rows = np.arange(st.a_out.shape[0])
    sum_b = np.sum(st.b_out, axis=1)
    g = float(np.sum(log_sum_exp(st.output) + sum_b + st.b_out[rows, y]))
    h = float(np.sum(st.a_out[rows, y] + sum_b))
    return g, h


def _softmax(t):
    e = np.exp(t - np.max(t, axis=1, keepdims=True))
    return e / np.sum(e, axis=1, keepdims=True)


def _output_adjoints(state, y, loss, part):
    """d(part)/dA and d(part)/dB per sample; both entrywise nonnegative, so
    the chain rule below stays inside the convex subdifferential calculus."""
    A, B = state.a_out, state.b_out
    N = A.shape[0]
    if loss == "mse":
        y = np.asarray(y, dtype=float).reshape(N, 1)
        if part == "g":
            return 4.0 * A, 4.0 * (B + y)
        s = 2.0 * (A + B + y)
        return s, s.copy()
    if loss == "ce":
        rows = np.arange(N)
        if part == "g":
            S = _softmax(state.output)
            dB = 1.0 - S
            dB[rows, y] += 1.0
            return S, dB
        dA = np.zeros_like(A)
        dA[rows, y] = 1.0
        return dA, np.ones_like(B)
    raise ValueError("loss must be 'mse' or 'ce'")


def _loss_block_gradient(params, x, y, loss, part, block):
    L = params.n_layers
    if not 0 <= block < L:
        raise IndexError("block %d out of range for %d layers" % (block, L))
    X = _as_batch(x, params.input_dim)
    state = forward_split(params, X)
    dA, dB = _output_adjoints(state, np.atleast_1d(np.asarray(y)), loss, part)

    WL, bL = params.layers[-1]
    if block == L - 1:
        Zp, Zm = state.z_plus[-1], state.z_minus[-1]
        dW = (_relu_deriv(WL) * (dA.T @ Zp + dB.T @ Zm)
              - _relu_deriv(-WL) * (dA.T @ Zm + dB.T @ Zp))
        db = _relu_deriv(bL) * dA.sum(axis=0) - _relu_deriv(-bL) * dB.sum(axis=0)
        return dW, db

    WLp, WLm = _relu(WL), _relu(-WL)
    dZp = dA @ WLp + dB @ WLm
    dZm = dA @ WLm + dB @ WLp

    # unwind hidden layers above the block; only layers >= block are touched
    for l in range(L - 2, block, -1):
        mask = (state.pre[l] >= state.z_minus[l]).astype(float)
        dp = mask * dZp
        dzm = dZm + (1.0 - mask) * dZp
        W = params.layers[l][0]
        Wp, Wm = _relu(W), _relu(-W)
        dZp = dp @ Wp + dzm @ Wm
        dZm = dp @ Wm + dzm @ Wp

    if block == 0:
        dp = _relu_deriv(state.pre[0]) * dZp  # z_minus[0] is constant zero
        return dp.T @ X, dp.sum(axis=0)

    mask = (state.pre[block] >= state.z_minus[block]).astype(float)
    dp = mask * dZp
    dzm = dZm + (1.0 - mask) * dZp
    Zp_in, Zm_in = state.z_plus[block - 1], state.z_minus[block - 1]
    W, b = params.layers[block]
    dW = (_relu_deriv(W) * (dp.T @ Zp_in + dzm.T @ Zm_in)
          - _relu_deriv(-W) * (dp.T @ Zm_in + dzm.T @ Zp_in))
    return dW, dp.sum(axis=0)


def block_grad_g(params, x, y, loss, block):
    """Subgradient of the batch-summed convex part w.r.t. layer ``block``,
    shaped like ``(W, b)``.  Matches central finite differences on smooth
    regions."""
    return _loss_block_gradient(params, x, y, loss, "g", block)


def block_grad_h(params, x, y, loss, block):
    """Subgradient of the batch-summed concave-side part w.r.t. layer ``block``."""
    return _loss_block_gradient(params, x, y, loss, "h", block)


block_subgrad_h = block_grad_h


def save_params_csv(params, path):
    """Checkpoint: header naming shapes, then one row of all values flat in
    block order (each layer's weights row-major, then its bias)."""
    names = []
    for l, (W, b) in enumerate(params.layers, start=1):
        names.append("W%d:%dx%d" % (l, W.shape[0], W.shape[1]))
        names.append("b%d:%d" % (l, b.shape[0]))
    row = ",".join(repr(float(v)) for v in params.to_vector())
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n" + row + "\n")


def load_params_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        values = np.array([float(t) for t in fh.readline().strip().split(",")])
    layers = []
    pos = 0
    pending_w = None
    for name in header:
        tag, shape = name.split(":")
        if tag.startswith("W"):
            r, c = (int(v) for v in shape.split("x"))
            pending_w = values[pos:pos + r * c].reshape(r, c)
            pos += r * c
        else:
            d = int(shape)
            layers.append((pending_w, values[pos:pos + d]))
            pos += d
    return MlpParams(layers)
