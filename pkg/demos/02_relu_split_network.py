"""The split form of a ReLU network and its blockwise-convex losses.

Every hidden layer keeps a pair of nonnegative vectors (Z+, Z-) whose
difference is the usual activation; the output splits as F = A - B.  Each
coordinate of A and B is convex in any single layer's parameters, which turns
squared error and cross-entropy into differences of blockwise-convex parts.
"""

import numpy as np

from bdcopt import relu

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# Split forward pass vs the standard one.
# ---------------------------------------------------------------------------
net = relu.random_params((3, 8, 6, 2), rng)
x = rng.standard_normal((4, 3))
state = relu.forward_split(net, x)
print("max |(A - B) - standard forward| =",
      np.max(np.abs(state.output - relu.forward_standard(net, x))))
print("all split parts nonnegative:",
      all(np.all(z >= 0) for z in state.z_plus + state.z_minus))

# ---------------------------------------------------------------------------
# Loss identities: the split parts differ by exactly the usual loss.
# ---------------------------------------------------------------------------
reg = relu.random_params((3, 8, 1), rng)
y = np.abs(rng.standard_normal(4))
g, h = relu.mse_bdc(reg, x, y)
F = relu.forward_standard(reg, x)[:, 0]
print("\nsquared error: g - h = %.12f, sum (F - y)^2 = %.12f"
      % (g - h, np.sum((F - y) ** 2)))

labels = rng.integers(0, 2, size=4)
g, h = relu.ce_bdc(net, x, labels)
logits = relu.forward_standard(net, x)
ce = np.sum(relu.log_sum_exp(logits) - logits[np.arange(4), labels])
print("cross-entropy: g - h = %.12f, direct = %.12f" % (g - h, ce))

# ---------------------------------------------------------------------------
# Blockwise convexity, seen through midpoints: freeze all layers but one,
# move that layer to two random points, and compare the midpoint value.
# ---------------------------------------------------------------------------
theta = net.to_vector()
part = net.partition()
worst = -np.inf
for _ in range(300):
    block = int(rng.integers(net.n_layers))
    sl = part.slice_of(block)
    t1, t2 = theta.copy(), theta.copy()
    t1[sl] += rng.standard_normal(sl.stop - sl.start)
    t2[sl] += rng.standard_normal(sl.stop - sl.start)
    mid = theta.copy()
    mid[sl] = 0.5 * (t1[sl] + t2[sl])
    a1 = relu.forward_split(net.with_vector(t1), x).a_out
    a2 = relu.forward_split(net.with_vector(t2), x).a_out
    am = relu.forward_split(net.with_vector(mid), x).a_out
    worst = max(worst, float(np.max(am - 0.5 * (a1 + a2))))
print("\nlargest midpoint-convexity violation of A over 300 trials:", worst)

# ---------------------------------------------------------------------------
# Hand-rolled block gradients agree with finite differences away from kinks.
# ---------------------------------------------------------------------------
dW, db = relu.block_grad_g(net, x, labels, "ce", 1)
eps = 1e-6
off = part.slice_of(1).start
fd = np.zeros(3)
got = np.concatenate([dW.ravel(), db])[:3]
for j in range(3):
    tp, tm = theta.copy(), theta.copy()
    tp[off + j] += eps
    tm[off + j] -= eps
    fd[j] = (relu.ce_bdc(net.with_vector(tp), x, labels)[0]
             - relu.ce_bdc(net.with_vector(tm), x, labels)[0]) / (2 * eps)
print("first three gradient coords (reverse mode vs central differences):")
print("  ", np.round(got, 8))
print("  ", np.round(fd, 8))
