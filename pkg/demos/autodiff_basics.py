"""A quick tour of the tape-based autodiff core.

Builds a tiny two-layer regression by hand, checks one gradient against
finite differences, and shows the no_grad escape hatch.
"""

import numpy as np

from sfagc.autodiff import Tensor, backward, finite_diff_grad, leaky_relu, no_grad

rng = np.random.default_rng(0)

# fit y = sin(x1) + 0.5*x2 with one hidden layer
x = rng.normal(size=(64, 2))
y = np.sin(x[:, 0]) + 0.5 * x[:, 1]

w1 = Tensor(rng.normal(size=(2, 16)) * 0.5, requires_grad=True, name="w1")
w2 = Tensor(rng.normal(size=(16, 1)) * 0.5, requires_grad=True, name="w2")


def loss_value():
    hidden = leaky_relu(Tensor(x) @ w1, 0.2)
    pred = (hidden @ w2).reshape(64)
    err = pred - Tensor(y)
    return (err * err).mean()


if __name__ == "__main__":
    loss = loss_value()
    backward(loss, [w1, w2])
    print(f"initial loss {float(loss.data):.4f}")
    print(f"grad shapes: w1 {w1.grad.shape}, w2 {w2.grad.shape}")

    # cross-check the weights against central finite differences; the
    # oracle perturbs w1 in place and restores it
    numeric = finite_diff_grad(lambda _: float(loss_value().data), w1)
    print("analytic w1[0,:3] ", np.round(w1.grad.ravel()[:3], 6))
    print("numeric  w1[0,:3] ", np.round(numeric.ravel()[:3], 6))

    # plain gradient descent, nothing fancy
    for step in range(200):
        loss = loss_value()
        backward(loss, [w1, w2])
        w1.data -= 0.05 * w1.grad
        w2.data -= 0.05 * w2.grad
    print(f"loss after 200 steps {float(loss_value().data):.4f}")

    with no_grad():
        silent = loss_value()
    print(f"under no_grad the tape stays empty and loss still evaluates: {float(silent.data):.4f}")
