"""Tour of the autodiff core: tapes, primitives, and the gradient-check oracle.

Run:  python demos/01_autodiff_and_gradcheck.py
"""

import numpy as np

from relex import autodiff as ad
from relex.diagnostics import model_grad_check

print("== reverse-mode basics ==")
tape = ad.Tape()
x = ad.Tensor(np.array([1.0, 2.0, 3.0]), tape)
w = ad.Tensor(np.array([0.5, -1.0, 2.0]), tape)
loss = ad.sum_all(ad.mul(ad.tanh(ad.mul(w, x)), x))
grads = ad.backward(loss)
print("loss:", float(loss.data))
print("dloss/dw:", grads[w])
print("dloss/dx:", grads[x])

print("\n== softmax stability ==")
print("softmax([1000,1000,1000]) =", ad.softmax(np.array([1000.0, 1000.0, 1000.0])).data)

print("\n== finite-difference check of a small function ==")


def f(params):
    z = ad.matmul(params["w"], params["v"])
    return ad.sum_all(ad.sigmoid(z))


report = ad.grad_check(
    f, {"w": np.random.default_rng(0).normal(size=(2, 3)), "v": np.random.default_rng(1).normal(size=(3, 2))}
)
for line in report.lines():
    print(line)

print("\n== whole-model check (4-token toy instance, every parameter group) ==")
report = model_grad_check(seed=0)
for line in report.lines():
    print(line)
print("passed:", report.passed)
