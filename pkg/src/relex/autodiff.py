"""Dense tensors with reverse-mode automatic differentiation.

Values are numpy arrays. A Tape records primitive applications in creation
order, which is a topological order by construction, and is replayed backward
exactly once. Inference code passes no tape and pays no recording cost.

Conventions:
  - tensors are immutable once created; parameters are leaves bound to a tape
  - a tape belongs to a single forward pass / thread; parallelism uses one
    tape per instance
  - float64 for checks and tests, float32 for training (callers choose via
    the arrays they wrap)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tape",
    "Tensor",
    "add",
    "backward",
    "clip",
    "concat",
    "exp",
    "grad_check",
    "GradCheckError",
    "GradCheckReport",
    "GroupReport",
    "log",
    "matmul",
    "max_over_time",
    "max_rows",
    "mul",
    "neg",
    "relu",
    "reshape",
    "sigmoid",
    "slice_cols",
    "slice_rows",
    "softmax",
    "sum_all",
    "take_rows",
    "tanh",
    "transpose",
]


class Tape:
    """Ordered record of one forward pass.

    ``recording=False`` gives a tape that only tracks kink margins (used by
    the finite-difference evaluations of grad_check).
    """

    def __init__(self, recording: bool = True):
        self._nodes: list[Tensor] = []
        self._recording = recording
        self._backward_done = False
        # distance to the nearest relu / max-tie / clip kink seen this pass
        self.min_kink_margin = float("inf")

    def note_margin(self, margin: float) -> None:
        if margin < self.min_kink_margin:
            self.min_kink_margin = float(margin)


class Tensor:
    """Immutable value node. Leaves have no grad_fn; op outputs do."""

    __slots__ = ("data", "tape", "_parents", "_grad_fn")

    def __init__(self, data, tape: Tape | None = None, _parents=(), _grad_fn=None):
        self.data = np.asarray(data)
        self.tape = tape
        self._parents = _parents
        self._grad_fn = _grad_fn
        if tape is not None and _grad_fn is not None:
            tape._nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # operator sugar used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ValueError("operands belong to different tapes")
    return tape


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def as_tensor(x) -> Tensor:
    """Wrap an array as a leaf Tensor; pass Tensors through."""
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def wrap_params(params) -> dict:
    """Accept a mapping of arrays or Tensors; return all-Tensor mapping."""
    if all(isinstance(v, Tensor) for v in params.values()):
        return params
    return {k: as_tensor(v) for k, v in params.items()}


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(out_data, tape, parents, grad_fn):
    if tape is None or not tape._recording:
        # carry the tape so downstream ops keep noting kink margins
        return Tensor(out_data, tape)
    return Tensor(out_data, tape, parents, grad_fn)


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.data.shape} x {b.data.shape}"
        )
    tape = _tape_of(a, b)
    out = a.data @ b.data

    def grad_fn(g, acc):
        acc(a, g @ b.data.T)
        acc(b, a.data.T @ g)

    return _make(out, tape, (a, b), grad_fn)


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    tape = _tape_of(a, b)
    out = a.data + b.data

    def grad_fn(g, acc):
        acc(a, _unbroadcast(g, a.data.shape))
        acc(b, _unbroadcast(g, b.data.shape))

    return _make(out, tape, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    tape = _tape_of(a, b)
    out = a.data * b.data

    def grad_fn(g, acc):
        acc(a, _unbroadcast(g * b.data, a.data.shape))
        acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out, tape, (a, b), grad_fn)


def neg(x) -> Tensor:
    x = _as_tensor(x)
    out = -x.data

    def grad_fn(g, acc):
        acc(x, -g)

    return _make(out, x.tape, (x,), grad_fn)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    out[~pos] = ez / (1.0 + ez)

    def grad_fn(g, acc):
        acc(x, g * out * (1.0 - out))

    return _make(out, x.tape, (x,), grad_fn)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def grad_fn(g, acc):
        acc(x, g * (1.0 - out * out))

    return _make(out, x.tape, (x,), grad_fn)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    if x.tape is not None and x.data.size:
        x.tape.note_margin(np.abs(x.data).min())
    out = np.maximum(x.data, 0.0)

    def grad_fn(g, acc):
        # subgradient at exactly 0 is 0
        acc(x, g * (x.data > 0))

    return _make(out, x.tape, (x,), grad_fn)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = np.exp(x.data)

    def grad_fn(g, acc):
        acc(x, g * out)

    return _make(out, x.tape, (x,), grad_fn)


def log(x) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise ValueError("log of non-positive value")
    out = np.log(x.data)

    def grad_fn(g, acc):
        acc(x, g / x.data)

    return _make(out, x.tape, (x,), grad_fn)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes through inside the bounds."""
    x = _as_tensor(x)
    if x.tape is not None and x.data.size:
        margin = min(np.abs(x.data - lo).min(), np.abs(x.data - hi).min())
        x.tape.note_margin(margin)
    out = np.clip(x.data, lo, hi)

    def grad_fn(g, acc):
        acc(x, g * ((x.data >= lo) & (x.data <= hi)))

    return _make(out, x.tape, (x,), grad_fn)


def softmax(x) -> Tensor:
    """Row-wise softmax along the last axis, max-subtracted for stability."""
    x = _as_tensor(x)
    if x.data.size == 0:
        raise ValueError("softmax of empty tensor")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g, acc):
        acc(x, out * (g - (g * out).sum(axis=-1, keepdims=True)))

    return _make(out, x.tape, (x,), grad_fn)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of empty list")
    ref = tensors[0].data.shape
    for t in tensors[1:]:
        s = t.data.shape
        if len(s) != len(ref) or any(
            s[i] != ref[i] for i in range(len(ref)) if i != axis % len(ref)
        ):
            raise ValueError(f"concat extent mismatch: {ref} vs {s} on axis {axis}")
    tape = _tape_of(*tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def grad_fn(g, acc):
        offset = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            acc(t, g[tuple(idx)])
            offset += size

    return _make(out, tape, tuple(tensors), grad_fn)


def take_rows(x, idx) -> Tensor:
    """Gather rows by integer index; gradient scatter-adds back."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    out = x.data[idx]

    def grad_fn(g, acc):
        z = np.zeros_like(x.data)
        np.add.at(z, idx, g)
        acc(x, z)

    return _make(out, x.tape, (x,), grad_fn)


def slice_cols(x, start: int, stop: int) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError("slice_cols expects a 2-d tensor")
    out = x.data[:, start:stop]

    def grad_fn(g, acc):
        z = np.zeros_like(x.data)
        z[:, start:stop] = g
        acc(x, z)

    return _make(out, x.tape, (x,), grad_fn)


def slice_rows(x, start: int, stop: int) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError("slice_rows expects a 2-d tensor")
    out = x.data[start:stop, :]

    def grad_fn(g, acc):
        z = np.zeros_like(x.data)
        z[start:stop, :] = g
        acc(x, z)

    return _make(out, x.tape, (x,), grad_fn)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    out = x.data.reshape(shape)

    def grad_fn(g, acc):
        acc(x, g.reshape(x.data.shape))

    return _make(out, x.tape, (x,), grad_fn)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError("transpose expects a 2-d tensor")
    out = x.data.T

    def grad_fn(g, acc):
        acc(x, g.T)

    return _make(out, x.tape, (x,), grad_fn)


def sum_all(x) -> Tensor:
    x = _as_tensor(x)
    out = x.data.sum()

    def grad_fn(g, acc):
        acc(x, np.full_like(x.data, g))

    return _make(out, x.tape, (x,), grad_fn)


def max_rows(x) -> Tensor:
    """Coordinate-wise max over rows of an (n, d) tensor -> (1, d).

    Ties route the subgradient to the earliest attaining row.
    """
    x = _as_tensor(x)
    d = x.data
    if d.ndim != 2 or d.shape[0] < 1:
        raise ValueError("max_rows expects a nonempty (n, d) tensor")
    out = d.max(axis=0, keepdims=True)
    if x.tape is not None and d.shape[0] >= 2:
        top2 = np.partition(d, d.shape[0] - 2, axis=0)[-2:, :]
        gaps = top2[1] - top2[0]
        # exact ties are structural (e.g. a gated all-zero column moves in
        # lockstep); only a small nonzero gap marks a winner about to flip
        gaps = gaps[gaps > 0]
        if gaps.size:
            x.tape.note_margin(gaps.min())
    winners = d.argmax(axis=0)

    def grad_fn(g, acc):
        z = np.zeros_like(d)
        z[winners, np.arange(d.shape[1])] = g[0]
        acc(x, z)

    return _make(out, x.tape, (x,), grad_fn)


def max_over_time(vectors) -> Tensor:
    """Coordinate-wise max of a nonempty list of equal-length vectors."""
    vectors = [_as_tensor(v) for v in vectors]
    if not vectors:
        raise ValueError("max_over_time of empty list")
    rows = [reshape(v, (1, v.data.size)) for v in vectors]
    return reshape(max_rows(concat(rows, axis=0)), (vectors[0].data.size,))


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor, params=None) -> dict[Tensor, np.ndarray]:
    """Reverse-mode gradients of a scalar loss for every reachable leaf.

    Returns a map from leaf tensor to gradient array. Parameters passed in
    ``params`` that the loss does not reach get explicit zero entries.
    Calling backward twice on one tape is an error.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    tape = loss.tape
    grads: dict[Tensor, np.ndarray] = {}
    if tape is not None:
        if tape._backward_done:
            raise RuntimeError("backward already called on this tape")
        tape._backward_done = True

        def acc(t: Tensor, g: np.ndarray):
            prev = grads.get(t)
            grads[t] = g if prev is None else prev + g

        grads[loss] = np.ones_like(loss.data)
        for node in reversed(tape._nodes):
            g = grads.pop(node, None)
            if g is None:
                continue
            node._grad_fn(g, acc)
        # anything left is a leaf (parameter or constant)
        grads = {t: g for t, g in grads.items() if t._grad_fn is None}
    if params is not None:
        for p in params:
            if p not in grads:
                grads[p] = np.zeros_like(p.data)
    return grads


# ---------------------------------------------------------------------------
# finite-difference oracle


class GradCheckError(RuntimeError):
    pass


@dataclass
class GroupReport:
    name: str
    max_rel_err: float
    checked: int
    skipped: list[int] = field(default_factory=list)

    def passed(self, tol: float) -> bool:
        return self.max_rel_err <= tol


@dataclass
class GradCheckReport:
    groups: dict[str, GroupReport]
    tol: float
    step: float

    @property
    def passed(self) -> bool:
        return all(g.passed(self.tol) for g in self.groups.values())

    def lines(self) -> list[str]:
        out = []
        for g in self.groups.values():
            status = "pass" if g.passed(self.tol) else "FAIL"
            skip = f", skipped {len(g.skipped)}" if g.skipped else ""
            out.append(
                f"{status}  {g.name}: max rel err {g.max_rel_err:.3e} "
                f"over {g.checked} coords{skip}"
            )
        return out


def _eval_value(f, params: dict[str, np.ndarray]) -> tuple[float, float]:
    tape = Tape(recording=False)
    out = f({k: Tensor(v, tape) for k, v in params.items()})
    return float(out.data), tape.min_kink_margin


def grad_check(
    f,
    params: dict[str, np.ndarray],
    step: float = 1e-5,
    tol: float = 1e-4,
    kink_eps: float = 1e-6,
) -> GradCheckReport:
    """Compare reverse-mode gradients of ``f(params)`` to central differences.

    ``f`` must be a deterministic map from a dict of named tensors to a scalar
    tensor, rebuilding its computation on every call. Relative error per
    coordinate is |g_a - g_n| / max(1, |g_n|); a parameter group passes when
    its max relative error is within ``tol``. Coordinates whose evaluations
    come within ``kink_eps`` of a relu/max/clip kink are skipped, not failed.
    """
    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    tape = Tape()
    tensors = {k: Tensor(v, tape) for k, v in work.items()}
    loss = f(tensors)
    base_margin = tape.min_kink_margin
    grads = backward(loss, tensors.values())
    analytic = {k: grads[t] for k, t in tensors.items()}

    groups: dict[str, GroupReport] = {}
    for name, arr in work.items():
        flat = arr.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        max_err = 0.0
        skipped: list[int] = []
        checked = 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp, m_plus = _eval_value(f, work)
            flat[i] = orig - step
            fm, m_minus = _eval_value(f, work)
            flat[i] = orig
            if min(base_margin, m_plus, m_minus) < kink_eps:
                skipped.append(i)
                continue
            numeric = (fp - fm) / (2.0 * step)
            if not np.isfinite(numeric) or not np.isfinite(a_flat[i]):
                raise GradCheckError(
                    f"NaN/inf encountered while checking parameter {name!r} "
                    f"coordinate {i}"
                )
            err = abs(a_flat[i] - numeric) / max(1.0, abs(numeric))
            max_err = max(max_err, err)
            checked += 1
        groups[name] = GroupReport(name, max_err, checked, skipped)
    return GradCheckReport(groups, tol=tol, step=step)
