"""Shared test oracles, independent of the library's own machinery."""

import numpy as np


def fd_grad(f, arrays, step=1e-5):
    """Central-difference gradients of a float-valued f over a dict of arrays.

    This is the tests' independent oracle; it never touches the library's
    grad_check. ``f`` receives the (mutated in place) dict and must return a
    plain float.
    """
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f(arrays)
            flat[i] = orig - step
            fm = f(arrays)
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * step)
        grads[name] = g
    return grads


def max_rel_err(analytic, numeric):
    """|a - n| / max(1, |n|), elementwise max, as the comparisons use it."""
    a = np.asarray(analytic).reshape(-1)
    n = np.asarray(numeric).reshape(-1)
    return float(max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(a, n)))


def bfs_path(heads, s, o):
    """Token indices on the undirected tree path from s to o (BFS oracle)."""
    n = len(heads)
    adj = [[] for _ in range(n)]
    for child, head in enumerate(heads):
        if head != -1:
            adj[child].append(head)
            adj[head].append(child)
    prev = {s: None}
    queue = [s]
    while queue:
        cur = queue.pop(0)
        if cur == o:
            break
        for nxt in adj[cur]:
            if nxt not in prev:
                prev[nxt] = cur
                queue.append(nxt)
    path = []
    cur = o
    while cur is not None:
        path.append(cur)
        cur = prev[cur]
    return set(path)
