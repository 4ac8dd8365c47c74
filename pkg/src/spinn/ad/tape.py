"""Reverse-mode tape over numpy arrays.

Every operation that touches a :class:`Var` appends one node to the tape of
its operands, so the node list is already in topological order and the
backward sweep is a single reversed pass.  Operations on plain arrays fall
through to numpy and record nothing, which lets the same model code run
with or without gradient tracking.
"""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class Var:
    """A tape node holding an array value and its adjoint."""

    __slots__ = ("value", "parents", "grad", "tape", "index")

    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents, tape):
        self.value = value
        self.parents = parents
        self.grad = None
        self.tape = tape
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def __repr__(self):
        return f"Var(shape={self.value.shape}, index={self.index})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self):
        return mean(self)


class Tape:
    """Records operations on :class:`Var` nodes for one backward sweep.

    Usage::

        tape = Tape()
        w = tape.watch(store)            # name -> Var leaf
        loss = ...                       # built from w
        grad = tape.backward(loss)       # flat, aligned with ``store``
    """

    def __init__(self):
        self.nodes = []
        self._store = None
        self._leaves = {}

    def leaf(self, value):
        return Var(np.asarray(value, dtype=np.float64), (), self)

    def watch(self, store: ParamStore) -> dict:
        if self._store is not None:
            raise RuntimeError("a tape watches a single ParamStore")
        self._store = store
        self._leaves = {name: self.leaf(arr) for name, arr in store.items()}
        return dict(self._leaves)

    def backward(self, loss: Var):
        if not isinstance(loss, Var) or loss.tape is not self:
            raise ValueError("loss is not a node of this tape")
        if loss.value.size != 1:
            raise ValueError(f"backward needs a scalar output, got shape {loss.value.shape}")
        for node in self.nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes[: loss.index + 1]):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in node.parents:
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad = parent.grad + contrib
        if self._store is None:
            return None
        return self.gradient()

    def gradient(self) -> np.ndarray:
        """Flat gradient aligned with the watched store; unused slices stay 0."""
        out = np.zeros(self._store.size)
        for name, leaf in self._leaves.items():
            if leaf.grad is not None:
                out[self._store.slice_of(name)] = np.reshape(leaf.grad, -1)
        return out


def _record(value, parents):
    tape = parents[0][0].tape
    for p, _ in parents[1:]:
        if p.tape is not tape:
            raise ValueError("operands belong to different tapes")
    return Var(value, parents, tape)


def _val(x):
    return x.value if isinstance(x, Var) else x


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _shape(x):
    return np.shape(x)


def add(a, b):
    av, bv = _val(a), _val(b)
    out = av + bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    parents = []
    if isinstance(a, Var):
        sa = av.shape
        parents.append((a, lambda g: _unbroadcast(g, sa)))
    if isinstance(b, Var):
        sb = bv.shape
        parents.append((b, lambda g: _unbroadcast(g, sb)))
    return _record(np.asarray(out), tuple(parents))


def sub(a, b):
    av, bv = _val(a), _val(b)
    out = av - bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    parents = []
    if isinstance(a, Var):
        sa = av.shape
        parents.append((a, lambda g: _unbroadcast(g, sa)))
    if isinstance(b, Var):
        sb = bv.shape
        parents.append((b, lambda g: -_unbroadcast(g, sb)))
    return _record(np.asarray(out), tuple(parents))


def mul(a, b):
    av, bv = _val(a), _val(b)
    out = av * bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    parents = []
    if isinstance(a, Var):
        sa = av.shape
        parents.append((a, lambda g: _unbroadcast(g * bv, sa)))
    if isinstance(b, Var):
        sb = bv.shape
        parents.append((b, lambda g: _unbroadcast(g * av, sb)))
    return _record(np.asarray(out), tuple(parents))


def div(a, b):
    av, bv = _val(a), _val(b)
    out = av / bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    parents = []
    if isinstance(a, Var):
        sa = av.shape
        parents.append((a, lambda g: _unbroadcast(g / bv, sa)))
    if isinstance(b, Var):
        sb = bv.shape
        parents.append((b, lambda g: _unbroadcast(-g * out / bv, sb)))
    return _record(np.asarray(out), tuple(parents))


def neg(a):
    if not isinstance(a, Var):
        return -a
    return _record(-a.value, ((a, lambda g: -g),))


def square(a):
    if not isinstance(a, Var):
        return a * a
    av = a.value
    return _record(av * av, ((a, lambda g: 2.0 * g * av),))


def matmul(a, b):
    """Matrix product for operands of ndim >= 2 (leading dims broadcast)."""
    av, bv = _val(a), _val(b)
    out = av @ bv
    if not isinstance(a, Var) and not isinstance(b, Var):
        return out
    parents = []
    if isinstance(a, Var):
        sa = av.shape
        parents.append((a, lambda g: _unbroadcast(g @ np.swapaxes(bv, -1, -2), sa)))
    if isinstance(b, Var):
        sb = bv.shape
        parents.append((b, lambda g: _unbroadcast(np.swapaxes(av, -1, -2) @ g, sb)))
    return _record(out, tuple(parents))


def tanh(a):
    if not isinstance(a, Var):
        return np.tanh(a)
    y = np.tanh(a.value)
    return _record(y, ((a, lambda g: g * (1.0 - y * y)),))


def exp(a):
    if not isinstance(a, Var):
        return np.exp(a)
    y = np.exp(a.value)
    return _record(y, ((a, lambda g: g * y),))


def sin(a):
    if not isinstance(a, Var):
        return np.sin(a)
    av = a.value
    return _record(np.sin(av), ((a, lambda g: g * np.cos(av)),))


def cos(a):
    if not isinstance(a, Var):
        return np.cos(a)
    av = a.value
    return _record(np.cos(av), ((a, lambda g: -g * np.sin(av)),))


def sech(a):
    if not isinstance(a, Var):
        return 1.0 / np.cosh(a)
    av = a.value
    y = 1.0 / np.cosh(av)
    return _record(y, ((a, lambda g: -g * y * np.tanh(av)),))


def sum_(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    shape = a.value.shape
    out = np.sum(a.value, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return _record(np.asarray(out), ((a, vjp),))


def mean(a):
    if not isinstance(a, Var):
        return np.mean(a)
    shape = a.value.shape
    n = a.value.size
    return _record(np.asarray(np.mean(a.value)), ((a, lambda g: np.full(shape, g / n)),))


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    old = a.value.shape
    return _record(a.value.reshape(shape), ((a, lambda g: g.reshape(old)),))


def transpose(a, axes=None):
    if not isinstance(a, Var):
        return np.transpose(a, axes)
    inv = None if axes is None else np.argsort(axes)
    return _record(np.transpose(a.value, axes), ((a, lambda g: np.transpose(g, inv)),))


def getitem(a, idx):
    if not isinstance(a, Var):
        return a[idx]
    shape = a.value.shape
    basic = _is_basic_index(idx)

    def vjp(g):
        out = np.zeros(shape)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return out

    return _record(np.asarray(a.value[idx]), ((a, vjp),))


def _is_basic_index(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(i is None or i is Ellipsis or isinstance(i, (int, np.integer, slice)) for i in items)


def concatenate(items, axis=0):
    if not any(isinstance(x, Var) for x in items):
        return np.concatenate(items, axis=axis)
    values = [_val(x) for x in items]
    out = np.concatenate(values, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    parents = []
    for k, x in enumerate(items):
        if isinstance(x, Var):
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(bounds[k], bounds[k + 1])
            sl = tuple(sl)
            parents.append((x, lambda g, sl=sl: g[sl]))
    return _record(out, tuple(parents))


def _kr_forward(vals):
    """Row-wise Khatri-Rao product; returns the chain of prefix products."""
    prefix = [vals[0]]
    for v in vals[1:]:
        prefix.append(prefix[-1][..., None, :] * v)
    return prefix


def _kr_backward(vals, prefix, g):
    """Adjoints of the factors given the adjoint of the full product."""
    r = vals[0].shape[1]
    res = [None] * len(vals)
    gp = g.reshape(prefix[-1].shape)
    for k in range(len(vals) - 1, 0, -1):
        res[k] = (gp * prefix[k - 1][..., None, :]).reshape(-1, vals[k].shape[0], r).sum(axis=0)
        gp = (gp * vals[k]).sum(axis=-2)
    res[0] = gp
    return res


def _split_point(sizes):
    """Index splitting the axes into two groups of near-equal point counts."""
    total = float(np.prod(sizes, dtype=np.float64))
    best, best_k, left = None, 1, 1.0
    for k in range(1, len(sizes)):
        left *= sizes[k - 1]
        score = abs(np.log(left) - np.log(total / left))
        if best is None or score < best:
            best, best_k = score, k
    return best_k


def cp_merge(factors):
    """``out[a_1..a_d] = sum_z prod_i f_i[a_i, z]`` for factors of shape ``(N_i, r)``.

    Same value as ``einsum("az,bz,...->ab...")``.  The axes are split into a
    left and a right group, each collapsed into a Khatri-Rao product, and the
    two are joined by one matmul, which keeps intermediates near
    ``sqrt(prod N_i) * r``.  The reverse rule is hand-written.
    """
    factors = list(factors)
    if len(factors) < 2:
        raise ValueError("cp_merge needs at least two factors")
    vals = [np.asarray(_val(f), dtype=np.float64) for f in factors]
    r = vals[0].shape[1]
    if any(v.ndim != 2 or v.shape[1] != r for v in vals):
        raise ValueError("factors must be 2-d with a common rank")
    sizes = [v.shape[0] for v in vals]
    k = _split_point(sizes)
    lp, rp = _kr_forward(vals[:k]), _kr_forward(vals[k:])
    lm, rm = lp[-1].reshape(-1, r), rp[-1].reshape(-1, r)
    out = (lm @ rm.T).reshape(sizes)
    if not any(isinstance(f, Var) for f in factors):
        return out
    tape = next(f.tape for f in factors if isinstance(f, Var))
    for f in factors:
        if isinstance(f, Var) and f.tape is not tape:
            raise ValueError("operands belong to different tapes")
    cache = {}

    def grads(g):
        # all factor adjoints at once; shared by the per-parent closures
        if cache.get("g") is g:
            return cache["res"]
        g2 = g.reshape(lm.shape[0], rm.shape[0])
        res = _kr_backward(vals[:k], lp, g2 @ rm) + _kr_backward(vals[k:], rp, g2.T @ lm)
        cache["g"], cache["res"] = g, res
        return res

    parents = tuple((f, lambda g, k=k: grads(g)[k]) for k, f in enumerate(factors) if isinstance(f, Var))
    return Var(out, parents, tape)


_EINSUM_PATHS = {}


def _einsum(subs, *ops):
    key = (subs,) + tuple(o.shape for o in ops)
    path = _EINSUM_PATHS.get(key)
    if path is None:
        path = np.einsum_path(subs, *ops, optimize="greedy")[0]
        _EINSUM_PATHS[key] = path
    return np.einsum(subs, *ops, optimize=path)


def einsum(subscripts, *operands):
    """``np.einsum`` with a reverse rule.

    Explicit ``->`` output is required, and no operand may repeat an index or
    carry an index that is absent from both the output and the other operands.
    """
    values = [_val(o) for o in operands]
    out = _einsum(subscripts, *values)
    if not any(isinstance(o, Var) for o in operands):
        return out
    lhs, rhs = subscripts.replace(" ", "").split("->")
    ins = lhs.split(",")
    parents = []
    for k, o in enumerate(operands):
        if not isinstance(o, Var):
            continue
        sub_k = ins[k]
        if len(set(sub_k)) != len(sub_k):
            raise ValueError(f"repeated index in operand {sub_k!r}")
        others = [s for i, s in enumerate(ins) if i != k]
        if not set(sub_k) <= set(rhs).union(*others):
            raise ValueError(f"operand {sub_k!r} has an index summed only over itself")
        rule = ",".join([rhs] + others) + "->" + sub_k
        other_vals = [v for i, v in enumerate(values) if i != k]
        parents.append((o, lambda g, rule=rule, ov=other_vals: _einsum(rule, g, *ov)))
    return _record(np.asarray(out), tuple(parents))


def value(x):
    """Plain array behind a Var (or ``x`` itself)."""
    return _val(x)
