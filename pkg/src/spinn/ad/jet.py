"""Truncated Taylor jets in derivative convention.

``coeffs[k]`` is the k-th derivative of the traced quantity with respect to
the seeded input (not the Taylor coefficient, which would carry a 1/k!).
Coefficients may be floats, numpy arrays or tape ``Var`` nodes; arithmetic on
``Var`` coefficients is recorded, so reverse mode flows through the tangent
propagation.
"""

from __future__ import annotations

from math import comb

import numpy as np

from ..errors import ConfigError
from . import tape as ops

MAX_ORDER = 3


def check_order(p):
    if not isinstance(p, (int, np.integer)) or not 0 <= p <= MAX_ORDER:
        raise ConfigError(f"jet order must be an integer in [0, {MAX_ORDER}], got {p!r}")
    return int(p)


class Jet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = list(coeffs)
        check_order(len(coeffs) - 1)
        self.coeffs = coeffs

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def primal(self):
        return self.coeffs[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Jet({[ops.value(c) for c in self.coeffs]!r})"

    def values(self):
        """Coefficients as plain arrays (tape values unwrapped)."""
        return [np.asarray(ops.value(c), dtype=np.float64) for c in self.coeffs]

    def is_finite(self):
        return all(np.all(np.isfinite(c)) for c in self.values())

    def __add__(self, other):
        return jet_arith(self, other, "add")

    def __radd__(self, other):
        return jet_arith(other, self, "add")

    def __sub__(self, other):
        return jet_arith(self, other, "sub")

    def __rsub__(self, other):
        return jet_arith(other, self, "sub")

    def __mul__(self, other):
        return jet_arith(self, other, "mul")

    def __rmul__(self, other):
        return jet_arith(other, self, "mul")

    def __truediv__(self, other):
        return jet_arith(self, other, "div")

    def __rtruediv__(self, other):
        return jet_arith(other, self, "div")

    def __neg__(self):
        return jet_unary(self, "neg")


def jet_seed(x, p):
    """Input variable: value ``x``, unit first derivative."""
    p = check_order(p)
    x = np.asarray(x, dtype=np.float64)
    coeffs = [x]
    if p >= 1:
        coeffs.append(np.ones_like(x))
    coeffs.extend(np.zeros_like(x) for _ in range(p - 1))
    return Jet(coeffs)


def jet_const(c, p):
    p = check_order(p)
    c = np.asarray(c, dtype=np.float64)
    return Jet([c] + [np.zeros_like(c) for _ in range(p)])


def _lift(a, p):
    if isinstance(a, Jet):
        return a
    if isinstance(a, ops.Var):
        return Jet([a] + [0.0] * p)
    return jet_const(a, p)


def _orders(a, b):
    if isinstance(a, Jet) and isinstance(b, Jet):
        if a.order != b.order:
            raise ValueError(f"jet order mismatch: {a.order} vs {b.order}")
        return a.order
    return a.order if isinstance(a, Jet) else b.order


def _leibniz(a, b, p):
    out = []
    for k in range(p + 1):
        acc = None
        for i in range(k + 1):
            term = ops.mul(a[i], b[k - i])
            c = comb(k, i)
            if c != 1:
                term = ops.mul(float(c), term)
            acc = term if acc is None else ops.add(acc, term)
        out.append(acc)
    return out


def jet_arith(a, b, op):
    """Binary jet arithmetic; plain numbers/arrays are lifted to constants."""
    p = _orders(a, b)
    a, b = _lift(a, p), _lift(b, p)
    if op == "add":
        return Jet([ops.add(x, y) for x, y in zip(a.coeffs, b.coeffs)])
    if op == "sub":
        return Jet([ops.sub(x, y) for x, y in zip(a.coeffs, b.coeffs)])
    if op == "mul":
        return Jet(_leibniz(a, b, p))
    if op == "div":
        b0 = np.asarray(ops.value(b[0]))
        if np.any(b0 == 0):
            raise ZeroDivisionError("jet division by a zero primal")
        return Jet(_leibniz(a, _compose(b, _reciprocal_derivs(b[0], p)), p))
    raise ValueError(f"unknown jet op {op!r}")


def _reciprocal_derivs(g, p):
    r = ops.div(1.0, g)
    ds = [r]
    if p >= 1:
        r2 = ops.mul(r, r)
        ds.append(ops.neg(r2))
    if p >= 2:
        r3 = ops.mul(r2, r)
        ds.append(ops.mul(2.0, r3))
    if p >= 3:
        ds.append(ops.mul(-6.0, ops.mul(r3, r)))
    return ds


def _compose(a, fd):
    """Faa di Bruno: jet of f(a) given f and its derivatives at a[0].

    ``fd[k]`` is the k-th derivative of the outer function evaluated at the
    primal, for k = 0..order.
    """
    p = a.order
    out = [fd[0]]
    if p >= 1:
        out.append(ops.mul(fd[1], a[1]))
    if p >= 2:
        a1sq = ops.mul(a[1], a[1])
        out.append(ops.add(ops.mul(fd[2], a1sq), ops.mul(fd[1], a[2])))
    if p >= 3:
        t1 = ops.mul(fd[3], ops.mul(a1sq, a[1]))
        t2 = ops.mul(3.0, ops.mul(fd[2], ops.mul(a[1], a[2])))
        t3 = ops.mul(fd[1], a[3])
        out.append(ops.add(ops.add(t1, t2), t3))
    return Jet(out)


def _tanh_derivs(g, p):
    t = ops.tanh(g)
    ds = [t]
    if p >= 1:
        f1 = ops.sub(1.0, ops.mul(t, t))
        ds.append(f1)
    if p >= 2:
        f2 = ops.mul(-2.0, ops.mul(t, f1))
        ds.append(f2)
    if p >= 3:
        # d/dx(-2 t f1) = -2 f1^2 - 2 t f2
        ds.append(ops.mul(-2.0, ops.add(ops.mul(f1, f1), ops.mul(t, f2))))
    return ds


def _exp_derivs(g, p):
    e = ops.exp(g)
    return [e] * (p + 1)


def _sin_derivs(g, p):
    s, c = ops.sin(g), ops.cos(g)
    return [s, c, ops.neg(s), ops.neg(c)][: p + 1]


def _cos_derivs(g, p):
    s, c = ops.sin(g), ops.cos(g)
    return [c, ops.neg(s), ops.neg(c), s][: p + 1]


def _sech_derivs(g, p):
    s = ops.sech(g)
    ds = [s]
    if p >= 1:
        t = ops.tanh(g)
        ds.append(ops.neg(ops.mul(s, t)))
    if p >= 2:
        # sech'' = sech (2 tanh^2 - 1)
        t2 = ops.mul(t, t)
        ds.append(ops.mul(s, ops.sub(ops.mul(2.0, t2), 1.0)))
    if p >= 3:
        # sech''' = sech tanh (5 - 6 tanh^2)
        ds.append(ops.mul(ops.mul(s, t), ops.sub(5.0, ops.mul(6.0, t2))))
    return ds


_UNARY = {
    "tanh": _tanh_derivs,
    "exp": _exp_derivs,
    "sin": _sin_derivs,
    "cos": _cos_derivs,
    "sech": _sech_derivs,
}


def jet_unary(a, fn):
    """Apply an elementary function through the chain rule up to ``a.order``."""
    if fn == "neg":
        return Jet([ops.neg(c) for c in a.coeffs])
    if fn == "square":
        return jet_arith(a, a, "mul")
    try:
        derivs = _UNARY[fn]
    except KeyError:
        raise ValueError(f"unsupported jet function {fn!r}") from None
    return _compose(a, derivs(a[0], a.order))


def jet_linear(a, weight, bias=None):
    """Affine map ``a @ weight + bias`` applied coefficient-wise.

    The bias is constant, so it only shifts the primal.
    """
    out = [ops.matmul(c, weight) for c in a.coeffs]
    if bias is not None:
        out[0] = ops.add(out[0], bias)
    return Jet(out)


def tanh(a):
    return jet_unary(a, "tanh")


def exp(a):
    return jet_unary(a, "exp")


def sin(a):
    return jet_unary(a, "sin")


def cos(a):
    return jet_unary(a, "cos")


def sech(a):
    return jet_unary(a, "sech")
