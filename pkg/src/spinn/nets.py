"""Per-axis body networks: scalar coordinate -> feature vector.

Two variants share one parameter layout scheme:

* ``plain``: ``tanh`` hidden layers and an affine output.
* ``modified``: the gated MLP of Wang, Teng & Perdikaris (2021)::

      U = tanh(x W_u + b_u),   V = tanh(x W_v + b_v)
      H_1 = tanh(x W_1 + b_1)
      Z_k = tanh(H_k W_{k+1} + b_{k+1})
      H_{k+1} = (1 - Z_k) * U + Z_k * V          k = 1 .. depth-1
      out = H_depth W_out + b_out

Gates have the hidden width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ad import jet as J
from .ad.params import ParamStore
from .errors import ConfigError

VARIANTS = ("plain", "modified")


@dataclass(frozen=True)
class MlpConfig:
    depth: int
    width: int
    out_dim: int
    variant: str = "plain"
    seed: int = 0

    def __post_init__(self):
        for name in ("depth", "width", "out_dim"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def layer_shapes(config: MlpConfig):
    """``(name, shape)`` pairs in storage order."""
    w, shapes = config.width, []
    if config.variant == "modified":
        shapes += [("gate_u.W", (1, w)), ("gate_u.b", (w,)), ("gate_v.W", (1, w)), ("gate_v.b", (w,))]
    shapes += [("hidden0.W", (1, w)), ("hidden0.b", (w,))]
    for k in range(1, config.depth):
        shapes += [(f"hidden{k}.W", (w, w)), (f"hidden{k}.b", (w,))]
    shapes += [("out.W", (w, config.out_dim)), ("out.b", (config.out_dim,))]
    return shapes


def param_count(config: MlpConfig) -> int:
    return sum(int(np.prod(s)) for _, s in layer_shapes(config))


class BodyNet:
    def __init__(self, config: MlpConfig, store: ParamStore):
        self.config = config
        self.store = store

    @property
    def n_params(self):
        return self.store.size

    def weights(self):
        return dict(self.store.items())


def init_mlp(config: MlpConfig, data=None) -> BodyNet:
    """Glorot-uniform weights, zero biases, deterministic in ``config.seed``.

    ``data`` optionally supplies the backing buffer (a view into a model-wide
    parameter vector).
    """
    shapes = layer_shapes(config)
    if data is None:
        data = np.zeros(sum(int(np.prod(s)) for _, s in shapes))
    store = ParamStore(shapes, data)
    rng = np.random.Generator(np.random.Philox(config.seed))
    for name, shape in shapes:
        if name.endswith(".W"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            store[name] = rng.uniform(-limit, limit, size=shape)
        else:
            store[name] = 0.0
    return BodyNet(config, store)


def forward_jet(net: BodyNet, x: J.Jet, weights=None) -> J.Jet:
    """Jet of the net's features at coordinates ``x``.

    ``x`` coefficients have shape ``(N,)``; the result's coefficients have
    shape ``(N, out_dim)``.  ``weights`` maps parameter names to arrays or tape
    leaves; by default the net's current parameters are used untracked.
    """
    w = net.weights() if weights is None else weights
    h = J.Jet([J.ops.reshape(c, (-1, 1)) for c in x.coeffs])
    depth = net.config.depth
    if net.config.variant == "plain":
        for k in range(depth):
            h = J.tanh(J.jet_linear(h, w[f"hidden{k}.W"], w[f"hidden{k}.b"]))
    else:
        u = J.tanh(J.jet_linear(h, w["gate_u.W"], w["gate_u.b"]))
        v = J.tanh(J.jet_linear(h, w["gate_v.W"], w["gate_v.b"]))
        v_minus_u = v - u
        h = J.tanh(J.jet_linear(h, w["hidden0.W"], w["hidden0.b"]))
        for k in range(1, depth):
            z = J.tanh(J.jet_linear(h, w[f"hidden{k}.W"], w[f"hidden{k}.b"]))
            h = u + z * v_minus_u
    return J.jet_linear(h, w["out.W"], w["out.b"])


def forward(net: BodyNet, x, weights=None):
    """Plain (order-0) evaluation, shape ``(N, out_dim)``."""
    return forward_jet(net, J.Jet([np.asarray(x, dtype=np.float64)]), weights)[0]
