"""Separable model: d body networks whose features merge by rank-wise products.

For output component k (0-based) and rank r the merged value is

    u_k(x_1..x_d) = sum_{j = k r}^{(k+1) r - 1} prod_i f_j^{(i)}(x_i)

i.e. each body network emits ``m * r`` features laid out as m contiguous
blocks of r.  On a factorized batch the same sum becomes a sum of outer
products, so the network runs once per 1-d coordinate rather than once per
grid node.  Partial derivatives follow by swapping in each axis's
derivative slice, since every term is a product of single-axis functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ad import jet as J
from .ad import tape as ops
from .ad.params import ParamStore
from .errors import ConfigError, DomainError
from .nets import BodyNet, MlpConfig, forward_jet, init_mlp, layer_shapes


@dataclass(frozen=True)
class FactorizedBatch:
    """Per-axis 1-d coordinates whose Cartesian product is the grid."""

    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(np.asarray(a, dtype=np.float64).reshape(-1) for a in self.axes))

    @property
    def d(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.shape[0] for a in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape, dtype=np.int64))

    def mesh(self):
        """Coordinates reshaped to broadcast against the grid (no copies)."""
        d = self.d
        return [a.reshape([-1 if i == k else 1 for i in range(d)]) for k, a in enumerate(self.axes)]


@dataclass
class FeatureJets:
    """Per-axis feature jets: ``jets[i][k]`` has shape ``(N_i, rank * out_dim)``."""

    jets: list
    rank: int
    out_dim: int

    @property
    def orders(self):
        return tuple(j.order for j in self.jets)

    @property
    def shape(self):
        return tuple(np.shape(ops.value(j[0]))[0] for j in self.jets)


def _net_seed(seed, axis):
    return int(np.random.SeedSequence([seed, axis]).generate_state(1, np.uint64)[0])


class SeparableModel:
    """d body networks sharing one flat parameter vector."""

    def __init__(self, configs, rank, out_dim=1):
        configs = list(configs)
        if len(configs) < 2:
            raise ConfigError("a separable model needs at least 2 axes")
        if rank < 1 or out_dim < 1:
            raise ConfigError("rank and out_dim must be positive")
        for c in configs:
            if c.out_dim != rank * out_dim:
                raise ConfigError(f"body net out_dim {c.out_dim} != rank*out_dim = {rank * out_dim}")
        self.rank = int(rank)
        self.out_dim = int(out_dim)
        shapes = []
        for i, c in enumerate(configs):
            shapes += [(f"axis{i}/{name}", s) for name, s in layer_shapes(c)]
        self.store = ParamStore(shapes)
        self.nets = []
        offset = 0
        for c in configs:
            n = sum(int(np.prod(s)) for _, s in layer_shapes(c))
            self.nets.append(init_mlp(c, self.store.data[offset : offset + n]))
            offset += n
        self.propagations = 0

    @classmethod
    def build(cls, d, rank, out_dim=1, depth=4, width=64, variant="plain", seed=0):
        configs = [
            MlpConfig(depth=depth, width=width, out_dim=rank * out_dim, variant=variant, seed=_net_seed(seed, i))
            for i in range(d)
        ]
        return cls(configs, rank, out_dim)

    @property
    def d(self):
        return len(self.nets)

    @property
    def configs(self):
        return [n.config for n in self.nets]

    @property
    def params(self) -> np.ndarray:
        return self.store.data

    def set_params(self, flat):
        self.store.data[:] = flat

    def net_weights(self, axis, weights=None):
        """Parameters of one body net, keyed by its local names."""
        prefix = f"axis{axis}/"
        if weights is None:
            return self.nets[axis].weights()
        return {k[len(prefix):]: v for k, v in weights.items() if k.startswith(prefix)}


def check_domain(batch: FactorizedBatch, bounds, tol=1e-12):
    for i, (a, (lo, hi)) in enumerate(zip(batch.axes, bounds)):
        if a.size and (a.min() < lo - tol or a.max() > hi + tol):
            raise DomainError(f"axis {i} coordinates leave [{lo}, {hi}]")


def eval_features(model: SeparableModel, batch: FactorizedBatch, orders, weights=None, bounds=None) -> FeatureJets:
    """One jet pass per 1-d coordinate per axis, all derivative orders at once.

    Increments ``model.propagations`` by ``sum(N_i)``.
    """
    if batch.d != model.d:
        raise ValueError(f"batch has {batch.d} axes, model has {model.d}")
    orders = tuple(orders)
    if len(orders) != model.d:
        raise ValueError("one derivative order per axis required")
    for p in orders:
        J.check_order(p)
    if bounds is not None:
        check_domain(batch, bounds)
    jets = []
    for i, (net, x, p) in enumerate(zip(model.nets, batch.axes, orders)):
        jets.append(forward_jet(net, J.jet_seed(x, p), model.net_weights(i, weights)))
        model.propagations += x.shape[0]
    return FeatureJets(jets, model.rank, model.out_dim)


def merge_point(features, rank, out_dim=1):
    """Merge d feature vectors (length ``rank*out_dim``) into an m-vector."""
    features = [np.asarray(f, dtype=np.float64) for f in features]
    n = rank * out_dim
    if any(f.shape != (n,) for f in features):
        raise ValueError(f"every feature vector must have length {n}")
    prod = np.prod(np.stack(features), axis=0)
    return prod.reshape(out_dim, rank).sum(axis=1)


def _factors(feats: FeatureJets, alpha, component):
    if len(alpha) != len(feats.jets):
        raise ValueError("multi-index length must equal the number of axes")
    out = []
    r = feats.rank
    for i, (jet, a) in enumerate(zip(feats.jets, alpha)):
        if a < 0 or a > jet.order:
            raise ValueError(f"derivative order {a} on axis {i} exceeds stored order {jet.order}")
        f = jet[a]
        if component is not None:
            f = ops.getitem(f, (slice(None), slice(component * r, (component + 1) * r)))
        out.append(f)
    return out


def partial_batch(feats: FeatureJets, alpha, component=None):
    """Grid of d^|alpha| u / dx^alpha over the factorized batch.

    Shape is ``(N_1, ..., N_d)`` when a single component is requested or the
    model is scalar, else ``(N_1, ..., N_d, m)``.
    """
    alpha = tuple(int(a) for a in alpha)
    if component is None and feats.out_dim > 1:
        grids = [partial_batch(feats, alpha, c) for c in range(feats.out_dim)]
        return ops.concatenate([ops.reshape(g, ops.value(g).shape + (1,)) for g in grids], axis=-1)
    return ops.cp_merge(_factors(feats, alpha, component))


def merge_batch(feats: FeatureJets, component=None):
    return partial_batch(feats, (0,) * len(feats.jets), component)


def partial_points(feats: FeatureJets, alpha, component=None):
    """Pointwise (non-factorized) merge: axis arrays are zipped, not crossed.

    Every axis must hold the same number of coordinates n; the result has
    shape ``(n,)`` or ``(n, m)``.
    """
    alpha = tuple(int(a) for a in alpha)
    factors = _factors(feats, alpha, component)
    d = len(factors)
    if component is not None or feats.out_dim == 1:
        return ops.einsum(",".join(["nz"] * d) + "->n", *factors)
    m, r = feats.out_dim, feats.rank
    factors = [ops.reshape(f, (-1, m, r)) for f in factors]
    return ops.einsum(",".join(["nyz"] * d) + "->ny", *factors)


def predict(model: SeparableModel, batch: FactorizedBatch, weights=None):
    """Solution grid at order 0."""
    return merge_batch(eval_features(model, batch, (0,) * model.d, weights))


__all__ = [
    "BodyNet",
    "FactorizedBatch",
    "FeatureJets",
    "SeparableModel",
    "eval_features",
    "merge_batch",
    "merge_point",
    "partial_batch",
    "partial_points",
    "predict",
]
