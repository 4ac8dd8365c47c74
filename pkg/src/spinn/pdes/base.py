from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import NoReferenceError
from ..separable import FactorizedBatch


@dataclass(frozen=True)
class Domain:
    bounds: tuple
    names: tuple
    time_axis: Optional[int] = None

    def __post_init__(self):
        if len(self.bounds) != len(self.names):
            raise ValueError("one name per axis")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    @property
    def d(self):
        return len(self.bounds)

    def index(self, name):
        return self.names.index(name)

    def spatial_axes(self):
        return [i for i in range(self.d) if i != self.time_axis]


class Partials:
    """Derivative grids keyed by ``(component, multi-index)``.

    ``g(x1=2)`` is the second x1-derivative of component 0;
    ``g(1, t=1)`` the time derivative of component 1.
    """

    def __init__(self, grids, names):
        self.grids = grids
        self.names = tuple(names)

    def key(self, comp=0, **orders):
        unknown = set(orders) - set(self.names)
        if unknown:
            raise KeyError(f"unknown axes {sorted(unknown)}")
        return comp, tuple(orders.get(n, 0) for n in self.names)

    def __call__(self, comp=0, **orders):
        k = self.key(comp, **orders)
        try:
            return self.grids[k]
        except KeyError:
            raise KeyError(f"derivative {k} was not computed") from None

    def alpha(self, comp, alpha):
        return self.grids[(comp, tuple(alpha))]


class _Recorder(Partials):
    """Stand-in that records which derivatives an operator reads."""

    def __init__(self, names):
        super().__init__({}, names)
        self.seen = []

    def __call__(self, comp=0, **orders):
        k = self.key(comp, **orders)
        if k not in self.seen:
            self.seen.append(k)
        return 0.0

    def alpha(self, comp, alpha):
        k = (comp, tuple(alpha))
        if k not in self.seen:
            self.seen.append(k)
        return 0.0


def required_terms(fn, names, *args):
    """Derivative keys read by ``fn(partials, *args)``, in first-use order."""
    rec = _Recorder(names)
    fn(rec, *args)
    return tuple(rec.seen)


def value_terms(names, comps=(0,)):
    zero = (0,) * len(names)
    return tuple((c, zero) for c in comps)


@dataclass(frozen=True)
class Condition:
    """Regression of some model quantity onto a target on one domain face.

    ``quantities(g)`` returns predicted arrays built from the derivative
    grids in ``terms``; ``target(mesh)`` the matching reference arrays.
    """

    group: str  # "ic" or "bc"
    axis: int
    side: str  # "lo" or "hi"
    terms: tuple
    quantities: Callable
    target: Callable


@dataclass(frozen=True)
class PointCondition:
    """Boundary regression on scattered (non-factorized) points."""

    group: str
    sample: Callable  # (rng) -> points array (n, d)
    target: Callable  # points -> list of arrays (n,)
    terms: tuple
    quantities: Callable


@dataclass(frozen=True)
class PdeProblem:
    id: str
    domain: Domain
    out_dim: int
    residual: Callable  # (Partials, mesh) -> {name: grid}
    terms: tuple
    conditions: tuple = ()
    point_conditions: tuple = ()
    weights: dict = field(default_factory=lambda: {"pde": 1.0, "ic": 1.0, "bc": 1.0})
    residual_weights: dict = field(default_factory=dict)
    exact: Optional[Callable] = None  # mesh -> solution values
    observable: Optional[Callable] = None  # Partials -> field compared in evaluation
    observable_terms: tuple = ()
    reference: Optional[Callable] = None  # mesh -> observable reference
    mask: Optional[Callable] = None  # mesh -> bool grid (True inside)
    eval_resolution: int = 64
    default_counts: int = 32
    description: str = ""

    @property
    def d(self):
        return self.domain.d

    @property
    def orders(self):
        """Per-axis jet order needed by the residual."""
        return _max_orders(self.terms, self.d)

    def condition_orders(self):
        keys = [k for c in self.conditions for k in c.terms]
        return _max_orders(keys, self.d)


def _max_orders(keys, d):
    out = [0] * d
    for _, alpha in keys:
        for i, a in enumerate(alpha):
            out[i] = max(out[i], a)
    return tuple(out)


def axis_rng(seed, stream, round_, axis):
    """Counter-based stream keyed by (run seed, stream, resample round, axis)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, round_, axis])))


def sample_factorized(domain: Domain, counts, seed=0, round_=0, stream=0) -> FactorizedBatch:
    """Per-axis i.i.d. uniform samples.

    Each axis has its own keyed stream, so changing one axis's count leaves
    the other axes' samples untouched.
    """
    counts = _counts(counts, domain.d)
    axes = []
    for i, ((lo, hi), n) in enumerate(zip(domain.bounds, counts)):
        if n < 1:
            raise ValueError("at least one sample per axis")
        axes.append(axis_rng(seed, stream, round_, i).uniform(lo, hi, size=n))
    return FactorizedBatch(tuple(axes))


def _counts(counts, d):
    if np.isscalar(counts):
        return (int(counts),) * d
    counts = tuple(int(c) for c in counts)
    if len(counts) != d:
        raise ValueError(f"need {d} per-axis counts")
    return counts


def uniform_grid(domain: Domain, resolution) -> FactorizedBatch:
    res = _counts(resolution, domain.d)
    return FactorizedBatch(tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(domain.bounds, res)))


@dataclass
class FaceBatch:
    condition: Condition
    batch: FactorizedBatch
    targets: list


def face_batch(problem: PdeProblem, cond: Condition, base: FactorizedBatch) -> FaceBatch:
    lo, hi = problem.domain.bounds[cond.axis]
    axes = list(base.axes)
    axes[cond.axis] = np.array([lo if cond.side == "lo" else hi])
    batch = FactorizedBatch(tuple(axes))
    return FaceBatch(cond, batch, [np.asarray(t, dtype=np.float64) for t in cond.target(batch.mesh())])


def boundary_batches(problem: PdeProblem, counts=None, seed=0, round_=0):
    """One factorized batch per constrained face, pinned axis holding one value.

    The free axes share one set of samples across faces, so every body net
    runs once over them for the whole boundary.
    """
    counts = problem.default_counts if counts is None else counts
    base = sample_factorized(problem.domain, counts, seed, round_, stream=1)
    return [face_batch(problem, c, base) for c in problem.conditions]


def exact_solution(problem: PdeProblem, mesh):
    if problem.exact is None:
        raise NoReferenceError(f"{problem.id} has no analytic reference")
    return problem.exact(mesh)


def value_quantities(comps=(0,)):
    def quantities(g):
        return [g(c) for c in comps]

    return quantities


def exact_target(exact, comps=None):
    """Target from a closed-form solution (components split if vector-valued)."""

    def target(mesh):
        u = exact(mesh)
        if comps is None:
            return [u]
        return [u[..., c] for c in comps]

    return target


def grid_shape(mesh):
    return np.broadcast_shapes(*[np.shape(m) for m in mesh])


def full(mesh, value):
    """``value`` broadcast (and copied) to the grid shape of ``mesh``."""
    return np.array(np.broadcast_to(value, grid_shape(mesh)), dtype=np.float64)


def face_conditions(domain: Domain, terms, quantities, target, group="bc"):
    """Conditions on both faces of every spatial axis."""
    return [
        Condition(group, ax, side, terms, quantities, target)
        for ax in domain.spatial_axes()
        for side in ("lo", "hi")
    ]
