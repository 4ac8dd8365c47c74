"""Physics-informed training: loss assembly, Adam, resampling, evaluation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ad import tape as ops
from .ad.tape import Tape
from .errors import ConfigError, NonFiniteError, NoReferenceError
from .ad import jet as J
from .nets import forward_jet
from .pdes.base import Partials, PdeProblem, axis_rng, boundary_batches, sample_factorized, uniform_grid
from .separable import FactorizedBatch, FeatureJets, SeparableModel, eval_features, partial_batch, partial_points

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    rank: int = 32
    depth: int = 4
    width: int = 64
    variant: str = "plain"

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("body networks need at least one hidden layer")
        if self.rank < 1 or self.width < 1:
            raise ConfigError("rank and width must be positive")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 50_000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    resample_interval: int = 100
    counts: Optional[tuple] = None  # per-axis collocation counts; None -> problem default
    boundary_counts: Optional[tuple] = None  # None -> same as counts
    seed: int = 0
    log_interval: int = 100
    eval_interval: int = 1000
    eval_resolution: Optional[int] = None
    checkpoint_interval: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.resample_interval < 1:
            raise ConfigError("resample_interval must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params, grads and optimizer state must align")
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grads
    state.v *= beta2
    state.v += (1.0 - beta2) * grads * grads
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


# -- loss ----------------------------------------------------------------------


def derivative_grids(feats: FeatureJets, keys, names, points=False):
    merge = partial_points if points else partial_batch
    scalar = feats.out_dim == 1
    grids = {(c, alpha): merge(feats, alpha, None if scalar else c) for c, alpha in keys}
    return Partials(grids, names)


def _mean_square(x, count=None):
    sq = ops.sum_(ops.square(x)) if count is not None else ops.mean(ops.square(x))
    return ops.div(sq, float(count)) if count is not None else sq


def eval_shared(model: SeparableModel, batches, orders, weights=None):
    """Feature jets for several factorized batches that share axis arrays.

    Each distinct 1-d coordinate array is pushed through its body network
    once; the jets are then sliced per batch.
    """
    per_axis = []
    for i in range(model.d):
        uniq, pos = [], {}
        for b in batches:
            a = b.axes[i]
            if id(a) not in pos:
                pos[id(a)] = len(uniq)
                uniq.append(a)
        bounds = np.cumsum([0] + [a.size for a in uniq])
        x = np.concatenate(uniq)
        jet = forward_jet(model.nets[i], J.jet_seed(x, orders[i]), model.net_weights(i, weights))
        model.propagations += x.size
        per_axis.append((jet, pos, bounds))
    out = []
    for b in batches:
        jets = []
        for i, (jet, pos, bounds) in enumerate(per_axis):
            k = pos[id(b.axes[i])]
            sl = (slice(bounds[k], bounds[k + 1]), slice(None))
            jets.append(J.Jet([ops.getitem(c, sl) for c in jet.coeffs]))
        out.append(FeatureJets(jets, model.rank, model.out_dim))
    return out


@dataclass
class PointBatch:
    """Scattered boundary points with their targets, for one PointCondition."""

    condition: object
    points: np.ndarray
    targets: list


def point_batches(problem: PdeProblem, seed=0, round_=0):
    out = []
    for k, cond in enumerate(problem.point_conditions):
        pts = cond.sample(axis_rng(seed, 2, round_, k))
        out.append(PointBatch(cond, pts, cond.target(pts)))
    return out


def total_loss(model, problem: PdeProblem, collocation: FactorizedBatch, boundary=(), points=(), weights=None, lambdas=None):
    """Weighted physics-informed loss and its per-term breakdown.

    Returns ``(loss, terms)``: ``loss`` is a tape node when ``weights`` are tape
    leaves (plain array otherwise); ``terms`` maps term names to floats.
    """
    lam = dict(problem.weights)
    if lambdas:
        lam.update(lambdas)
    names = problem.domain.names
    feats = eval_features(model, collocation, problem.orders, weights, bounds=problem.domain.bounds)
    g = derivative_grids(feats, problem.terms, names)
    mesh = collocation.mesh()
    residuals = problem.residual(g, mesh)
    count = None
    if problem.mask is not None:
        count = max(int(np.count_nonzero(problem.mask(mesh))), 1)
    terms = {}
    pde = None
    for name, r in residuals.items():
        term = _mean_square(r, count)
        terms[f"residual:{name}"] = term
        w = problem.residual_weights.get(name, 1.0)
        term = term if w == 1.0 else ops.mul(w, term)
        pde = term if pde is None else ops.add(pde, term)
    parts = {"pde": pde}

    groups = {}
    if boundary:
        orders = problem.condition_orders()
        bfeats = eval_shared(model, [fb.batch for fb in boundary], orders, weights)
        for fb, f in zip(boundary, bfeats):
            gb = derivative_grids(f, fb.condition.terms, names)
            _accumulate(groups, fb.condition.group, fb.condition.quantities(gb), fb.targets, fb.batch.size)
    for pb in points:
        batch = FactorizedBatch(tuple(pb.points[:, i] for i in range(model.d)))
        f = eval_shared(model, [batch], problem.condition_orders(), weights)[0]
        gp = derivative_grids(f, pb.condition.terms, names, points=True)
        _accumulate(groups, pb.condition.group, pb.condition.quantities(gp), pb.targets, pb.points.shape[0])
    for group, (sq, n) in groups.items():
        parts[group] = ops.div(sq, float(n))

    total = None
    for name, value in parts.items():
        w = lam.get(name, 1.0)
        term = value if w == 1.0 else ops.mul(w, value)
        total = term if total is None else ops.add(total, term)
    terms.update(parts)
    terms = {k: float(ops.value(v)) for k, v in terms.items()}
    terms["total"] = float(ops.value(total))
    return total, terms


def _accumulate(groups, group, predicted, targets, npoints):
    sq, n = groups.get(group, (None, 0))
    for p, t in zip(predicted, targets):
        s = ops.sum_(ops.square(ops.sub(p, t)))
        sq = s if sq is None else ops.add(sq, s)
    groups[group] = (sq, n + npoints)


# -- metrics -------------------------------------------------------------------


def relative_l2(pred, ref):
    pred, ref = np.asarray(pred, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {ref.shape}")
    norm = np.linalg.norm(ref.reshape(-1))
    if norm == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm((pred - ref).reshape(-1)) / norm)


def rmse(pred, ref):
    pred, ref = np.asarray(pred, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {ref.shape}")
    return float(np.sqrt(np.mean((pred - ref) ** 2)))


def predict_observable(model, problem: PdeProblem, batch: FactorizedBatch):
    """The evaluated field: the solution, or e.g. vorticity for Navier-Stokes."""
    if problem.observable is None:
        feats = eval_features(model, batch, (0,) * model.d)
        return partial_batch(feats, (0,) * model.d)
    orders = [0] * model.d
    for _, alpha in problem.observable_terms:
        orders = [max(o, a) for o, a in zip(orders, alpha)]
    feats = eval_features(model, batch, orders)
    g = derivative_grids(feats, problem.observable_terms, problem.domain.names)
    out = problem.observable(g)
    return np.stack(out, axis=-1) if isinstance(out, (list, tuple)) else out


def evaluate(model, problem: PdeProblem, resolution=None):
    """Relative L2 and RMSE on a uniform grid (endpoints included).

    Returns ``(metrics, prediction, reference)``.
    """
    if problem.reference is None:
        raise NoReferenceError(f"{problem.id} has no reference solution")
    res = problem.eval_resolution if resolution is None else resolution
    batch = uniform_grid(problem.domain, res)
    mesh = batch.mesh()
    pred = predict_observable(model, problem, batch)
    ref = problem.reference(mesh)
    if problem.mask is not None:
        m = problem.mask(mesh)
        p, r = pred[m], ref[m]
    else:
        p, r = pred, ref
    return {"rel_l2": relative_l2(p, r), "rmse": rmse(p, r)}, pred, ref


# -- training loop ---------------------------------------------------------------


@dataclass
class TrainResult:
    model: SeparableModel
    metrics: list
    best_step: int
    best_loss: float
    final: dict = field(default_factory=dict)
    optimizer: Optional[AdamState] = None
    aborted: Optional[str] = None


def build_model(problem: PdeProblem, mc: ModelConfig, seed=0) -> SeparableModel:
    return SeparableModel.build(
        problem.d, mc.rank, problem.out_dim, depth=mc.depth, width=mc.width, variant=mc.variant, seed=seed
    )


def _counts(problem, counts):
    return problem.default_counts if counts is None else counts


def draw_batches(problem: PdeProblem, tc: TrainConfig, round_: int):
    counts = _counts(problem, tc.counts)
    bcounts = counts if tc.boundary_counts is None else tc.boundary_counts
    coll = sample_factorized(problem.domain, counts, tc.seed, round_, stream=0)
    bnd = boundary_batches(problem, bcounts, tc.seed, round_)
    pts = point_batches(problem, tc.seed, round_)
    return coll, bnd, pts


def loss_and_grad(model, problem, coll, bnd, pts, lambdas=None):
    tape = Tape()
    w = tape.watch(model.store)
    loss, terms = total_loss(model, problem, coll, bnd, pts, weights=w, lambdas=lambdas)
    if not np.isfinite(terms["total"]):
        raise NonFiniteError(f"non-finite loss {terms['total']}")
    grad = tape.backward(loss)
    return terms, grad


def train(
    problem: PdeProblem,
    model_config: ModelConfig,
    tc: TrainConfig,
    sink: Optional[Callable[[dict], None]] = None,
    timing_sink: Optional[Callable[[dict], None]] = None,
    checkpoint_hook: Optional[Callable] = None,
) -> TrainResult:
    """Adam on the physics-informed loss; returns the minimum-loss snapshot.

    ``sink`` receives one deterministic record per logged step, ``timing_sink``
    the wall-clock companion record (kept apart so logs stay reproducible).
    """
    model = build_model(problem, model_config, tc.seed)
    state = AdamState.zeros(model.store.size)
    best_loss, best_step, best = np.inf, -1, model.params.copy()
    metrics = []
    start = time.perf_counter()
    eval_res = tc.eval_resolution
    has_ref = problem.reference is not None
    aborted = None
    batches = None
    for step in range(tc.iterations):
        if step % tc.resample_interval == 0:
            batches = draw_batches(problem, tc, step // tc.resample_interval)
        try:
            terms, grad = loss_and_grad(model, problem, *batches)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError("non-finite gradient")
        except (NonFiniteError, FloatingPointError) as exc:
            aborted = f"step {step}: {exc}"
            log.error("training aborted at %s", aborted)
            break
        if terms["total"] < best_loss:
            best_loss, best_step = terms["total"], step
            best[:] = model.params
        last = step == tc.iterations - 1
        if step % tc.log_interval == 0 or last:
            rec = {"step": step, "loss": terms["total"], "terms": {k: v for k, v in terms.items() if k != "total"}}
            rec["propagations"] = model.propagations
            if has_ref and tc.eval_interval and (step % tc.eval_interval == 0 or last):
                ev, _, _ = evaluate(model, problem, eval_res)
                rec.update(ev)
            metrics.append(rec)
            if sink:
                sink(rec)
            if timing_sink:
                timing_sink({"step": step, "millis": round((time.perf_counter() - start) * 1000.0, 3)})
        if checkpoint_hook and tc.checkpoint_interval and step > 0 and step % tc.checkpoint_interval == 0:
            checkpoint_hook(model, state, step)
        adam_step(model.params, grad, state, tc.lr, tc.beta1, tc.beta2, tc.eps)

    model.set_params(best)
    final = {"step": best_step, "loss": best_loss, "final": True}
    if has_ref and best_step >= 0:
        ev, _, _ = evaluate(model, problem, eval_res)
        final.update(ev)
    if aborted:
        final["aborted"] = aborted
    if sink:
        sink(final)
    return TrainResult(model, metrics, best_step, best_loss, final, state, aborted)
