import itertools

import numpy as np
import pytest
import sympy as sp

from spinn.ad import jet_seed
from spinn.ad.jet import Jet
from spinn.errors import ConfigError, DomainError
from spinn.nets import MlpConfig, forward_jet
from spinn.separable import (
    FactorizedBatch,
    FeatureJets,
    SeparableModel,
    eval_features,
    merge_batch,
    merge_point,
    partial_batch,
    partial_points,
    predict,
)

from .conftest import rel_err


def small_model(d=3, rank=3, m=1, seed=0, variant="plain"):
    return SeparableModel.build(d, rank, m, depth=2, width=8, variant=variant, seed=seed)


def brute_merge(features, rank, m):
    out = np.zeros(m)
    for k in range(m):
        for j in range(k * rank, (k + 1) * rank):
            p = 1.0
            for f in features:
                p *= f[j]
            out[k] += p
    return out


def injected(jets, rank=1, m=1):
    return FeatureJets([Jet([np.asarray(c, dtype=np.float64) for c in j]) for j in jets], rank, m)


def test_merge_point_examples(rng):
    assert merge_point([[2.0], [3.0]], 1) == pytest.approx([6.0])
    assert merge_point([[1.0, 2.0], [3.0, 4.0]], 2) == pytest.approx([11.0])
    fs = [rng.normal(size=4) for _ in range(3)]
    np.testing.assert_allclose(merge_point(fs, 2, 2), brute_merge(fs, 2, 2), rtol=1e-14)
    with pytest.raises(ValueError):
        merge_point([[1.0, 2.0], [3.0]], 2)


def test_merge_batch_outer_product_example():
    feats = injected([[[[1.0], [2.0]]], [[[3.0], [4.0]]]])
    np.testing.assert_array_equal(merge_batch(feats), [[3.0, 4.0], [6.0, 8.0]])


@pytest.mark.parametrize("rank,m", [(1, 1), (2, 1), (4, 1), (3, 2), (4, 2)])
def test_merge_batch_equals_pointwise(rank, m, rng):
    model = small_model(rank=rank, m=m, seed=rank * 10 + m)
    axes = [rng.uniform(-1, 1, size=n) for n in (4, 5, 6)]
    feats = eval_features(model, FactorizedBatch(axes), (0, 0, 0))
    grid = np.asarray(merge_batch(feats))
    rows = [f.values()[0] for f in feats.jets]
    want = np.empty((4, 5, 6, m))
    for idx in itertools.product(range(4), range(5), range(6)):
        want[idx] = merge_point([rows[i][idx[i]] for i in range(3)], rank, m)
    if m == 1:
        want = want[..., 0]
    assert grid.shape == want.shape
    assert rel_err(grid, want) < 1e-12


def test_rank_bound_in_two_dimensions(rng):
    model = small_model(d=2, rank=3, seed=4)
    axes = [rng.uniform(-1, 1, size=12) for _ in range(2)]
    grid = np.asarray(predict(model, FactorizedBatch(axes)))
    assert np.linalg.matrix_rank(grid, tol=1e-10 * np.abs(grid).max()) <= 3


def test_propagation_counter():
    model = small_model(d=3, rank=2)
    x = np.linspace(-1, 1, 64)
    eval_features(model, FactorizedBatch((x, x, x)), (2, 2, 2))
    assert model.propagations == 192
    m2 = small_model(d=2, rank=2)
    eval_features(m2, FactorizedBatch(([0.1], [0.2])), (1, 1))
    assert m2.propagations == 2


def test_order_zero_features_match_per_point_calls(rng):
    """Per-point re-evaluation agrees to within a few ulp.

    BLAS kernel selection depends on the batch length, so single-row and
    batched products may round differently in the last bit.
    """
    model = small_model(d=2, rank=4, seed=8)
    x = rng.uniform(-1, 1, size=16)
    feats = eval_features(model, FactorizedBatch((x, x)), (2, 2))
    batched = feats.jets[0].values()[0]
    single = np.stack([forward_jet(model.nets[0], jet_seed(np.array([v]), 0)).values()[0][0] for v in x])
    assert np.max(np.abs(batched - single)) <= 8 * np.finfo(float).eps * max(1.0, np.abs(single).max())


def test_partial_closed_form_example():
    # f(x) = x^2, g(y) = sin y : d2u/dxdy at (1, 0) = 2 cos 0 = 2
    fx = [[[1.0]], [[2.0]], [[2.0]]]
    gy = [[[0.0]], [[1.0]], [[0.0]]]
    feats = injected([fx, gy])
    assert float(np.asarray(partial_batch(feats, (1, 1)))[0, 0]) == 2.0
    np.testing.assert_array_equal(partial_batch(feats, (0, 0)), merge_batch(feats))
    with pytest.raises(ValueError):
        partial_batch(feats, (3, 0))


def test_partials_match_fd_of_merged_surface(rng):
    model = small_model(d=3, rank=3, seed=21)
    axes = [rng.uniform(-0.8, 0.8, size=n) for n in (3, 4, 5)]
    feats = eval_features(model, FactorizedBatch(axes), (2, 2, 1))
    h = 1e-4

    def surface(shift_axis=None, delta=0.0):
        a = [ax.copy() for ax in axes]
        if shift_axis is not None:
            a[shift_axis] = a[shift_axis] + delta
        return np.asarray(predict(model, FactorizedBatch(a)))

    fd_xx = (surface(0, h) - 2 * surface() + surface(0, -h)) / h**2
    assert rel_err(partial_batch(feats, (2, 0, 0)), fd_xx) < 1e-4

    def dy(delta_x):
        a = [axes[0] + delta_x, axes[1], axes[2]]
        up = [a[0], a[1] + h, a[2]]
        dn = [a[0], a[1] - h, a[2]]
        return (np.asarray(predict(model, FactorizedBatch(up))) - np.asarray(predict(model, FactorizedBatch(dn)))) / (2 * h)

    fd_xy = (dy(h) - dy(-h)) / (2 * h)
    assert rel_err(partial_batch(feats, (1, 1, 0)), fd_xy) < 1e-4


def test_gradient_matches_symbolic_expansion():
    """Rank 2, d=3, polynomial features: du/dx_i expanded by hand."""
    x, y, z = sp.symbols("x y z")
    f = [(1 + x, x**2), (y, 2 - y), (z**3, z)]
    u = sum(f[0][j] * f[1][j] * f[2][j] for j in range(2))
    pts = (np.array([0.3, -0.5]), np.array([0.7]), np.array([-0.2, 0.4, 0.9]))
    syms = (x, y, z)
    jets = []
    for i, s in enumerate(syms):
        coeffs = []
        for k in range(2):
            cols = [[float(sp.diff(f[i][j], s, k).subs(s, v)) for j in range(2)] for v in pts[i]]
            coeffs.append(np.array(cols))
        jets.append(coeffs)
    feats = injected(jets, rank=2)
    for i in range(3):
        alpha = tuple(int(k == i) for k in range(3))
        du = sp.lambdify(syms, sp.diff(u, syms[i]))
        mesh = np.meshgrid(*pts, indexing="ij")
        np.testing.assert_allclose(partial_batch(feats, alpha), du(*mesh), rtol=1e-14, atol=1e-14)


def test_multilinearity(rng):
    model = small_model(d=3, rank=2, seed=2)
    axes = [rng.uniform(-1, 1, size=3) for _ in range(3)]
    feats = eval_features(model, FactorizedBatch(axes), (0, 0, 0))
    base = np.asarray(merge_batch(feats))
    f0 = feats.jets[0].values()[0].copy()
    f0[:, 1] *= 2.5
    scaled = FeatureJets([Jet([f0])] + [Jet(j.values()) for j in feats.jets[1:]], 2, 1)
    only1 = FeatureJets(
        [Jet([feats.jets[i].values()[0] * np.array([0.0, 1.0])]) if i == 0 else Jet(feats.jets[i].values()) for i in range(3)],
        2,
        1,
    )
    np.testing.assert_allclose(np.asarray(merge_batch(scaled)), base + 1.5 * np.asarray(merge_batch(only1)), rtol=1e-13)


def test_vector_outputs_use_contiguous_blocks(rng):
    model = small_model(d=2, rank=3, m=2, seed=6)
    axes = [rng.uniform(-1, 1, size=4), rng.uniform(-1, 1, size=5)]
    feats = eval_features(model, FactorizedBatch(axes), (1, 1))
    full = np.asarray(partial_batch(feats, (1, 0)))
    assert full.shape == (4, 5, 2)
    for k in range(2):
        np.testing.assert_allclose(full[..., k], partial_batch(feats, (1, 0), component=k), rtol=0, atol=0)
        a = feats.jets[0].values()[1][:, 3 * k : 3 * k + 3]
        b = feats.jets[1].values()[0][:, 3 * k : 3 * k + 3]
        np.testing.assert_allclose(full[..., k], a @ b.T, rtol=1e-13)


def test_partial_points_zips_axes(rng):
    model = small_model(d=3, rank=2, seed=7)
    pts = rng.uniform(-1, 1, size=(5, 3))
    feats = eval_features(model, FactorizedBatch(tuple(pts.T)), (1, 0, 0))
    grid = np.asarray(partial_batch(feats, (1, 0, 0)))
    diag = np.asarray(partial_points(feats, (1, 0, 0)))
    np.testing.assert_allclose(diag, [grid[i, i, i] for i in range(5)], rtol=1e-13)


def test_domain_and_config_errors():
    model = small_model(d=2, rank=2)
    with pytest.raises(DomainError):
        eval_features(model, FactorizedBatch(([0.0, 1.5], [0.0])), (0, 0), bounds=((-1, 1), (-1, 1)))
    with pytest.raises(ValueError):
        eval_features(model, FactorizedBatch(([0.0],)), (0,))
    with pytest.raises(ConfigError):
        SeparableModel([MlpConfig(1, 2, 3)], 3)
    with pytest.raises(ConfigError):
        SeparableModel([MlpConfig(1, 2, 3), MlpConfig(1, 2, 4)], 3)


def test_shared_buffer_and_views():
    model = small_model(d=2, rank=2)
    assert model.params.size == sum(n.store.size for n in model.nets)
    model.params[:] = 0.5
    assert np.all(model.nets[1].store.data == 0.5)
    a, b = small_model(seed=3), small_model(seed=3)
    np.testing.assert_array_equal(a.params, b.params)
    assert not np.array_equal(a.nets[0].store.data, a.nets[1].store.data)
