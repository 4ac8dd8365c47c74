import numpy as np
import pytest

from spinn.ad import ParamStore, Tape, fd_gradient, jet_seed
from spinn.ad import jet as J
from spinn.ad import tape as ops

from .conftest import rel_err


def check_vjp(build, *arrays, tol=1e-7):
    """Gradient of sum(w * build(*xs)) via the tape vs central differences."""
    rng = np.random.default_rng(0)
    out0 = np.asarray(build(*arrays))
    w = rng.normal(size=out0.shape)
    for k in range(len(arrays)):
        tape = Tape()
        leaves = [tape.leaf(a) if i == k else a for i, a in enumerate(arrays)]
        loss = ops.sum_(ops.mul(build(*leaves), w))
        tape.backward(loss)
        got = leaves[k].grad

        def f(flat, k=k):
            args = list(arrays)
            args[k] = flat.reshape(arrays[k].shape)
            return float(np.sum(w * np.asarray(build(*args))))

        want = fd_gradient(f, arrays[k].ravel()).reshape(arrays[k].shape)
        assert rel_err(got, want) < tol, (k, rel_err(got, want))


@pytest.fixture
def a34(rng):
    return rng.normal(size=(3, 4))


@pytest.mark.parametrize(
    "fn",
    [ops.tanh, ops.exp, ops.sin, ops.cos, ops.sech, ops.square, ops.neg, lambda x: ops.mean(x), lambda x: ops.sum_(x, axis=0)],
)
def test_unary_vjps(fn, a34):
    check_vjp(fn, a34)


@pytest.mark.parametrize("fn", [ops.add, ops.sub, ops.mul, ops.div])
def test_binary_vjps_with_broadcast(fn, rng):
    a = rng.normal(size=(3, 4))
    b = rng.uniform(1.0, 2.0, size=(1, 4))
    check_vjp(fn, a, b)


def test_matmul_vjp(rng):
    check_vjp(ops.matmul, rng.normal(size=(5, 3)), rng.normal(size=(3, 2)))


def test_shape_ops(rng):
    a = rng.normal(size=(4, 6))
    check_vjp(lambda x: ops.reshape(x, (2, 12)), a)
    check_vjp(lambda x: ops.transpose(x), a)
    check_vjp(lambda x: ops.getitem(x, (slice(1, 3), slice(None, None, 2))), a)
    check_vjp(lambda x: ops.getitem(x, np.array([0, 0, 3])), a)
    check_vjp(lambda x, y: ops.concatenate([x, y], axis=1), a, rng.normal(size=(4, 2)))


def test_einsum_vjp(rng):
    check_vjp(lambda x, y, z: ops.einsum("az,bz,cz->abc", x, y, z), *(rng.normal(size=(n, 3)) for n in (2, 3, 4)))
    check_vjp(lambda x, y: ops.einsum("nyz,nyz->ny", x, y), rng.normal(size=(5, 2, 3)), rng.normal(size=(5, 2, 3)))
    with pytest.raises(ValueError):
        t = Tape()
        ops.einsum("aa->a", t.leaf(np.eye(2)))


@pytest.mark.parametrize("sizes", [(4, 5), (3, 4, 5), (2, 3, 2, 3), (2, 2, 3, 2, 2, 2)])
def test_cp_merge_matches_einsum_and_fd(sizes, rng):
    fs = [rng.normal(size=(n, 3)) for n in sizes]
    letters = "abcdef"[: len(sizes)]
    want = np.einsum(",".join(c + "z" for c in letters) + "->" + letters, *fs)
    np.testing.assert_allclose(ops.cp_merge(fs), want, rtol=1e-13, atol=1e-13)
    check_vjp(lambda *xs: ops.cp_merge(xs), *fs)


def test_backward_rejects_non_scalar_and_foreign(rng):
    t = Tape()
    x = t.leaf(rng.normal(size=3))
    with pytest.raises(ValueError):
        t.backward(ops.tanh(x))
    other = Tape()
    with pytest.raises(ValueError):
        other.backward(ops.sum_(x))
    with pytest.raises(ValueError):
        ops.add(x, other.leaf(np.ones(3)))


def test_single_weight_gradient():
    store = ParamStore([("w", ())])
    store["w"] = 3.0
    t = Tape()
    w = t.watch(store)
    g = t.backward(ops.mul(w["w"], 2.0))
    np.testing.assert_array_equal(g, [2.0])


def test_gradient_zero_for_unused_slices(rng):
    store = ParamStore([("a", (2,)), ("b", (3,))], rng.normal(size=5))
    t = Tape()
    w = t.watch(store)
    g = t.backward(ops.sum_(ops.square(w["a"])))
    np.testing.assert_allclose(g[:2], 2 * store["a"])
    np.testing.assert_array_equal(g[2:], 0.0)


def test_param_store_views():
    buf = np.arange(7.0)
    store = ParamStore([("W", (2, 3)), ("b", (1,))], buf)
    store["W"][0, 0] = -1.0
    assert buf[0] == -1.0
    assert store.slice_of("b") == slice(6, 7)
    assert store.names() == ["W", "b"]
    with pytest.raises(ValueError):
        ParamStore([("W", (2, 3))], np.zeros(5))


def test_reverse_over_forward_matches_fd(rng):
    """d/dtheta of a second x-derivative, taken through the jet recursion."""
    x = rng.uniform(-1, 1, size=6)
    theta0 = rng.normal(size=(3,))

    def second_derivative(theta, x_):
        s = jet_seed(x_, 2)
        j = J.tanh(s * theta[0] + theta[1]) * theta[2]
        return j

    tape = Tape()
    th = tape.leaf(theta0)
    parts = [ops.getitem(th, i) for i in range(3)]
    j = second_derivative(parts, x)
    loss = ops.sum_(ops.square(j[2]))
    tape.backward(loss)

    f = lambda t: float(np.sum(np.asarray(second_derivative(t, x)[2]) ** 2))
    assert rel_err(th.grad, fd_gradient(f, theta0)) < 1e-7
