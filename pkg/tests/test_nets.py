import numpy as np
import pytest

from spinn.ad import Tape, fd_derivative, fd_gradient, jet_linear, jet_seed
from spinn.ad import tape as ops
from spinn.ad.jet import Jet
from spinn.errors import ConfigError
from spinn.nets import MlpConfig, forward, forward_jet, init_mlp, layer_shapes, param_count

from .conftest import rel_err


def test_param_counts():
    assert param_count(MlpConfig(depth=1, width=2, out_dim=3)) == 13
    assert param_count(MlpConfig(depth=4, width=64, out_dim=32)) == 14_688
    # modified adds two (1 -> width) gate layers
    assert param_count(MlpConfig(depth=4, width=64, out_dim=32, variant="modified")) == 14_688 + 4 * 64


@pytest.mark.parametrize("bad", [dict(depth=0), dict(width=0), dict(out_dim=0), dict(variant="resnet"), dict(seed=-1)])
def test_config_validation(bad):
    kw = dict(depth=1, width=2, out_dim=1) | bad
    with pytest.raises(ConfigError):
        MlpConfig(**kw)


def test_init_is_deterministic_and_glorot():
    c = MlpConfig(depth=3, width=16, out_dim=4, seed=11)
    a, b = init_mlp(c), init_mlp(c)
    np.testing.assert_array_equal(a.store.data, b.store.data)
    assert not np.array_equal(a.store.data, init_mlp(MlpConfig(depth=3, width=16, out_dim=4, seed=12)).store.data)
    for name, shape in layer_shapes(c):
        w = a.store[name]
        if name.endswith(".b"):
            assert np.all(w == 0)
        else:
            assert np.abs(w).max() <= np.sqrt(6.0 / (shape[0] + shape[1]))


def test_single_affine_layer_example():
    x = jet_seed(np.array([3.0]), 1)
    h = Jet([c.reshape(-1, 1) for c in x.coeffs])
    out = jet_linear(h, np.array([[2.0]]), np.array([1.0])).values()
    assert (float(out[0][0, 0]), float(out[1][0, 0])) == (7.0, 2.0)


@pytest.mark.parametrize("variant", ["plain", "modified"])
def test_order_zero_equals_plain_forward(variant, rng):
    net = init_mlp(MlpConfig(depth=3, width=8, out_dim=5, variant=variant, seed=3))
    x = rng.uniform(-1, 1, size=11)
    j = forward_jet(net, jet_seed(x, 2))
    np.testing.assert_array_equal(j.values()[0], forward(net, x))
    assert j.values()[0].shape == (11, 5)


@pytest.mark.parametrize("variant", ["plain", "modified"])
def test_jet_derivatives_match_fd(variant, rng):
    net = init_mlp(MlpConfig(depth=2, width=8, out_dim=4, variant=variant, seed=5))
    x = rng.uniform(-1, 1, size=9)
    v = forward_jet(net, jet_seed(x, 3)).values()
    f = lambda z: forward(net, z)
    assert rel_err(v[1], fd_derivative(f, x, 1, 1e-5)) < 1e-5
    assert rel_err(v[2], fd_derivative(f, x, 2, 1e-4)) < 1e-5
    g2 = lambda z: forward_jet(net, jet_seed(z, 2)).values()[2]
    assert rel_err(v[3], fd_derivative(g2, x, 1, 1e-5)) < 1e-5


def test_modified_with_equal_gates_reduces_to_gate(rng):
    net = init_mlp(MlpConfig(depth=3, width=6, out_dim=2, variant="modified", seed=9))
    net.store["gate_v.W"] = net.store["gate_u.W"]
    net.store["gate_v.b"] = net.store["gate_u.b"]
    x = rng.uniform(-1, 1, size=7)
    u = np.tanh(x[:, None] @ net.store["gate_u.W"] + net.store["gate_u.b"])
    want = u @ net.store["out.W"] + net.store["out.b"]
    np.testing.assert_allclose(forward(net, x), want, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("variant", ["plain", "modified"])
def test_parameter_gradient_of_jet_output(variant, rng):
    net = init_mlp(MlpConfig(depth=2, width=4, out_dim=3, variant=variant, seed=1))
    x = rng.uniform(-1, 1, size=5)
    theta0 = net.store.data.copy()

    def loss_value(theta):
        net.store.data[:] = theta
        v = forward_jet(net, jet_seed(x, 2)).values()
        return float(np.sum(v[2] ** 2) + np.sum(v[1]) + np.sum(v[0] ** 3))

    tape = Tape()
    w = tape.watch(net.store)
    j = forward_jet(net, jet_seed(x, 2), w)
    loss = ops.add(ops.add(ops.sum_(ops.square(j[2])), ops.sum_(j[1])), ops.sum_(ops.mul(ops.square(j[0]), j[0])))
    g = tape.backward(loss)
    want = fd_gradient(loss_value, theta0)
    net.store.data[:] = theta0
    assert rel_err(g, want) < 1e-6
