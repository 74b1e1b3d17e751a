import math

import numpy as np
import pytest

from symrl.networks import (
    AdamState,
    CheckpointError,
    Mlp,
    OuNoise,
    actor_net,
    adam_step,
    critic_net,
    init_kaiming,
    load_checkpoint,
    ou_sample,
    save_checkpoint,
    soft_update,
)


def finite_difference(net: Mlp, x, weights, h=1e-5):
    """Central differences of sum(weights * net(x)) w.r.t. every parameter and input."""
    p0 = net.params.copy()
    gp = np.zeros_like(p0)
    for i in range(p0.size):
        net.params[i] = p0[i] + h
        up = np.sum(weights * net.forward(x, cache=False))
        net.params[i] = p0[i] - h
        dn = np.sum(weights * net.forward(x, cache=False))
        net.params[i] = p0[i]
        gp[i] = (up - dn) / (2 * h)
    gx = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        gx[idx] = (np.sum(weights * net.forward(xp, cache=False))
                   - np.sum(weights * net.forward(xm, cache=False))) / (2 * h)
    return gp, gx


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b))))


def max_gradient_error(make, in_dim, n_nets, seed, hidden=(8, 8)):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        net = make(hidden).init(rng)
        for b in net.biases:
            b[...] = rng.normal(scale=0.1, size=b.shape)
        x = rng.normal(size=(3, in_dim))
        w = rng.normal(size=net.forward(x).shape)
        gp, gx = net.backward(w)
        fp, fx = finite_difference(net, x, w)
        worst = max(worst, rel_err(gp, fp), rel_err(gx, fx))
    return worst


def test_kaiming_bounds_and_mean():
    rng = np.random.default_rng(0)
    w = init_kaiming((64, 64), rng)
    assert np.all(np.abs(w) <= math.sqrt(6 / 64)) and math.sqrt(6 / 64) == pytest.approx(0.3062, abs=1e-4)
    big = init_kaiming((64, 100_000 // 64 + 1), rng).ravel()
    sd = math.sqrt(6 / 64) / math.sqrt(3)
    assert abs(big.mean()) <= 3 * sd / math.sqrt(big.size)
    np.testing.assert_array_equal(init_kaiming((4, 3), np.random.default_rng(1)),
                                  init_kaiming((4, 3), np.random.default_rng(1)))
    with pytest.raises(ValueError):
        init_kaiming((0, 3), rng)


def test_biases_start_at_zero():
    net = critic_net().init(np.random.default_rng(0))
    assert all(not b.any() for b in net.biases)


def test_architectures():
    c, a = critic_net(), actor_net()
    assert c.sizes == (6, 64, 64, 1) and c.activations == ("relu", "relu", "linear")
    assert a.sizes == (4, 64, 64, 2) and a.activations == ("tanh", "relu", "tanh")


def test_zero_network_outputs_zero():
    np.testing.assert_array_equal(critic_net().forward(np.ones((5, 6))), np.zeros((5, 1)))


def test_actor_output_bounded():
    rng = np.random.default_rng(0)
    net = actor_net().init(rng)
    out = net.forward(rng.normal(scale=3, size=(1000, 4)))
    assert np.all(np.abs(out) < 1.0)
    net.params *= 50
    assert np.all(np.abs(net.forward(rng.normal(scale=100, size=(1000, 4)))) <= 1.0)


def test_linear_net_against_hand_matmul():
    net = Mlp((3, 2), ("linear",))
    net.weights[0][...] = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
    net.biases[0][...] = [0.5, -0.5]
    x = np.array([1.0, -1.0, 2.0])
    want = [1 - 3 + 10 + 0.5, 2 - 4 + 12 - 0.5]
    np.testing.assert_array_equal(net.forward(x), want)
    grad, _ = net.backward(np.array([1.0, 0.0]))
    gw = grad[:6].reshape(3, 2)
    np.testing.assert_array_equal(gw[:, 0], x)
    np.testing.assert_array_equal(gw[:, 1], 0.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        critic_net().forward(np.ones(5))


def test_backward_needs_cache():
    net = critic_net()
    with pytest.raises(RuntimeError):
        net.backward(np.ones(1))
    net.forward(np.ones(6), cache=False)
    with pytest.raises(RuntimeError):
        net.backward(np.ones(1))


def test_relu_subgradient_at_zero():
    net = Mlp((1, 1, 1), ("relu", "linear"))
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    net.forward(np.zeros(1))
    grad, gx = net.backward(np.ones(1))
    assert gx[0] == 0.0 and grad[0] == 0.0


def test_gradients_critic_small_batch():
    assert max_gradient_error(lambda h: critic_net(hidden=h), 6, 10, seed=0) < 1e-4


def test_gradients_actor_small_batch():
    assert max_gradient_error(lambda h: actor_net(hidden=h), 4, 10, seed=1) < 1e-4


def test_gradients_full_size_actor():
    assert max_gradient_error(lambda h: actor_net(hidden=h), 4, 1, seed=2, hidden=(64, 64)) < 1e-4


def test_adam_zero_gradient_keeps_params():
    p = np.array([1.0, -2.0])
    st = AdamState.zeros_like(p, 0.01)
    adam_step(p, np.zeros(2), st)
    np.testing.assert_array_equal(p, [1.0, -2.0])
    assert st.step == 1


def test_adam_first_step_is_lr_sign():
    p = np.zeros(3)
    g = np.array([0.3, -5.0, 1e-3])
    adam_step(p, g, AdamState.zeros_like(p, 0.001))
    # m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    np.testing.assert_allclose(p, -0.001 * g / (np.abs(g) + 1e-8), rtol=1e-15)
    np.testing.assert_allclose(p, -0.001 * np.sign(g), rtol=1e-4)


def test_adam_deterministic_and_shape_checked():
    def run():
        p = np.ones(4)
        st = AdamState.zeros_like(p, 0.1)
        for k in range(5):
            adam_step(p, np.arange(4.0) - k, st)
        return p

    np.testing.assert_array_equal(run(), run())
    with pytest.raises(ValueError):
        adam_step(np.ones(3), np.ones(4), AdamState.zeros_like(np.ones(3), 0.1))


def test_soft_update_semantics():
    t, o = critic_net(), critic_net()
    o.params[...] = 1.0
    soft_update(t, o, 0.01)
    assert np.all(t.params == 0.01)
    soft_update(t, o, 1.0)
    np.testing.assert_array_equal(t.params, o.params)
    with pytest.raises(ValueError):
        soft_update(actor_net(), critic_net(), 0.5)


def test_soft_update_fixed_point_and_convergence():
    rng = np.random.default_rng(0)
    o = critic_net().init(rng)
    t = o.copy()
    soft_update(t, o, 0.01)
    np.testing.assert_array_equal(t.params, o.params)
    t = critic_net()
    for k in range(1, 301):
        soft_update(t, o, 0.01)
    np.testing.assert_allclose(o.params - t.params, (1 - 0.01) ** 300 * o.params, atol=1e-12)


def test_ou_first_sample_and_degenerate():
    rng = np.random.default_rng(0)
    z = np.random.default_rng(0).standard_normal(2)
    n = OuNoise()
    np.testing.assert_allclose(ou_sample(n, rng), 0.0015 * z, rtol=1e-12)
    frozen = OuNoise(sigma=0.0, theta=0.0)
    for _ in range(100):
        ou_sample(frozen, rng)
    np.testing.assert_array_equal(frozen.state, 0.0)


def test_ou_stationary_std():
    n = OuNoise(size=(4000,))
    expected = n.stationary_std()
    assert expected == pytest.approx(0.0335, abs=1e-4)
    rng = np.random.default_rng(1)
    n.state = rng.normal(scale=expected, size=4000)  # start in the stationary law
    for _ in range(2000):
        n.sample(rng)
    assert abs(n.state.std() / expected - 1) < 0.2


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    a = actor_net().init(rng)
    st = AdamState.zeros_like(a.params, 0.001)
    for _ in range(3):
        adam_step(a.params, rng.normal(size=a.params.size), st)
    path = save_checkpoint(tmp_path / "c.npz", {"actor": a}, {"actor": st}, {"variant": "sca"})
    nets, opts, meta = load_checkpoint(path)
    b = nets["actor"]
    assert b.sizes == a.sizes and b.activations == a.activations and b.out_scale == a.out_scale
    np.testing.assert_array_equal(b.params, a.params)
    np.testing.assert_array_equal(opts["actor"].m, st.m)
    np.testing.assert_array_equal(opts["actor"].v, st.v)
    assert opts["actor"].step == 3 and meta == {"variant": "sca"}
    # identical content -> identical bytes
    again = save_checkpoint(tmp_path / "d.npz", {"actor": b}, opts, meta)
    assert again.read_bytes() == path.read_bytes()


def test_corrupt_checkpoint(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.npz")
