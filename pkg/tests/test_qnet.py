import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explorebench.gradcheck import check_network, run_suite
from explorebench.qnet import (
    QNetwork, apply_update, backward, clip_gradients, copy_parameters, finite_difference_gradient,
    forward, init_adam, init_network, load_network, sample_masks, save_network,
    Gradients,
)


def zero_net(dims, rate=0.0, activation="relu"):
    return QNetwork(dims, [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])],
                    [np.zeros(o) for o in dims[1:]], rate, activation)


def linear_reference(net, x):
    """Plain matrix products, no masks, no nonlinearity."""
    h = np.asarray(x, dtype=float)
    for w, b in zip(net.weights, net.biases):
        h = w @ h + b
    return h


# ---------------------------------------------------------------- init_network

def test_init_bounds_small_net():
    net = init_network([4, 2], np.random.default_rng(3))
    assert np.all(np.abs(net.weights[0]) <= 1.0)
    assert np.array_equal(net.biases[0], [0.0, 0.0])


def test_init_deterministic():
    a = init_network([4, 24, 24, 2], np.random.default_rng(11))
    b = init_network([4, 24, 24, 2], np.random.default_rng(11))
    assert np.array_equal(a.flat, b.flat)


def test_init_weight_mean_near_zero():
    ws = np.concatenate([
        np.concatenate([w.ravel() for w in init_network([4, 24, 24, 2], np.random.default_rng(s)).weights])
        for s in range(10)
    ])
    assert abs(ws.mean()) < 0.05


@pytest.mark.parametrize("dims", [[4], [], [4, 0, 2], [0, 2]])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        init_network(dims, np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=2, max_size=5))
def test_shape_chaining(dims):
    net = init_network(dims, np.random.default_rng(0))
    for l, w in enumerate(net.weights):
        assert w.shape == (dims[l + 1], dims[l])
    q, _ = forward(net, np.ones(dims[0]))
    assert q.shape == (dims[-1],)


def test_weights_are_views_of_flat_vector():
    net = init_network([3, 5, 2], np.random.default_rng(0))
    net.flat[:] = 7.0
    assert np.all(net.weights[1] == 7.0) and np.all(net.biases[0] == 7.0)


def test_dropout_rate_one_rejected():
    with pytest.raises(ValueError):
        init_network([4, 8, 2], np.random.default_rng(0), dropout_rate=1.0)


# --------------------------------------------------------------------- forward

def test_zero_network_outputs_zero():
    q, _ = forward(zero_net([4, 8, 8, 2]), np.array([1.0, -2.0, 3.0, 0.5]))
    assert np.array_equal(q, [0.0, 0.0])


def test_stochastic_with_zero_rate_matches_deterministic():
    net = init_network([4, 16, 16, 2], np.random.default_rng(1), dropout_rate=0.0)
    x = np.array([0.1, -0.2, 0.3, 0.4])
    qd, _ = forward(net, x)
    qs, _ = forward(net, x, rng=np.random.default_rng(5))
    assert np.array_equal(qd, qs)


def test_forward_rejects_wrong_width():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(net, np.zeros(3))


def test_stochastic_forward_deterministic_given_seed():
    net = init_network([4, 16, 16, 2], np.random.default_rng(1), dropout_rate=0.3)
    x = np.array([0.1, -0.2, 0.3, 0.4])
    a, _ = forward(net, x, rng=np.random.default_rng(9))
    b, _ = forward(net, x, rng=np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_dropout_expectation_on_linear_net():
    net = init_network([4, 16, 16, 2], np.random.default_rng(2), dropout_rate=0.5, activation="identity")
    net.biases[0][:] = 0.3
    net.biases[1][:] = -0.2
    x = np.array([0.5, -1.0, 0.25, 2.0])
    expected = linear_reference(net, x)
    n = 10_000
    q, _ = forward(net, np.tile(x, (n, 1)), rng=np.random.default_rng(3))
    se = q.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(q.mean(axis=0) - expected) <= 3 * se)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5])
def test_mask_entries_and_zero_fraction(p):
    net = init_network([4, 100, 100, 2], np.random.default_rng(0), dropout_rate=p)
    masks = sample_masks(net, 500, np.random.default_rng(1))
    entries = np.concatenate([m.ravel() for m in masks])
    assert entries.size == 100_000
    assert set(np.unique(entries)) <= {0.0, 1.0 / (1.0 - p)}
    assert abs(np.mean(entries == 0.0) - p) <= 0.01
    assert [m.shape for m in masks] == [(500, 100), (500, 100)]


# -------------------------------------------------------------------- backward

def test_zero_residual_gives_zero_gradients():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    x = np.array([1.0, 2.0, -1.0, 0.5])
    q, cache = forward(net, x)
    g = backward(net, cache, 1, q[1])
    assert g.loss == 0.0
    assert not np.any(g.flat)


def test_single_layer_closed_form():
    rng = np.random.default_rng(4)
    net = init_network([3, 2], rng)
    net.biases[0][:] = [0.2, -0.7]
    x = np.array([0.5, -1.5, 2.0])
    t = 3.0
    q, cache = forward(net, x)
    g = backward(net, cache, 1, t)
    expected_w = np.zeros((2, 3))
    expected_w[1] = 2 * (q[1] - t) * x
    np.testing.assert_allclose(g.weights[0], expected_w, rtol=1e-14)
    np.testing.assert_allclose(g.biases[0], [0.0, 2 * (q[1] - t)], rtol=1e-14)
    assert g.loss == pytest.approx((q[1] - t) ** 2)


def test_backward_rejects_foreign_cache():
    a = init_network([4, 8, 2], np.random.default_rng(0))
    b = init_network([4, 6, 2], np.random.default_rng(0))
    _, cache = forward(a, np.zeros(4))
    with pytest.raises(ValueError):
        backward(b, cache, 0, 1.0)


def test_backward_rejects_bad_action():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    _, cache = forward(net, np.zeros(4))
    with pytest.raises(ValueError):
        backward(net, cache, 2, 1.0)


def test_batch_gradient_is_mean_of_single_gradients():
    rng = np.random.default_rng(8)
    net = init_network([4, 8, 8, 2], rng)
    x = rng.normal(size=(5, 4))
    a = rng.integers(2, size=5)
    y = rng.normal(size=5)
    _, cache = forward(net, x)
    batch = backward(net, cache, a, y)
    singles = []
    for i in range(5):
        _, c = forward(net, x[i])
        singles.append(backward(net, c, a[i], y[i]).flat)
    np.testing.assert_allclose(batch.flat, np.mean(singles, axis=0), rtol=1e-12, atol=1e-15)


def test_gradients_flow_through_forward_mask():
    rng = np.random.default_rng(10)
    net = init_network([4, 16, 2], rng, dropout_rate=0.5)
    x = rng.normal(size=4)
    q, cache = forward(net, x, rng=rng)
    g = backward(net, cache, 0, q[0] + 1.0)
    dropped = cache.masks[0][0] == 0.0
    assert dropped.any()
    # a dropped hidden unit receives no gradient on its incoming weights
    assert not np.any(g.weights[0][dropped])
    assert not np.any(g.weights[1][:, dropped])


# ----------------------------------------------------------- finite differences

def test_finite_difference_zero_residual():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    net.biases[0][:] = 0.05
    x = np.array([0.3, -0.1, 0.2, 0.9])
    q, _ = forward(net, x)
    g = finite_difference_gradient(net, x, 0, q[0], h=1e-5)
    assert np.max(np.abs(g.flat)) < 1e-8


def test_finite_difference_rejects_bad_step():
    net = init_network([4, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        finite_difference_gradient(net, np.zeros(4), 0, 1.0, h=0.0)


def test_gradcheck_suite_twenty_networks():
    results = run_suite(20, seed=1)
    assert {tuple(r.layer_dims) for r in results} >= {(4, 64, 64, 2)}
    assert {r.dropout for r in results if r.layer_dims == [4, 64, 64, 2]} == {False, True}
    worst = max(r.max_rel_error for r in results)
    assert worst < 1e-4, worst


def test_finite_difference_second_order_convergence():
    # tanh keeps the loss smooth, so truncation error dominates at these steps
    rng = np.random.default_rng(12)
    net = init_network([3, 6, 2], rng, activation="tanh")
    net.biases[0][:] = rng.uniform(-0.5, 0.5, size=6)
    x = rng.normal(size=(2, 3))
    a = np.array([0, 1])
    y = np.array([1.5, -0.5])
    _, cache = forward(net, x)
    exact = backward(net, cache, a, y).flat
    err_h = np.abs(finite_difference_gradient(net, x, a, y, h=2e-2).flat - exact).max()
    err_half = np.abs(finite_difference_gradient(net, x, a, y, h=1e-2).flat - exact).max()
    assert 3.0 < err_h / err_half < 5.0


# ----------------------------------------------------------------------- adam

def test_adam_zero_gradients_from_zero_state_leave_params():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    before = net.flat.copy()
    state = init_adam(net)
    apply_update(net, Gradients([np.zeros_like(w) for w in net.weights],
                                [np.zeros_like(b) for b in net.biases]), state)
    assert np.array_equal(net.flat, before)
    assert state.step == 1


def test_adam_moments_decay_under_zero_gradient():
    net = init_network([2, 2], np.random.default_rng(0))
    state = init_adam(net)
    state.m[:] = 1.0
    state.v[:] = 1.0
    zero = Gradients([np.zeros((2, 2))], [np.zeros(2)])
    apply_update(net, zero, state)
    np.testing.assert_allclose(state.m, 0.9)
    np.testing.assert_allclose(state.v, 0.999)


def test_adam_first_step_by_hand():
    net = QNetwork([1, 1], [np.array([[0.5]])], [np.array([0.0])])
    g = Gradients([np.array([[0.37]])], [np.array([-2.0])])
    apply_update(net, g, init_adam(net))
    # step 1: m_hat = g, v_hat = g^2  ->  delta = -lr * g / (|g| + eps)
    assert net.weights[0][0, 0] == pytest.approx(0.5 - 1e-3 * 0.37 / (0.37 + 1e-8), abs=1e-15)
    assert net.biases[0][0] == pytest.approx(1e-3 * 2.0 / (2.0 + 1e-8), abs=1e-15)


def test_adam_rejects_shape_mismatch():
    net = init_network([4, 8, 2], np.random.default_rng(0))
    other = init_network([4, 6, 2], np.random.default_rng(0))
    g = Gradients([np.zeros_like(w) for w in other.weights], [np.zeros_like(b) for b in other.biases])
    with pytest.raises(ValueError):
        apply_update(net, g, init_adam(net))


def _train(seed):
    rng = np.random.default_rng(seed)
    net = init_network([4, 16, 16, 2], rng, dropout_rate=0.2)
    state = init_adam(net)
    for _ in range(100):
        x = rng.normal(size=(8, 4))
        _, cache = forward(net, x, rng=rng)
        apply_update(net, backward(net, cache, rng.integers(2, size=8), rng.normal(size=8)), state)
    return net


def test_training_bit_identical():
    assert np.array_equal(_train(3).flat, _train(3).flat)


def test_clip_gradients_caps_norm():
    g = Gradients([np.full((2, 2), 3.0)], [np.full(2, 4.0)])
    clipped = clip_gradients(g, 1.0)
    assert clipped.global_norm() == pytest.approx(1.0)
    assert clip_gradients(g, 100.0) is g


# -------------------------------------------------------- copies and checkpoints

def test_copy_parameters_no_aliasing():
    a = init_network([4, 8, 2], np.random.default_rng(0))
    b = init_network([4, 8, 2], np.random.default_rng(1))
    copy_parameters(a, b)
    assert np.array_equal(a.flat, b.flat)
    a.flat += 1.0
    assert not np.array_equal(a.flat, b.flat)


def test_checkpoint_round_trip(tmp_path):
    net = init_network([4, 64, 64, 2], np.random.default_rng(5), dropout_rate=0.15)
    net.biases[1][:] = np.random.default_rng(6).normal(size=64)
    path = tmp_path / "net.txt"
    save_network(net, path)
    back = load_network(path)
    assert back.layer_dims == net.layer_dims
    assert back.dropout_rate == net.dropout_rate
    assert back.activation == net.activation
    assert np.array_equal(back.flat, net.flat)
    lines = path.read_text().splitlines()
    # layer 0 weights row-major come first, then its biases
    assert float(lines[4]) == net.weights[0][0, 0]
    assert float(lines[5]) == net.weights[0][0, 1]
    assert float(lines[4 + 4 * 64]) == net.biases[0][0]


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        load_network(p)


def test_check_network_reports_small_error():
    r = check_network(np.random.default_rng(0), [4, 64, 64, 2], 0.5)
    assert r.dropout and r.passed
