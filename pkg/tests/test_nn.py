import numpy as np
import pytest

from tradelab.nn import (AdamState, BatchNorm, Mlp, NumericsError, adam_step,
                         finite_difference_check, huber_loss, mse_loss,
                         soft_update)

RNG = np.random.default_rng(1234)


# -- forward contracts -------------------------------------------------------

def test_zero_weight_network_outputs_zero():
    net = Mlp([3, 8, 2], np.random.default_rng(0), input_norm=False)
    for p in net.params():
        p[...] = 0.0
    out = net.forward(RNG.standard_normal((5, 3)))
    assert np.all(out == 0.0)


def test_single_linear_layer_matches_hand_matmul():
    net = Mlp([2, 3], np.random.default_rng(0), input_norm=False)
    x = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]])
    w, b = net.params()
    assert np.allclose(net.forward(x), x @ w + b, atol=1e-15)


def test_batchnorm_train_mode_standardizes():
    net = Mlp([4, 2], np.random.default_rng(0), input_norm=True)
    x = RNG.standard_normal((64, 4)) * 3.0 + 5.0
    bn = net.layers[0]
    out = bn.forward(x, train=True)
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(out.var(axis=0), 1.0, atol=1e-3)


def test_batchnorm_train_eval_consistency_after_convergence():
    # once the running stats have converged on a fixed input
    # distribution, train and eval modes agree
    bn = BatchNorm(3, momentum=0.9)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((256, 3)) * 2.0 + 1.0
    for _ in range(500):
        bn.update_running(x)
    train_out = bn.forward(x, train=True)
    eval_out = bn.forward(x, train=False)
    assert np.max(np.abs(train_out - eval_out)) < 1e-2


def test_nan_poisoning_detected():
    net = Mlp([2, 4, 1], np.random.default_rng(0))
    x = np.array([[1.0, float("nan")]])
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(NumericsError):
            net.forward(x)
        net.params()[2][0, 0] = float("inf")  # first dense weight
        with pytest.raises(NumericsError):
            net.forward(np.ones((4, 2)), train=True)


def test_shape_mismatch_rejected():
    net = Mlp([2, 4, 1], np.random.default_rng(0), input_norm=False)
    with pytest.raises(ValueError):
        net.forward(np.ones((3, 5)))


def test_backward_requires_forward():
    net = Mlp([2, 4, 1], np.random.default_rng(0))
    with pytest.raises(RuntimeError):
        net.backward(np.ones((1, 1)))


# -- losses -------------------------------------------------------------------

def test_huber_values_and_continuity():
    loss0, g0 = huber_loss(np.array([1.0]), np.array([1.0]), delta=1.0)
    assert loss0 == 0.0 and np.all(g0 == 0.0)
    loss_q, _ = huber_loss(np.array([0.5]), np.array([0.0]), delta=1.0)
    assert loss_q == pytest.approx(0.125)
    loss_l, _ = huber_loss(np.array([2.0]), np.array([0.0]), delta=1.0)
    assert loss_l == pytest.approx(1.5)
    # continuity at |e| = delta: both branches give 0.5
    at_delta_quad = 0.5 * 1.0 ** 2
    at_delta_lin = 1.0 * (1.0 - 0.5)
    assert at_delta_quad == at_delta_lin == 0.5
    loss_at, _ = huber_loss(np.array([1.0]), np.array([0.0]), delta=1.0)
    assert loss_at == pytest.approx(0.5)


def test_huber_equals_half_mse_inside_delta():
    rng = np.random.default_rng(3)
    pred = rng.uniform(-0.5, 0.5, 32)
    target = rng.uniform(-0.4, 0.4, 32)
    h, _ = huber_loss(pred, target, delta=1.0)
    m, _ = mse_loss(pred, target)
    assert h == pytest.approx(0.5 * m, rel=1e-12)


def test_huber_gradient_clipped():
    _, g = huber_loss(np.array([5.0, -3.0, 0.2]), np.zeros(3), delta=1.0)
    assert np.allclose(g, np.array([1.0, -1.0, 0.2]) / 3)


def test_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    pred = rng.standard_normal(16) * 2
    target = rng.standard_normal(16)
    for loss_fn in (lambda p: huber_loss(p, target, 1.0),
                    lambda p: mse_loss(p, target)):
        _, grad = loss_fn(pred)
        err = finite_difference_check(lambda: loss_fn(pred)[0],
                                      [pred], [grad])
        assert err < 1e-4


# -- gradient checks ----------------------------------------------------------

def _net_loss(net, x, target, train):
    def f():
        out = net.forward(x, train=train)
        return huber_loss(out.reshape(-1), target, 2.0)[0]
    return f


@pytest.mark.parametrize("train", [False, True])
@pytest.mark.parametrize("norm", [False, True])
def test_mlp_gradients_vs_finite_differences(train, norm):
    rng = np.random.default_rng(5)
    net = Mlp([3, 6, 4, 2], rng, input_norm=norm)
    assert net.num_params() <= 200
    x = rng.standard_normal((8, 3))
    target = rng.standard_normal(16)
    out = net.forward(x, train=train)
    _, dout = huber_loss(out.reshape(-1), target, 2.0)
    grads = [g.copy() for g in net.backward(dout.reshape(out.shape))]
    err = finite_difference_check(_net_loss(net, x, target, train),
                                  net.params(), grads)
    assert err < 1e-4


def test_mlp_gradients_mse_eval_mode():
    rng = np.random.default_rng(15)
    net = Mlp([2, 5, 3], rng, input_norm=True)
    x = rng.standard_normal((6, 2))
    target = rng.standard_normal(18)

    def loss():
        out = net.forward(x, train=False)
        return mse_loss(out.reshape(-1), target)[0]

    out = net.forward(x, train=False)
    _, dout = mse_loss(out.reshape(-1), target)
    grads = [g.copy() for g in net.backward(dout.reshape(out.shape))]
    err = finite_difference_check(loss, net.params(), grads)
    assert err < 1e-4


def test_zero_upstream_gives_zero_grads():
    net = Mlp([2, 4, 3], np.random.default_rng(2))
    out = net.forward(RNG.standard_normal((5, 2)), train=True)
    grads = net.backward(np.zeros_like(out))
    for g in grads:
        assert np.all(g == 0.0)


def test_batch_gradient_is_sum_of_per_sample_gradients():
    rng = np.random.default_rng(9)
    net = Mlp([2, 4, 1], rng, input_norm=False)
    x = rng.standard_normal((4, 2))
    up = rng.standard_normal((4, 1))
    net.forward(x)
    batch_grads = [g.copy() for g in net.backward(up)]
    acc = [np.zeros_like(g) for g in batch_grads]
    for i in range(4):
        net.forward(x[i:i + 1])
        for a, g in zip(acc, net.backward(up[i:i + 1])):
            a += g
    for a, g in zip(acc, batch_grads):
        assert np.allclose(a, g, atol=1e-12)


# -- adam ----------------------------------------------------------------------

def test_adam_single_step_algebra():
    # from zero moments, one step with constant gradient g moves
    # parameters by -lr * g / (|g| + eps)
    p = np.array([1.0, -2.0])
    g = np.array([0.3, -0.7])
    st = AdamState(lr=0.01, beta1=0.5, beta2=0.75, eps=0.1)
    adam_step(st, [p], [g])
    expect = np.array([1.0, -2.0]) - 0.01 * g / (np.abs(g) + 0.1)
    assert np.allclose(p, expect, atol=1e-15)


def test_adam_zero_gradient_no_movement():
    p = np.array([1.0, 2.0, 3.0])
    st = AdamState(lr=0.1)
    for _ in range(5):
        adam_step(st, [p], [np.zeros(3)])
    assert np.array_equal(p, [1.0, 2.0, 3.0])


def test_adam_determinism():
    def run():
        rng = np.random.default_rng(4)
        p = np.ones(5)
        st = AdamState(lr=0.01, beta1=0.5, beta2=0.75, eps=0.1)
        for _ in range(50):
            adam_step(st, [p], [rng.standard_normal(5)])
        return p
    assert np.array_equal(run(), run())


def test_adam_lr_decay_schedule():
    st = AdamState(lr=0.005, decay_rate=0.999, decay_every=100)
    p = np.zeros(1)
    for _ in range(100):
        adam_step(st, [p], [np.ones(1)])
    assert st.current_lr() == pytest.approx(0.005 * 0.999)
    st2 = AdamState(lr=0.005, decay_rate=0.999, decay_every=100,
                    step=3000)
    # an order of magnitude lower by the end of a 3e5-step run
    assert st2.current_lr() == pytest.approx(0.005 * 0.999 ** 30)


# -- network state ---------------------------------------------------------------

def test_soft_update_exact_blend():
    tau = 0.9
    a = Mlp([2, 4, 3], np.random.default_rng(0))
    b = Mlp([2, 4, 3], np.random.default_rng(1))
    expect = [tau * t + (1.0 - tau) * o
              for t, o in zip(a.state_arrays(), b.state_arrays())]
    soft_update(a, b, tau=tau)
    for got, want in zip(a.state_arrays(), expect):
        assert np.array_equal(got, want)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    net = Mlp([2, 16, 8, 5], np.random.default_rng(3))
    net.forward(RNG.standard_normal((32, 2)), train=True)  # move BN stats
    f = tmp_path / "net.npz"
    net.save(f)
    back = Mlp.load(f)
    for a, b in zip(net.state_arrays(), back.state_arrays()):
        assert np.array_equal(a, b)
    x = RNG.standard_normal((4, 2))
    assert np.array_equal(net.forward(x), back.forward(x))
