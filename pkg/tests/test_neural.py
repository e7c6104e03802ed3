import numpy as np
import pytest

from qcbm.neural import Adam, BatchNorm, MlpNet, feature_net, scorer_net


def _fd_check(net, x, upstream, train, rel=1e-5):
    """Compare backprop against central differences of <upstream, output>."""

    def objective():
        snapshot = [(l.running_mean.copy(), l.running_var.copy()) for l in net.layers if isinstance(l, BatchNorm)]
        val = float(np.sum(net.forward(x, train=train) * upstream))
        for l, (rm, rv) in zip([l for l in net.layers if isinstance(l, BatchNorm)], snapshot):
            l.running_mean, l.running_var = rm, rv
        return val

    objective()
    net.forward(x, train=train)
    net.backward(upstream)
    grads = [g.copy() for g in net.gradients()]
    h = 1e-6
    for p, g in zip(net.parameters(), grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            fp = objective()
            p[idx] = old - h
            fm = objective()
            p[idx] = old
            fd = (fp - fm) / (2 * h)
            assert abs(g[idx] - fd) <= rel * max(abs(fd), 1e-3), (idx, g[idx], fd)


@pytest.mark.parametrize("head", ["scorer", "features"])
@pytest.mark.parametrize("train", [True, False])
def test_backprop_matches_finite_differences(head, train):
    rng = np.random.default_rng(7)
    net = MlpNet(4, head, rng=rng)
    if not train:
        for l in net.layers:
            if isinstance(l, BatchNorm):
                l.running_mean = rng.normal(size=l.running_mean.shape)
                l.running_var = rng.uniform(0.5, 2, size=l.running_var.shape)
    x = rng.integers(0, 2, size=(4, 4)).astype(float) + 0.1 * rng.normal(size=(4, 4))
    out_shape = (4,) if head == "scorer" else (4, 2)
    _fd_check(net, x, rng.normal(size=out_shape), train)


def test_feature_stop_on_scorer():
    net = scorer_net(4, rng=0)
    x = np.random.default_rng(0).normal(size=(5, 4))
    f = net.features(x, train=True)
    assert f.shape == (5, 2)
    net.backward(np.ones_like(f))
    grads = net.gradients()
    assert not grads[-1].any() and not grads[-2].any()


def test_output_shapes_and_range():
    x = np.zeros((3, 6))
    s = scorer_net(6, rng=1).forward(x)
    assert s.shape == (3,) and ((s > 0) & (s < 1)).all()
    assert feature_net(6, rng=1).forward(x).shape == (3, 2)


def test_train_mode_bn_normalizes():
    net = feature_net(4, rng=3)
    f = net.forward(np.random.default_rng(0).normal(size=(64, 4)), train=True)
    np.testing.assert_allclose(f.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(f.var(axis=0), 1, atol=1e-3)


def test_running_stats_update():
    bn = BatchNorm(2)
    x = np.array([[0.0, 2.0], [2.0, 4.0]])
    bn.forward(x, train=True)
    np.testing.assert_allclose(bn.running_mean, 0.1 * np.array([1.0, 3.0]))
    np.testing.assert_allclose(bn.running_var, 0.9 + 0.1 * np.array([2.0, 2.0]))


def test_backward_before_forward():
    with pytest.raises(RuntimeError):
        scorer_net(2).backward(np.ones(3))
    with pytest.raises(RuntimeError):
        scorer_net(2).gradients()


def test_input_shape_check():
    with pytest.raises(ValueError):
        scorer_net(4).forward(np.zeros((2, 3)))


def test_save_load_roundtrip(tmp_path):
    net = scorer_net(4, rng=2)
    net.forward(np.random.default_rng(0).normal(size=(8, 4)), train=True)
    net.save(tmp_path / "net.npz")
    clone = MlpNet.load(tmp_path / "net.npz")
    x = np.random.default_rng(1).normal(size=(5, 4))
    np.testing.assert_array_equal(net.forward(x), clone.forward(x))
    copy = net.copy()
    np.testing.assert_array_equal(net.forward(x), copy.forward(x))


def test_determinism_per_seed():
    a, b = scorer_net(4, rng=9), scorer_net(4, rng=9)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)


def test_adam_first_step_is_lr_sign():
    p = np.array([1.0, -2.0])
    Adam([p], lr=0.1).step([np.array([3.0, -0.5])])
    np.testing.assert_allclose(p, [0.9, -1.9], atol=1e-7)


def test_adam_minimizes_quadratic():
    p = np.array([5.0])
    opt = Adam([p], lr=0.1)
    for _ in range(500):
        opt.step([2 * p])
    assert abs(p[0]) < 1e-2


def test_adam_validation():
    opt = Adam([np.zeros(2)])
    with pytest.raises(ValueError):
        opt.step([])
    with pytest.raises(ValueError):
        opt.step([np.zeros(3)])
