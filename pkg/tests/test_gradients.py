import numpy as np
import pytest

from qcbm.bas import BasSpec, sample_target, target_distribution
from qcbm.circuit import CircuitSpec, exact_distribution, init_params
from qcbm.gradients import (
    as_weights,
    grad_deep_mmd,
    grad_gan_ns,
    grad_mcr2_explicit,
    grad_mcr2_kernel,
    grad_mmd,
)
from qcbm.kernels import LinearKernel, RbfKernel
from qcbm.losses import mmd_on_distributions
from qcbm.neural import feature_net, scorer_net
from qcbm.statevector import all_bitstrings

SPEC = CircuitSpec(4, 3)
BAS = BasSpec(2, 2)


def test_as_weights():
    np.testing.assert_array_equal(as_weights([[0, 1], [0, 1], [1, 1], [0, 0]], 2), [0.25, 0.5, 0, 0.25])
    p = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(as_weights(p, 2), p)
    with pytest.raises(ValueError):
        as_weights(np.zeros((3, 3)), 2)
    with pytest.raises(ValueError):
        as_weights(np.zeros(5), 2)


def test_batch_bookkeeping():
    theta = init_params(SPEC, 0)
    real = sample_target(BAS, 4, rng=0)
    est = grad_mmd(SPEC, theta, RbfKernel(), real, batch_m=4, rng=1)
    assert est.grad.shape == (40,)
    assert est.batches_used == {"batch_m": 4, "theta_batches": 1, "shifted_batches": 80}
    exact = grad_mmd(SPEC, theta, RbfKernel(), target_distribution(BAS))
    assert exact.batches_used["shifted_batches"] == 0


def test_same_seed_same_estimate():
    theta = init_params(SPEC, 0)
    real = sample_target(BAS, 4, rng=0)
    a = grad_mmd(SPEC, theta, RbfKernel(), real, batch_m=4, rng=5).grad
    b = grad_mmd(SPEC, theta, RbfKernel(), real, batch_m=4, rng=5).grad
    np.testing.assert_array_equal(a, b)


def test_target_gives_zero_mmd_gradient_at_target():
    # gradient vanishes when p_theta already equals the real weights
    spec = CircuitSpec(2, 1)
    theta = init_params(spec, 3)
    p = exact_distribution(spec, theta)
    np.testing.assert_allclose(grad_mmd(spec, theta, RbfKernel(), p).grad, 0, atol=1e-14)


def test_sampled_mmd_gradient_is_unbiased():
    spec = CircuitSpec(2, 1)
    theta = init_params(spec, 4)
    q = np.array([0.5, 0, 0, 0.5])
    exact = grad_mmd(spec, theta, RbfKernel(), q).grad
    rng = np.random.default_rng(0)
    draws = np.array([grad_mmd(spec, theta, RbfKernel(), q, batch_m=8, rng=rng).grad for _ in range(4000)])
    se = draws.std(axis=0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - exact) < 5 * se + 1e-12)


def test_exact_mmd_gradient_against_finite_differences():
    spec = CircuitSpec(3, 2)
    theta = init_params(spec, 8)
    q = np.random.default_rng(0).dirichlet(np.ones(8))
    pts = all_bitstrings(3)
    kern = RbfKernel()
    grad = grad_mmd(spec, theta, kern, q).grad
    h = 1e-6
    for k in range(spec.n_params):
        e = np.zeros(spec.n_params)
        e[k] = h
        fd = (
            mmd_on_distributions(kern, exact_distribution(spec, theta + e), q, pts)
            - mmd_on_distributions(kern, exact_distribution(spec, theta - e), q, pts)
        ) / (2 * h)
        assert grad[k] == pytest.approx(fd, abs=1e-8)


def test_sampled_estimators_run_and_are_finite():
    theta = init_params(SPEC, 1)
    real = sample_target(BAS, 4, rng=2)
    s, f = scorer_net(4, rng=0), feature_net(4, rng=0)
    for est in (
        grad_gan_ns(SPEC, theta, s, batch_m=4, rng=0),
        grad_mcr2_explicit(SPEC, theta, s, real, batch_m=4, rng=0),
        grad_deep_mmd(SPEC, theta, f, RbfKernel(), real, batch_m=4, rng=0),
    ):
        assert est.grad.shape == (40,) and np.all(np.isfinite(est.grad))


def test_kernel_form_matches_explicit_on_sampled_batches():
    theta = init_params(SPEC, 6)
    real = sample_target(BAS, 4, rng=3)
    net = scorer_net(4, rng=2)
    a = grad_mcr2_explicit(SPEC, theta, net, real, batch_m=4, rng=11).grad
    b = grad_mcr2_kernel(SPEC, theta, LinearKernel(), real, batch_m=4, rng=11, net=net).grad
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_rbf_kernel_form_diagonal_term_is_zero():
    # K(x, x) = 1 for RBF so its share of the gradient cancels exactly
    theta = init_params(SPEC, 6)
    est = grad_mcr2_kernel(SPEC, theta, RbfKernel(), target_distribution(BAS), feature_dim=2,
                           net=feature_net(4, rng=1))
    np.testing.assert_allclose(est.terms["raw_diagonal"], 0, atol=1e-12)


class _ConstScorer:
    head = "scorer"

    def __init__(self, fn):
        self.fn = fn

    def forward(self, x, train=False, features=False):
        return self.fn(np.asarray(x, dtype=float))


class _Identity:
    head = "features"

    def forward(self, x, train=False, features=False):
        return np.asarray(x, dtype=float)


def test_single_qubit_mmd_stationary_at_target():
    spec = CircuitSpec(1, 0)
    est = grad_mmd(spec, [np.pi / 2], RbfKernel(), np.array([0.5, 0.5]))
    assert abs(est.grad[0]) < 1e-8


def test_constant_discriminator_gives_zero_gradient():
    theta = init_params(SPEC, 2)
    est = grad_gan_ns(SPEC, theta, _ConstScorer(lambda x: np.full(len(x), 0.5)))
    np.testing.assert_allclose(est.grad, 0.0, atol=1e-14)


def test_gan_gradient_sign():
    # D favours |1>; raising the RY angle (towards pi) raises p(1) and lowers the loss
    spec = CircuitSpec(1, 0)
    net = _ConstScorer(lambda x: np.where(x[:, 0] > 0, 0.9, 0.1))
    assert grad_gan_ns(spec, [1.0], net).grad[0] < 0


def test_sampled_gan_gradient_matches_analytic_mean():
    spec = CircuitSpec(2, 1)
    theta = init_params(spec, 7)
    net = scorer_net(2, rng=4)
    exact = grad_gan_ns(spec, theta, net).grad
    rng = np.random.default_rng(1)
    draws = np.array([grad_gan_ns(spec, theta, net, batch_m=4, rng=rng).grad for _ in range(200)])
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - exact) <= 3 * se + 1e-12)


def test_deep_mmd_with_identity_features_is_image_mmd():
    theta = init_params(SPEC, 3)
    p = target_distribution(BAS)
    a = grad_deep_mmd(SPEC, theta, _Identity(), RbfKernel(), p).grad
    b = grad_mmd(SPEC, theta, RbfKernel(), p).grad
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_deep_mmd_zero_at_target():
    spec = CircuitSpec(2, 1)
    theta = init_params(spec, 1)
    p = exact_distribution(spec, theta)
    est = grad_deep_mmd(spec, theta, feature_net(2, rng=0), RbfKernel(), p)
    np.testing.assert_allclose(est.grad, 0, atol=1e-14)


def test_woodbury_identity():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 5))
    a = 0.7
    direct = np.linalg.inv(np.eye(3) + a * M @ M.T)
    woodbury = np.eye(3) - a * M @ np.linalg.inv(np.eye(5) + a * M.T @ M) @ M.T
    np.testing.assert_allclose(direct, woodbury, atol=1e-10)
