"""Sampling-based circuit gradients via the parameter-shift rule.

Every generator loss here depends on ``p_theta`` through expectations, so its
derivative w.r.t. one angle is ``sum_x dL/dp(x) * (p_plus(x) - p_minus(x)) / 2``.
Each estimator therefore builds the functional derivative ``g(x) = dL/dp(x)``
on all ``2^n`` outcomes, then contracts it with either the exact shifted
distributions (``batch_m=None``) or empirical frequencies of ``batch_m``
measurements of every shifted circuit.

Distributions and batches are both carried as weight vectors over the
``2^n`` outcomes: a batch of ``m`` bitstrings becomes its frequency vector,
and an exact table is used as is.
"""

from dataclasses import dataclass, field

import numpy as np

from .circuit import exact_distribution, shifted_distributions
from .losses import Mcr2Config, clamp_scores, second_moment
from .statevector import all_bitstrings, bits_to_index


@dataclass
class GradEstimate:
    grad: np.ndarray
    batches_used: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)


def as_weights(source, n_bits):
    """Frequency vector over ``2^n_bits`` outcomes for a bit batch or a probability table."""
    src = np.asarray(source)
    dim = 2**n_bits
    if src.ndim == 1:
        if src.size != dim:
            raise ValueError(f"probability table must have {dim} entries, got {src.size}")
        return src.astype(np.float64)
    if src.ndim != 2 or src.shape[1] != n_bits or src.shape[0] == 0:
        raise ValueError(f"expected a (m, {n_bits}) bit batch, got shape {src.shape}")
    return np.bincount(bits_to_index(src), minlength=dim) / src.shape[0]


def empirical_weights(probs, batch_m, rng):
    """Frequencies of ``batch_m`` draws from each row of ``probs``."""
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return rng.multinomial(batch_m, probs) / batch_m


def model_weights(spec, params, batch_m, rng):
    """p_theta itself (exact mode) or the frequencies of one shared batch from it."""
    probs = exact_distribution(spec, params)
    if batch_m is None:
        return probs
    return empirical_weights(probs, batch_m, rng)


def shift_contract(spec, params, g, batch_m=None, rng=None):
    """``1/2 (E_{theta+} g - E_{theta-} g)`` for every parameter."""
    if batch_m is not None and batch_m < 1:
        raise ValueError("batch_m must be >= 1")
    rng = np.random.default_rng(rng)
    p_plus, p_minus = shifted_distributions(spec, params)
    if batch_m is not None:
        f = empirical_weights(np.concatenate([p_plus, p_minus]), batch_m, rng)
        p_plus, p_minus = f[: spec.n_params], f[spec.n_params :]
    return 0.5 * (p_plus - p_minus) @ g


def _bookkeeping(spec, batch_m):
    return {
        "batch_m": batch_m,
        "theta_batches": 0 if batch_m is None else 1,
        "shifted_batches": 0 if batch_m is None else 2 * spec.n_params,
    }


# -- functional derivatives dL/dp_theta(x) on every outcome ----------------


def mmd_functional(K, w_model, w_real):
    return 2.0 * K @ (w_model - w_real)


def gan_ns_functional(scores):
    return -np.log(clamp_scores(scores))


def mcr2_explicit_functional(features, w_model, w_real, cfg=Mcr2Config()):
    """``dDeltaR/dp(x)`` with explicit features ``phi(x)`` (rows of ``features``)."""
    if not cfg.assume_centered:
        raise NotImplementedError("circuit gradients assume pre-centered features")
    d = features.shape[1]
    a, c = d / (2 * cfg.eps_sq), d / cfg.eps_sq
    Sx, Sy = second_moment(features, w_model), second_moment(features, w_real)
    eye = np.eye(d)
    inv_xy = np.linalg.solve(eye + a * (Sx + Sy), eye)
    inv_x = np.linalg.solve(eye + c * Sx, eye)
    quad_xy = np.einsum("xi,ij,xj->x", features, inv_xy, features)
    quad_x = np.einsum("xi,ij,xj->x", features, inv_x, features)
    return 0.5 * a * quad_xy - 0.25 * c * quad_x


def _woodbury_quad(K_all, idx, w, scale):
    """``k(x)^T W^1/2 (I + scale W^1/2 K W^1/2)^-1 W^1/2 k(x)`` over columns ``idx``."""
    root = np.sqrt(w)
    Kt = K_all[:, idx] * root  # (N, k)
    inner = np.eye(len(idx)) + scale * root[:, None] * K_all[np.ix_(idx, idx)] * root[None, :]
    return np.einsum("xi,ix->x", Kt, np.linalg.solve(inner, Kt.T))


def mcr2_kernel_functional(K_all, w_model, w_real, feature_dim, cfg=Mcr2Config(), diag=None):
    """Kernel-only form of :func:`mcr2_explicit_functional` via the Woodbury identity.

    Returns ``(g, diag_part)`` where ``diag_part`` is the ``K(x, x)`` share of ``g``.
    """
    d = feature_dim
    a, c = d / (2 * cfg.eps_sq), d / cfg.eps_sq
    if diag is None:
        diag = np.diag(K_all)
    sup_x = np.flatnonzero(w_model > 0)
    sup_y = np.flatnonzero(w_real > 0)
    idx_t = np.concatenate([sup_x, sup_y])
    w_t = np.concatenate([w_model[sup_x], w_real[sup_y]])
    quad_t = _woodbury_quad(K_all, idx_t, w_t, a)
    quad_x = _woodbury_quad(K_all, sup_x, w_model[sup_x], c)
    diag_part = (0.5 * a - 0.25 * c) * diag
    g = diag_part - 0.5 * a * a * quad_t + 0.25 * c * c * quad_x
    return g, diag_part


# -- estimators -------------------------------------------------------------


def grad_mmd(spec, params, kernel, real, batch_m=None, rng=None):
    """MMD gradient; ``real`` is a bit batch from p* or the exact p* table."""
    rng = np.random.default_rng(rng)
    pts = all_bitstrings(spec.n_qubits)
    w_model = model_weights(spec, params, batch_m, rng)
    g = mmd_functional(kernel(pts, pts), w_model, as_weights(real, spec.n_qubits))
    return GradEstimate(shift_contract(spec, params, g, batch_m, rng), _bookkeeping(spec, batch_m))


def grad_gan_ns(spec, params, net, batch_m=None, rng=None):
    """Generator gradient of ``-E ln D(x)`` with the scorer in eval mode."""
    pts = all_bitstrings(spec.n_qubits)
    g = gan_ns_functional(net.forward(pts, train=False))
    return GradEstimate(shift_contract(spec, params, g, batch_m, rng), _bookkeeping(spec, batch_m))


def grad_mcr2_explicit(spec, params, net, real, cfg=Mcr2Config(), batch_m=None, rng=None):
    """Coding-rate-reduction gradient using the net's 2-unit features explicitly."""
    rng = np.random.default_rng(rng)
    pts = all_bitstrings(spec.n_qubits)
    feats = net.features(pts, train=False)
    if not np.all(np.isfinite(feats)):
        raise ValueError("non-finite features")
    w_model = model_weights(spec, params, batch_m, rng)
    g = mcr2_explicit_functional(feats, w_model, as_weights(real, spec.n_qubits), cfg)
    return GradEstimate(shift_contract(spec, params, g, batch_m, rng), _bookkeeping(spec, batch_m))


def grad_mcr2_kernel(spec, params, kernel, real, cfg=Mcr2Config(), batch_m=None, rng=None,
                     net=None, feature_dim=None):
    """Coding-rate-reduction gradient from kernel evaluations only.

    ``kernel(A, B)`` is applied to the net's features when ``net`` is given,
    otherwise to raw bit vectors. ``feature_dim`` defaults to the net's.
    """
    rng = np.random.default_rng(rng)
    pts = all_bitstrings(spec.n_qubits)
    inputs = net.features(pts, train=False) if net is not None else pts.astype(np.float64)
    if feature_dim is None:
        feature_dim = net.feature_dim if net is not None else spec.n_qubits
    K_all = kernel(inputs, inputs)
    w_model = model_weights(spec, params, batch_m, rng)
    g, diag_part = mcr2_kernel_functional(
        K_all, w_model, as_weights(real, spec.n_qubits), feature_dim, cfg
    )
    p_plus, p_minus = shifted_distributions(spec, params)
    if batch_m is not None:
        f = empirical_weights(np.concatenate([p_plus, p_minus]), batch_m, rng)
        p_plus, p_minus = f[: spec.n_params], f[spec.n_params :]
    diff = 0.5 * (p_plus - p_minus)
    return GradEstimate(
        diff @ g,
        _bookkeeping(spec, batch_m),
        {"diagonal": diff @ diag_part, "raw_diagonal": diff @ np.diag(K_all)},
    )


def grad_deep_mmd(spec, params, net, kernel, real, batch_m=None, rng=None):
    """MMD gradient with the kernel applied to ``f_phi`` features (net frozen)."""
    rng = np.random.default_rng(rng)
    pts = all_bitstrings(spec.n_qubits)
    feats = net.forward(pts, train=False)
    w_model = model_weights(spec, params, batch_m, rng)
    g = mmd_functional(kernel(feats, feats), w_model, as_weights(real, spec.n_qubits))
    return GradEstimate(shift_contract(spec, params, g, batch_m, rng), _bookkeeping(spec, batch_m))
