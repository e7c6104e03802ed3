"""Loss objectives on finite batches or on exact distributions.

Sample batches are ``(m, dim)`` arrays, one sample per row. Most functions
accept optional per-row weights so the same code evaluates a batch
(uniform ``1/m`` weights) or an exact distribution (probability weights over
every basis string).
"""

from dataclasses import dataclass

import numpy as np

from .kernels import kernel_grad_wrt_first

SCORE_CLAMP = 1e-7


def _weights(n, w):
    if w is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} does not match {n} rows")
    return w


def _rows(batch, name):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (m, dim) array")
    return batch


def mmd_loss(kernel, gen, real, w_gen=None, w_real=None):
    """Plug-in (V-statistic) MMD^2 estimate including self-pairs."""
    gen, real = _rows(gen, "gen"), _rows(real, "real")
    wg, wr = _weights(len(gen), w_gen), _weights(len(real), w_real)
    return float(
        wg @ kernel(gen, gen) @ wg - 2 * wg @ kernel(gen, real) @ wr + wr @ kernel(real, real) @ wr
    )


def mmd_feature_grads(kernel, gen, real, w_gen=None, w_real=None):
    """Gradients of :func:`mmd_loss` (RBF kernel) w.r.t. every gen and real row."""
    gen, real = _rows(gen, "gen"), _rows(real, "real")
    wg, wr = _weights(len(gen), w_gen), _weights(len(real), w_real)
    dgg = kernel_grad_wrt_first(kernel, gen, gen)
    dgr = kernel_grad_wrt_first(kernel, gen, real)
    drg = kernel_grad_wrt_first(kernel, real, gen)
    drr = kernel_grad_wrt_first(kernel, real, real)
    # each symmetric pair term contributes twice
    g_gen = 2 * wg[:, None] * np.einsum("j,ijk->ik", wg, dgg) - 2 * wg[:, None] * np.einsum(
        "j,ijk->ik", wr, dgr
    )
    g_real = 2 * wr[:, None] * np.einsum("j,ijk->ik", wr, drr) - 2 * wr[:, None] * np.einsum(
        "j,ijk->ik", wg, drg
    )
    return g_gen, g_real


def clamp_scores(scores):
    return np.clip(np.asarray(scores, dtype=np.float64), SCORE_CLAMP, 1 - SCORE_CLAMP)


def gan_ns_losses(scores_real, scores_gen):
    """Non-saturating GAN losses ``(loss_D, loss_G)`` from discriminator scores."""
    sr, sg = np.asarray(scores_real, dtype=np.float64), np.asarray(scores_gen, dtype=np.float64)
    if sr.size == 0 or sg.size == 0:
        raise ValueError("score vectors must be non-empty")
    sr, sg = clamp_scores(sr), clamp_scores(sg)
    loss_d = -np.mean(np.log(sr)) - np.mean(np.log1p(-sg))
    loss_g = -np.mean(np.log(sg))
    return float(loss_d), float(loss_g)


def gan_d_score_grads(scores_real, scores_gen):
    """``dloss_D/dscore`` for real and generated scores (zero where clamped)."""
    sr, sg = np.asarray(scores_real, dtype=np.float64), np.asarray(scores_gen, dtype=np.float64)
    live_r = (sr > SCORE_CLAMP) & (sr < 1 - SCORE_CLAMP)
    live_g = (sg > SCORE_CLAMP) & (sg < 1 - SCORE_CLAMP)
    g_real = np.where(live_r, -1.0 / (sr.size * clamp_scores(sr)), 0.0)
    g_gen = np.where(live_g, 1.0 / (sg.size * (1 - clamp_scores(sg))), 0.0)
    return g_real, g_gen


def interpolated_g_loss(alpha, loss_g_ns, delta_r):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return (1 - alpha) * loss_g_ns + alpha * delta_r


# -- coding rate reduction -------------------------------------------------


@dataclass(frozen=True)
class Mcr2Config:
    eps_sq: float = 0.5
    assume_centered: bool = True

    def __post_init__(self):
        if not self.eps_sq > 0:
            raise ValueError("eps_sq must be positive")


def logdet_spd(A, jitter=1e-12):
    """log det of a symmetric positive definite matrix via Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(A + jitter * np.eye(len(A)))
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def second_moment(F, w=None):
    """Weighted ``sum_i w_i f_i f_i^T`` (``1/m X X^T`` for uniform weights)."""
    F = np.asarray(F, dtype=np.float64)
    w = _weights(len(F), w)
    return (F * w[:, None]).T @ F


def _prepare(F, w, cfg):
    F = np.asarray(F, dtype=np.float64)
    if not np.all(np.isfinite(F)):
        raise ValueError("features must be finite")
    if not cfg.assume_centered:
        F = F - _weights(len(F), w) @ F
    return F


def mcr2_from_moments(Sx, Sy, eps_sq):
    """Coding rate reduction from the two second-moment matrices."""
    d = Sx.shape[0]
    eye = np.eye(d)
    a = d / (2 * eps_sq)
    c = d / eps_sq
    return (
        0.5 * logdet_spd(eye + a * (Sx + Sy))
        - 0.25 * logdet_spd(eye + c * Sx)
        - 0.25 * logdet_spd(eye + c * Sy)
    )


def mcr2_distance(X, Y, cfg=Mcr2Config(), w_x=None, w_y=None):
    """Coding rate reduction between feature batches ``X`` and ``Y`` (rows are samples)."""
    X, Y = _rows(X, "X"), _rows(Y, "Y")
    if w_x is None and w_y is None and len(X) != len(Y):
        raise ValueError(f"batch sizes differ: {len(X)} vs {len(Y)}")
    if X.shape[1] != Y.shape[1]:
        raise ValueError("feature dimensions differ")
    X, Y = _prepare(X, w_x, cfg), _prepare(Y, w_y, cfg)
    return mcr2_from_moments(second_moment(X, w_x), second_moment(Y, w_y), cfg.eps_sq)


def mcr2_feature_grads(X, Y, cfg=Mcr2Config(), w_x=None, w_y=None):
    """Gradient of :func:`mcr2_distance` w.r.t. the rows of ``X`` and ``Y``."""
    X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
    if not cfg.assume_centered:
        raise NotImplementedError("feature gradients assume pre-centered features")
    wx, wy = _weights(len(X), w_x), _weights(len(Y), w_y)
    d = X.shape[1]
    eye = np.eye(d)
    a, c = d / (2 * cfg.eps_sq), d / cfg.eps_sq
    Sx, Sy = second_moment(X, wx), second_moment(Y, wy)
    inv_xy = np.linalg.inv(eye + a * (Sx + Sy))
    inv_x = np.linalg.inv(eye + c * Sx)
    inv_y = np.linalg.inv(eye + c * Sy)
    gX = wx[:, None] * (a * X @ inv_xy - 0.5 * c * X @ inv_x)
    gY = wy[:, None] * (a * Y @ inv_xy - 0.5 * c * Y @ inv_y)
    return gX, gY


# -- deep kernel -----------------------------------------------------------


def deep_kernel_mmd_loss(net, kernel, gen, real, train=False):
    """MMD between the feature images ``f_phi(gen)`` and ``f_phi(real)``."""
    if net.head != "features":
        raise ValueError("deep-kernel MMD needs a feature-mapper network")
    feats = net.forward(np.concatenate([gen, real]), train=train)
    return mmd_loss(kernel, feats[: len(gen)], feats[len(gen) :])


# -- losses as functions of exact distributions ----------------------------


def mmd_on_distributions(kernel, p, q, points):
    K = kernel(points, points)
    diff = np.asarray(p) - np.asarray(q)
    return float(diff @ K @ diff)


def gan_g_on_distribution(scores, p):
    return float(-np.asarray(p) @ np.log(clamp_scores(scores)))


def mcr2_on_distributions(features, p, q, cfg=Mcr2Config()):
    return mcr2_distance(features, features, cfg, w_x=p, w_y=q)
