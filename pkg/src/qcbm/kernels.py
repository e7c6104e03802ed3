"""Multi-scale Gaussian (RBF) mixture kernel.

``K(x, y) = 1/c * sum_i exp(-|x - y|^2 / (2 * sigma_i))``. Note that each
``sigma_i`` enters unsquared, i.e. it plays the role of a variance.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_BANDWIDTHS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class RbfKernel:
    bandwidths: tuple = DEFAULT_BANDWIDTHS

    def __post_init__(self):
        bw = tuple(float(s) for s in np.atleast_1d(self.bandwidths))
        if not bw or any(not (s > 0 and np.isfinite(s)) for s in bw):
            raise ValueError(f"bandwidths must be positive and finite, got {self.bandwidths}")
        object.__setattr__(self, "bandwidths", bw)

    @property
    def count(self):
        return len(self.bandwidths)

    def __call__(self, A, B):
        return kernel_matrix(self, A, B)

    def diagonal(self, A):
        return np.ones(np.asarray(A).shape[0])


def sq_distances(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_from_sq(kernel, sq):
    sig = np.asarray(kernel.bandwidths)
    return np.exp(-sq[..., None] / (2 * sig)).mean(axis=-1)


def kernel_value(kernel, x, y):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    sq = float(np.sum((x - y) ** 2))
    return float(np.mean([np.exp(-sq / (2 * s)) for s in kernel.bandwidths]))


def kernel_matrix(kernel, A, B):
    return kernel_from_sq(kernel, sq_distances(A, B))


def kernel_grad_wrt_first(kernel, A, B):
    """``dK(a_i, b_j)/da_i`` as an array of shape (len(A), len(B), dim)."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    diff = A[:, None, :] - B[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    sig = np.asarray(kernel.bandwidths)
    coef = (np.exp(-sq[..., None] / (2 * sig)) / sig).mean(axis=-1)
    return -coef[..., None] * diff


class LinearKernel:
    """``K(x, y) = x . y``; used to check the kernel-form MCR2 gradient."""

    def __call__(self, A, B):
        return np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64).T

    def diagonal(self, A):
        A = np.asarray(A, dtype=np.float64)
        return np.einsum("ij,ij->i", A, A)
