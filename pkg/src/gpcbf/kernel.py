"""Squared-exponential kernel and the Gram-matrix machinery.

All GP computations in the package reduce to the four functions here.  The
kernel family is fixed to ``scale * exp(-bandwidth * ||x1 - x2||^2)``; other
C^1 symmetric positive-definite kernels can be slotted in later by swapping
this module's evaluation functions, which is why everything routes through
``kernel_eval`` / ``kernel_vector`` rather than inlining the formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters.

    ``scale`` is the output variance q(x, x); ``bandwidth`` multiplies the
    squared Euclidean distance inside the exponential.
    """

    scale: float = 100.0
    bandwidth: float = 0.5

    def __post_init__(self):
        if not (self.scale > 0.0):
            raise UsageError(f"kernel scale must be positive, got {self.scale}")
        if not (self.bandwidth > 0.0):
            raise UsageError(f"kernel bandwidth must be positive, got {self.bandwidth}")


def kernel_eval(x1, x2, params: KernelParams) -> float:
    """Evaluate q(x1, x2). Symmetric in its arguments by construction."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise UsageError(f"kernel_eval expects two equal-length vectors, got {a.shape} and {b.shape}")
    d = a - b
    return params.scale * float(np.exp(-params.bandwidth * np.dot(d, d)))


def kernel_vector(x, X, params: KernelParams) -> np.ndarray:
    """Vector of kernel values [q(x, x_1), ..., q(x, x_p)] for the rows of X."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or x.ndim != 1 or X.shape[1] != x.shape[0]:
        raise UsageError(f"kernel_vector dimension mismatch: x {x.shape} vs X {X.shape}")
    d = X - x[None, :]
    sq = np.einsum("ij,ij->i", d, d)
    return params.scale * np.exp(-params.bandwidth * sq)


def cross_gram(A, B, params: KernelParams) -> np.ndarray:
    """Kernel matrix between the rows of A (q x n) and the rows of B (p x n).

    Uses the dot-product expansion of the squared distance, which is fast for
    the few-hundred-point matrices used here; tiny negative distances from
    cancellation are clamped at zero.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise UsageError(f"cross_gram dimension mismatch: {A.shape} vs {B.shape}")
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    D = sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    D *= -params.bandwidth
    np.exp(D, out=D)
    D *= params.scale
    return D


def gram_matrix(X, params: KernelParams) -> np.ndarray:
    """Symmetric Gram matrix P(X) with entries q(x_i, x_j)."""
    P = cross_gram(X, X, params)
    # exact symmetry and exact q(x,x) on the diagonal
    P += P.T
    P *= 0.5
    np.fill_diagonal(P, params.scale)
    return P


def regularized_gram(X, params: KernelParams, noise: float) -> np.ndarray:
    """P(X) + noise^2 * I, positive definite whenever noise > 0."""
    if noise < 0.0:
        raise UsageError(f"noise level must be nonnegative, got {noise}")
    Om = gram_matrix(X, params)
    idx = np.arange(Om.shape[0])
    Om[idx, idx] += noise * noise
    return Om
