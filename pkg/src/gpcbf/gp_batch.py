"""Direct (non-recursive) GP predictive mean, deviation, and bound factor.

This is the reference path: it factorizes the regularized Gram matrix once
and answers queries by triangular solves.  The streaming module initializes
from it and is tested against it; linear solves here go through a Cholesky
factorization rather than an explicit inverse.

The deterministic error bound is ``phi(x) = B * sigma(x)`` with per-output
bound factors ``B_i = sqrt(b^2 - (Y^T Omega^-1 Y)_ii + p)``, valid whenever
each output of the unknown function lies in the kernel's RKHS with norm at
most ``b`` and the measurement noise is bounded by the noise level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalFailure, UsageError
from .kernel import KernelParams, cross_gram, kernel_vector, regularized_gram

# sigma radicand below -SIGMA_CLAMP_REL * scale means the inverse is corrupted
SIGMA_CLAMP_REL = 1e-9


@dataclass
class BoundedEstimate:
    """Prediction at one query point: mean, deviation, and error bound."""

    mean: np.ndarray          # (n_out,)
    sigma: float              # shared across outputs
    bound_factor: np.ndarray  # (n_out,)
    phi: np.ndarray           # bound_factor * sigma, elementwise


@dataclass
class Diagnostics:
    """Counters for clamped radicands; nonzero bound clamps flag an
    underestimated RKHS bound."""

    sigma_clamps: int = 0
    bound_clamps: int = 0


@dataclass
class BatchModel:
    X: np.ndarray             # (p, n_in)
    Y: np.ndarray             # (p, n_out)
    params: KernelParams
    noise: float
    rkhs_bound: float
    _chol: tuple = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)  # Omega^-1 Y
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def omega_inverse(self) -> np.ndarray:
        return cho_solve(self._chol, np.eye(self.size))


def fit(X, Y, params: KernelParams, noise: float, rkhs_bound: float) -> BatchModel:
    """Build a batch model by factorizing Omega(X) = P(X) + noise^2 I."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise UsageError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
        raise UsageError("data contains non-finite entries")
    Om = regularized_gram(X, params, noise)
    try:
        chol = cho_factor(Om, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            "regularized Gram matrix is not positive definite; "
            "noise = 0 with duplicate points?"
        ) from exc
    weights = cho_solve(chol, Y)
    return BatchModel(X=X, Y=Y, params=params, noise=noise,
                      rkhs_bound=rkhs_bound, _chol=chol, weights=weights)


def batch_mean(x, model: BatchModel) -> np.ndarray:
    """Predictive mean Y^T Omega^-1 Q(x, X)."""
    q = kernel_vector(x, model.X, model.params)
    return model.weights.T @ q


def batch_sigma(x, model: BatchModel) -> float:
    """Predictive deviation sqrt(q(x,x) - Q^T Omega^-1 Q), clamped at zero
    when round-off pushes the radicand slightly negative."""
    q = kernel_vector(x, model.X, model.params)
    rad = model.params.scale - float(q @ cho_solve(model._chol, q))
    return _sigma_from_radicand(rad, model.params.scale, model.diagnostics)


def _sigma_from_radicand(rad: float, scale: float, diag: Diagnostics) -> float:
    if rad < -SIGMA_CLAMP_REL * scale:
        raise NumericalFailure(f"sigma radicand {rad} is negative beyond round-off")
    if rad < 0.0:
        diag.sigma_clamps += 1
        return 0.0
    return float(np.sqrt(rad))


def _bound_from_gram_diag(diag_vals: np.ndarray, rkhs_bound: float, p: int,
                          diag: Diagnostics) -> np.ndarray:
    rad = rkhs_bound * rkhs_bound - diag_vals + p
    neg = rad < 0.0
    if np.any(neg):
        diag.bound_clamps += int(np.count_nonzero(neg))
        rad = np.maximum(rad, 0.0)
    return np.sqrt(rad)


def batch_bound_factor(model: BatchModel) -> np.ndarray:
    """Per-output bound factor sqrt(b^2 - (Y^T Omega^-1 Y)_ii + p)."""
    d = np.einsum("pi,pi->i", model.Y, model.weights)
    return _bound_from_gram_diag(d, model.rkhs_bound, model.size, model.diagnostics)


def error_bound(x, model: BatchModel) -> np.ndarray:
    """Elementwise deterministic bound on |mean - w| at x."""
    return batch_bound_factor(model) * batch_sigma(x, model)


def predict(x, model: BatchModel) -> BoundedEstimate:
    mean = batch_mean(x, model)
    sigma = batch_sigma(x, model)
    bf = batch_bound_factor(model)
    return BoundedEstimate(mean=mean, sigma=sigma, bound_factor=bf, phi=bf * sigma)


def predict_many(Xq, model: BatchModel, chunk: int = 2048):
    """Vectorized predictions at the rows of Xq.

    Returns (means (q, n_out), sigmas (q,), phis (q, n_out)).
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    bf = batch_bound_factor(model)
    means = np.empty((Xq.shape[0], model.Y.shape[1]))
    sigmas = np.empty(Xq.shape[0])
    for lo in range(0, Xq.shape[0], chunk):
        hi = min(lo + chunk, Xq.shape[0])
        Q = cross_gram(Xq[lo:hi], model.X, model.params)   # (c, p)
        means[lo:hi] = Q @ model.weights
        sols = cho_solve(model._chol, Q.T)                  # (p, c)
        rad = model.params.scale - np.einsum("cp,pc->c", Q, sols)
        sigmas[lo:hi] = [
            _sigma_from_radicand(float(r), model.params.scale, model.diagnostics)
            for r in rad
        ]
    return means, sigmas, sigmas[:, None] * bf[None, :]
