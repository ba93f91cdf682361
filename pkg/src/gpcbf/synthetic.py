"""Test functions with a known RKHS norm.

A finite kernel expansion w_i(x) = sum_j gamma_ij q(x, z_j) lies in the
kernel's RKHS with norm sqrt(gamma_i^T P(Z) gamma_i), so scaling the weights
gives functions whose norm is exactly a chosen target.  These are the only
functions for which the deterministic error bound can be checked end to end,
which is why the verification suites are built on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import KernelParams, cross_gram, gram_matrix


@dataclass(frozen=True)
class KernelExpansion:
    """Multi-output finite kernel expansion over shared centers."""

    centers: np.ndarray   # (J, n_in)
    gammas: np.ndarray    # (J, n_out)
    params: KernelParams

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        Q = cross_gram(x[None, :] if x.ndim == 1 else x, self.centers, self.params)
        vals = Q @ self.gammas
        return vals[0] if x.ndim == 1 else vals

    def norms(self) -> np.ndarray:
        """RKHS norm of each output component."""
        P = gram_matrix(self.centers, self.params)
        return np.sqrt(np.einsum("ji,jk,ki->i", self.gammas, P, self.gammas))


def sample_expansion(rng: np.random.Generator, params: KernelParams, *,
                     n_in: int, n_out: int, n_terms: int, target_norm: float,
                     box: float = 2.0) -> KernelExpansion:
    """Random expansion with every output scaled to the requested RKHS norm."""
    centers = rng.uniform(-box, box, size=(n_terms, n_in))
    gammas = rng.normal(size=(n_terms, n_out))
    expo = KernelExpansion(centers=centers, gammas=gammas, params=params)
    scale = target_norm / expo.norms()
    return KernelExpansion(centers=centers, gammas=gammas * scale[None, :],
                           params=params)
