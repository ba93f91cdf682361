"""Control-barrier-function constraint and closed-form safety filter.

The scalar constraint combines the known drift and control directions of the
barrier with the model estimate and its error bound:

    psi(x, mu, phi, u, delta) = Lf h + Lg h @ u + delta * h
                                + grad_h @ mu - |grad_h| @ phi + alpha(h)

with ``h`` the relative-degree-one barrier (the last link of a higher-order
chain when the raw constraint has higher degree).  The bound enters with the
elementwise absolute gradient, so any estimate error inside the bound can
only make the constraint value smaller: satisfying it certifies the true
constraint.

Minimizing ``0.5 (u - u_d)^T H (u - u_d) + 0.5 beta delta^2`` subject to
``psi >= 0`` is a strictly convex QP with one affine constraint, so the
optimum is closed-form: a single multiplier ``lambda* = max(0, -omega/eps)``
where ``omega`` is the constraint value at the desired control and ``eps``
the constraint curvature.  No iterative solver anywhere in the loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateFilterError, UsageError

EPS_FLOOR = 1e-12


@dataclass(frozen=True)
class BarrierSpec:
    """Relative-degree-one barrier: value, analytic gradient, class-K gain.

    ``chain`` holds the lower links of a higher-order construction (for
    logging and verification); empty when the raw barrier already has
    relative degree one.
    """

    value: Callable[[np.ndarray], float]            # psi_{d-1}
    gradient: Callable[[np.ndarray], np.ndarray]    # d psi_{d-1} / dx, (n,)
    alpha: Callable[[float], float]                 # nondecreasing, alpha(0)=0
    chain: tuple = ()                               # (psi_0, ..., psi_{d-2})


@dataclass(frozen=True)
class FilterParams:
    """Quadratic weight on the control deviation and on the slack.

    Construct through ``make``, which validates the weight and caches its
    inverse (the filter needs it every control step).
    """

    H: np.ndarray
    beta: float
    H_inv: np.ndarray = None

    @classmethod
    def make(cls, H, beta: float) -> "FilterParams":
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape[0] != H.shape[1]:
            raise UsageError(f"H must be square, got {H.shape}")
        if not np.allclose(H, H.T) or np.any(np.linalg.eigvalsh(H) <= 0.0):
            raise UsageError("H must be symmetric positive definite")
        if beta <= 0.0:
            raise UsageError(f"beta must be positive, got {beta}")
        return cls(H=H, beta=float(beta), H_inv=np.linalg.inv(H))


@dataclass
class FilterResult:
    u_star: np.ndarray
    delta_star: float
    lambda_star: float
    omega: float
    epsilon: float
    constraint_active: bool


def constraint_psi(x, mu_hat, phi_hat, u_hat, delta_hat, spec: BarrierSpec,
                   dynamics) -> float:
    """Constraint value at a candidate (control, slack) pair."""
    x = np.asarray(x, dtype=float)
    grad = spec.gradient(x)
    h = spec.value(x)
    lf = float(grad @ dynamics.f(x))
    lg = grad @ dynamics.g(x)
    return (lf + float(lg @ np.atleast_1d(u_hat)) + float(delta_hat) * h
            + float(grad @ np.asarray(mu_hat, dtype=float))
            - float(np.abs(grad) @ np.asarray(phi_hat, dtype=float))
            + spec.alpha(h))


def safety_filter(x, mu_hat, phi_hat, u_d, spec: BarrierSpec,
                  params: FilterParams, dynamics) -> FilterResult:
    """Minimum-intervention control and slack satisfying the constraint."""
    x = np.asarray(x, dtype=float)
    u_d = np.atleast_1d(np.asarray(u_d, dtype=float))
    grad = spec.gradient(x)
    h = spec.value(x)
    lg = grad @ dynamics.g(x)                      # (m,)
    omega = (float(grad @ dynamics.f(x)) + float(lg @ u_d)
             + float(grad @ np.asarray(mu_hat, dtype=float))
             - float(np.abs(grad) @ np.asarray(phi_hat, dtype=float))
             + spec.alpha(h))
    hinv_lg = params.H_inv @ lg
    epsilon = float(lg @ hinv_lg) + h * h / params.beta
    if epsilon <= EPS_FLOOR:
        raise DegenerateFilterError(
            f"filter curvature {epsilon} vanished at x={x!r}: control direction "
            "and barrier value are both zero")
    lam = -omega / epsilon if omega < 0.0 else 0.0
    u_star = u_d + lam * hinv_lg
    delta_star = h * lam / params.beta
    return FilterResult(u_star=u_star, delta_star=delta_star, lambda_star=lam,
                        omega=omega, epsilon=epsilon,
                        constraint_active=omega < 0.0)


def hocbf_lift(value: Callable, gradient: Callable, f: Callable,
               alpha: Callable) -> Callable[[np.ndarray], float]:
    """Lift a barrier by one relative degree: x -> grad(x) @ f(x) + alpha(value(x))."""

    def lifted(x):
        x = np.asarray(x, dtype=float)
        return float(gradient(x) @ f(x)) + alpha(value(x))

    return lifted


def softmin(values: Sequence[float], rho: float) -> float:
    """Log-sum-exp soft minimum, shifted by the minimum for stability.

    Always <= min(values); the gap is at most log(len(values)) / rho.
    """
    if rho <= 0.0:
        raise UsageError(f"softmin sharpness must be positive, got {rho}")
    z = np.asarray(values, dtype=float)
    if z.size == 0:
        raise UsageError("softmin of an empty sequence")
    zmin = float(z.min())
    return zmin - float(np.log(np.exp(-rho * (z - zmin)).sum())) / rho


def softmin_gradient(values: Sequence[float], gradients, rho: float) -> np.ndarray:
    """Gradient of the soft minimum: softmax-weighted combination of the
    component gradients (weights concentrate on the smallest values)."""
    z = np.asarray(values, dtype=float)
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if z.size == 0:
        raise UsageError("softmin_gradient of an empty sequence")
    if G.shape[0] != z.size:
        raise UsageError(f"{z.size} values but {G.shape[0]} gradients")
    w = np.exp(-rho * (z - z.min()))
    w /= w.sum()
    return w @ G
