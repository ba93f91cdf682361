"""Torque-limited pendulum with uncertain restitution/friction torques.

State x = [gamma, gamma_dot].  The known model carries gravity and the
control torque; the unknown part lumps linear and cubic restitution, coulomb
and viscous friction, and a velocity-squared drag, all divided by m L^2 so it
acts directly on the angular acceleration.  The angle constraint
|gamma| <= angle_max has relative degree 2, handled by a one-step chain with
a linear class-K gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cbf_filter import BarrierSpec, FilterParams
from ..gp_stream import ModelConfig
from ..kernel import KernelParams
from .base import Dynamics, Scenario


@dataclass(frozen=True)
class PendulumParams:
    mass: float = 0.5              # kg
    length: float = 0.15           # m
    gravity: float = 9.81          # m/s^2
    spring_lin: float = 0.5        # N m / rad
    spring_cubic: float = 0.35     # N m / rad^3
    coulomb: float = 0.15          # N m
    viscous: float = 0.5           # N m s
    drag: float = 0.25             # N m s^2 / rad^2
    tanh_eps1: float = 2.0
    tanh_eps2: float = 2.0
    torque_max: float = 0.35       # N m, desired-control saturation
    gain_pos: float = 25.0
    gain_vel: float = 50.0
    desired_amp: float = 0.99 * math.pi / 4.0
    desired_freq: float = 0.5      # rad/s
    angle_max: float = math.pi / 4.0
    chain_gain: float = 200.0      # class-K gain lifting the angle barrier
    alpha_gain: float = 20.0       # class-K gain in the final constraint
    weight_h: float = 2.0
    slack_weight: float = 200.0
    x0: tuple = (0.1745, 0.0)


def _uncertain_accel(x, p: PendulumParams) -> float:
    gamma, gdot = x
    inv_ml2 = 1.0 / (p.mass * p.length ** 2)
    return inv_ml2 * (-p.spring_lin * gamma
                      - p.spring_cubic * gamma ** 3
                      - p.coulomb * math.tanh(gdot / p.tanh_eps1)
                      - p.viscous * gdot
                      - p.drag * gdot * gdot * math.tanh(gdot / p.tanh_eps2))


def make_dynamics(p: PendulumParams) -> Dynamics:
    ag_over_l = p.gravity / p.length
    inv_ml2 = 1.0 / (p.mass * p.length ** 2)

    def f(x):
        return np.array([x[1], ag_over_l * math.sin(x[0])])

    def g(x):
        return np.array([[0.0], [inv_ml2]])

    def w(x):
        return np.array([0.0, _uncertain_accel(x, p)])

    def rhs(x, u):
        return np.array([
            x[1],
            ag_over_l * math.sin(x[0]) + _uncertain_accel(x, p) + inv_ml2 * u[0],
        ])

    return Dynamics(n=2, m=1, f=f, g=g, w=w, rhs=rhs, uncertain=(1,))


def desired_angle(t: float, p: PendulumParams):
    """Reference angle and its first two derivatives."""
    a, om = p.desired_amp, p.desired_freq
    return (-a * math.cos(om * t),
            a * om * math.sin(om * t),
            a * om * om * math.cos(om * t))


def desired_torque_raw(x, mu2: float, t: float, p: PendulumParams) -> float:
    """Tracking controller before saturation: feedback linearization with the
    uncertainty estimate mu2 in place of the true unknown torque."""
    gamma, gdot = x
    gd, gd_dot, gd_ddot = desired_angle(t, p)
    e = gamma - gd
    edot = gdot - gd_dot
    f2 = (p.gravity / p.length) * math.sin(gamma)
    return (p.mass * p.length ** 2) * (
        -f2 - mu2 + gd_ddot - p.gain_pos * e - p.gain_vel * edot)


def desired_torque(x, mu2: float, t: float, p: PendulumParams) -> float:
    """Saturated desired control, sign-preserving at magnitude torque_max."""
    u0 = desired_torque_raw(x, mu2, t, p)
    if p.torque_max > abs(u0):
        return u0
    return p.torque_max * u0 / abs(u0)


def make_barrier(p: PendulumParams) -> BarrierSpec:
    a0 = p.chain_gain

    def psi0(x):
        return p.angle_max ** 2 - x[0] ** 2

    def psi1(x):
        return -2.0 * x[0] * x[1] + a0 * psi0(x)

    def grad_psi1(x):
        return np.array([-2.0 * x[1] - 2.0 * a0 * x[0], -2.0 * x[0]])

    return BarrierSpec(value=psi1, gradient=grad_psi1,
                       alpha=lambda s: p.alpha_gain * s, chain=(psi0,))


def default_model_config() -> ModelConfig:
    return ModelConfig(budget=100, local_budget=50, noise=1.0, rkhs_bound=100.0,
                       kernel=KernelParams(scale=100.0, bandwidth=0.5),
                       sample_period=1e-3, blend_rate=10.0)


def make_pendulum(params: PendulumParams = None,
                  model_config: ModelConfig = None,
                  duration: float = 40.0,
                  steady_time: float = 20.0) -> Scenario:
    p = params or PendulumParams()
    mc = model_config or default_model_config()
    dyn = make_dynamics(p)
    barrier = make_barrier(p)
    psi0 = barrier.chain[0]

    def desired(x, mu_unc, t):
        return np.array([desired_torque(x, float(mu_unc[0]), t, p)])

    def components(x):
        return {"psi0": psi0(x), "psi1": barrier.value(x)}

    def reference(x, t):
        gd, gd_dot, _ = desired_angle(t, p)
        return {"gamma_d": gd, "gamma_dot_d": gd_dot}

    def tracking_error(x, t):
        return float(x[0] - desired_angle(t, p)[0])

    # frozen step-0 estimate: zero mean, prior deviation times the no-data
    # bound factor
    phi0 = math.sqrt(mc.kernel.scale) * math.sqrt(mc.rkhs_bound ** 2 + mc.budget)
    return Scenario(
        name="pendulum", params=p, dynamics=dyn, barrier=barrier,
        filter_params=FilterParams.make(p.weight_h, p.slack_weight),
        model_config=mc, x0=np.array(p.x0, dtype=float),
        duration=duration, steady_time=steady_time,
        desired=desired,
        initial_mu=np.zeros(1), initial_phi=np.array([phi0]),
        state_names=("gamma", "gamma_dot"), control_names=("u",),
        monitored=((1, "2"),),
        components=components, reference=reference,
        tracking_error=tracking_error,
    )
