"""Differential-drive ground robot on an incline, in a walled room with
circular obstacles and speed limits.

State x = [qx, qy, gamma, v, omega]; (qx, qy) is the tip of the robot, offset
``tip_offset`` ahead of the axle, so the kinematic rows are exact geometry.
The two motor voltages enter the acceleration rows through the armature
constants; the unknown part lumps back-EMF/friction drag (with a smooth
velocity-squared term) and the gravity component along the slope.

Safety combines seven barriers: four circular obstacles and the wall distance
(lifted once, since position constraints have relative degree 2) plus speed
and turn-rate limits (already degree 1), composed into a single constraint
with a log-sum-exp soft minimum.  Gradients are analytic throughout; the wall
term needs the softmax Jacobian, written out below.

The desired control chases a waypoint list, switching goals on proximity;
body-frame errors feed a cascaded speed/heading law whose ideal closed loop
is first-order in v and in (omega - omega_d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cbf_filter import BarrierSpec, FilterParams, softmin, softmin_gradient
from ..gp_stream import ModelConfig
from ..kernel import KernelParams
from .base import Dynamics, Scenario


@dataclass(frozen=True)
class RobotParams:
    torque_const: float = 0.1      # N m / A
    wheel_radius: float = 0.1      # m
    axle_length: float = 0.5       # m, distance between wheels
    tip_offset: float = 0.25       # m, center of mass to tip
    armature_res: float = 0.27     # ohm
    mass: float = 10.0             # kg
    inertia: float = 0.83          # kg m^2
    back_emf: float = 0.0487       # V s / rad
    friction: float = 0.025        # N m s
    drag_shape_v: float = 1.0      # s/m, velocity-squared drag shaping
    drag_shape_w: float = 1.0      # s
    incline: float = 0.5           # sin of the ground inclination angle
    gravity: float = 9.81
    # cascaded tracking law
    pole1: float = 0.25
    pole2: float = 0.25
    gain_v: float = 2.0
    gain_w: float = 2.0
    # environment
    obstacle_centers: tuple = ((0.35, 0.7), (2.75, 1.75), (2.5, -0.25), (1.0, 2.2))
    obstacle_weights: tuple = (1.0, 0.5, 0.5, 0.5)
    obstacle_radius: float = 0.6
    wall_x: tuple = (-1.0, 4.0)
    wall_y: tuple = (-1.0, 3.0)
    wall_sharpness: float = 20.0
    softmin_sharpness: float = 20.0
    lift_gain: float = 2.0
    alpha_gain: float = 1.0
    # filter weights
    weight_h: float = 2.0          # H = weight_h * I2
    slack_weight: float = 2.0
    # mission: legs keep >= 0.66 m from every obstacle center and the last
    # goal sits in the central pocket, far enough from everything that the
    # parked soft-minimum rests on the speed barriers alone
    waypoints: tuple = ((0.5, -0.3), (1.7, 0.1), (1.7, 0.95), (1.4, 0.9))
    goal_radius: float = 0.15
    goal_dwell: float = 0.0
    x0: tuple = (-0.5, 0.5, 0.0, 0.0, 0.0)


def _drag_coeffs(p: RobotParams):
    cv = 2.0 * (p.back_emf * p.torque_const / (p.mass * p.wheel_radius * p.armature_res)
                + p.friction / (p.mass * p.wheel_radius))
    cw = (p.back_emf * p.torque_const * p.axle_length ** 2
          / (p.inertia * p.wheel_radius ** 2 * p.armature_res)
          + p.axle_length * p.friction / (p.inertia * p.wheel_radius ** 2))
    return cv, cw


def _gains(p: RobotParams):
    gv = p.torque_const / (p.mass * p.wheel_radius * p.armature_res)
    gw = (p.torque_const * p.axle_length
          / (p.inertia * p.wheel_radius * p.armature_res))
    return gv, gw


def _w45(x, p: RobotParams):
    _, _, gamma, v, om = x
    cv, cw = _drag_coeffs(p)
    w4 = -cv * (v + p.drag_shape_v * v * v * math.tanh(2.5 * v)) \
        - p.incline * p.gravity * math.sin(gamma)
    w5 = -cw * (om + p.drag_shape_w * om * om * math.tanh(2.5 * om))
    return w4, w5


def make_dynamics(p: RobotParams) -> Dynamics:
    ld = p.tip_offset
    gv, gw = _gains(p)

    def f(x):
        _, _, gamma, v, om = x
        s, c = math.sin(gamma), math.cos(gamma)
        return np.array([v * c - ld * om * s, v * s + ld * om * c, om, 0.0, 0.0])

    def g(x):
        return np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0],
                         [gv, gv], [gw, -gw]])

    def w(x):
        w4, w5 = _w45(x, p)
        return np.array([0.0, 0.0, 0.0, w4, w5])

    def rhs(x, u):
        _, _, gamma, v, om = x
        s, c = math.sin(gamma), math.cos(gamma)
        w4, w5 = _w45(x, p)
        return np.array([
            v * c - ld * om * s,
            v * s + ld * om * c,
            om,
            w4 + gv * (u[0] + u[1]),
            w5 + gw * (u[0] - u[1]),
        ])

    return Dynamics(n=5, m=2, f=f, g=g, w=w, rhs=rhs, uncertain=(3, 4))


def body_errors(x, goal):
    """Longitudinal/lateral errors of the tip relative to the goal, in the
    body frame."""
    qx, qy, gamma = x[0], x[1], x[2]
    s, c = math.sin(gamma), math.cos(gamma)
    ex, ey = qx - goal[0], qy - goal[1]
    return ex * c + ey * s, -ex * s + ey * c


def desired_voltages(x, mu45, goal, p: RobotParams) -> np.ndarray:
    """Cascaded tracking law mixed into per-motor voltages."""
    _, _, _, v, om = x
    e1, e2 = body_errors(x, goal)
    ld = p.tip_offset
    a_d = (-(p.pole1 + p.pole2) * v - (1.0 + p.pole1 * p.pole2) * e1
           + (p.pole1 ** 2 / ld) * e2 * e2)
    om_d = -(p.pole1 / ld) * e2
    e2_dot = om * (ld - e1)          # chain rule on the kinematics, fixed goal
    e_b = om - om_d
    ud1 = -float(mu45[0]) + a_d - p.gain_v * v
    ud2 = -float(mu45[1]) - (p.pole1 / ld) * e2_dot - p.gain_w * e_b
    c1 = p.mass * p.wheel_radius * p.armature_res / (2.0 * p.torque_const)
    c2 = (p.inertia * p.wheel_radius * p.armature_res
          / (2.0 * p.torque_const * p.axle_length))
    return np.array([c1 * ud1 + c2 * ud2, c1 * ud1 - c2 * ud2])


def desired_turn_rate(x, goal, p: RobotParams) -> float:
    _, e2 = body_errors(x, goal)
    return -(p.pole1 / p.tip_offset) * e2


class WaypointTracker:
    """Advances through the waypoint list on proximity (plus optional dwell);
    the last goal is held forever."""

    def __init__(self, p: RobotParams):
        self.waypoints = [np.asarray(wp, dtype=float) for wp in p.waypoints]
        self.radius = p.goal_radius
        self.dwell = p.goal_dwell
        self.index = 0
        self._reached_at = None

    def reset(self):
        self.index = 0
        self._reached_at = None

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[self.index]

    def observe(self, x, t):
        if self.index >= len(self.waypoints) - 1:
            return
        if math.hypot(x[0] - self.goal[0], x[1] - self.goal[1]) < self.radius:
            if self._reached_at is None:
                self._reached_at = t
            if t - self._reached_at >= self.dwell:
                self.index += 1
                self._reached_at = None
        else:
            self._reached_at = None


def barrier_state(x, p: RobotParams):
    """Values and gradients of all seven composed barriers.

    Returns (values (7,), grads (7,5), raw (5,)) where ``raw`` holds the
    unlifted position barriers (obstacles and wall) for logging.
    """
    qx, qy, gamma, v, om = x
    s, c = math.sin(gamma), math.cos(gamma)
    ld = p.tip_offset
    qxd = v * c - ld * om * s
    qyd = v * s + ld * om * c
    lift = p.lift_gain

    vals = np.empty(7)
    grads = np.zeros((7, 5))
    raw = np.empty(5)

    R2 = p.obstacle_radius ** 2
    for j, ((cx, cy), bj) in enumerate(zip(p.obstacle_centers, p.obstacle_weights)):
        dx, dy = qx - cx, qy - cy
        phi0 = bj * (dx * dx + dy * dy - R2)
        raw[j] = phi0
        vals[j] = 2.0 * bj * (dx * qxd + dy * qyd) + lift * phi0
        grads[j, 0] = 2.0 * bj * qxd + 2.0 * lift * bj * dx
        grads[j, 1] = 2.0 * bj * qyd + 2.0 * lift * bj * dy
        grads[j, 2] = 2.0 * bj * (dx * (-v * s - ld * om * c) + dy * (v * c - ld * om * s))
        grads[j, 3] = 2.0 * bj * (dx * c + dy * s)
        grads[j, 4] = 2.0 * bj * ld * (-dx * s + dy * c)

    # wall: soft minimum of the four margins, lifted once
    rho5 = p.wall_sharpness
    h = np.array([qx - p.wall_x[0], p.wall_x[1] - qx,
                  qy - p.wall_y[0], p.wall_y[1] - qy])
    m5 = softmin(h, rho5)
    sig = np.exp(-rho5 * (h - h.min()))
    sig /= sig.sum()
    gx = sig[0] - sig[1]
    gy = sig[2] - sig[3]
    raw[4] = m5
    vals[4] = gx * qxd + gy * qyd + lift * m5
    dgx_dx = -rho5 * (sig[0] + sig[1] - gx * gx)
    dgy_dy = -rho5 * (sig[2] + sig[3] - gy * gy)
    dg_cross = rho5 * gx * gy
    grads[4, 0] = dgx_dx * qxd + dg_cross * qyd + lift * gx
    grads[4, 1] = dg_cross * qxd + dgy_dy * qyd + lift * gy
    grads[4, 2] = gx * (-v * s - ld * om * c) + gy * (v * c - ld * om * s)
    grads[4, 3] = gx * c + gy * s
    grads[4, 4] = ld * (-gx * s + gy * c)

    vals[5] = 0.5 * (1.0 - v * v)
    grads[5, 3] = -v
    vals[6] = 0.5 * (1.0 - om * om)
    grads[6, 4] = -om
    return vals, grads, raw


def make_barrier(p: RobotParams) -> BarrierSpec:
    rho = p.softmin_sharpness

    def psi0(x):
        vals, _, _ = barrier_state(np.asarray(x, dtype=float), p)
        return softmin(vals, rho)

    def grad_psi0(x):
        vals, grads, _ = barrier_state(np.asarray(x, dtype=float), p)
        return softmin_gradient(vals, grads, rho)

    return BarrierSpec(value=psi0, gradient=grad_psi0,
                       alpha=lambda s: p.alpha_gain * s, chain=())


def default_model_config() -> ModelConfig:
    return ModelConfig(budget=100, local_budget=50, noise=0.5, rkhs_bound=100.0,
                       kernel=KernelParams(scale=100.0, bandwidth=0.1),
                       sample_period=1e-3, blend_rate=10.0)


def make_robot(params: RobotParams = None,
               model_config: ModelConfig = None,
               duration: float = 60.0,
               steady_time: float = 50.0) -> Scenario:
    p = params or RobotParams()
    mc = model_config or default_model_config()
    dyn = make_dynamics(p)
    barrier = make_barrier(p)
    tracker = WaypointTracker(p)
    rho = p.softmin_sharpness

    def desired(x, mu_unc, t):
        return desired_voltages(x, mu_unc, tracker.goal, p)

    def components(x):
        vals, _, raw = barrier_state(np.asarray(x, dtype=float), p)
        out = {}
        for j in range(5):
            out[f"phi_{j + 1}_0"] = raw[j]
        for j in range(5):
            out[f"phi_{j + 1}_1"] = vals[j]
        out["phi_6_0"] = vals[5]
        out["phi_7_0"] = vals[6]
        out["psi0"] = softmin(vals, rho)
        return out

    def reference(x, t):
        return {"goal_x": float(tracker.goal[0]), "goal_y": float(tracker.goal[1]),
                "omega_d": desired_turn_rate(x, tracker.goal, p)}

    def tracking_error(x, t):
        return math.hypot(x[0] - tracker.goal[0], x[1] - tracker.goal[1])

    phi0 = math.sqrt(mc.kernel.scale) * math.sqrt(mc.rkhs_bound ** 2 + mc.budget)
    return Scenario(
        name="robot", params=p, dynamics=dyn, barrier=barrier,
        filter_params=FilterParams.make(p.weight_h * np.eye(2), p.slack_weight),
        model_config=mc, x0=np.array(p.x0, dtype=float),
        duration=duration, steady_time=steady_time,
        desired=desired,
        initial_mu=np.zeros(2), initial_phi=np.full(2, phi0),
        state_names=("qx", "qy", "gamma", "v", "omega"),
        control_names=("u_r", "u_l"),
        monitored=((3, "4"), (4, "5")),
        observe=tracker.observe,
        reset=tracker.reset,
        components=components, reference=reference,
        tracking_error=tracking_error,
    )
