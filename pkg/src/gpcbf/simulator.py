"""Fixed-step closed-loop simulation.

One control step: sample the state, measure the uncertainty (truncated
Gaussian noise), update the streaming model, swap the blend window, evaluate
the blended estimates at the step time, wire them per the experiment case,
run the safety filter, then hold the filtered control over the whole period
(zero-order hold) while the integrator takes ``substeps`` classical
Runge-Kutta steps.

The control and model periods coincide; evaluating the blend exactly at the
step time hands the filter the previous snapshot (the ramp starts at zero),
which is precisely the causality the streaming update implies: data measured
at a step influences the continuous-time estimate only after that step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import gp_stream
from .blend import BlendedModel, BlendSchedule
from .cbf_filter import constraint_psi, safety_filter
from .errors import SimulationFailure, UsageError
from .gp_stream import ModelConfig
from .scenarios.base import Scenario, case_wiring


@dataclass(frozen=True)
class SimConfig:
    duration: float
    control_rate: float = 1000.0   # Hz, zero-order hold
    substeps: int = 10             # integrator substeps per control period
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0.0:
            raise UsageError("duration must be positive")
        if self.control_rate <= 0.0:
            raise UsageError("control_rate must be positive")
        if self.substeps < 1:
            raise UsageError("substeps must be at least 1")


@dataclass
class SimTrace:
    """Uniform-grid log of one run; column order is fixed at creation."""

    names: list
    columns: dict
    meta: dict = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return len(self.columns[self.names[0]])

    def as_matrix(self) -> np.ndarray:
        return np.column_stack([self.columns[n] for n in self.names])

    def truncated(self, rows: int) -> "SimTrace":
        cols = {n: self.columns[n][:rows] for n in self.names}
        return SimTrace(names=list(self.names), columns=cols, meta=dict(self.meta))


def measure(x, true_w, noise: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy measurement of the unknown function at x.

    The noise is zero-mean Gaussian with standard deviation ``noise`` per
    entry, rejection-sampled until every entry lies within +-noise, so the
    bounded-noise premise of the error bound holds for every sample.
    """
    w = np.atleast_1d(np.asarray(true_w(x), dtype=float))
    if noise == 0.0:
        return w.copy()
    nu = rng.normal(0.0, noise, size=w.shape)
    bad = np.abs(nu) > noise
    while bad.any():
        nu[bad] = rng.normal(0.0, noise, size=int(bad.sum()))
        bad = np.abs(nu) > noise
    return w + nu


def rk4_step(deriv, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of x' = deriv(x)."""
    k1 = deriv(x)
    k2 = deriv(x + 0.5 * dt * k1)
    k3 = deriv(x + 0.5 * dt * k2)
    k4 = deriv(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _column_names(scenario: Scenario, x0) -> list:
    names = ["t"]
    names += list(scenario.state_names)
    names += list(scenario.control_names)
    names += [f"{c}_d" for c in scenario.control_names]
    names += ["delta_star", "lambda_star", "psi"]
    if scenario.components is not None:
        names += list(scenario.components(x0).keys())
    for _, lab in scenario.monitored:
        names += [f"mu_{lab}", f"phi_{lab}", f"w_{lab}", f"err_{lab}"]
    if scenario.reference is not None:
        names += list(scenario.reference(x0, 0.0).keys())
    names += ["active", "update_time"]
    return names


def run(scenario: Scenario, case_id: int, model_config: ModelConfig = None,
        sim_config: SimConfig = None) -> SimTrace:
    """Closed-loop run of one scenario/case; returns the full trace.

    Raises SimulationFailure with the partial trace attached if the state
    leaves the finite range or the filter degenerates.
    """
    mc = model_config or scenario.model_config
    sc = sim_config or SimConfig(duration=scenario.duration)
    dt_ctrl = 1.0 / sc.control_rate
    if abs(dt_ctrl - mc.sample_period) > 1e-12:
        raise UsageError(
            f"control period {dt_ctrl} and model sample period "
            f"{mc.sample_period} must coincide (zero-order hold)")
    n_steps = int(round(sc.duration * sc.control_rate))
    dyn = scenario.dynamics
    rng = np.random.default_rng(sc.seed)
    if scenario.reset is not None:
        scenario.reset()

    x = np.asarray(scenario.x0, dtype=float).copy()
    y0 = measure(x, dyn.w_meas, mc.noise, rng)
    model = gp_stream.init(x, y0, mc)
    blended = BlendedModel.initial(gp_stream.snapshot(model), 0.0,
                                   BlendSchedule(mc.blend_rate, mc.sample_period))
    frozen = (scenario.initial_mu, scenario.initial_phi)

    names = _column_names(scenario, x)
    cols = {n: np.empty(n_steps) for n in names}
    meta = {"scenario": scenario.name, "case": int(case_id), "seed": sc.seed,
            "control_rate": sc.control_rate, "substeps": sc.substeps,
            "duration": sc.duration, "steady_time": scenario.steady_time,
            "monitored": [lab for _, lab in scenario.monitored]}
    trace = SimTrace(names=names, columns=cols, meta=meta)

    unc = list(dyn.uncertain)
    dt_sub = dt_ctrl / sc.substeps

    for k in range(n_steps):
        t_k = k * dt_ctrl
        if k > 0:
            y_k = measure(x, dyn.w_meas, mc.noise, rng)
            tic = time.perf_counter()
            model = gp_stream.update(model, x, y_k)
            cols["update_time"][k] = time.perf_counter() - tic
            blended = blended.swap(gp_stream.snapshot(model), t_k)
        else:
            cols["update_time"][k] = np.nan

        if scenario.observe is not None:
            scenario.observe(x, t_k)

        mu_live, phi_live = blended.estimate(t_k, x)
        (mu_c, phi_c), (mu_d, _) = case_wiring(case_id, (mu_live, phi_live), frozen)
        u_d = scenario.desired(x, mu_d, t_k)
        mu_full = dyn.embed(mu_c)
        phi_full = dyn.embed(phi_c)
        res = safety_filter(x, mu_full, phi_full, u_d, scenario.barrier,
                            scenario.filter_params, dyn)
        psi_val = constraint_psi(x, mu_full, phi_full, res.u_star,
                                 res.delta_star, scenario.barrier, dyn)

        cols["t"][k] = t_k
        for i, n in enumerate(scenario.state_names):
            cols[n][k] = x[i]
        for i, n in enumerate(scenario.control_names):
            cols[n][k] = res.u_star[i]
            cols[f"{n}_d"][k] = u_d[i]
        cols["delta_star"][k] = res.delta_star
        cols["lambda_star"][k] = res.lambda_star
        cols["psi"][k] = psi_val
        if scenario.components is not None:
            for key, val in scenario.components(x).items():
                cols[key][k] = val
        w_true = dyn.w(x)
        for pos, (idx, lab) in enumerate(scenario.monitored):
            cols[f"mu_{lab}"][k] = mu_live[pos]
            cols[f"phi_{lab}"][k] = phi_live[pos]
            cols[f"w_{lab}"][k] = w_true[idx]
            cols[f"err_{lab}"][k] = abs(mu_live[pos] - w_true[idx])
        if scenario.reference is not None:
            for key, val in scenario.reference(x, t_k).items():
                cols[key][k] = val
        cols["active"][k] = 1.0 if res.constraint_active else 0.0

        u = res.u_star
        for _ in range(sc.substeps):
            x = rk4_step(lambda state: dyn.rhs(state, u), x, dt_sub)
        if not np.all(np.isfinite(x)):
            raise SimulationFailure(
                f"non-finite state at t={t_k + dt_ctrl:.6f} in "
                f"{scenario.name} case {case_id}", trace=trace.truncated(k + 1))

    trace.meta["sigma_clamps"] = model.diagnostics.sigma_clamps
    trace.meta["bound_clamps"] = model.diagnostics.bound_clamps
    return trace
