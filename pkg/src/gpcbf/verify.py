"""Property suites behind the ``verify`` command.

Each suite checks one of the guarantees the library leans on, end to end and
against independently computed references:

* recursive equivalence -- the streaming state (inverse, dual weights,
  correlation sums) matches a from-scratch recomputation at every step;
* bound validity -- for a synthetic uncertainty with known RKHS norm, the
  estimation error never exceeds the deterministic bound;
* constraint bounding -- the bound-aware constraint never overestimates the
  true-uncertainty constraint, including through the time blend;
* filter optimality -- the closed-form filter satisfies the first-order
  conditions and no feasible perturbation improves the cost.

Suites return structured results so both the CLI and the test suite can run
them; ``corrupt`` hooks let tests inject faults and watch a suite fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gp_stream
from .errors import NumericalFailure
from .blend import BlendedModel, BlendSchedule
from .cbf_filter import BarrierSpec, FilterParams, constraint_psi, safety_filter
from .gp_stream import ModelConfig
from .kernel import KernelParams
from .scenarios.base import Dynamics
from .simulator import measure
from .synthetic import sample_expansion


@dataclass
class SuiteResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.details.items())
        return f"[{status}] {self.name}: {info}"


def _pendulum_states(n_steps: int, dt: float = 1e-3):
    """Deterministic pendulum-like phase trajectory used as a data stream."""
    from .scenarios.pendulum import PendulumParams, make_dynamics
    from .simulator import rk4_step
    dyn = make_dynamics(PendulumParams())
    x = np.array([0.1745, 0.0])
    out = np.empty((n_steps, 2))
    u = np.zeros(1)
    for k in range(n_steps):
        out[k] = x
        x = rk4_step(lambda s: dyn.rhs(s, u), x, dt)
    return out


def recursive_equivalence(steps: int = 500, budget: int = 30, local: int = 15,
                          seed: int = 0, tol: float = 1e-6,
                          corrupt=None) -> SuiteResult:
    """Streaming state vs direct recomputation along a pendulum trajectory."""
    from .scenarios.pendulum import PendulumParams, make_dynamics
    cfg = ModelConfig(budget=budget, local_budget=local, noise=1.0,
                      rkhs_bound=100.0,
                      kernel=KernelParams(scale=100.0, bandwidth=0.5))
    dyn = make_dynamics(PendulumParams())
    rng = np.random.default_rng(seed)
    states = _pendulum_states(steps + 1)
    model = gp_stream.init(states[0], measure(states[0], dyn.w_meas, cfg.noise, rng), cfg)
    worst = 0.0
    try:
        for k in range(1, steps + 1):
            x = states[k]
            model = gp_stream.update(model, x, measure(x, dyn.w_meas, cfg.noise, rng))
            if corrupt is not None and k == steps // 2:
                corrupt(model)
            oi, wts, cs = gp_stream.direct_state(model.X, model.Y, cfg)
            worst = max(
                worst,
                float(np.abs(model.omega_inv - oi).max() / np.abs(oi).max()),
                float(np.abs(model.weights - wts).max() / np.abs(wts).max()),
                float(np.abs(model.corr_sums - cs).max() / np.abs(cs).max()),
            )
    except NumericalFailure as exc:
        # a corrupted state tripping the update guards is also a failure
        return SuiteResult("recursive-equivalence", False,
                           {"max_rel_err": float("inf"), "tol": tol,
                            "steps": steps, "guard": str(exc)})
    return SuiteResult("recursive-equivalence", worst <= tol,
                       {"max_rel_err": worst, "tol": tol, "steps": steps})


def bound_validity(updates: int = 200, queries: int = 10_000, seed: int = 1,
                   corrupt=None) -> SuiteResult:
    """Error-vs-bound check on a synthetic in-RKHS uncertainty."""
    kp = KernelParams(scale=100.0, bandwidth=0.5)
    cfg = ModelConfig(budget=60, local_budget=30, noise=1.0, rkhs_bound=10.0,
                      kernel=kp)
    rng = np.random.default_rng(seed)
    w_fn = sample_expansion(rng, kp, n_in=2, n_out=2, n_terms=20,
                            target_norm=0.9 * cfg.rkhs_bound)
    # smooth bounded stream of states
    ts = np.linspace(0.0, 4.0 * math.pi, updates + 1)
    states = np.column_stack([1.5 * np.sin(ts), 1.2 * np.sin(1.7 * ts + 0.5)])
    model = gp_stream.init(states[0], measure(states[0], w_fn, cfg.noise, rng), cfg)
    for x in states[1:]:
        model = gp_stream.update(model, x, measure(x, w_fn, cfg.noise, rng))
    if corrupt is not None:
        corrupt(model)
    Xq = rng.uniform(-2.0, 2.0, size=(queries, 2))
    means, _, phis = gp_stream.predict_many(model, Xq)
    errs = np.abs(means - w_fn(Xq))
    violations = int(np.count_nonzero(errs > phis))
    margin = float((phis - errs).min())
    return SuiteResult("bound-validity", violations == 0,
                       {"violations": violations, "min_margin": margin,
                        "queries": queries})


def _random_filter_instance(rng: np.random.Generator):
    """Abstract constraint instance: constant barrier data and dynamics."""
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 4))
    grad = rng.normal(size=n)
    h = float(rng.normal())
    fvec = rng.normal(size=n)
    gmat = rng.normal(size=(n, m))
    gain = float(rng.uniform(0.5, 3.0))
    spec = BarrierSpec(value=lambda x, h=h: h,
                       gradient=lambda x, grad=grad: grad,
                       alpha=lambda s, gain=gain: gain * s)
    A = rng.normal(size=(m, m))
    H = A @ A.T + (0.5 + rng.uniform()) * np.eye(m)
    params = FilterParams.make(H, float(rng.uniform(0.2, 5.0)))
    dyn = Dynamics(n=n, m=m, f=lambda x, fvec=fvec: fvec,
                   g=lambda x, gmat=gmat: gmat, w=lambda x: np.zeros(n),
                   rhs=lambda x, u: np.zeros(n), uncertain=tuple(range(n)))
    x = rng.normal(size=n)
    mu = rng.normal(size=n)
    phi = np.abs(rng.normal(size=n))
    u_d = rng.normal(size=m)
    return x, mu, phi, u_d, spec, params, dyn


def constraint_bounding(instances: int = 300, seed: int = 2) -> SuiteResult:
    """Bound-aware constraint is a lower bound on the true one, pointwise and
    through the blend."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(instances):
        x, _, _, u_d, spec, _, dyn = _random_filter_instance(rng)
        w_val = rng.normal(size=dyn.n)
        mu_hat = rng.normal(size=dyn.n)
        phi_hat = np.abs(mu_hat - w_val) + np.abs(rng.normal(size=dyn.n))
        delta = float(rng.normal())
        lo = constraint_psi(x, mu_hat, phi_hat, u_d, delta, spec, dyn)
        hi = constraint_psi(x, w_val, np.zeros(dyn.n), u_d, delta, spec, dyn)
        worst = max(worst, lo - hi)
    pointwise_ok = worst <= 1e-9

    # blended estimates keep the bound along a short synthetic stream
    kp = KernelParams(scale=100.0, bandwidth=0.5)
    cfg = ModelConfig(budget=40, local_budget=20, noise=1.0, rkhs_bound=10.0,
                      kernel=kp)
    w_fn = sample_expansion(rng, kp, n_in=2, n_out=1, n_terms=15,
                            target_norm=0.9 * cfg.rkhs_bound)
    ts = np.linspace(0.0, 2.0 * math.pi, 120)
    states = np.column_stack([1.3 * np.sin(ts), np.cos(2.1 * ts)])
    model = gp_stream.init(states[0], measure(states[0], w_fn, cfg.noise, rng), cfg)
    blended = BlendedModel.initial(gp_stream.snapshot(model), 0.0,
                                   BlendSchedule(cfg.blend_rate, cfg.sample_period))
    blend_worst = -math.inf
    for k, x in enumerate(states[1:], start=1):
        t_k = k * cfg.sample_period
        model = gp_stream.update(model, x, measure(x, w_fn, cfg.noise, rng))
        blended = blended.swap(gp_stream.snapshot(model), t_k)
        for frac in (0.0, 0.03, 0.3, 0.9):
            t = t_k + frac * cfg.sample_period
            xq = x + rng.normal(scale=0.3, size=2)
            mu, phi = blended.estimate(t, xq)
            blend_worst = max(blend_worst,
                              float((np.abs(mu - w_fn(xq)) - phi).max()))
    blend_ok = blend_worst <= 0.0
    return SuiteResult("constraint-bounding", pointwise_ok and blend_ok,
                       {"max_overestimate": worst,
                        "max_blend_excess": blend_worst})


def filter_optimality(instances: int = 1000, perturbations: int = 1000,
                      seed: int = 3, corrupt=None) -> SuiteResult:
    """First-order conditions and cost dominance of the closed-form filter."""
    rng = np.random.default_rng(seed)
    max_stat = 0.0
    max_improve = -math.inf
    for _ in range(instances):
        x, mu, phi, u_d, spec, params, dyn = _random_filter_instance(rng)
        res = safety_filter(x, mu, phi, u_d, spec, params, dyn)
        if corrupt is not None:
            res = corrupt(res)
        h = spec.value(x)
        lg = spec.gradient(x) @ dyn.g(x)
        # stationarity of the Lagrangian at (u*, delta*)
        gu = params.H @ (res.u_star - u_d) - res.lambda_star * lg
        gd = params.beta * res.delta_star - res.lambda_star * h
        scale = max(1.0, float(np.abs(params.H).max()), abs(h))
        max_stat = max(max_stat, float(np.abs(gu).max()) / scale, abs(gd) / scale)
        # complementary slackness and feasibility
        psi_opt = constraint_psi(x, mu, phi, res.u_star, res.delta_star, spec, dyn)
        max_stat = max(max_stat, abs(res.lambda_star * psi_opt) / scale,
                       max(0.0, -psi_opt))

        m = u_d.shape[0]
        cand_u = res.u_star[None, :] + rng.normal(scale=0.5, size=(perturbations, m))
        cand_d = res.delta_star + rng.normal(scale=0.5, size=perturbations)
        # feasibility of each candidate pair under the same constraint data
        grad = spec.gradient(x)
        base = (float(grad @ dyn.f(x)) + float(grad @ mu)
                - float(np.abs(grad) @ phi) + spec.alpha(h))
        feas = base + cand_u @ lg + cand_d * h >= 0.0
        if not np.any(feas):
            continue
        du = cand_u[feas] - u_d
        jbar = 0.5 * np.einsum("ci,ij,cj->c", du, params.H, du) \
            + 0.5 * params.beta * cand_d[feas] ** 2
        du0 = res.u_star - u_d
        jopt = 0.5 * float(du0 @ params.H @ du0) + 0.5 * params.beta * res.delta_star ** 2
        max_improve = max(max_improve, float((jopt - jbar).max()))
    return SuiteResult("filter-optimality", max_stat <= 1e-9 and max_improve <= 1e-9,
                       {"max_kkt_residual": max_stat,
                        "max_cost_improvement": max_improve})


def run_all(fast: bool = False):
    """All suites; ``fast`` shrinks the sample counts for smoke testing."""
    if fast:
        return [
            recursive_equivalence(steps=60, budget=16, local=8),
            bound_validity(updates=60, queries=500),
            constraint_bounding(instances=60),
            filter_optimality(instances=60, perturbations=100),
        ]
    return [
        recursive_equivalence(),
        bound_validity(),
        constraint_bounding(),
        filter_optimality(),
    ]
