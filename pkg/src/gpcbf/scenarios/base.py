"""Scenario scaffolding: dynamics container, estimate wiring for the three
experiment cases, and the interface the simulator drives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..cbf_filter import BarrierSpec, FilterParams
from ..errors import UsageError
from ..gp_stream import ModelConfig


@dataclass(frozen=True)
class Dynamics:
    """Control-affine system x' = f(x) + w(x) + g(x) u with w unknown.

    ``uncertain`` lists the state-derivative components w can act on; the
    remaining components are structurally exact (kinematic identities), so
    their estimate and error bound are identically zero.  ``rhs`` is the
    fused right-hand side used by the integrator; it must equal
    f(x) + w(x) + g(x) @ u, which the test suite checks.
    """

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    w: Callable[[np.ndarray], np.ndarray]
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    uncertain: tuple

    def w_meas(self, x) -> np.ndarray:
        """True uncertainty restricted to the modeled components."""
        return self.w(np.asarray(x, dtype=float))[list(self.uncertain)]

    def embed(self, vec) -> np.ndarray:
        """Lift a modeled-component vector to a full state-size vector."""
        out = np.zeros(self.n)
        out[list(self.uncertain)] = vec
        return out


@dataclass(frozen=True)
class CaseSelector:
    """Which estimates feed the constraint and the desired control."""

    case_id: int

    def __post_init__(self):
        if self.case_id not in (1, 2, 3):
            raise UsageError(f"case_id must be 1, 2 or 3, got {self.case_id}")


def case_wiring(case_id, live_estimate, initial_estimate):
    """Route (mean, bound) pairs to the constraint and the desired control.

    Case 1: live estimates everywhere.
    Case 2: live estimates in the constraint, frozen initial mean in the
            desired control.
    Case 3: frozen initial (mean, bound) in the constraint, live mean in the
            desired control.
    """
    case_id = case_id.case_id if isinstance(case_id, CaseSelector) else case_id
    if case_id == 1:
        return live_estimate, live_estimate
    if case_id == 2:
        return live_estimate, initial_estimate
    if case_id == 3:
        return initial_estimate, live_estimate
    raise UsageError(f"case_id must be 1, 2 or 3, got {case_id}")


@dataclass
class Scenario:
    """Everything the simulator needs to run one system closed loop."""

    name: str
    params: object
    dynamics: Dynamics
    barrier: BarrierSpec
    filter_params: FilterParams
    model_config: ModelConfig
    x0: np.ndarray
    duration: float
    steady_time: float
    # desired control from (state, modeled-component estimate, time)
    desired: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    # frozen step-0 estimate used by cases 2 and 3
    initial_mu: np.ndarray
    initial_phi: np.ndarray
    state_names: tuple
    control_names: tuple
    monitored: tuple                     # (state index, label) per modeled entry
    # per-step hook (waypoint switching); called once before the controller
    observe: Optional[Callable[[np.ndarray, float], None]] = None
    # mission-state reset; the simulator calls it at the start of every run
    reset: Optional[Callable[[], None]] = None
    # extra logged columns: barrier chain / composed barrier components
    components: Optional[Callable[[np.ndarray], dict]] = None
    # reference columns (desired trajectory / active goal)
    reference: Optional[Callable[[np.ndarray, float], dict]] = None
    tracking_error: Optional[Callable[[np.ndarray, float], float]] = None
