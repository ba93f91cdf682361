"""Fully parameterized example systems for the closed-loop studies."""

from .base import CaseSelector, Dynamics, Scenario, case_wiring
from .pendulum import PendulumParams, make_pendulum
from .robot import RobotParams, make_robot

__all__ = [
    "CaseSelector", "Dynamics", "Scenario", "case_wiring",
    "PendulumParams", "make_pendulum",
    "RobotParams", "make_robot",
]


def make_scenario(name: str, **kwargs) -> Scenario:
    if name == "pendulum":
        return make_pendulum(**kwargs)
    if name == "robot":
        return make_robot(**kwargs)
    raise ValueError(f"unknown scenario {name!r}; expected 'pendulum' or 'robot'")
