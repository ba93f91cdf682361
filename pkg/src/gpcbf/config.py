"""Run configuration: INI-style files with strict key validation.

Every physical and algorithmic parameter has a named key whose default is
the study value, so a zero-config run reproduces the reference setup.  The
effective configuration is echoed into the output directory and reproduces
the run exactly when fed back in (the seed is part of it).

Sections: [run] scenario/case/seed, [model] streaming-GP settings, [sim]
integration settings, and one of [pendulum] / [robot] for the active
scenario.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .gp_stream import ModelConfig
from .scenarios import Scenario, make_pendulum, make_robot
from .scenarios.pendulum import PendulumParams
from .scenarios.pendulum import default_model_config as pendulum_model_config
from .scenarios.robot import RobotParams
from .scenarios.robot import default_model_config as robot_model_config
from .simulator import SimConfig

SCENARIOS = ("pendulum", "robot")


@dataclass
class RunSettings:
    scenario: str
    case: int = 1
    seed: int = 0
    model: ModelConfig = None
    sim: SimConfig = None
    params: object = None
    duration: float = None       # filled from the scenario default if absent
    steady_time: float = None

    def build_scenario(self) -> Scenario:
        if self.scenario == "pendulum":
            return make_pendulum(params=self.params, model_config=self.model,
                                 duration=self.duration, steady_time=self.steady_time)
        return make_robot(params=self.params, model_config=self.model,
                          duration=self.duration, steady_time=self.steady_time)


def defaults(scenario: str) -> RunSettings:
    if scenario == "pendulum":
        return RunSettings(scenario="pendulum", model=pendulum_model_config(),
                           sim=SimConfig(duration=40.0), params=PendulumParams(),
                           duration=40.0, steady_time=20.0)
    if scenario == "robot":
        return RunSettings(scenario="robot", model=robot_model_config(),
                           sim=SimConfig(duration=60.0), params=RobotParams(),
                           duration=60.0, steady_time=50.0)
    raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        if value and isinstance(value[0], (tuple, list)):
            return "; ".join(" ".join(repr(float(v)) for v in row) for row in value)
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_like(text: str, template):
    """Parse ``text`` with the same structure as the default value."""
    text = text.strip()
    if isinstance(template, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    if isinstance(template, (tuple, list)):
        if template and isinstance(template[0], (tuple, list)):
            rows = [r for r in (s.strip() for s in text.split(";")) if r]
            return tuple(tuple(float(v) for v in r.split()) for r in rows)
        return tuple(float(v) for v in text.split())
    return text


def _apply_section(obj, section: configparser.SectionProxy, name: str):
    """Rebuild a dataclass with parsed overrides; rejects unknown keys."""
    fields = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    updates = {}
    for key, raw in section.items():
        if key not in fields:
            raise ConfigError(f"unknown key '{key}' in section [{name}]")
        try:
            updates[key] = _parse_like(raw, fields[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}.{key}: {raw!r} ({exc})") from exc
    return replace(obj, **updates) if updates else obj


_MODEL_KEYS = ("budget", "local_budget", "noise", "rkhs_bound", "sample_period",
               "blend_rate", "refresh_interval")
_KERNEL_KEYS = ("kernel_scale", "kernel_bandwidth")


def _apply_model(model: ModelConfig, section, name: str) -> ModelConfig:
    updates, kern = {}, {}
    for key, raw in section.items():
        if key in _MODEL_KEYS:
            template = getattr(model, key)
            updates[key] = _parse_like(raw, template)
        elif key in _KERNEL_KEYS:
            kern[key.removeprefix("kernel_")] = float(raw)
        else:
            raise ConfigError(f"unknown key '{key}' in section [{name}]")
    if kern:
        updates["kernel"] = replace(model.kernel, **kern)
    return replace(model, **updates) if updates else model


def load_settings(scenario: str = None, case: int = None, seed: int = None,
                  config_path=None) -> RunSettings:
    """Resolve defaults, an optional config file, and CLI overrides.

    CLI arguments win over the file's [run] section, which wins over the
    defaults.  ``scenario`` must come from the CLI or the file.
    """
    parser = configparser.ConfigParser()
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read_string(path.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc

    run_sec = parser["run"] if parser.has_section("run") else {}
    scenario = scenario or run_sec.get("scenario")
    if scenario is None:
        raise ConfigError("no scenario given (use --scenario or a [run] section)")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")

    st = defaults(scenario)
    st.case = case if case is not None else int(run_sec.get("case", st.case))
    st.seed = seed if seed is not None else int(run_sec.get("seed", st.seed))
    st.steady_time = float(run_sec.get("steady_time", st.steady_time))
    if st.case not in (1, 2, 3):
        raise ConfigError(f"case must be 1, 2 or 3, got {st.case}")

    for name in parser.sections():
        section = parser[name]
        if name == "run":
            for key in section:
                if key not in ("scenario", "case", "seed", "steady_time"):
                    raise ConfigError(f"unknown key '{key}' in section [run]")
        elif name == "model":
            st.model = _apply_model(st.model, section, name)
        elif name == "sim":
            if "seed" in section:
                raise ConfigError("set the seed under [run], not [sim]")
            st.sim = _apply_section(st.sim, section, name)
        elif name == scenario:
            st.params = _apply_section(st.params, section, name)
        elif name in SCENARIOS:
            raise ConfigError(f"section [{name}] does not match scenario '{scenario}'")
        else:
            raise ConfigError(f"unknown section [{name}]")

    st.sim = replace(st.sim, seed=st.seed)
    st.duration = st.sim.duration
    return st


def settings_to_ini(st: RunSettings) -> str:
    """Effective configuration as INI text; feeding it back reproduces the run."""
    parser = configparser.ConfigParser()
    parser["run"] = {"scenario": st.scenario, "case": str(st.case),
                     "seed": str(st.seed), "steady_time": _fmt(st.steady_time)}
    parser["model"] = {
        "budget": str(st.model.budget),
        "local_budget": str(st.model.local_budget),
        "noise": _fmt(st.model.noise),
        "rkhs_bound": _fmt(st.model.rkhs_bound),
        "kernel_scale": _fmt(st.model.kernel.scale),
        "kernel_bandwidth": _fmt(st.model.kernel.bandwidth),
        "sample_period": _fmt(st.model.sample_period),
        "blend_rate": _fmt(st.model.blend_rate),
        "refresh_interval": str(st.model.refresh_interval),
    }
    parser["sim"] = {
        "duration": _fmt(st.sim.duration),
        "control_rate": _fmt(st.sim.control_rate),
        "substeps": str(st.sim.substeps),
    }
    parser[st.scenario] = {
        f.name: _fmt(getattr(st.params, f.name))
        for f in dataclasses.fields(st.params)
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
