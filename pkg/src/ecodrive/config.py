"""Structured key-value configuration files (INI sections) covering the
scenario, signal plan, energy model, rule thresholds, reward weights,
training hyperparameters, and the evaluation grid."""

from __future__ import annotations

import configparser
import dataclasses

from .energy import EnergyParams
from .harness import GridSpec
from .reward import RewardWeights
from .rl.training import TrainConfig
from .rules import RuleConfig
from .world import ScenarioConfig, SignalTiming


def _tuple_item(text: str):
    """Coerce one comma-list element: int, then float, else string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _apply(section, cls, **fixed):
    """Build a dataclass from an INI section, coercing by field type."""
    kwargs = dict(fixed)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key not in fields:
            raise ValueError(f"unknown option {key!r} for {cls.__name__}")
        ftype = str(fields[key].type)
        if "none" in raw.lower() and "None" in ftype:
            kwargs[key] = None
        elif "tuple" in ftype:
            kwargs[key] = tuple(_tuple_item(x.strip()) for x in raw.split(","))
        elif "float" in ftype:
            kwargs[key] = float(raw)
        elif "bool" in ftype:
            kwargs[key] = raw.lower() in ("1", "true", "yes", "on")
        elif "int" in ftype:
            kwargs[key] = int(raw)
        else:
            kwargs[key] = raw
    return cls(**kwargs)


@dataclasses.dataclass
class AppConfig:
    scenario: ScenarioConfig
    energy: EnergyParams
    rules: RuleConfig
    reward: RewardWeights
    train: TrainConfig
    grid: GridSpec


def load_config(path: str | None = None) -> AppConfig:
    """Parse a config file; missing sections fall back to defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)

    signal = SignalTiming()
    if parser.has_section("signal"):
        signal = _apply(parser["signal"], SignalTiming)

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    scenario = _apply(section("scenario"), ScenarioConfig, signal=signal)
    energy = _apply(section("energy"), EnergyParams)
    rules = _apply(section("rules"), RuleConfig)
    reward = _apply(section("reward"), RewardWeights)
    train = _apply(section("train"), TrainConfig)
    grid = _apply(section("grid"), GridSpec, signal=signal)
    return AppConfig(scenario, energy, rules, reward, train, grid)


def scenario_to_text(scenario: ScenarioConfig) -> str:
    """Serialize a scenario (with its nested signal plan) to INI text."""
    parser = configparser.ConfigParser()
    parser["scenario"] = {
        f.name: repr(getattr(scenario, f.name))
        for f in dataclasses.fields(ScenarioConfig) if f.name != "signal"
    }
    parser["signal"] = {
        f.name: repr(getattr(scenario.signal, f.name))
        for f in dataclasses.fields(SignalTiming)
    }
    import io
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
