"""JSON run configuration shared by the command line entry points.

Every section is optional; missing keys keep the dataclass defaults.

    {
      "scenario": {"n_objects": 10, "n_partially_occluded": 4, "n_swap": 2},
      "perception": {"sensing_radius": 8.0, "label_noise": 0.0, "waypoints_per_attempt": 1},
      "cem": {"n_samples": 64, "n_elite": 8, "iterations": 10, "std_floor": 1.0},
      "rl": {"gamma": 0.95, "total_steps": 30000},
      "uodm": {"epochs": 400},
      "bench": {"suites": "table", "episodes": 10, "planners": ["cql", "hp", "rs", "ge"], "workers": 1}
    }

``bench.suites`` is either ``"table"`` (the N = 10/20/30 P.O./F.O. layout) or
a list of ``{"name": ..., "episodes": ..., "scenario": {...}}`` entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .collision import CemParams
from .gridworld import ScenarioConfig
from .harness import PLANNER_NAMES, PLANNERS, BenchConfig, SuiteEntry, table_suite
from .perception import WAYPOINTS_PER_ATTEMPT
from .rlplanner import RlConfig
from .uodm import UodmConfig

SECTIONS = ("scenario", "perception", "cem", "rl", "uodm", "bench")


class ConfigError(ValueError):
    pass


@dataclass
class PerceptionConfig:
    sensing_radius: float = 0.0  # 0 keeps the scenario's automatic radius
    label_noise: float = 0.0
    waypoints_per_attempt: int = WAYPOINTS_PER_ATTEMPT


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    cem: CemParams = field(default_factory=CemParams)
    rl: RlConfig = field(default_factory=RlConfig)
    uodm: UodmConfig = field(default_factory=UodmConfig)
    bench: dict = field(default_factory=dict)

    def scenario_config(self) -> ScenarioConfig:
        if self.perception.sensing_radius:
            return replace(self.scenario, sensing_radius=self.perception.sensing_radius)
        return self.scenario

    def bench_config(self, seed: int, planners: tuple[str, ...] | None = None) -> BenchConfig:
        b = self.bench
        episodes = int(b.get("episodes", 10))
        suites = b.get("suites", "table")
        if suites == "table":
            entries = table_suite(episodes, tuple(b.get("sizes", (10, 20, 30))))
        elif isinstance(suites, list):
            entries = []
            for i, s in enumerate(suites):
                if not isinstance(s, dict):
                    raise ConfigError(f"bench.suites[{i}] must be an object")
                entries.append(
                    SuiteEntry(
                        str(s.get("name", f"suite{i}")),
                        _build(ScenarioConfig, s.get("scenario", {}), f"bench.suites[{i}].scenario"),
                        int(s.get("episodes", episodes)),
                    )
                )
        else:
            raise ConfigError("bench.suites must be 'table' or a list of suites")
        if self.perception.sensing_radius:
            entries = [replace(e, scenario=replace(e.scenario, sensing_radius=self.perception.sensing_radius)) for e in entries]
        names = planners or tuple(b.get("planners", PLANNERS))
        names = tuple(PLANNER_NAMES.get(p, p) for p in names)
        for p in names:
            if p not in PLANNERS:
                raise ConfigError(f"unknown planner {p!r}")
        return BenchConfig(
            suites=entries,
            planners=names,
            seed=seed,
            label_noise=self.perception.label_noise,
            step_cap_factor=int(b.get("step_cap_factor", 10)),
            waypoints_per_attempt=self.perception.waypoints_per_attempt,
            workers=int(b.get("workers", 1)),
        )


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    if cls is UodmConfig and "hidden" in data:
        data = {**data, "hidden": tuple(data["hidden"])}
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    bench = d.get("bench", {})
    if not isinstance(bench, dict):
        raise ConfigError("bench must be an object")
    return RunConfig(
        scenario=_build(ScenarioConfig, d.get("scenario", {}), "scenario"),
        perception=_build(PerceptionConfig, d.get("perception", {}), "perception"),
        cem=_build(CemParams, d.get("cem", {}), "cem"),
        rl=_build(RlConfig, d.get("rl", {}), "rl"),
        uodm=_build(UodmConfig, d.get("uodm", {}), "uodm"),
        bench=bench,
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
