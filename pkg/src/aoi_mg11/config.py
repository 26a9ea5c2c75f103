"""Run-configuration file parsing and validation.

Configs are JSON with four sections: system (required), simulation, probes,
and output. Unknown fields anywhere are errors, not warnings: a silently
ignored typo in a parameter name would invalidate a validation run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .analytic import SystemConfig
from .distributions import distribution_from_config
from .errors import ConfigError, ParameterDomainError

__all__ = ["RunConfig", "SimulationSettings", "OutputSettings", "load_run_config"]


@dataclass(frozen=True)
class SimulationSettings:
    max_time: float | None
    min_deliveries_per_stream: int | None
    seed: int
    replications: int
    warmup_fraction: float


@dataclass(frozen=True)
class OutputSettings:
    format: str  # csv | json
    path: str | None
    trace_path: str | None


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    simulation: SimulationSettings | None
    mgf_s_values: tuple[float, ...]
    output: OutputSettings


def _require_object(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object")
    return value


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)} in {where}")


def _number(obj: dict, key: str, where: str) -> float:
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _parse_system(obj: dict) -> SystemConfig:
    _reject_unknown(obj, {"total_rate", "stream_probs", "stream_rates", "service"}, "system")
    if "service" not in obj:
        raise ConfigError("system.service is required")
    service = distribution_from_config(obj["service"])

    has_probs = "stream_probs" in obj
    has_rates = "stream_rates" in obj
    if has_probs == has_rates:
        raise ConfigError("system: exactly one of stream_probs / stream_rates must be given")

    if has_probs:
        if "total_rate" not in obj:
            raise ConfigError("system.total_rate is required with stream_probs")
        total_rate = _number(obj, "total_rate", "system")
        probs = obj["stream_probs"]
        if not isinstance(probs, list) or not probs:
            raise ConfigError("system.stream_probs must be a non-empty array")
        probs = tuple(float(p) for p in probs)
    else:
        rates = obj["stream_rates"]
        if not isinstance(rates, list) or not rates:
            raise ConfigError("system.stream_rates must be a non-empty array")
        rates = [float(r) for r in rates]
        if any(r <= 0 for r in rates):
            raise ConfigError("system.stream_rates must all be > 0")
        total = math.fsum(rates)
        if "total_rate" in obj:
            declared = _number(obj, "total_rate", "system")
            if abs(declared - total) > 1e-9 * max(1.0, total):
                raise ConfigError(
                    f"system.total_rate {declared!r} does not match sum of stream_rates {total!r}"
                )
        total_rate = total
        probs = tuple(r / total for r in rates)

    try:
        return SystemConfig(total_rate=total_rate, stream_probs=probs, service=service)
    except ParameterDomainError as exc:
        raise ConfigError(f"system: {exc}") from exc


def _parse_simulation(obj: dict) -> SimulationSettings:
    _reject_unknown(
        obj,
        {"max_time", "min_deliveries_per_stream", "seed", "replications", "warmup_fraction"},
        "simulation",
    )
    has_time = "max_time" in obj
    has_count = "min_deliveries_per_stream" in obj
    if has_time == has_count:
        raise ConfigError(
            "simulation: exactly one of max_time / min_deliveries_per_stream must be given"
        )
    max_time = _number(obj, "max_time", "simulation") if has_time else None
    min_count = None
    if has_count:
        v = obj["min_deliveries_per_stream"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError("simulation.min_deliveries_per_stream must be a positive integer")
        min_count = v
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("simulation.seed must be an integer")
    reps = obj.get("replications", 1)
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 1:
        raise ConfigError("simulation.replications must be a positive integer")
    warmup = _number(obj, "warmup_fraction", "simulation") if "warmup_fraction" in obj else 0.05
    if not 0.0 <= warmup < 1.0:
        raise ConfigError("simulation.warmup_fraction must be in [0, 1)")
    if max_time is not None and max_time <= 0:
        raise ConfigError("simulation.max_time must be > 0")
    return SimulationSettings(
        max_time=max_time,
        min_deliveries_per_stream=min_count,
        seed=seed,
        replications=reps,
        warmup_fraction=warmup,
    )


def _parse_probes(obj: dict) -> tuple[float, ...]:
    _reject_unknown(obj, {"mgf_s_values"}, "probes")
    vals = obj.get("mgf_s_values", [])
    if not isinstance(vals, list):
        raise ConfigError("probes.mgf_s_values must be an array")
    out = []
    for v in vals:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"probes.mgf_s_values entries must be numbers, got {v!r}")
        if v > 0:
            raise ConfigError(
                f"probes.mgf_s_values must be <= 0 (empirical MGF checks are only "
                f"stable for non-positive s), got {v}"
            )
        out.append(float(v))
    return tuple(out)


def _parse_output(obj: dict) -> OutputSettings:
    _reject_unknown(obj, {"format", "path", "trace_path"}, "output")
    fmt = obj.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be 'csv' or 'json', got {fmt!r}")
    path = obj.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path must be a string")
    trace_path = obj.get("trace_path")
    if trace_path is not None and not isinstance(trace_path, str):
        raise ConfigError("output.trace_path must be a string")
    return OutputSettings(format=fmt, path=path, trace_path=trace_path)


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a config file; raises ConfigError on any problem."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    root = _require_object(data, "config root")
    _reject_unknown(root, {"system", "simulation", "probes", "output"}, "config root")
    if "system" not in root:
        raise ConfigError("config: the 'system' section is required")
    system = _parse_system(_require_object(root["system"], "system"))
    simulation = None
    if "simulation" in root:
        simulation = _parse_simulation(_require_object(root["simulation"], "simulation"))
    probes = _parse_probes(_require_object(root.get("probes", {}), "probes"))
    output = _parse_output(_require_object(root.get("output", {}), "output"))
    return RunConfig(system=system, simulation=simulation, mgf_s_values=probes, output=output)
