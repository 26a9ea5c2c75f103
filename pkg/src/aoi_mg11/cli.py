"""Command-line front end: analyze, simulate, validate, optimize, sweep.

Exit codes: 0 success, 2 config/flag error, 3 domain error, 4 replication
failure, 5 validation check failure. Output files are written atomically
(temp file + rename) so failures never leave partial files behind.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analytic, flowgraph, optimizer, simulator
from .analytic import SystemConfig
from .config import RunConfig, load_run_config
from .distributions import distribution_from_config
from .errors import (
    AoiError,
    ConfigError,
    DivergenceError,
    InvariantViolationError,
    ParameterDomainError,
    PoleError,
    SingularSystemError,
)

EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_REPLICATION = 4
EXIT_VALIDATION = 5

_ANALYZE_COLUMNS = (
    "stream",
    "lambda_i",
    "p_i",
    "avg_age",
    "peak_age",
    "mean_T",
    "mean_Y",
    "mean_Y2",
    "delivery_rate",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_table(rows: list[dict], columns: tuple[str, ...], out) -> None:
    """Write rows as CSV (6 significant digits) or JSON (full precision)."""
    if out.format == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_fmt(row.get(c)) for c in columns))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({"columns": list(columns), "rows": rows}, indent=2) + "\n"
    if out.path:
        _atomic_write(out.path, text)
    else:
        sys.stdout.write(text)


def _analyze_rows(cfg: SystemConfig) -> list[dict]:
    report = analytic.age_report(cfg)
    rows = []
    for s in report.streams:
        rows.append(
            {
                "stream": s.stream,
                "lambda_i": s.rate,
                "p_i": s.prob,
                "avg_age": s.avg_age,
                "peak_age": s.peak_age,
                "mean_T": s.mean_system_time,
                "mean_Y": s.mean_interdeparture,
                "mean_Y2": s.second_moment_interdeparture,
                "delivery_rate": s.delivery_rate,
            }
        )
    rows.append(
        {
            "stream": "total",
            "lambda_i": cfg.total_rate,
            "p_i": 1.0,
            "avg_age": report.total_avg_age,
            "peak_age": report.total_peak_age,
            "mean_T": report.streams[0].mean_system_time,
            "mean_Y": None,
            "mean_Y2": None,
            "delivery_rate": math.fsum(s.delivery_rate for s in report.streams),
        }
    )
    return rows


def cmd_analyze(run_cfg: RunConfig) -> int:
    _emit_table(_analyze_rows(run_cfg.system), _ANALYZE_COLUMNS, run_cfg.output)
    return 0


def _sim_params(run_cfg: RunConfig, seed_override: int | None) -> simulator.SimParams:
    sim = run_cfg.simulation
    if sim is None:
        raise ConfigError("this command requires a 'simulation' section in the config")
    seed = seed_override if seed_override is not None else sim.seed
    return simulator.SimParams(
        cfg=run_cfg.system,
        max_time=sim.max_time,
        min_deliveries_per_stream=sim.min_deliveries_per_stream,
        seed=seed,
        warmup_fraction=sim.warmup_fraction,
        replications=sim.replications,
        mgf_probes=run_cfg.mgf_s_values,
    )


def _simulate_rows(run_cfg: RunConfig, result: simulator.SimResult) -> list[dict]:
    report = analytic.age_report(run_cfg.system)
    rows = []
    for s, ref in zip(result.streams, report.streams):
        rows.append(
            {
                "stream": s.stream,
                "lambda_i": ref.rate,
                "p_i": ref.prob,
                "avg_age": s.avg_age,
                "avg_age_se": s.avg_age_se,
                "peak_age": s.avg_peak,
                "peak_age_se": s.avg_peak_se,
                "mean_T": s.mean_system_time,
                "mean_T_se": s.mean_system_time_se,
                "mean_Y": s.mean_interdeparture,
                "mean_Y_se": s.mean_interdeparture_se,
                "mean_Y2": s.second_moment_interdeparture,
                "mean_Y2_se": s.second_moment_interdeparture_se,
                "delivery_rate": s.delivery_rate,
                "delivery_rate_se": s.delivery_rate_se,
                "ref_avg_age": ref.avg_age,
                "ref_peak_age": ref.peak_age,
            }
        )
    return rows


_SIMULATE_COLUMNS = (
    "stream",
    "lambda_i",
    "p_i",
    "avg_age",
    "avg_age_se",
    "peak_age",
    "peak_age_se",
    "mean_T",
    "mean_T_se",
    "mean_Y",
    "mean_Y_se",
    "mean_Y2",
    "mean_Y2_se",
    "delivery_rate",
    "delivery_rate_se",
    "ref_avg_age",
    "ref_peak_age",
)


def cmd_simulate(run_cfg: RunConfig, seed_override: int | None, trace_path: str | None) -> int:
    params = _sim_params(run_cfg, seed_override)
    trace_path = trace_path or run_cfg.output.trace_path
    try:
        result = simulator.run(params, collect_trace=trace_path is not None)
    except AoiError:
        raise
    except Exception as exc:  # a failed replication is its own exit code
        print(f"replication failed: {exc}", file=sys.stderr)
        return EXIT_REPLICATION
    _emit_table(_simulate_rows(run_cfg, result), _SIMULATE_COLUMNS, run_cfg.output)
    if trace_path is not None:
        lines = ["time,kind,stream,generation_time"]
        for ev in result.trace:
            lines.append(f"{ev.time!r},{ev.kind},{ev.stream},{ev.generation_time!r}")
        _atomic_write(trace_path, "\n".join(lines) + "\n")
    return 0


def _parse_expect(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--expect needs KEY=VALUE, got {pair!r}")
        key, _, val = pair.partition("=")
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"--expect value for {key!r} is not a number: {val!r}") from exc
    return out


def _run_validation(run_cfg: RunConfig, seed_override: int | None, expect: dict[str, float]):
    """The full oracle battery; returns a list of check dicts."""
    cfg = run_cfg.system
    checks: list[dict] = []

    def add(name, observed, expected, tol):
        delta = abs(observed - expected)
        checks.append(
            {
                "name": name,
                "observed": observed,
                "expected": expected,
                "delta": delta,
                "tolerance": tol,
                "passed": bool(delta <= tol),
            }
        )

    known_expect = set()
    s_values = run_cfg.mgf_s_values or (-0.25, -0.5, -1.0)

    # interdeparture MGF: closed form vs transfer function vs elimination vs path sum
    for i in range(1, cfg.num_streams + 1):
        pr = flowgraph.clock_probs(cfg, i)
        for s in s_values:
            ref = analytic.interdeparture_mgf(cfg, i, s)
            w = flowgraph.edge_weights(cfg, s)
            add(f"transfer_function[i={i},s={s}]", flowgraph.transfer_function(w, pr), ref, 1e-10 * abs(ref))
            add(
                f"elimination[i={i},s={s}]",
                flowgraph.solve_transfer_by_elimination(flowgraph.build_graph(pr, w)),
                ref,
                1e-10 * abs(ref),
            )
            value, bound = flowgraph.path_enumeration_oracle(pr, w, max_edges=4096)
            add(f"path_sum[i={i},s={s}]", value, ref, bound + 1e-10 * abs(ref))

    # closed-form moments vs numeric differentiation of the MGFs
    e_t = analytic.mean_system_time(cfg)
    add(
        "mean_system_time_numeric",
        analytic.moments_from_mgf(lambda s: analytic.system_time_mgf(cfg, s), 1),
        e_t,
        1e-5 * abs(e_t),
    )
    for i in range(1, cfg.num_streams + 1):
        phi = lambda s, i=i: analytic.interdeparture_mgf(cfg, i, s)
        e_y = analytic.mean_interdeparture(cfg, i)
        e_y2 = analytic.second_moment_interdeparture(cfg, i)
        add(f"mean_interdeparture_numeric[i={i}]", analytic.moments_from_mgf(phi, 1), e_y, 1e-5 * abs(e_y))
        add(f"second_moment_numeric[i={i}]", analytic.moments_from_mgf(phi, 2), e_y2, 1e-5 * abs(e_y2))

    # dual-route self-check built into age_report
    try:
        analytic.age_report(cfg)
        checks.append(
            {
                "name": "dual_route_decomposition",
                "observed": 0.0,
                "expected": 0.0,
                "delta": 0.0,
                "tolerance": 1e-9,
                "passed": True,
            }
        )
    except InvariantViolationError as exc:
        checks.append(
            {
                "name": "dual_route_decomposition",
                "observed": math.nan,
                "expected": 0.0,
                "delta": math.inf,
                "tolerance": 1e-9,
                "passed": False,
                "detail": str(exc),
            }
        )

    # Monte Carlo conditional clocks vs closed-form MGFs (5 sigma)
    sim_settings = run_cfg.simulation
    mc_seed = seed_override if seed_override is not None else (sim_settings.seed if sim_settings else 0)
    rng = np.random.default_rng(np.random.SeedSequence(mc_seed).spawn(1)[0])
    lam = cfg.total_rate
    clock_refs = {
        "A": lambda s: analytic.clock_mgf_A(cfg, s),
        "Z": lambda s: analytic.clock_mgf_A(cfg, s),
        "B": lambda s: analytic.clock_mgf_B(cfg, s),
        "V": lambda s: analytic.clock_mgf_B(cfg, s),
        "U": lambda s: analytic.system_time_mgf(cfg, s),
    }
    clock_names = ["A", "B", "U"] + (["V", "Z"] if cfg.num_streams > 1 else [])
    for which in clock_names:
        stats = simulator.clock_conditional_sampler(cfg, 1, which, 200_000, rng)
        for s, (mean, se) in stats.items():
            ref = clock_refs[which](s)
            add(f"clock_{which}_mc[s={s}]", mean, ref, 5.0 * se + 1e-12)

    # simulation vs analytic ages, delivery rates, renewal identity, MGF probes
    if sim_settings is not None:
        params = _sim_params(run_cfg, seed_override)
        result = simulator.run(params)
        report = analytic.age_report(cfg)
        p_lam = cfg.service_beats_arrival()
        for s_stats, ref in zip(result.streams, report.streams):
            i = s_stats.stream
            exp_age = expect.get(f"avg_age_{i}", ref.avg_age)
            exp_peak = expect.get(f"peak_age_{i}", ref.peak_age)
            known_expect.update({f"avg_age_{i}", f"peak_age_{i}"})
            add(
                f"sim_avg_age[i={i}]",
                s_stats.avg_age,
                exp_age,
                0.015 * abs(exp_age) + 4.0 * s_stats.avg_age_se,
            )
            add(
                f"sim_peak_age[i={i}]",
                s_stats.avg_peak,
                exp_peak,
                0.015 * abs(exp_peak) + 4.0 * s_stats.avg_peak_se,
            )
            rate_ref = cfg.stream_rate(i) * p_lam
            add(
                f"sim_delivery_rate[i={i}]",
                s_stats.delivery_rate,
                rate_ref,
                0.01 * rate_ref + 3.0 * s_stats.delivery_rate_se,
            )
            add(
                f"renewal_identity[i={i}]",
                s_stats.delivery_rate * s_stats.mean_interdeparture,
                1.0,
                0.01,
            )
            for s, (mean, se) in s_stats.mgf_probes.items():
                ref_val = analytic.interdeparture_mgf(cfg, i, s)
                add(f"sim_mgf_probe[i={i},s={s}]", mean, ref_val, 0.01 * abs(ref_val) + 5.0 * se)

    unknown = set(expect) - known_expect
    if unknown:
        raise ConfigError(f"--expect key(s) {sorted(unknown)} do not name any check")
    return checks


def cmd_validate(run_cfg: RunConfig, seed_override: int | None, expect: dict[str, float]) -> int:
    checks = _run_validation(run_cfg, seed_override, expect)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(
            f"{status} {c['name']}: observed={_fmt(c['observed'])} "
            f"expected={_fmt(c['expected'])} delta={_fmt(c['delta'])} tol={_fmt(c['tolerance'])}"
        )
    n_fail = sum(1 for c in checks if not c["passed"])
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    if run_cfg.output.path:
        _atomic_write(run_cfg.output.path, json.dumps({"checks": checks}, indent=2) + "\n")
    return EXIT_VALIDATION if n_fail else 0


_SERVICE_FLAGS = {
    "exponential": ("service_rate",),
    "gamma": ("shape", "scale"),
    "deterministic": ("value",),
    "uniform": ("lower", "upper"),
}


def _dist_from_flags(args) -> "distribution_from_config":
    kind = args.service
    needed = _SERVICE_FLAGS[kind]
    spec = {"type": kind}
    for flag in needed:
        val = getattr(args, flag)
        if val is None:
            raise ConfigError(f"--service {kind} requires --{flag.replace('_', '-')}")
        spec["rate" if flag == "service_rate" else flag] = val
    return distribution_from_config(spec)


def cmd_optimize(args) -> int:
    if args.rate <= 0:
        raise ConfigError(f"--rate must be > 0, got {args.rate}")
    if args.streams < 1:
        raise ConfigError(f"--streams must be >= 1, got {args.streams}")
    dist = _dist_from_flags(args)
    result = optimizer.optimal_allocation(args.rate, args.streams, dist, n_random_points=args.points)
    payload = {
        "p_star": list(result.p_star),
        "delta_tot_star": result.delta_tot_star,
        "delta_peak_tot_star": result.delta_peak_tot_star,
        "verification": {
            "n_random_points": result.n_random_points,
            "max_violation": result.max_violation,
        },
    }
    print(json.dumps(payload, indent=2))
    return 0


_SWEEP_COLUMNS = (
    "param",
    "value",
    "stream",
    "source",
    "avg_age",
    "peak_age",
    "mean_T",
    "mean_Y",
    "mean_Y2",
    "delivery_rate",
    "delta_tot",
    "delta_peak_tot",
)


def _sweep_config(base: SystemConfig, param: str, value: float) -> SystemConfig:
    if param == "total_rate":
        return SystemConfig(value, base.stream_probs, base.service)
    if param.startswith("p"):
        try:
            idx = int(param[1:])
        except ValueError:
            idx = -1
        if not 1 <= idx <= base.num_streams:
            raise ConfigError(f"sweep parameter {param!r} does not name a stream probability")
        if base.num_streams < 2:
            raise ConfigError("sweeping a stream probability needs at least two streams")
        if not 0.0 < value < 1.0:
            raise ConfigError(f"stream probability grid value {value} outside (0, 1)")
        share = (1.0 - value) / (base.num_streams - 1)
        probs = tuple(value if j == idx - 1 else share for j in range(base.num_streams))
        return SystemConfig(base.total_rate, probs, base.service)
    service_spec = base.service.to_config()
    if param not in service_spec or param == "type":
        raise ConfigError(
            f"unknown sweep parameter {param!r}; expected total_rate, p<i>, "
            f"or a field of the service law {sorted(k for k in service_spec if k != 'type')}"
        )
    service_spec[param] = value
    return SystemConfig(base.total_rate, base.stream_probs, distribution_from_config(service_spec))


def cmd_sweep(run_cfg: RunConfig, param: str, grid: list[float], with_sim: bool, seed_override) -> int:
    if not grid:
        raise ConfigError("sweep grid must be non-empty")
    rows = []
    for value in grid:
        cfg = _sweep_config(run_cfg.system, param, value)
        report = analytic.age_report(cfg)
        for s in report.streams:
            rows.append(
                {
                    "param": param,
                    "value": value,
                    "stream": s.stream,
                    "source": "analytic",
                    "avg_age": s.avg_age,
                    "peak_age": s.peak_age,
                    "mean_T": s.mean_system_time,
                    "mean_Y": s.mean_interdeparture,
                    "mean_Y2": s.second_moment_interdeparture,
                    "delivery_rate": s.delivery_rate,
                    "delta_tot": report.total_avg_age,
                    "delta_peak_tot": report.total_peak_age,
                }
            )
        if with_sim:
            swept = RunConfig(
                system=cfg,
                simulation=run_cfg.simulation,
                mgf_s_values=(),
                output=run_cfg.output,
            )
            result = simulator.run(_sim_params(swept, seed_override))
            for s in result.streams:
                rows.append(
                    {
                        "param": param,
                        "value": value,
                        "stream": s.stream,
                        "source": "simulated",
                        "avg_age": s.avg_age,
                        "peak_age": s.avg_peak,
                        "mean_T": s.mean_system_time,
                        "mean_Y": s.mean_interdeparture,
                        "mean_Y2": s.second_moment_interdeparture,
                        "delivery_rate": s.delivery_rate,
                        "delta_tot": None,
                        "delta_peak_tot": None,
                    }
                )
    _emit_table(rows, _SWEEP_COLUMNS, run_cfg.output)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi",
        description="Age-of-Information metrics for the multi-stream M/G/1/1 preemptive queue",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("analyze", "simulate", "validate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", required=True, help="path to JSON run config")
        if name == "simulate":
            p.add_argument("--trace", default=None, help="write an event trace CSV here")
        if name == "validate":
            p.add_argument(
                "--expect",
                action="append",
                default=[],
                metavar="K=V",
                help="override an expected value, e.g. avg_age_1=99",
            )
        if name == "sweep":
            p.add_argument("--param", required=True, help="total_rate, p<i>, or a service field")
            p.add_argument("--grid", required=True, help="comma-separated grid values")
            p.add_argument("--with-sim", action="store_true", help="add simulated rows")

    p = sub.add_parser("optimize")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--streams", type=int, required=True)
    p.add_argument("--service", required=True, choices=sorted(_SERVICE_FLAGS))
    p.add_argument("--service-rate", dest="service_rate", type=float, default=None)
    p.add_argument("--shape", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--value", type=float, default=None)
    p.add_argument("--lower", type=float, default=None)
    p.add_argument("--upper", type=float, default=None)
    p.add_argument("--points", type=int, default=1000, help="random simplex points to verify")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    seed_override = None
    env_seed = os.environ.get("AOI_SEED")
    if env_seed is not None:
        try:
            seed_override = int(env_seed)
        except ValueError:
            print(f"AOI_SEED must be an integer, got {env_seed!r}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        if args.command == "optimize":
            return cmd_optimize(args)
        run_cfg = load_run_config(args.config)
        if args.command == "analyze":
            return cmd_analyze(run_cfg)
        if args.command == "simulate":
            return cmd_simulate(run_cfg, seed_override, args.trace)
        if args.command == "validate":
            return cmd_validate(run_cfg, seed_override, _parse_expect(args.expect))
        if args.command == "sweep":
            try:
                grid = [float(v) for v in args.grid.split(",") if v.strip() != ""]
            except ValueError as exc:
                raise ConfigError(f"malformed grid {args.grid!r}: {exc}") from exc
            return cmd_sweep(run_cfg, args.param, grid, args.with_sim, seed_override)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterDomainError, PoleError, SingularSystemError, DivergenceError, IndexError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except InvariantViolationError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
