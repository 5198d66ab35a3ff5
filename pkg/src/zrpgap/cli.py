"""Experiment runner: dispatches subcommands, sweeps grids, writes manifests.

Every run echoes its fully resolved configuration (defaults included) into a
manifest together with sha256 digests of the written outputs, so a rerun
with the same configuration and seed is byte-identical and verifiably so.
Exit codes: 0 success, 1 configuration error, 2 capacity error, 3 partial
sweep.  The only environment variable consulted is ZRPGAP_OUT (default
output directory).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from fractions import Fraction

from . import __version__
from .coupling import (
    default_horizon,
    estimate_relaxation,
    point_mass,
    sample_coupling_times,
)
from .errors import CapacityError
from .flow import (
    CERTIFICATE_CSV_HEADER,
    comparison_certificate,
    edge_loads,
)
from .graphs import Complete, Torus
from .reversal import (
    balance_residuals,
    build_tagged_pair_chain,
    drift_check,
    sample_hitting_times,
)
from .spectral import (
    WILSON_VARIANTS,
    build_generator,
    exact_gap,
    fit_decay_rate,
    tv_curve,
    wilson_bound,
)
from .stats import (
    estimate_window_constant,
    fit_exponential_tail,
    occupancy_stats,
    poisson_concentration,
    rw_no_return_probability,
    skellam_table,
)


class ConfigError(Exception):
    pass


def _parse_rho(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(Fraction(int(num), int(den)))
    return float(text)


def _resolve_graph(args) -> Torus | Complete:
    if getattr(args, "graph", None) == "complete" or (
        getattr(args, "n", None) is not None and getattr(args, "L", None) is None
    ):
        if args.n is None:
            raise ConfigError("complete graph needs --n")
        return Complete(n=args.n)
    if getattr(args, "L", None) is None:
        raise ConfigError("torus needs --d and --L (or pass --graph complete --n N)")
    return Torus(d=args.d or 1, L=args.L)


def _resolve_particles(args, vertex_count: int) -> tuple[int, dict]:
    r = getattr(args, "r", None)
    rho = getattr(args, "rho", None)
    if (r is None) == (rho is None):
        raise ConfigError("give exactly one of --r or --rho")
    if r is None:
        requested = _parse_rho(rho) if isinstance(rho, str) else float(rho)
        r = int(round(requested * vertex_count))
        echo = {
            "rho_requested": requested,
            "r": r,
            "rho_actual": r / vertex_count,
        }
    else:
        echo = {"r": r, "rho_actual": r / vertex_count}
    if r < 0:
        raise ConfigError("particle count must be non-negative")
    return r, echo


class _OutputSink:
    def __init__(self, outdir: str):
        self.outdir = outdir
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self, manifest: dict) -> None:
        os.makedirs(self.outdir, exist_ok=True)
        digests = {}
        for name, text in self.files.items():
            path = os.path.join(self.outdir, name)
            with open(path, "w") as handle:
                handle.write(text)
            digests[name] = hashlib.sha256(text.encode()).hexdigest()
        manifest["outputs"] = digests
        with open(os.path.join(self.outdir, "manifest.json"), "w") as handle:
            handle.write(_dump_json(manifest))


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _echo_config(args, extra=None) -> dict:
    skip = {"func", "out", "config"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if extra:
        cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# Subcommand handlers: each returns (payload, files, status)
# ---------------------------------------------------------------------------

def _cmd_exact_gap(args):
    graph = _resolve_graph(args)
    r, echo = _resolve_particles(args, graph.vertex_count)
    gen = build_generator(graph, r, max_states=args.max_states)
    report = exact_gap(gen, method=args.method)
    payload = report.as_dict()
    payload["graph"] = graph.as_json()
    payload.update(echo)
    if graph.degenerate:
        payload["degenerate_torus"] = True
    return payload, {"exact_gap.json": _dump_json(payload)}, 0


def _cmd_tv_curve(args):
    graph = _resolve_graph(args)
    r, echo = _resolve_particles(args, graph.vertex_count)
    gen = build_generator(graph, r, max_states=args.max_states)
    times = [args.t_max * k / (args.points - 1) for k in range(args.points)]
    start = point_mass(graph.vertex_count, r)
    curve = tv_curve(gen, start, times)
    payload = curve.as_dict()
    payload["graph"] = graph.as_json()
    payload.update(echo)
    if args.fit_window:
        lo, hi = args.fit_window
        payload["fitted_rate"] = fit_decay_rate(curve, lo, hi)
        payload["fit_window"] = [lo, hi]
    return payload, {
        "tv_curve.json": _dump_json(payload),
        "tv_curve.csv": curve.to_csv(),
    }, 0


def _cmd_wilson(args):
    graph = _resolve_graph(args)
    if not isinstance(graph, Torus):
        raise ConfigError("wilson bounds need a torus")
    r, echo = _resolve_particles(args, graph.vertex_count)
    variants = WILSON_VARIANTS if args.variant == "both" else (args.variant,)
    if args.mode == "monte_carlo" and args.seed is None:
        raise ConfigError("monte_carlo mode needs --seed")
    results = {
        variant: wilson_bound(
            graph,
            r,
            variant=variant,
            mode=args.mode,
            samples=args.samples,
            seed=args.seed,
            max_states=args.max_states,
        ).as_dict()
        for variant in variants
    }
    payload = {"graph": graph.as_json(), "bounds": results}
    payload.update(echo)
    return payload, {"wilson.json": _dump_json(payload)}, 0


def _cmd_flow(args):
    graph = Torus(d=args.d or 1, L=args.L)
    loads = edge_loads(graph)
    cert = comparison_certificate(graph, loads=loads)
    csv = CERTIFICATE_CSV_HEADER + "\n" + cert.csv_row() + "\n"
    payload = {
        "certificate": cert.as_dict(),
        "edge_loads": loads.as_dict(),
    }
    return payload, {"flow.csv": csv, "flow.json": _dump_json(payload)}, 0


def _cmd_certificate(args):
    graph = Torus(d=args.d or 1, L=args.L)
    tau2 = args.tau2
    payload_extra = {}
    if tau2 is None and getattr(args, "r", None) is not None:
        complete = Complete(n=graph.vertex_count)
        gen = build_generator(complete, args.r, max_states=args.max_states)
        tau2 = exact_gap(gen).relaxation_time
        payload_extra["tau2_source"] = "exact complete-graph gap"
        payload_extra["r"] = args.r
    cert = comparison_certificate(graph, tau2=tau2)
    payload = cert.as_dict()
    payload.update(payload_extra)
    return payload, {"certificate.json": _dump_json(payload)}, 0


def _cmd_couple(args):
    horizon = args.horizon or default_horizon(args.n, args.r, args.replicas)
    runs = sample_coupling_times(args.n, args.r, args.replicas, args.seed, horizon)
    lines = ["replica,seed,T,censored," + ",".join(
        f"stage_{j}" for j in range(args.r)
    )]
    for i, run in enumerate(runs):
        stage_cols = list(run.stage_durations) + [math.nan] * (
            args.r - len(run.stage_durations)
        )
        lines.append(
            f"{i},{run.seed},"
            + (f"{run.coupling_time!r}" if not run.censored else "")
            + f",{int(run.censored)},"
            + ",".join(repr(x) for x in stage_cols)
        )
    csv = "\n".join(lines) + "\n"
    estimate = estimate_relaxation(runs, min_uncensored=min(args.replicas, 1000),
                                   bootstrap=args.bootstrap, seed=args.seed)
    payload = estimate.as_dict()
    payload.update({"n": args.n, "r": args.r, "replicas": args.replicas,
                    "horizon": horizon})
    return payload, {"couple.csv": csv, "couple.json": _dump_json(payload)}, 0


def _cmd_zeta_balance(args):
    chain = build_tagged_pair_chain(args.n, args.j, max_states=args.max_states)
    residuals = balance_residuals(chain)
    worst = max((abs(x) for x in residuals), default=Fraction(0))
    payload = {
        "n": args.n,
        "high_count": args.j,
        "states": chain.size,
        "max_abs_residual": {"num": worst.numerator, "den": worst.denominator},
        "balanced_exactly": worst == 0,
    }
    files = {"zeta_balance.json": _dump_json(payload)}
    if args.dump_chain:
        files["zeta_chain.json"] = _dump_json(chain.as_dict())
    return payload, files, 0


def _cmd_reversal_w(args):
    c_const = args.c_param if args.c_param is not None else estimate_window_constant()
    horizon = args.horizon or 1e6
    runs = sample_hitting_times(args.n, args.j, args.replicas, args.seed,
                                horizon, c_const)
    lines = ["replica,W,censored,mean_drift,B_final,M_max"]
    for i, run in enumerate(runs):
        rate = run.drift_increment / run.stop_time if run.stop_time > 0 else 0.0
        lines.append(
            f"{i},{run.stop_time!r},{int(run.censored)},{rate!r},"
            f"{run.failed_boosts},{run.max_occ_seen}"
        )
    csv = "\n".join(lines) + "\n"
    times = [run.stop_time for run in runs if run.hit and run.stop_time > 0]
    payload = {
        "n": args.n,
        "high_count": args.j,
        "replicas": args.replicas,
        "c_param": c_const,
        "censored": sum(1 for run in runs if run.censored),
        "hit_fraction": sum(1 for run in runs if run.hit) / len(runs),
        "mean_W": sum(times) / len(times) if times else 0.0,
    }
    if len(times) >= 1000:
        fit = fit_exponential_tail(times, bootstrap=args.bootstrap, seed=args.seed)
        payload["tail_fit"] = fit.as_dict()
    return payload, {"reversal_w.csv": csv, "reversal_w.json": _dump_json(payload)}, 0


def _cmd_drift(args):
    c_const = args.c_param if args.c_param is not None else estimate_window_constant()
    check = drift_check(args.n, args.j, args.replicas, args.seed, c_const,
                        t_ref=args.t_ref)
    payload = check.as_dict()
    return payload, {"drift.json": _dump_json(payload)}, 0


def _cmd_occupancy(args):
    trace = occupancy_stats(args.n, args.r, args.horizon, args.seed,
                            m_param=args.m_param)
    payload = trace.as_dict()
    from .stats import empty_probability_exact

    exact = empty_probability_exact(args.n, args.r)
    payload["stationary_empty_probability"] = {
        "num": exact.numerator,
        "den": exact.denominator,
        "decimal": float(exact),
    }
    csv_lines = ["vertex,empty_time"]
    csv_lines += [f"{v},{z!r}" for v, z in enumerate(trace.empty_time)]
    return payload, {
        "occupancy.json": _dump_json(payload),
        "occupancy.csv": "\n".join(csv_lines) + "\n",
    }, 0


def _cmd_tails(args):
    if args.kind == "skellam":
        table = skellam_table(args.lam, args.m)
        payload = table.as_dict()
        csv_lines = ["m,probability"]
        csv_lines += [f"{m},{p!r}" for m, p in table.tails]
    elif args.kind == "poisson":
        payload = {
            "lambda": args.lam,
            "concentration_half": poisson_concentration(args.lam),
        }
        csv_lines = ["lambda,concentration_half",
                     f"{args.lam!r},{payload['concentration_half']!r}"]
    elif args.kind == "rw":
        if args.seed is None:
            raise ConfigError("rw tails need --seed")
        rows = []
        csv_lines = ["r,estimate,stderr,ci_low,ci_high,scaled_by_r"]
        for rr in args.r_values:
            est = rw_no_return_probability(rr, args.replicas, args.seed)
            rows.append(
                {
                    "r": rr,
                    "estimate": est.as_dict(),
                    "scaled_by_r": est.value * rr,
                    "scaled_ci_low": est.ci_low * rr,
                }
            )
            csv_lines.append(
                f"{rr},{est.value!r},{est.stderr!r},{est.ci_low!r},"
                f"{est.ci_high!r},{est.value * rr!r}"
            )
        payload = {"replicas": args.replicas, "rows": rows}
    else:
        raise ConfigError(f"unknown tails kind {args.kind!r}")
    files = {
        "tails.json": _dump_json(payload),
        "tails.csv": "\n".join(csv_lines) + "\n",
    }
    return payload, files, 0


def _cmd_sweep(args):
    ds = args.d_values
    Ls = args.L_values
    rhos = [(_parse_rho(x) if isinstance(x, str) else float(x)) for x in args.rho_values]
    header = "d,L,r,rho_requested,rho_actual,gap,relaxation_time,normalized,error"
    rows = []
    failures = 0
    for d in ds:
        for L in Ls:
            for rho in rhos:
                graph = Torus(d=d, L=L)
                vertex_count = graph.vertex_count
                r = int(round(rho * vertex_count))
                actual = r / vertex_count
                prefix = f"{d},{L},{r},{rho!r},{actual!r}"
                try:
                    if args.task == "exact-gap":
                        gen = build_generator(graph, r, max_states=args.max_states)
                        report = exact_gap(gen)
                        norm = report.relaxation_time / ((actual + 1.0) ** 2 * L * L)
                        rows.append(
                            f"{prefix},{report.gap!r},{report.relaxation_time!r},{norm!r},"
                        )
                    elif args.task == "wilson":
                        bound = wilson_bound(graph, r, variant=args.variant
                                             if args.variant != "both" else "full_wave",
                                             max_states=args.max_states)
                        norm = bound.quotient * (actual + 1.0) ** 2 * L * L
                        rows.append(f"{prefix},{bound.quotient!r},,{norm!r},")
                    else:
                        raise ConfigError(f"sweep does not support task {args.task!r}")
                except (CapacityError, ValueError) as exc:
                    failures += 1
                    rows.append(f"{prefix},,,,{type(exc).__name__}: {exc}")
    csv = header + "\n" + "\n".join(rows) + "\n" if rows else header + "\n"
    payload = {
        "task": args.task,
        "points": len(rows),
        "failures": failures,
    }
    status = 3 if failures else 0
    return payload, {"sweep.csv": csv, "sweep.json": _dump_json(payload)}, status


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _str_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zrpgap",
        description="Exact and Monte Carlo analyses of the constant-rate "
        "zero range process",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, stochastic=False):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--config", default=None, help="JSON config file; flags override")
        p.add_argument("--max-states", dest="max_states", type=int, default=200_000)
        if stochastic:
            p.add_argument("--seed", type=int, default=None, required=False)

    def add_graph(p):
        p.add_argument("--graph", choices=["torus", "complete"], default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--L", type=int, default=None)

    def add_particles(p):
        p.add_argument("--r", type=int, default=None)
        p.add_argument("--rho", default=None)

    p = sub.add_parser("exact-gap", help="exact spectral gap and relaxation time")
    add_common(p)
    add_graph(p)
    add_particles(p)
    p.add_argument("--method", choices=["auto", "dense", "iterative"], default="auto")
    p.set_defaults(func=_cmd_exact_gap)

    p = sub.add_parser("tv-curve", help="total variation distance to uniform over time")
    add_common(p)
    add_graph(p)
    add_particles(p)
    p.add_argument("--t-max", dest="t_max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--fit-window", dest="fit_window", type=float, nargs=2, default=None)
    p.set_defaults(func=_cmd_tv_curve)

    p = sub.add_parser("wilson", help="cosine test-function bounds on the gap")
    add_common(p, stochastic=True)
    add_graph(p)
    add_particles(p)
    p.add_argument("--variant", choices=list(WILSON_VARIANTS) + ["both"], default="both")
    p.add_argument("--mode", choices=["auto", "enumerate", "closed_form", "monte_carlo"],
                   default="auto")
    p.add_argument("--samples", type=int, default=20_000)
    p.set_defaults(func=_cmd_wilson)

    p = sub.add_parser("flow", help="edge loads and the comparison certificate")
    add_common(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--L", type=int, required=True)
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("certificate", help="comparison certificate, optionally with tau2")
    add_common(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--r", type=int, default=None,
                   help="compute tau2 exactly for this particle count")
    p.add_argument("--tau2", type=float, default=None)
    p.set_defaults(func=_cmd_certificate)

    p = sub.add_parser("couple", help="sample coupling times and fit the tail")
    add_common(p, stochastic=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--bootstrap", type=int, default=200)
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("zeta-balance", help="exact balance residuals of the tagged chain")
    add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True, help="high-priority particle count")
    p.add_argument("--dump-chain", dest="dump_chain", action="store_true")
    p.set_defaults(func=_cmd_zeta_balance)

    p = sub.add_parser("reversal-w", help="reversed-chain hitting times of the balanced set")
    add_common(p, stochastic=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--c-param", dest="c_param", type=float, default=None)
    p.add_argument("--bootstrap", type=int, default=200)
    p.set_defaults(func=_cmd_reversal_w)

    p = sub.add_parser("drift", help="averaged submartingale drift of the ladder functional")
    add_common(p, stochastic=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--t-ref", dest="t_ref", type=float, default=5.0)
    p.add_argument("--c-param", dest="c_param", type=float, default=None)
    p.set_defaults(func=_cmd_drift)

    p = sub.add_parser("occupancy", help="empty-time statistics of a single run")
    add_common(p, stochastic=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--horizon", type=float, default=10_000.0)
    p.add_argument("--m-param", dest="m_param", type=float, default=1.0)
    p.set_defaults(func=_cmd_occupancy)

    p = sub.add_parser("tails", help="Poisson-difference tables and no-return estimates")
    add_common(p, stochastic=True)
    p.add_argument("--kind", choices=["skellam", "poisson", "rw"], required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--m", type=_int_list, default=[0, 1, 2])
    p.add_argument("--r-values", dest="r_values", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--replicas", type=int, default=100_000)
    p.set_defaults(func=_cmd_tails)

    p = sub.add_parser("sweep", help="grid sweep of a subcommand over d, L, rho")
    add_common(p)
    p.add_argument("--task", choices=["exact-gap", "wilson"], default="exact-gap")
    p.add_argument("--d-values", dest="d_values", type=_int_list, default=[1])
    p.add_argument("--L-values", dest="L_values", type=_int_list, required=True)
    p.add_argument("--rho-values", dest="rho_values", type=_str_list, required=True)
    p.add_argument("--variant", choices=list(WILSON_VARIANTS) + ["both"],
                   default="full_wave")
    p.set_defaults(func=_cmd_sweep)

    return parser


_STOCHASTIC = {"couple", "reversal-w", "drift", "occupancy"}


def _apply_config_file(args) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, attr) is None or getattr(args, attr) == []:
            setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        _apply_config_file(args)
        if args.subcommand in _STOCHASTIC and getattr(args, "seed", None) is None:
            raise ConfigError(f"{args.subcommand} needs --seed")
        if args.subcommand == "tails" and args.kind == "rw" and args.seed is None:
            raise ConfigError("tails --kind rw needs --seed")
        started = time.perf_counter()
        payload, files, status = args.func(args)
        elapsed = time.perf_counter() - started
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    outdir = args.out or os.environ.get("ZRPGAP_OUT") or "zrpgap_out"
    sink = _OutputSink(outdir)
    for name, text in files.items():
        sink.write(name, text)
    manifest = {
        "version": __version__,
        "subcommand": args.subcommand,
        "config": _echo_config(args),
        "timing_seconds": {args.subcommand: elapsed},
        "status": "partial" if status == 3 else "ok",
    }
    sink.flush(manifest)
    print(_dump_json(payload), end="")
    return status


def entry() -> None:
    sys.exit(main())
