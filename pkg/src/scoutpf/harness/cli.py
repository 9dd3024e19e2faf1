"""Command line entry point: ``scoutpf {list,run,mc,invert-demo,export}``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from ..filters import FILTER_NAMES, FilterConfig, build_measurement_map
from ..polyalg import MapInversionError, compose, dump_map, invert
from ..scenarios import SCENARIOS, build_scenario, dump_scenario, get_scenario, read_scenario
from .campaign import CampaignResult, CampaignSpec, aggregate, run_campaign, run_single
from .io import emit_results


class UsageError(Exception):
    pass


def _scenario_spec(args):
    if getattr(args, "scenario_file", None):
        try:
            return read_scenario(args.scenario_file)
        except (OSError, ValueError, TypeError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read scenario file {args.scenario_file}: {exc}")
    if not args.scenario:
        raise UsageError(f"no scenario given; valid scenarios: {', '.join(SCENARIOS)}")
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; valid scenarios: "
                         f"{', '.join(SCENARIOS)}")
    return get_scenario(args.scenario)


def _filter_names(args, default=("spf2",)) -> list[str]:
    names = []
    for item in args.filter or default:
        names.extend(n.strip() for n in item.split(",") if n.strip())
    for n in names:
        if n not in FILTER_NAMES:
            raise UsageError(f"unknown filter {n!r}; valid filters: {', '.join(FILTER_NAMES)}")
    if len(set(names)) != len(names):
        raise UsageError("a filter is listed more than once")
    return names


def _config(spec, args) -> FilterConfig:
    """Scenario defaults, then --option pairs, then the dedicated flags."""
    data = dict(spec.filter_defaults)
    known = {f.name for f in fields(FilterConfig)}
    for pair in args.option or ():
        key, sep, value = pair.partition("=")
        if not sep or key not in known:
            raise UsageError(f"bad --option {pair!r}; keys: {', '.join(sorted(known))}")
        data[key] = yaml.safe_load(value)
    if args.particles is not None:
        data["n_predict"] = data["n_update"] = args.particles
    for flag, key in (("scouts", "n_scout"), ("order", "order"), ("variant", "variant")):
        if getattr(args, flag, None) is not None:
            data[key] = getattr(args, flag)
    try:
        return FilterConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid filter configuration: {exc}")


def _fmt(v) -> str:
    return "nan" if v is None or not np.isfinite(v) else f"{v:.6g}"


# -- subcommands --------------------------------------------------------------

def cmd_list(args, out) -> int:
    print("scenarios:", file=out)
    for name, factory in SCENARIOS.items():
        spec = factory()
        sc = build_scenario(spec)
        print(f"  {name:16s} n={spec.n} m={spec.m} dynamics={spec.dynamics} "
              f"steps={sc.n_steps}", file=out)
    print("filters:", file=out)
    for name in FILTER_NAMES:
        print(f"  {name}", file=out)
    return 0


def cmd_run(args, out) -> int:
    spec = _scenario_spec(args)
    cfg = _config(spec, args)
    names = _filter_names(args)
    records = []
    for name in names:
        rec = run_single(spec, name, cfg, args.seed, args.run)
        records.append(rec)
        print(f"filter {name} run {rec.run} seed {args.seed} stream {rec.seed}", file=out)
        print("  step        time kind    psi[%]     n_eff      |err|  mean", file=out)
        for s in rec.steps:
            mean = " ".join(f"{v:.6g}" for v in s.mean)
            print(f"  {s.step:4d} {s.time:11.4g} {s.update_kind:5s} {s.psi:8.3f} "
                  f"{s.n_eff:9.2f} {np.linalg.norm(s.error):10.4g}  [{mean}]", file=out)
        print(f"  status: {rec.status}", file=out)
    if args.out:
        campaign = CampaignSpec(spec, tuple((n, cfg) for n in names), 1, args.seed)
        sc = build_scenario(spec)
        result = CampaignResult(campaign, records,
                                [aggregate(records, n, cfg, sc.times, sc.n) for n in names])
        for path in emit_results(result, args.out, args.format):
            print(f"wrote {path}", file=out)
    return 0


def cmd_mc(args, out) -> int:
    spec = _scenario_spec(args)
    cfg = _config(spec, args)
    names = _filter_names(args)
    if args.n_mc < 1:
        raise UsageError("--n-mc must be >= 1")
    campaign = CampaignSpec(spec, tuple((n, cfg) for n in names), args.n_mc, args.seed)
    start = time.perf_counter()
    result = run_campaign(campaign, args.workers)
    elapsed = time.perf_counter() - start
    print(f"scenario {spec.name}: {args.n_mc} runs per filter, seed {args.seed}", file=out)
    print(f"  {'filter':8s} {'ok':>5s} {'failed':>6s} {'diverged':>8s} "
          f"{'final rmse':>12s} {'final psi[%]':>12s}", file=out)
    for s in result.summaries:
        last = s.steps[-1]
        psi = None if last.n_runs == 0 else last.mean_psi
        print(f"  {s.filter:8s} {s.n_ok:5d} {s.n_failed:6d} {s.n_diverged:8d} "
              f"{_fmt(last.rmse):>12s} {_fmt(psi):>12s}", file=out)
    # wall-clock time goes to stderr so that output files stay reproducible
    print(f"elapsed {elapsed:.1f} s", file=sys.stderr)
    if args.out:
        for path in emit_results(result, args.out, args.format):
            print(f"wrote {path}", file=out)
    return 0


def cmd_invert_demo(args, out) -> int:
    spec = _scenario_spec(args)
    cfg = _config(spec, args)
    sc = build_scenario(spec)
    mean, cov = sc.prior.mean, sc.prior.cov
    mm = build_measurement_map(mean, cov, sc.measurement, cfg)
    M = mm.square
    try:
        W = invert(M, cfg.max_condition)
    except MapInversionError as exc:
        print(f"inversion failed: {exc}", file=sys.stderr)
        return 1
    ident = np.zeros_like(M.coefficients)
    ident[:, 1:1 + M.nvars] = np.eye(M.nvars)
    residual = float(np.max(np.abs(compose(M, W).coefficients - ident)))
    text_m, text_w = dump_map(M), dump_map(W)
    print(f"# measurement map about the prior mean, order {cfg.order}, "
          f"augmentation {mm.augmentation}", file=out)
    print(text_m, end="", file=out)
    print("# inverse map", file=out)
    print(text_w, end="", file=out)
    print(f"compose(M, W) max deviation from identity: {residual:.3e}", file=out)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "map.txt").write_text(text_m)
        (d / "inverse.txt").write_text(text_w)
        (d / "residual.txt").write_text(f"{residual!r}\n")
    return 0


def cmd_export(args, out) -> int:
    spec = _scenario_spec(args)
    text = dump_scenario(spec)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="", file=out)
    return 0


# -- parser -------------------------------------------------------------------

def _add_scenario(p):
    p.add_argument("--scenario", help=f"built-in scenario ({', '.join(SCENARIOS)})")
    p.add_argument("--scenario-file", help="YAML scenario file (overrides --scenario)")


def _add_filter_opts(p, order_default=None):
    p.add_argument("--particles", type=int, help="prediction and update particle count")
    p.add_argument("--scouts", type=int, help="scout count")
    p.add_argument("--order", type=int, default=order_default, help="polynomial order")
    p.add_argument("--variant", choices=("uniform", "gaussian"),
                   help="importance variant used by filter 'spf'")
    p.add_argument("--option", action="append", metavar="KEY=VALUE",
                   help="any other filter setting, e.g. selector=frobenius")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scoutpf", description="Scout particle filter toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list scenarios and filters")

    p = sub.add_parser("run", help="one verbose run per filter")
    _add_scenario(p)
    p.add_argument("--filter", action="append", help="filter name(s), comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0, help="run id within the seed (for replay)")
    _add_filter_opts(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("mc", help="Monte Carlo campaign")
    _add_scenario(p)
    p.add_argument("--filter", action="append", help="filter name(s), comma separated")
    p.add_argument("--n-mc", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, help="worker processes (default $SCOUTPF_WORKERS or 1)")
    _add_filter_opts(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("invert-demo", help="build and invert a scenario's measurement map")
    _add_scenario(p)
    _add_filter_opts(p)
    p.add_argument("--out", help="directory for map.txt, inverse.txt, residual.txt")

    p = sub.add_parser("export", help="write a built-in scenario as YAML")
    _add_scenario(p)
    p.add_argument("--out", help="output file (default stdout)")
    return parser


COMMANDS = {"list": cmd_list, "run": cmd_run, "mc": cmd_mc,
            "invert-demo": cmd_invert_demo, "export": cmd_export}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"scoutpf {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
