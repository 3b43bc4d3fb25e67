"""Command-line experiment runner.

Subcommands:
  run         execute a sweep (figure preset, config file, or flags) and
              write CSV + manifest, plus a rendered figure unless --no-plot
  optimize-k  search the generation size minimizing mean in-order delay
  tandem      run the three-link recoding comparison

Exit codes: 0 success, 2 configuration error, 3 runtime contract violation.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import (ExperimentSpec, KSearchResult, _preset_base,
                          optimize_generation_size, run_sweep, write_csv,
                          write_manifest)
from .simulate import ConfigError, ContractError, SimConfig

_LIST_FIELDS = {"schemes", "r_values", "k_values", "el_values", "eps",
                "strategies", "opt_k_grid"}
_INT_FIELDS = {"stream_len", "payload_len", "q", "seed", "reps", "workers",
               "opt_stream_len", "opt_reps", "packets", "block_size", "tandem_q"}
_FLOAT_FIELDS = {"rtt_ms", "slot_ms", "pi_b"}
_BOOL_FIELDS = {"plot"}
_STR_FIELDS = {"preset", "mode", "axis", "out"}
_KNOWN_KEYS = _LIST_FIELDS | _INT_FIELDS | _FLOAT_FIELDS | _BOOL_FIELDS | _STR_FIELDS


def _parse_value(key: str, raw: str):
    try:
        if key in _BOOL_FIELDS:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _LIST_FIELDS:
            items = [item.strip() for item in raw.split(",") if item.strip()]
            if key in ("schemes", "strategies"):
                return items
            if key == "k_values":
                return [item if item == "auto" else int(item) for item in items]
            if key in ("opt_k_grid",):
                return [int(item) for item in items]
            values = [float(item) for item in items]
            if key == "eps":
                return tuple(values)
            return values
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from exc


def parse_config_file(path: str) -> dict:
    """Flat key = value text; '#' starts a comment; unknown keys are errors."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = stripped.split("=", 1)
            key = key.strip().lower()
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def parse_spec(preset: str | None, config_path: str | None,
               overrides: dict) -> ExperimentSpec:
    """Preset defaults, then config-file values, then CLI flags on top."""
    file_values = parse_config_file(config_path) if config_path else {}
    name = overrides.get("preset") or file_values.get("preset") or preset or "custom"
    spec = _preset_base(name)
    for source in (file_values, overrides):
        for key, value in source.items():
            if value is None or key == "preset":
                continue
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"unknown option {key!r}")
            setattr(spec, key, value)
    spec.preset = name
    spec.validate()
    return spec


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=("fig3", "fig4", "fig5", "fig6", "fig7", "custom"))
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--reps", type=int, help="replications per sweep point")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--stream-len", type=int, dest="stream_len")
    p.add_argument("--payload-len", type=int, dest="payload_len")
    p.add_argument("--schemes", help="comma list: generation,sliding-window,arq")
    p.add_argument("--mode", choices=("reliable", "unreliable"))
    p.add_argument("--axis", choices=("R", "k"))
    p.add_argument("--r-values", dest="r_values", help="comma list of R values")
    p.add_argument("--k-values", dest="k_values", help="comma list of k values or 'auto'")
    p.add_argument("--el-values", dest="el_values", help="comma list of E[L] values")
    p.add_argument("--rtt-ms", type=float, dest="rtt_ms")
    p.add_argument("--slot-ms", type=float, dest="slot_ms")
    p.add_argument("--pi-b", type=float, dest="pi_b")
    p.add_argument("--q", type=int, choices=(1, 4, 8))
    p.add_argument("--packets", type=int, help="tandem stream length (fig7)")
    p.add_argument("--eps", help="tandem link erasures, e.g. 0.1,0.1,0.1")
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None,
                   help="render a figure next to the CSV (default on)")


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for key in _KNOWN_KEYS:
        if not hasattr(args, key):
            continue
        value = getattr(args, key)
        if value is None:
            continue
        if isinstance(value, str) and key in _LIST_FIELDS:
            value = _parse_value(key, value)
        overrides[key] = value
    return overrides


def _cmd_run(args) -> int:
    spec = parse_spec(args.preset, args.config, _collect_overrides(args))
    rows, manifest, _ = run_sweep(spec)
    sha = write_csv(rows, spec.out)
    manifest_path = write_manifest(manifest, spec.out, sha, len(rows))
    print(f"wrote {len(rows)} rows to {spec.out} (sha256 {sha[:12]})")
    print(f"manifest: {manifest_path}")
    if spec.plot:
        from .plots import render_sweep
        png = os.path.splitext(spec.out)[0] + ".png"
        print(f"figure: {render_sweep(rows, spec.preset, png)}")
    return 0


def _cmd_optimize_k(args) -> int:
    base = SimConfig(scheme="generation", mode="reliable", R=args.r,
                     k=2, stream_len=args.stream_len, slot_ms=args.slot_ms,
                     rtt_ms=args.rtt_ms, pi_b=args.pi_b, mean_burst=args.el,
                     q=args.q, payload_len=1)
    grid = [int(v) for v in args.k_grid.split(",")] if args.k_grid else None
    result: KSearchResult = optimize_generation_size(
        base, args.r, grid, reps=args.reps, master_seed=args.seed,
        refine=not args.no_refine)
    for k in sorted(result.evaluations):
        mean, ci = result.evaluations[k]
        marker = "  <- k*" if k == result.k_star else ""
        print(f"k = {k:4d}   E[D] = {mean:9.3f} ms  (+/- {ci:.3f}){marker}")
    if result.correlated_losses:
        print("note: correlated losses (E[L] > 1); no convexity guarantee, "
              "returned the grid minimum")
    print(f"k* = {result.k_star}")
    return 0


def _cmd_tandem(args) -> int:
    spec = _preset_base("fig7")
    if args.eps:
        spec.eps = _parse_value("eps", args.eps)
    if args.strategy != "both":
        spec.strategies = [args.strategy]
    for key in ("packets", "seed", "reps", "block_size", "out"):
        value = getattr(args, key)
        if value is not None:
            setattr(spec, key, value)
    if args.q is not None:
        spec.tandem_q = args.q
    from .experiments import run_tandem_sweep
    rows, manifest, _ = run_tandem_sweep(spec)
    sha = write_csv(rows, spec.out)
    write_manifest(manifest, spec.out, sha, len(rows))
    for row in rows:
        print(f"{row['strategy']:>10s}  link {row['link']}  carried "
              f"{row['packets_carried']:9.1f}  eta {row['efficiency']:.4f}")
    if args.plot is not False:
        from .plots import render_tandem
        png = os.path.splitext(spec.out)[0] + ".png"
        print(f"figure: {render_tandem(rows, png)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlncsim",
        description="RLNC coding schemes on a time-slotted lossy-link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a sweep and emit CSV/manifest/figure")
    _add_run_flags(run_p)
    run_p.set_defaults(func=_cmd_run)

    opt_p = sub.add_parser("optimize-k", help="search the delay-minimizing generation size")
    opt_p.add_argument("--r", type=float, required=True, help="redundancy R")
    opt_p.add_argument("--el", type=float, default=1.0, help="mean burst length E[L]")
    opt_p.add_argument("--pi-b", type=float, default=0.05, dest="pi_b")
    opt_p.add_argument("--stream-len", type=int, default=20000, dest="stream_len")
    opt_p.add_argument("--rtt-ms", type=float, default=200.0, dest="rtt_ms")
    opt_p.add_argument("--slot-ms", type=float, default=1.2, dest="slot_ms")
    opt_p.add_argument("--q", type=int, default=8, choices=(1, 4, 8))
    opt_p.add_argument("--reps", type=int, default=3)
    opt_p.add_argument("--seed", type=int, default=1)
    opt_p.add_argument("--k-grid", dest="k_grid", help="comma list of k values")
    opt_p.add_argument("--no-refine", action="store_true")
    opt_p.set_defaults(func=_cmd_optimize_k)

    tan_p = sub.add_parser("tandem", help="three-link recoding comparison")
    tan_p.add_argument("--eps", help="three link erasures, e.g. 0.1,0.1,0.1")
    tan_p.add_argument("--packets", type=int)
    tan_p.add_argument("--strategy", choices=("both", "end-to-end", "hop-by-hop"),
                       default="both")
    tan_p.add_argument("--seed", type=int)
    tan_p.add_argument("--reps", type=int)
    tan_p.add_argument("--block-size", type=int, dest="block_size")
    tan_p.add_argument("--q", type=int, choices=(1, 4, 8))
    tan_p.add_argument("--out", default="tandem.csv")
    tan_p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)
    tan_p.set_defaults(func=_cmd_tandem)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
