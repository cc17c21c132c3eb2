"""Command-line driver: run figure experiments, validate bounds, list figures.

Exit codes: 0 success, 1 spec error, 2 validation failure. The worker count
for internal sweeps can be pinned with the CSITBUDGET_THREADS environment
variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .config import LN2, SystemConfig
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment, validate_bounds


def _config_from_keys(keys: dict) -> SystemConfig:
    kwargs = {}
    if "snr_db" in keys:
        kwargs["snr"] = 10.0 ** (float(keys["snr_db"]) / 10.0)
    for name in ("n_tx", "n_users"):
        if name in keys:
            kwargs[name] = int(keys[name])
    for name in ("block_len", "coherence_time", "coherence_bw", "block_time",
                 "block_bw", "uplink_bw"):
        if name in keys:
            kwargs[name] = float(keys[name])
    if "uplink_eff_bits" in keys:
        kwargs["uplink_eff"] = float(keys["uplink_eff_bits"]) * LN2
    if "block_len" in kwargs and "coherence_time" not in kwargs:
        bw = kwargs.get("coherence_bw", 200e3)
        kwargs["coherence_time"] = kwargs["block_len"] / bw
    return SystemConfig(**kwargs)


def load_spec(path: Path) -> ExperimentSpec:
    """Parse a flat TOML spec file; only `figure` is required."""
    with path.open("rb") as fh:
        keys = tomllib.load(fh)
    if "figure" not in keys:
        raise ValueError("spec file must set `figure`")
    return ExperimentSpec(
        name=str(keys["figure"]),
        config=_config_from_keys(keys),
        seed=int(keys.get("seed", 1234)),
        out_dir=Path(keys.get("out_dir", "results")),
        mc_blocks=int(keys.get("mc_blocks", 100_000)),
        grid=list(keys["grid"]) if "grid" in keys else None,
    )


def _cmd_run(args) -> int:
    try:
        if args.spec_file:
            spec = load_spec(Path(args.spec_file))
            if args.seed is not None:
                spec.seed = args.seed
            if args.out is not None:
                spec.out_dir = Path(args.out)
            specs = [spec]
        else:
            names = list(EXPERIMENTS) if args.fig == "all" else args.fig.split(",")
            specs = [ExperimentSpec(name=n.strip(),
                                    seed=args.seed if args.seed is not None else 1234,
                                    out_dir=Path(args.out or "results"))
                     for n in names]
    except (KeyError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 1
    for spec in specs:
        try:
            csv_path = run_experiment(spec, plot=not args.no_plot)
        except OSError as exc:
            print(f"spec error: cannot write output: {exc}", file=sys.stderr)
            return 1
        print(f"{spec.name}: wrote {csv_path}")
    return 0


def _cmd_validate(args) -> int:
    report = validate_bounds(quick=args.quick, seed=args.seed if args.seed is not None else 77)
    out_dir = Path(args.out or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "validation.json"
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    for check in report["checks"]:
        print(f"[{'PASS' if check['passed'] else 'FAIL'}] {check['name']}: {check['detail']}")
    print(f"report: {path}")
    return 0 if report["all_passed"] else 2


def _cmd_list(_args) -> int:
    for name in EXPERIMENTS:
        doc = (EXPERIMENTS[name].__doc__ or "").strip().splitlines()[0]
        print(f"{name:7s} {doc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csitbudget",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one or more figure experiments")
    run_p.add_argument("spec_file", nargs="?", help="flat TOML spec file")
    run_p.add_argument("--fig", default=None,
                       help="figure name(s), comma separated, or 'all'")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="run the Monte Carlo validation suite")
    val_p.add_argument("--quick", action="store_true", help="smaller batch sizes")
    val_p.add_argument("--seed", type=int, default=None)
    val_p.add_argument("--out", default=None)
    val_p.set_defaults(func=_cmd_validate)

    list_p = sub.add_parser("list", help="list registered figure experiments")
    list_p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and not args.spec_file and not args.fig:
        print("spec error: give a spec file or --fig", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
