"""Command-line entry point: ``hyposde {simulate,fit,replicate,verify}``."""

import argparse
import json
import sys
from pathlib import Path

from .complete import fit_document, write_json
from .errors import ConfigurationError, HypoSDEError
from .experiments import (
    TABLES, ExperimentConfig, fit_dataset, replicate, replication_rngs, run_checks, simulate_dataset,
    write_rows_csv,
)
from .models import builtin_model
from .stochastics import project_observed, read_csv, write_csv


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _common(p):
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its entries")
    p.add_argument("--model")
    p.add_argument("--scheme")
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, dest="replications")
    p.add_argument("--out", type=Path)
    p.add_argument("--stride", type=int, help="fine steps per observation step")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--mask", type=_ints, help="observed coordinates, 0-based, comma separated")
    p.add_argument("--theta", type=_floats, dest="theta_true")
    p.add_argument("--theta0", type=_floats, dest="theta_init")
    p.add_argument("--optimizer", choices=("nelder-mead", "adam"))


def build_parser():
    parser = argparse.ArgumentParser(prog="hyposde")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="simulate a path and write CSV plus a JSON sidecar")
    _common(p)
    p = sub.add_parser("fit", help="fit a model to a CSV of observations")
    _common(p)
    p.add_argument("data", type=Path)
    p = sub.add_parser("replicate", help="run a table of simulate-and-fit replications")
    _common(p)
    p.add_argument("--table", choices=sorted(TABLES))
    sub.add_parser("verify", help="run the identity checks")
    return parser


def load_config(args, base=None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    if args.config is not None:
        doc = cfg.to_dict()
        with open(args.config) as fh:
            doc.update(json.load(fh))
        cfg = ExperimentConfig.from_dict(doc)
    over = {k: getattr(args, k, None) for k in
            ("model", "n", "delta", "seed", "replications", "stride", "burn_in", "mask", "theta_true", "theta_init")}
    cfg = cfg.with_overrides(**over)
    if args.optimizer:
        cfg = cfg.with_overrides(optimizer={**cfg.optimizer, "method": args.optimizer})
    return cfg


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    if args.scheme:
        cfg = cfg.with_overrides(scheme=args.scheme)
    out = args.out or Path("path.csv")
    rng = replication_rngs(cfg.seed, 1)[0]
    path = simulate_dataset(cfg, rng)
    data = path if cfg.mask is None else project_observed(path, cfg.mask)
    write_csv(data, out)
    write_json({"config": cfg.to_dict(), "seed": cfg.seed, "rows": path.n + 1}, str(out) + ".json")
    print(f"wrote {path.n + 1} rows to {out}")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args)
    preset = builtin_model(cfg.model)
    obs = read_csv(args.data)
    cfg = cfg.with_overrides(n=obs.n, delta=obs.delta)
    variant = args.scheme or cfg.variants[0]
    res, se = fit_dataset(cfg.with_overrides(variants=(variant,)), obs, variant)
    kind = "complete" if obs.is_complete(preset.model.dims.n) else "partial"
    doc = fit_document(res, se, cfg.to_dict(), cfg.seed,
                       {"observation": kind, "variant": variant, "n": obs.n, "delta": obs.delta})
    out = args.out or Path("fit.json")
    write_json(doc, out)
    print(json.dumps(doc["theta_hat"]))
    return 0


def cmd_replicate(args) -> int:
    if args.table is None and args.config is None:
        raise ConfigurationError("replicate needs --table or --config")
    if args.seed is None:
        raise ConfigurationError("replicate needs an explicit --seed")
    base = TABLES[args.table] if args.table else None
    cfg = load_config(args, base)
    rows, summary = replicate(cfg)
    out = args.out or Path(f"{args.table or 'replicate'}_summary.csv")
    write_rows_csv(summary, out)
    write_rows_csv(rows, out.with_name(out.stem + "_rows.csv"))
    for s in summary:
        print(f"{s['variant']:>10} {s['param']:>6}: mean bias {s['mean_bias']:+.4f} (SE {s['se']:.4f}, sd {s['sd']:.4f})")
    return 0


def cmd_verify(args) -> int:
    checks = run_checks()
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "replicate": cmd_replicate, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (HypoSDEError, LookupError, OSError) as exc:
        print(f"hyposde {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
