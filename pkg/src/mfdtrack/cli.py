"""Command-line entry point.

Subcommands: simulate, train, evaluate, compare, reference, metrics.
Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure
(non-convergence, rank deficiency, singular feedforward).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig
from .exceptions import ConfigError, NumericalError
from .metrics import compute_metrics
from .trace import SimulationTrace

log = logging.getLogger("mfdtrack")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfdtrack",
        description="Two-region MFD simulation and tracking perimeter control",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--dt", type=float, default=None, help="override integrator step (s)")

    p = sub.add_parser("simulate", help="run one closed loop from a config")
    add_common(p)
    p.add_argument(
        "--controller",
        choices=["tpc", "spc", "uncontrolled"],
        default="tpc",
    )
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("train", help="run policy iteration and store the weights")
    add_common(p)
    p.add_argument("--model-based", action="store_true", help="use the model-based oracle")
    p.add_argument("--controller", choices=["tpc", "spc"], default="tpc")

    for name in ("evaluate", "metrics"):
        p = sub.add_parser(name, help="compute TTS/CTC metrics for a trace CSV")
        p.add_argument("--trace", required=True, help="trace CSV file")
        p.add_argument("--config", default=None, help="config providing the MFD curves")
        p.add_argument("--out", default=None, help="write the report JSON here")

    p = sub.add_parser("compare", help="paired TPC-vs-SPC comparison run")
    add_common(p)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("reference", help="emit the reference trajectory CSV")
    add_common(p)
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "dt", None) is not None:
        data = dict(cfg.raw)
        data["dt_s"] = args.dt
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(data)
    return cfg


def _cmd_simulate(args) -> int:
    from . import experiments

    cfg = _load_config(args)
    if cfg.mode == "trajectory" and args.controller == "tpc":
        result = experiments.run_example2(
            cfg, outdir=args.out, figures=not args.no_figures
        )
        print(json.dumps(result.report, indent=1, sort_keys=True))
        return 0
    trace, rep = experiments.run_single(
        cfg, controller=args.controller, outdir=args.out, figures=not args.no_figures
    )
    print(json.dumps({"config_hash": cfg.config_hash(), **rep.to_report_dict()},
                     indent=1, sort_keys=True))
    return 0


def _cmd_train(args) -> int:
    from . import experiments

    cfg = _load_config(args)
    outdir = Path(args.out) if args.out else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    suffix = args.controller
    path = outdir / f"weights_{suffix}.json"
    trained = experiments.train_controller(
        cfg, spc=suffix == "spc", model_based=args.model_based, out_path=path
    )
    res = trained.result
    print(
        json.dumps(
            {
                "weights_file": str(path),
                "config_hash": trained.config_hash,
                "iterations": res.iterations,
                "converged": res.converged,
            },
            indent=1,
            sort_keys=True,
        )
    )
    return 0


def _cmd_evaluate(args) -> int:
    trace = SimulationTrace.from_csv(args.trace)
    if args.config:
        net = ExperimentConfig.from_yaml(args.config).build_network()
    else:
        from .mfd import TwoRegionNetwork

        net = TwoRegionNetwork.default()
    rep = compute_metrics(trace, net)
    payload = rep.to_report_dict()
    text = json.dumps(payload, indent=1, sort_keys=True)
    print(text)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(text + "\n")
    return 0


def _cmd_compare(args) -> int:
    from . import experiments

    cfg = _load_config(args)
    result = experiments.run_example1(cfg, outdir=args.out, figures=not args.no_figures)
    print(json.dumps(result.report, indent=1, sort_keys=True))
    return 0


def _cmd_reference(args) -> int:
    from . import experiments

    cfg = _load_config(args)
    outdir = args.out if args.out else "."
    path = experiments.export_reference(cfg, outdir)
    print(str(path))
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "metrics": _cmd_evaluate,
    "compare": _cmd_compare,
    "reference": _cmd_reference,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args, unknown = parser.parse_known_args(argv)
    if unknown or args.command not in _HANDLERS:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
