"""Command-line interface.

    uqforge <sample|run|fit|predict|moments|sobol|study>
            [--config FILE] [--out DIR] [--jobs K] [--seed S]
            [--order P] [--kind pce|kriging|pck] ...

Stages form a pipeline in one output directory: ``sample`` writes the DOE,
``run`` the model responses, ``fit`` the surrogates, and ``predict``,
``moments`` and ``sobol`` consume the fitted model file. ``study`` chains
everything for the built-in nozzle demo and adds report CSVs and figures.
Without --config the packaged nozzle-study defaults apply.

Exit codes: 0 success, 2 configuration error, 3 precondition violation,
4 external model failure.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .errors import ConfigError, ExternalModelError, PreconditionError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqforge",
                                     description="Surrogate-based uncertainty quantification")
    sub = parser.add_subparsers(dest="stage", required=True)
    stages = {
        "sample": "generate the design of experiments (samples.csv)",
        "run": "evaluate the model on the DOE (responses.csv)",
        "fit": "fit surrogates to the responses (model.uqm)",
        "predict": "evaluate fitted surrogates at new points (predictions.csv)",
        "moments": "mean/std of every surrogate output (moments.csv)",
        "sobol": "sensitivity indices of every surrogate output (sobol.csv)",
        "study": "full nozzle demo pipeline with reports and figures",
    }
    for name, help_text in stages.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="FILE", default=None,
                       help="study config (INI); defaults to the packaged nozzle study")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default from config [output] dir)")
        p.add_argument("--jobs", type=int, metavar="K", default=None,
                       help="concurrent external model runs")
        p.add_argument("--seed", type=int, metavar="S", default=None,
                       help="override the stage's seed (DOE seed/skip, MC draws seed, "
                            "or sensitivity seed, depending on the stage)")
        p.add_argument("--order", type=int, metavar="P", default=None,
                       help="surrogate expansion order")
        p.add_argument("--kind", choices=("pce", "kriging", "pck"), default=None,
                       help="surrogate kind")
        if name == "predict":
            p.add_argument("--points", metavar="FILE", required=True,
                           help="physical points to predict at (DOE csv)")
        if name == "sobol":
            p.add_argument("--base", type=int, metavar="N", default=None,
                           help="base sample count per sensitivity block")
        if name == "study":
            p.add_argument("--no-plots", action="store_true",
                           help="skip figure rendering")
    return parser


def _config_from_args(args) -> pipeline.StudyConfig:
    overrides = {}
    if args.order is not None:
        overrides["order"] = args.order
    if args.kind is not None:
        overrides["surrogate_kind"] = args.kind
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        if args.stage in ("sample", "run", "fit", "study"):
            overrides["doe_seed"] = args.seed
            overrides["doe_skip"] = args.seed
        elif args.stage == "moments":
            overrides["draws_seed"] = args.seed
        elif args.stage == "sobol":
            overrides["sobol_seed"] = args.seed
    return pipeline.load_config(args.config, overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        outdir = cfg.out_dir
        if args.stage == "sample":
            written = pipeline.stage_sample(cfg, outdir)
        elif args.stage == "run":
            written = pipeline.stage_run(cfg, outdir)
        elif args.stage == "fit":
            written = pipeline.stage_fit(cfg, outdir)
        elif args.stage == "predict":
            written = pipeline.stage_predict(cfg, outdir, args.points)
        elif args.stage == "moments":
            written = pipeline.stage_moments(cfg, outdir)
        elif args.stage == "sobol":
            written, report = pipeline.stage_sobol(cfg, outdir, args.base)
            print(report)
        else:
            written = pipeline.stage_study(cfg, outdir, make_plots=not args.no_plots)
    except ConfigError as err:
        print(f"uqforge: error: config: {err}", file=sys.stderr)
        return 2
    except PreconditionError as err:
        print(f"uqforge: error: precondition: {err}", file=sys.stderr)
        return 3
    except ExternalModelError as err:
        print(f"uqforge: error: external-model: {err}", file=sys.stderr)
        return 4
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
