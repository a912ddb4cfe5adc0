"""Command-line entry point.

Subcommands::

    simulate   nonlinear run (config run.mode is forced to nonlinear)
    linear     exact linear-propagator run
    oracle     continuous-frequency oracle run
    gen-data   write the initial state and its validation report
    check      acceptance suite (--suite fast|full)

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .decay_analysis import record
from .harness.acceptance import SUITES, run_suite
from .harness.config import PRESETS, ConfigError, RunConfig, load_config
from .harness.experiments import FitFailure, run_experiment, save_state
from .harness.initial_data import generate_initial_data
from .linear_propagator import unrepresented_content
from .nonlinear import BlowUpError, NonContractionError, boundary_trace_check
from .spectral_core import hermitian_defect

log = logging.getLogger("halfspace_boussinesq")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

_MODE_OF = {"simulate": "nonlinear", "linear": "linear", "oracle": "oracle"}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors already; keep the message terse
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="halfspace-boussinesq", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("simulate", "linear", "oracle", "gen-data"):
        s = sub.add_parser(name, help=f"{name} run")
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="flat key=value config file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="named preset configuration")
        s.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        s.add_argument("--seed", type=int, help="initial-data seed (overrides init.rng_seed)")
        if name != "gen-data":
            s.add_argument("--no-svg", action="store_true", help="skip the SVG plot")
    c = sub.add_parser("check", help="run the acceptance suite")
    c.add_argument("--suite", default="fast", help=f"one of {sorted(SUITES)}")
    return p


def _resolve_config(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = PRESETS[args.preset]()
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, init=replace(cfg.init, rng_seed=args.seed))
    if args.command in _MODE_OF:
        mode = _MODE_OF[args.command]
        # presets carry their own run mode; plain configs take the subcommand's
        if cfg.preset is not None and cfg.run.mode != mode:
            command = {v: k for k, v in _MODE_OF.items()}[cfg.run.mode]
            raise ConfigError(
                f"preset {cfg.preset!r} runs in {cfg.run.mode} mode; use the {command!r} subcommand",
                key="preset",
            )
        cfg = replace(cfg, run=replace(cfg.run, mode=mode))
        if getattr(args, "no_svg", False):
            cfg = replace(cfg, output=replace(cfg.output, svg=False))
    return cfg.validate()


def _gen_data(cfg: RunConfig, out: Path) -> None:
    grid = cfg.grid.build()
    state = generate_initial_data(cfg.init, grid, cfg.physics.nu, cfg.physics.kappa)
    out.mkdir(parents=True, exist_ok=True)
    save_state(out / "initial_state.npz", state)
    traces = boundary_trace_check(state)
    report = {
        "divergence_residual": state.divergence_residual(),
        "max_boundary_trace": traces.max_trace,
        "horizontal_mean_content": state.horizontal_mean_content(),
        "unrepresented_content": unrepresented_content(state),
        "hermitian_defect": max(hermitian_defect(c) for c in state.components()),
    }
    norms = record(state, 0.0, cfg.rates.sigma)
    report.update({f"norm_{k}": v for k, v in norms.items() if k != "t"})
    lines = [f"{k} = {v:.17g}" for k, v in report.items()]
    (out / "initial_report.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'initial_state.npz'}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "check":
        if args.suite not in SUITES:
            print(f"error: unknown suite {args.suite!r}; choose from {sorted(SUITES)}", file=sys.stderr)
            return EXIT_USAGE
        results = run_suite(args.suite, emit=lambda line: print(line, flush=True))
        failed = [r.id for r in results if not r.ok]
        print(f"suite={args.suite} passed={len(results) - len(failed)} failed={len(failed)}")
        return EXIT_OK if not failed else EXIT_NUMERICAL

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out if args.out is not None else Path(cfg.output.dir)
    try:
        if args.command == "gen-data":
            _gen_data(cfg, out)
            return EXIT_OK
        log.info("running %s into %s", cfg.run.mode, out)
        result = run_experiment(cfg, out_dir=out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, NonContractionError, FitFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for kind, path in result.paths.items():
        print(f"{kind}: {path}")
    for col in ("u", "grad_h_u"):
        f = result.fits.get(col)
        if f is not None:
            print(f"fit {col}: exponent {f.exponent:.6g} r2 {f.r_squared:.6g}")
    for k, v in result.diagnostics.items():
        print(f"{k}: {v}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
