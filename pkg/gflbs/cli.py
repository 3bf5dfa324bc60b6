"""
Command line interface::

    gflbs decompose --input DATASET --out RUN [--mode sml --manifest FILE] ...
    gflbs eval --masks RUN --gt DATASET [--report FILE]
    gflbs synth --spec SPEC.json --out DATASET
    gflbs trace RUN

Exit codes: 0 on success, 1 on usage, configuration or I/O errors, 2 when the
decomposition stopped at the iteration cap without converging.
"""

from __future__ import annotations

import argparse
import dataclasses
import functools
import json
import logging
import os
import pathlib
import sys
import time
from typing import Any, Callable, Sequence

import gflbs
from gflbs.datasets import (
    detect_layout,
    layout,
    layouts,
    load_ground_truth,
    load_masks,
    read_manifest,
    read_trace,
    split_training,
    to_observation,
    write_results,
    write_snapshot,
)
from gflbs.matrices import NumericalError
from gflbs.metrics import evaluate_sequence, write_report
from gflbs.problems import sml_problem
from gflbs.results import decomposition, trace_record
from gflbs.solvers import solve_sml, solve_uml, solver_config
from gflbs.synth import generate, synth_spec, write_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

# Configuration keys whose name differs from the solver_config field.
_RENAMED = {"lambda": "lam", "max_iters": "max_outer_iters"}

_SOLVER_FIELDS = {f.name for f in dataclasses.fields(solver_config)}

_RUN_TYPES = {
    "mode": str,
    "input": str,
    "manifest": str,
    "out": str,
    "layout": str,
    "downscale": int,
    "seed": int,
    "snapshot_frame": int,
}


@dataclasses.dataclass(frozen=True)
class run_config:

    """
    Everything a decompose run needs, merged from a JSON file and flags.
    """

    mode: str = "uml"
    input: str | None = None
    manifest: str | None = None
    out: str | None = None
    layout: str | None = None
    downscale: int = 1
    seed: int | None = None
    snapshot_frame: int | None = None
    solver: solver_config = dataclasses.field(default_factory=solver_config)

    def validate(self) -> run_config:
        for name, kind in _RUN_TYPES.items():
            value = getattr(self, name)
            if value is not None and (
                not isinstance(value, kind) or isinstance(value, bool)
            ):
                raise ValueError(
                    "Invalid {} = {!r}, expected {}.".format(
                        name, value, "an integer" if kind is int else "a string"
                    )
                )
        if self.mode not in ("uml", "sml"):
            raise ValueError("--mode must be uml or sml, got {}.".format(self.mode))
        if self.input is None:
            raise ValueError("--input is required.")
        if self.out is None:
            raise ValueError("--out is required.")
        if self.mode == "sml" and self.manifest is None:
            raise ValueError("--manifest is required with --mode sml.")
        if self.layout is not None and self.layout not in layouts:
            raise ValueError(
                "--layout must be one of {}, got {}.".format(
                    ", ".join(layouts), self.layout
                )
            )
        if self.downscale is None or self.downscale < 1:
            raise ValueError("--downscale must be at least 1.")
        if self.snapshot_frame is not None and self.snapshot_frame < 0:
            raise ValueError("--snapshot-frame must be nonnegative.")
        if self.solver.lam is not None and self.solver.lam <= 0:
            raise ValueError(
                "--lambda must be positive, got {}.".format(self.solver.lam)
            )
        self.solver.validate()
        return self

    @classmethod
    def from_dict(cls, values: dict[str, Any], source: str = "") -> run_config:
        """
        Build a configuration from flat keys named after the command line
        flags, ``-`` and ``_`` being interchangeable.
        """
        run: dict[str, Any] = {}
        solver: dict[str, Any] = {}
        run_fields = {f.name for f in dataclasses.fields(cls)} - {"solver"}
        for key, value in values.items():
            name = key.replace("-", "_")
            name = _RENAMED.get(name, name)
            if name in _SOLVER_FIELDS:
                solver[name] = value
            elif name in run_fields:
                run[name] = value
            else:
                raise ValueError(
                    "Unknown configuration key {}{}.".format(
                        key, " in " + source if source else ""
                    )
                )
        return cls(**run, solver=solver_config(**solver))

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> run_config:
        """Merge the ``--config`` file, if any, with the flags set on args."""
        values: dict[str, Any] = {}
        if args.config is not None:
            with open(args.config) as fp:
                try:
                    loaded = json.load(fp)
                except ValueError as e:
                    raise ValueError(
                        "Invalid JSON in {}: {}".format(args.config, e)
                    ) from e
            if not isinstance(loaded, dict):
                raise ValueError("{} does not hold a JSON object.".format(args.config))
            values.update({k.replace("-", "_"): v for k, v in loaded.items()})
        for key in _DECOMPOSE_FLAGS:
            value = getattr(args, key, None)
            if value is not None:
                values[key] = value
        values.setdefault("workers", os.cpu_count() or 1)
        return cls.from_dict(values, args.config or "").validate()

    def asdict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


# Destinations of the decompose flags that feed run_config.
_DECOMPOSE_FLAGS = (
    "mode",
    "input",
    "manifest",
    "out",
    "layout",
    "downscale",
    "seed",
    "snapshot_frame",
    "lambda",
    "rho",
    "sigma",
    "mu0",
    "beta",
    "mu_max",
    "tol",
    "max_iters",
    "fista_iters",
    "connectivity",
    "mask_eps",
    "workers",
)


def _layout(name: str | None, root: pathlib.Path) -> layout:
    if name is None:
        return detect_layout(root)
    return layouts[name]()


def cmd_decompose(args: argparse.Namespace) -> int:
    config = run_config.from_args(args)
    assert config.input is not None and config.out is not None
    root = pathlib.Path(config.input)
    sequence = _layout(config.layout, root).load_sequence(
        root, config.downscale, workers=config.solver.workers
    )

    out = pathlib.Path(config.out)
    if config.mode == "uml":
        data = to_observation(sequence)
        solve: Callable[..., decomposition] = functools.partial(solve_uml, data)
    else:
        assert config.manifest is not None
        training, mixed = split_training(sequence, read_manifest(config.manifest))
        data = to_observation(mixed)
        solve = functools.partial(
            solve_sml, sml_problem.from_observations(to_observation(training), data)
        )
    callback = None
    if config.snapshot_frame is not None:
        callback = functools.partial(
            write_snapshot, geometry=data, frame=config.snapshot_frame, out_dir=out
        )

    start = time.perf_counter()
    result = solve(config.solver, callback)
    runtime = time.perf_counter() - start

    write_results(result, data, out, config.solver.mask_eps)
    summary = {
        "version": gflbs.__version__,
        "mode": config.mode,
        "input": config.input,
        "seed": config.seed,
        "config": result.diagnostics.get("config", config.solver.asdict()),
        "status": str(result.status),
        "converged": result.converged,
        "iterations": result.iterations,
        "runtime": runtime,
        "residual": result.residual,
    }
    if "training_rank" in result.diagnostics:
        summary["training_rank"] = result.diagnostics["training_rank"]
    with open(out / "run.json", "w") as fp:
        json.dump(summary, fp, indent=1)
        fp.write("\n")

    logger.info("%s in %.2fs", result, runtime)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_eval(args: argparse.Namespace) -> int:
    masks_dir = pathlib.Path(args.masks)
    runtime, iterations = None, None
    if (masks_dir / "masks").is_dir():
        summary = masks_dir / "run.json"
        if summary.is_file():
            values = json.loads(summary.read_text())
            runtime, iterations = values.get("runtime"), values.get("iterations")
        masks_dir = masks_dir / "masks"
    masks = load_masks(masks_dir)

    gt_root = pathlib.Path(args.gt)
    truth = load_ground_truth(gt_root, _layout(args.layout, gt_root), args.downscale)
    if not len(truth):
        raise ValueError("No ground truth found in {}.".format(gt_root))

    report = evaluate_sequence(
        masks,
        truth,
        args.sequence or gt_root.resolve().name,
        runtime,
        iterations,
    )
    if not report.frames:
        raise ValueError(
            "No mask of {} matches a ground-truth frame of {}.".format(
                masks_dir, gt_root
            )
        )
    write_report([report], args.report)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synth_spec.load(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    result = generate(spec)
    write_dataset(result, args.out)
    return EXIT_OK


def format_trace(records: Sequence[trace_record]) -> str:
    """Format a convergence trace as an aligned text table."""
    lines = [
        "{:>5} {:>14} {:>14} {:>11} {:>11} {:>5} {:>8}".format(
            *trace_record._fields
        )
    ]
    for r in records:
        lines.append(
            "{:5d} {:14.6e} {:14.6e} {:11.3e} {:11.3e} {:5d} {:8d}".format(*r)
        )
    return "\n".join(lines)


def cmd_trace(args: argparse.Namespace) -> int:
    path = pathlib.Path(args.trace)
    if path.is_dir():
        path = path / "trace.json"
    print(format_trace(read_trace(path)))
    return EXIT_OK


class _parser(argparse.ArgumentParser):

    # Usage errors share the exit code of the other errors, 2 means
    # non-convergence.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, "{}: error: {}\n".format(self.prog, message))


def build_parser() -> argparse.ArgumentParser:
    parser = _parser(
        prog="gflbs",
        description="Background subtraction by low-rank and generalized fused "
        "lasso decomposition.",
    )
    parser.add_argument(
        "--version", action="version", version="%(prog)s " + gflbs.__version__
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logs.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only warnings.")
    commands = parser.add_subparsers(dest="command_name", required=True)

    decompose = commands.add_parser(
        "decompose", help="Decompose a frame sequence into background and masks."
    )
    decompose.set_defaults(command=cmd_decompose)
    decompose.add_argument("--config", help="JSON file with flag names as keys.")
    decompose.add_argument("--mode", choices=("uml", "sml"))
    decompose.add_argument("--input", help="Dataset or frames directory.")
    decompose.add_argument("--manifest", help="Training frames of --mode sml.")
    decompose.add_argument("--out", help="Output directory.")
    decompose.add_argument("--layout", choices=tuple(layouts))
    decompose.add_argument("--downscale", type=int, help="Box-filter factor.")
    decompose.add_argument("--seed", type=int, help="Recorded in the run summary.")
    decompose.add_argument(
        "--snapshot-frame", type=int, help="Write this frame at every iteration."
    )
    decompose.add_argument("--lambda", type=float, help="Foreground weight.")
    decompose.add_argument("--rho", type=float, help="Fusion weight.")
    decompose.add_argument("--sigma", type=float, help="Weight bandwidth.")
    decompose.add_argument("--mu0", type=float, help="Initial penalty.")
    decompose.add_argument("--beta", type=float, help="Penalty growth factor.")
    decompose.add_argument("--mu-max", type=float, help="Largest penalty.")
    decompose.add_argument("--tol", type=float, help="Relative residual target.")
    decompose.add_argument("--max-iters", type=int, help="Outer iteration cap.")
    decompose.add_argument("--fista-iters", type=int, help="Inner lasso iterations.")
    decompose.add_argument("--connectivity", type=int, choices=(4, 8))
    decompose.add_argument("--mask-eps", type=float, help="Mask magnitude floor.")
    decompose.add_argument("--workers", type=int, help="Column worker processes.")

    evaluate = commands.add_parser("eval", help="Score masks against ground truth.")
    evaluate.set_defaults(command=cmd_eval)
    evaluate.add_argument("--masks", required=True, help="Run or mask directory.")
    evaluate.add_argument("--gt", required=True, help="Dataset or ground truth.")
    evaluate.add_argument("--layout", choices=tuple(layouts))
    evaluate.add_argument("--downscale", type=int, default=1)
    evaluate.add_argument("--sequence", help="Sequence name in the report.")
    evaluate.add_argument("--report", help="CSV file, standard output if unset.")

    synth = commands.add_parser("synth", help="Generate a synthetic dataset.")
    synth.set_defaults(command=cmd_synth)
    synth.add_argument("--spec", required=True, help="JSON synthetic spec.")
    synth.add_argument("--out", required=True, help="Dataset directory.")
    synth.add_argument("--seed", type=int, help="Override the spec seed.")

    trace = commands.add_parser("trace", help="Print a convergence trace.")
    trace.set_defaults(command=cmd_trace)
    trace.add_argument("trace", help="trace.json or run directory.")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.command(args)
    except (ValueError, TypeError, OSError, NumericalError) as e:
        print("gflbs: error: {}".format(e), file=sys.stderr)
        return EXIT_ERROR
