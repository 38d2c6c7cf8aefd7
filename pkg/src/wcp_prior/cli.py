"""wcp-prior command line: distances, prior tables, calibration, TV and MAP studies.

Exit codes: 0 success, 1 computational failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from . import io
from .catalog import CATALOG, density_table, evaluate_distance, get_entry, numeric_config
from .config import CliConfig, StudyConfig, log_level
from .errors import ConfigurationError, WcpError
from .inference import PARAM_NAMES, run_study
from .numeric2d import approximate_density_2d, tv_between
from .validation import CalibrationTarget, calibrate

logger = logging.getLogger(__name__)

HYPER_FLAGS = ("eta", "eta_plus", "eta1", "eta2", "n", "sigma")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _hyperparameters(args: argparse.Namespace, family: str) -> dict[str, float]:
    entry = get_entry(family)
    accepted = {h.name for h in entry.hyperparameters}
    given = {name: getattr(args, name) for name in HYPER_FLAGS if getattr(args, name, None) is not None}
    if "eps" in accepted and getattr(args, "eps", None) is not None:
        given["eps"] = args.eps
    return given


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _add_hyper_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", required=True, choices=sorted(CATALOG), help="catalog family")
    parser.add_argument("--eta", type=float)
    parser.add_argument("--eta-plus", dest="eta_plus", type=float, help="rate on the upper side (mean family)")
    parser.add_argument("--eta1", type=float)
    parser.add_argument("--eta2", type=float)
    parser.add_argument("--n", type=int, help="series length (ar1)")
    parser.add_argument("--sigma", type=float, help="marginal sd (ar1)")


def _add_recipe_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps", type=float, help="mesh width (numerical constructions)")
    parser.add_argument("--eps-tilde", dest="eps_tilde", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--tau", type=float)


def _recipe_settings(args: argparse.Namespace, eps: float | None = None) -> dict:
    return {
        "eps": eps if eps is not None else args.eps,
        "eps_tilde": args.eps_tilde,
        "delta": args.delta,
        "tau": args.tau,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_dist(args: argparse.Namespace) -> int:
    hp = get_entry(args.family).with_unit_rates(_hyperparameters(args, args.family))
    value = evaluate_distance(args.family, args.theta, hp)
    _emit(io.dumps({"family": args.family, "params": args.theta, "distance": value}), args.output)
    return 0


def cmd_prior(args: argparse.Namespace) -> int:
    """Write a density table (and, with --output, its JSON sidecar)."""
    hp = _hyperparameters(args, args.family)
    numeric = None
    if args.numeric:
        if args.eps is None:
            raise ConfigurationError("--numeric needs --eps")
        numeric = numeric_config(args.family, hp, **_recipe_settings(args))
    table = density_table(args.family, hp, n=args.points, numeric=numeric)
    if numeric is not None:
        entry = get_entry(args.family)
        analytic = entry.build(entry.resolve(hp))
        grid = table.source
        table.provenance["tv_to_analytic"] = tv_between(grid, analytic, grid.bounds, q_total=1.0)
    if args.format == "json":
        payload = {"header": table.header, "rows": table.rows.tolist(), "provenance": table.provenance}
        _emit(io.dumps(payload), args.output)
        return 0
    text = io.table_text(table.header, table.rows.tolist())
    _emit(text, args.output)
    if args.output is not None:
        io.write_sidecar(args.output, table.provenance)
        if table.mesh is not None:
            io.mesh_path(args.output).write_text(table.mesh.to_text())
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    entry = get_entry(args.family)
    if entry.family is None:
        raise ConfigurationError(f"calibration needs a univariate family; '{args.family}' has dimension {entry.dimension}")
    hp = _hyperparameters(args, args.family)
    hp.setdefault("eta", 1.0)
    family = entry.family(entry.resolve(hp))
    target = CalibrationTarget(U=args.U, alpha=args.alpha, direction=args.direction)
    result = calibrate(family, target, law=args.law)
    payload = result.model_dump()
    payload["family"] = args.family
    _emit(io.dumps(payload), args.output)
    return 0


def cmd_tv_study(args: argparse.Namespace) -> int:
    """One {epsilon, tv, runtime_ms} record per mesh width, in the order given."""
    if not args.eps_list:
        raise ConfigurationError("--eps-list needs at least one mesh width")
    entry = get_entry(args.family)
    hp = _hyperparameters(args, args.family)
    analytic = entry.build(entry.resolve(hp))
    records = []
    for eps in args.eps_list:
        config = numeric_config(args.family, hp, **_recipe_settings(args, eps))
        started = time.perf_counter()
        grid = approximate_density_2d(config, entry.numeric.distance())
        tv = tv_between(grid, analytic, grid.bounds, q_total=1.0)
        runtime = 1000.0 * (time.perf_counter() - started)
        records.append({"epsilon": eps, "tv": tv, "runtime_ms": runtime})
        logger.info("tv-study %s: eps=%g tv=%.6g", args.family, eps, tv)
    _emit(io.dumps(records), args.output)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
    config = StudyConfig.model_validate_json(text)
    if args.fast:
        config = config.model_copy(update={"fast": True})
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    result = run_study(config)
    names = PARAM_NAMES[config.model]
    header = ["replicate", "prior", *names]
    rows = [[str(row["replicate"]), row["prior"], *(row[name] for name in names)] for row in result.rows]
    _emit(io.table_text(header, rows), args.output)
    summary = {"config": config.model_dump(), "priors": result.summary}
    if args.summary is not None:
        io.write_json(args.summary, summary)
    elif args.output is not None:
        io.write_json(io.sidecar_path(args.output), summary)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _eps_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid mesh width list {text!r}: {exc}") from exc
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wcp-prior", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default=None, help="logging level (default: $WCP_LOG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    dist = sub.add_parser("dist", help="Wasserstein distance to the base model")
    _add_hyper_flags(dist)
    dist.add_argument("--theta", type=float, nargs="+", required=True)
    dist.add_argument("--eps", type=float, help="tail cut-off (t-tail)")
    dist.add_argument("--output", "-o")
    dist.set_defaults(handler=cmd_dist)

    prior = sub.add_parser("prior", help="export a prior density table")
    _add_hyper_flags(prior)
    _add_recipe_flags(prior)
    prior.add_argument("--numeric", action="store_true", help="build the density numerically (2D families)")
    prior.add_argument("--points", type=int, help="grid points (per axis in 2D/3D)")
    prior.add_argument("--format", choices=("csv", "json"), default="csv")
    prior.add_argument("--output", "-o")
    prior.set_defaults(handler=cmd_prior)

    cal = sub.add_parser("calibrate", help="calibrate eta to a tail probability")
    _add_hyper_flags(cal)
    cal.add_argument("--eps", type=float, help="tail cut-off (t-tail)")
    cal.add_argument("--U", type=float, required=True)
    cal.add_argument("--alpha", type=float, required=True)
    cal.add_argument("--direction", choices=("above", "below"), default="above")
    cal.add_argument("--law", choices=("exponential", "truncated"), default="exponential")
    cal.add_argument("--output", "-o")
    cal.set_defaults(handler=cmd_calibrate)

    tv = sub.add_parser("tv-study", help="TV between numerical and analytic densities over mesh widths")
    _add_hyper_flags(tv)
    _add_recipe_flags(tv)
    tv.add_argument("--eps-list", dest="eps_list", type=_eps_list, required=True)
    tv.add_argument("--output", "-o")
    tv.set_defaults(handler=cmd_tv_study)

    sim = sub.add_parser("simulate", help="run a MAP study from a JSON config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--fast", action="store_true")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--output", "-o")
    sim.add_argument("--summary")
    sim.set_defaults(handler=cmd_simulate)
    return parser


def _validate(args: argparse.Namespace) -> None:
    family = getattr(args, "family", None)
    hp = _hyperparameters(args, family) if family else {}
    CliConfig(
        command=args.command,
        family=family,
        hyperparameters=hp,
        output_path=getattr(args, "output", None),
        format=getattr(args, "format", "csv"),
        seed=getattr(args, "seed", None),
    )
    if family and args.command in ("dist", "prior", "tv-study"):
        entry = get_entry(family)
        entry.resolve(entry.with_unit_rates(hp) if args.command == "dist" else hp)
        if args.command == "tv-study" and entry.numeric is None:
            raise ConfigurationError(f"family '{family}' has no numerical construction to study")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(args.log_level or log_level()).upper(), stream=sys.stderr)
    try:
        _validate(args)
        return args.handler(args)
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WcpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
