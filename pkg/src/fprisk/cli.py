"""Command-line entry point (``fpr``).

Exit codes: 0 success, 1 bad input or schema, 2 numerical failure,
3 path or scene generation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path as FsPath

import numpy as np

from .bench import bench_csv, run_bench
from .errors import FprError, GenerationError, InvalidInputError
from .fields import DEFAULT_SIGMA_CELLS
from .geometry import DEFAULT_RESOLUTION, ScalarField
from .io import atomic_write_text, csv_text
from .paths import dump_paths, generate_paths, load_paths
from .risk import EvalOptions, evaluate_paths, precompute_fields, split_obstacles
from .scenario import TEMPLATES, dump_scenario, gen_scenario, load_scenario

logger = logging.getLogger("fprisk")

RISK_HEADER = ("path_id", "f_d", "p_d_exact", "p_d_mc", "mc_stderr", "eval_ms")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_GENERATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, which here means a numerical failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _add_grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--sigma-cells", type=float, default=DEFAULT_SIGMA_CELLS,
                   help="ridge smoothing scale in cells (default 2)")
    p.add_argument("--resolution", type=float, default=None,
                   help=f"grid cell size in meters for auto grids (default {DEFAULT_RESOLUTION})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpr", description="Collision-risk bounds for candidate paths.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="bound the collision risk of each path")
    ev.add_argument("scenario")
    src = ev.add_mutually_exclusive_group(required=True)
    src.add_argument("--paths", help="path file (JSON)")
    src.add_argument("--gen", type=int, metavar="N", help="generate N candidate paths")
    _add_grid_flags(ev)
    ev.add_argument("--exact", action="store_true", help="add the exact per-obstacle baseline")
    ev.add_argument("--mc", action="store_true", help="add a Monte-Carlo estimate")
    ev.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo samples (default 100000)")
    ev.add_argument("--seed", type=int, default=None, help="seed for generation and sampling "
                    "(default: the scenario's seed)")
    ev.add_argument("--timings", action="store_true",
                    help="fill the eval_ms column (makes the CSV machine dependent)")
    ev.add_argument("--render", action="store_true", help="also write PPM images to --out")
    ev.add_argument("--figures", action="store_true", help="also write PNG figures to --out")
    ev.add_argument("--out", help="output directory (default: CSV to stdout)")

    bn = sub.add_parser("bench", help="time FPR against the exact baseline as K grows")
    bn.add_argument("--k-list", type=_int_list, default=[10, 35, 100])
    bn.add_argument("--n-list", type=_int_list, default=[50])
    bn.add_argument("--repeats", type=int, default=3)
    bn.add_argument("--seed", type=int, default=0)
    _add_grid_flags(bn)
    bn.add_argument("--out", help="output directory (default: CSV to stdout)")

    rd = sub.add_parser("render", help="write G, dG and path-risk PPM images")
    rd.add_argument("scenario")
    rd.add_argument("risk_csv", nargs="?", help="risk CSV from evaluate")
    rd.add_argument("--paths", help="path file the CSV was computed for")
    _add_grid_flags(rd)
    rd.add_argument("--out", required=True, help="output directory")

    gs = sub.add_parser("gen-scenario", help="write a synthetic scenario file")
    gs.add_argument("--template", choices=sorted(TEMPLATES), default="carpark")
    gs.add_argument("--k", type=int, default=35, help="number of obstacles")
    gs.add_argument("--std", type=float, default=None, help="positional std in meters")
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--out", help="output file (default: stdout)")

    gp = sub.add_parser("gen-paths", help="write candidate paths for a scenario")
    gp.add_argument("scenario")
    gp.add_argument("--n", type=int, default=100)
    gp.add_argument("--seed", type=int, default=None)
    gp.add_argument("--out", help="output file (default: stdout)")
    return parser


def _emit(text: str, dest: str | None):
    if dest is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(dest, text)


def _generate(scenario, n: int, seed: int):
    return generate_paths(scenario.start, scenario.goal, n, seed=seed,
                          obstacles=scenario.obstacles, robot=scenario.robot)


def _risk_rows(reports, timings: bool):
    for r in reports:
        f_d = r.f_d if r.ok else None
        yield (r.path_id, f_d, r.p_d_exact, r.p_d_mc, r.mc_stderr,
               r.eval_ms if timings and r.ok else None)


def _read_risks(path: str) -> dict[str, float]:
    lines = FsPath(path).read_text().splitlines()
    if not lines or lines[0].split(",")[:2] != ["path_id", "f_d"]:
        raise InvalidInputError(f"{path}: not a risk CSV (expected header starting path_id,f_d)")
    risks = {}
    for n, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) < 2 or fields[1] == "":
            continue
        try:
            risks[fields[0]] = float(fields[1])
        except ValueError:
            raise InvalidInputError(f"{path}:{n}: bad f_d value {fields[1]!r}")
    return risks


def _scene_fields(scenario, paths, sigma_cells):
    """(spec, G, dG) on the grid ``evaluate`` uses for these paths."""
    spec = scenario.resolve_grid(paths, sigma_cells)
    finite, _ = split_obstacles(scenario.obstacles, spec)
    if not finite:
        zero = ScalarField.zeros(spec)
        return spec, zero, zero
    rf = precompute_fields(finite, spec, sigma_cells)
    return spec, rf.g, rf.dg_sigma


def _write_images(out: FsPath, scenario, paths, risks, fields):
    from . import render

    spec, g, dg = fields
    render.write_ppm(out / "g.ppm", render.heatmap(g))
    render.write_ppm(out / "dg.ppm", render.heatmap(dg))
    img, missing = render.paths_image(spec, paths, risks, render.obstacle_mask(scenario, spec))
    render.write_ppm(out / "paths.ppm", img)
    for pid in missing:
        print(f"warning: no risk value for path {pid}; drawn grey", file=sys.stderr)


def cmd_evaluate(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    paths = load_paths(args.paths) if args.paths else _generate(scenario, args.gen, seed)
    if args.resolution is not None and scenario.grid is None:
        scenario.resolution = args.resolution
    options = EvalOptions(sigma_cells=args.sigma_cells, exact=args.exact, mc=args.mc,
                          samples=args.samples, seed=seed)
    reports = evaluate_paths(scenario, paths, options)
    text = csv_text(RISK_HEADER, _risk_rows(reports, args.timings))
    failed = [r for r in reports if not r.ok]
    for r in failed:
        print(f"error: path {r.path_id}: {r.error}", file=sys.stderr)

    if args.out is None:
        sys.stdout.write(text)
    else:
        out = FsPath(args.out)
        atomic_write_text(out / "risk.csv", text)
        if args.gen is not None:
            atomic_write_text(out / "paths.json", dump_paths(paths))
        risks = {r.path_id: r.f_d for r in reports if r.ok}
        if args.render or args.figures:
            fields = _scene_fields(scenario, paths, args.sigma_cells)
            if args.render:
                _write_images(out, scenario, paths, risks, fields)
            if args.figures:
                from . import render

                ok = [r for r in reports if r.ok]
                render.risk_map_figure(out / "risk_map.png", fields[1], paths, risks)
                exact = [r.p_d_exact for r in ok] if args.exact else None
                render.histogram_figure(out / "risk_hist.png", [r.f_d for r in ok], exact)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_bench(args) -> int:
    rows = run_bench(args.k_list, args.n_list, args.repeats, args.seed, args.sigma_cells,
                     args.resolution or DEFAULT_RESOLUTION)
    text = bench_csv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(FsPath(args.out) / "bench.csv", text)
    return EXIT_OK


def cmd_render(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.resolution is not None and scenario.grid is None:
        scenario.resolution = args.resolution
    paths = load_paths(args.paths) if args.paths else []
    risks = _read_risks(args.risk_csv) if args.risk_csv else {}
    _write_images(FsPath(args.out), scenario, paths, risks,
                  _scene_fields(scenario, paths, args.sigma_cells))
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    if args.k < 1:
        raise InvalidInputError("--k must be at least 1")
    _emit(dump_scenario(gen_scenario(args.template, args.k, args.std, args.seed)), args.out)
    return EXIT_OK


def cmd_gen_paths(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    _emit(dump_paths(_generate(scenario, args.n, seed)), args.out)
    return EXIT_OK


COMMANDS = {"evaluate": cmd_evaluate, "bench": cmd_bench, "render": cmd_render,
            "gen-scenario": cmd_gen_scenario, "gen-paths": cmd_gen_paths}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (InvalidInputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FprError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
