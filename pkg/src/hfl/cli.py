"""Command-line front end: ``hfl <command> <subcommand> [options]``.

Every command builds an :class:`~hfl.runner.ExperimentConfig`, runs it and
writes a canonical JSON report (plus CSV tables) to ``--out``.  The report is
also printed on stdout.  Failures print a one-line diagnostic and exit with
the code from :data:`hfl.runner.EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__, fixtures
from .io import action_to_dict, group_to_dict
from .runner import ConfigError, ExperimentConfig, canonical_json, exit_code, persist


def _global_flags(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d if suppress else 0, help="master seed")
    parser.add_argument("--jobs", type=int, default=d if suppress else 1, help="worker threads")
    parser.add_argument("--out", default=d if suppress else "hfl-out", help="output directory")
    parser.add_argument("--quiet", action="store_true", default=d if suppress else False,
                        help="do not print the report")


def _floats(text):
    try:
        return [float(x) for x in text.split(",")] if text else None
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _action_inputs(p):
    p.add_argument("--group", required=True, help="group JSON file")
    p.add_argument("--action", required=True, help="action JSON file")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    parser = argparse.ArgumentParser(prog="hfl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hfl {__version__}")
    _global_flags(parser, suppress=False)
    top = parser.add_subparsers(dest="command", required=True)

    def sub(group, name, kind, help):
        p = group.add_parser(name, parents=[common], help=help)
        p.set_defaults(kind=kind)
        return p

    flow = top.add_parser("flow", help="harmonic flow").add_subparsers(dest="sub", required=True)
    p = sub(flow, "run", "flow", "iterate the averaging flow and classify stability")
    _action_inputs(p)
    p.add_argument("--base", type=_floats, help="f(e) as comma-separated numbers (default 0)")
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-n", type=int, default=8, help="largest n of the energy-growth table")
    p = sub(flow, "solve", "flow-solve", "solve the harmonic equation directly")
    _action_inputs(p)
    p = sub(flow, "growth", "growth", "check the displacement growth bound on a ball")
    _action_inputs(p)
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--bound", choices=["conjugacy", "word_length"], default="conjugacy")
    p.add_argument("--base", type=_floats, help="also report the renormalization estimate at this f(e)")

    energy = top.add_parser("energy", help="local and n-step energies").add_subparsers(dest="sub", required=True)
    for name in ("local", "nstep"):
        p = sub(energy, name, "energy", f"{name} energy of an equivariant map")
        _action_inputs(p)
        p.add_argument("--base", type=_floats)
        p.add_argument("--at", help='group element, e.g. "g0 g1^-1" (default identity)')
        if name == "nstep":
            p.add_argument("--n", type=int, default=1)
            p.add_argument("--max-n", type=int, help="also tabulate E_n / E for n = 1..max-n")
        p.set_defaults(mode=name)

    p = top.add_parser("fixedpoint", parents=[common], help="exact fixed point and energy minimizer")
    p.set_defaults(kind="fixedpoint")
    _action_inputs(p)

    dl = top.add_parser("delta", help="displacement search").add_subparsers(dest="sub", required=True)
    p = sub(dl, "search", "delta", "search for a near-critical point")
    _action_inputs(p)
    p.add_argument("--base", type=_floats)
    p.add_argument("--j", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=60)

    graph = top.add_parser("graph", help="finite graphs").add_subparsers(dest="sub", required=True)
    p = sub(graph, "gen", "graph-gen", "random regular graph")
    p.add_argument("--V", type=int, required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--min-girth", type=int)
    p = sub(graph, "stats", "graph-stats", "spectral gap, girth and diameter")
    p.add_argument("--graph", required=True)
    p = sub(graph, "energy-ineq", "graph-energy-ineq", "check E_n <= (2/lambda1) E_1 on random maps")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--maps", type=int, default=10)
    p.add_argument("--dim", type=int, default=2)

    gm = top.add_parser("gmodel", help="graph-model random groups").add_subparsers(dest="sub", required=True)
    specs = {
        "sample": ("gmodel-sample", "sample a labelling"),
        "pushforward": ("gmodel-pushforward", "pushforward of the graph walk"),
        "fit-mixture": ("gmodel-fit-mixture", "fit the expected walk by free-group walks"),
        "concentration": ("gmodel-concentration", "concentration of labelled walks"),
        "relators": ("gmodel-relators", "presentation from fundamental cycles"),
    }
    for name, (kind, help) in specs.items():
        p = sub(gm, name, kind, help)
        p.add_argument("--graph", required=True)
        p.add_argument("--m", type=int, default=2)
        if name in ("pushforward", "relators"):
            p.add_argument("--labelling", help="labelling JSON (default: sampled from --seed)")
        if name in ("pushforward", "fit-mixture", "concentration"):
            p.add_argument("--n", type=int, default=1 if name != "concentration" else 2)
        if name == "pushforward":
            p.add_argument("--at")
        if name in ("fit-mixture", "concentration"):
            p.add_argument("--samples", type=int, default=2000 if name == "fit-mixture" else 500)
        if name == "relators":
            p.add_argument("--root", type=int, default=0)

    cr = top.add_parser("criterion", help="spectral fixed-point criterion").add_subparsers(dest="sub", required=True)
    for name in ("link", "k2", "check"):
        p = sub(cr, name, f"criterion-{name}", f"link graph {name}")
        p.add_argument("--presentation", required=True)
        p.add_argument("--weights")
        if name == "check":
            p.add_argument("--C", type=float, required=True)

    p = top.add_parser("suite", parents=[common], help="run the acceptance battery")
    p.set_defaults(kind="suite")
    p.add_argument("--only", help="comma-separated criterion numbers")

    p = top.add_parser("run", parents=[common], help="run a JSON experiment config")
    p.set_defaults(kind=None)
    p.add_argument("config")

    p = top.add_parser("fixture", parents=[common], help="write a named fixture as group/action JSON")
    p.set_defaults(kind=None)
    p.add_argument("name", choices=sorted(fixtures.FIXTURES))
    return parser


_PARAMS = ["base", "radius", "cap", "tol", "mode", "at", "n", "j", "V", "k", "min_girth",
           "maps", "dim", "m", "samples", "root", "C"]


def config_from_args(args) -> ExperimentConfig:
    if args.command == "run":
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"no such config file {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        cfg = ExperimentConfig.from_dict(d)
        return cfg
    inputs = {}
    for name, key in (("group", "group"), ("action", "action"), ("graph", "graph"),
                      ("labelling", "labelling"), ("presentation", "group"), ("weights", "weights")):
        v = getattr(args, name, None)
        if v is not None:
            inputs[key] = v
    params = {}
    for key in _PARAMS:
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    if getattr(args, "max_n", None) is not None:
        params["max_n"] = args.max_n
    if getattr(args, "bound", None) is not None:
        params["bound_kind"] = args.bound
    if getattr(args, "only", None):
        try:
            params["only"] = sorted(int(x) for x in args.only.split(","))
        except ValueError:
            raise ConfigError(f"--only expects comma-separated integers, got {args.only!r}") from None
    return ExperimentConfig(args.kind, inputs, params, args.seed, args.out, args.jobs)


def _write_fixture(args) -> int:
    action = fixtures.FIXTURES[args.name]()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.name}.group.json").write_text(canonical_json(group_to_dict(action.group)))
    (out / f"{args.name}.action.json").write_text(canonical_json(action_to_dict(action)))
    print(out / f"{args.name}.group.json")
    print(out / f"{args.name}.action.json")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fixture":
            return _write_fixture(args)
        cfg = config_from_args(args)
        t0 = time.perf_counter()
        path, report, cached = persist(cfg)
        elapsed = time.perf_counter() - t0
    except Exception as exc:  # diagnostics only, never a stack dump
        print(f"hfl: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    if not args.quiet:
        sys.stdout.write(canonical_json(report))
    note = " (cached)" if cached else ""
    print(f"hfl: report {path}{note} in {elapsed:.2f} s", file=sys.stderr)
    if cfg.kind == "suite":
        for k, r in report["results"].items():
            print(f"criterion {k} ({r['title']}): {'PASS' if r['pass'] else 'FAIL'}", file=sys.stderr)
        return 0 if all(report["verdicts"].values()) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
