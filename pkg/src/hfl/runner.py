"""Experiment configuration, dispatch, canonical JSON reports and CSV tables."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .affine import ActionError, renorm_estimate, verify_growth
from .expanders import GraphError, LabelledGraph, check_energy_inequality, random_regular, stats
from .graph_model import (GirthBoundError, SLabelling, concentration_experiment, emit_presentation,
                          fit_mixture, pushforward_walk, sample_labelling)
from .groups import CapExceeded, FreeGroup, GroupError
from .harmonic import (EquivariantMap, FlowError, delta, find_fixed_point, laplacian,
                       local_energy, min_energy_vector, n_step_energy, near_critical_search,
                       run_flow, solve_harmonic)
from .io import InputError, load_action, load_graph, load_group, load_weights, read_json
from .spectral import LinkError, build_link, fixed_point_criterion, poincare_k2


class ConfigError(ValueError):
    pass


EXIT_CODES = [
    (InputError, 2), (FileNotFoundError, 2), (ConfigError, 2),
    (CapExceeded, 3), (GirthBoundError, 6), (GroupError, 3), (ActionError, 4),
    (FlowError, 5), (GraphError, 6), (LinkError, 7),
]


def exit_code(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


INPUTS = {
    "flow": ("group", "action"), "flow-solve": ("group", "action"),
    "energy": ("group", "action"), "fixedpoint": ("group", "action"),
    "delta": ("group", "action"), "growth": ("group", "action"),
    "graph-gen": (), "graph-stats": ("graph",), "graph-energy-ineq": ("graph",),
    "gmodel-sample": ("graph",), "gmodel-pushforward": ("graph",),
    "gmodel-fit-mixture": ("graph",), "gmodel-concentration": ("graph",),
    "gmodel-relators": ("graph",),
    "criterion-link": ("group",), "criterion-k2": ("group",), "criterion-check": ("group",),
    "suite": (),
}
OPTIONAL_INPUTS = {"weights", "labelling"}


@dataclass
class ExperimentConfig:
    kind: str
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "hfl-out"
    jobs: int = 1

    def validate(self) -> None:
        if self.kind not in INPUTS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for name in INPUTS[self.kind]:
            if name not in self.inputs:
                raise ConfigError(f"{self.kind} needs input {name!r}")
        for name, path in self.inputs.items():
            if name not in INPUTS[self.kind] and name not in OPTIONAL_INPUTS:
                raise ConfigError(f"{self.kind} takes no input {name!r}")
            if not Path(path).is_file():
                raise FileNotFoundError(f"input {name!r}: no such file {path}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for key in ("radius", "n", "cap", "samples", "max_n", "maps"):
            if key in self.params and (not isinstance(self.params[key], int) or self.params[key] < 0):
                raise ConfigError(f"parameter {key} must be a nonnegative integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {"kind", "inputs", "params", "seed", "out_dir", "jobs"}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def content_hash(self) -> str:
        """Hash of everything that determines the report (not ``out_dir`` or ``jobs``)."""
        h = hashlib.sha256()
        h.update(canonical_json({"kind": self.kind, "params": self.params, "seed": self.seed,
                                 "inputs": sorted(self.inputs)}).encode())
        for name in sorted(self.inputs):
            h.update(name.encode())
            h.update(Path(self.inputs[name]).read_bytes())
        return h.hexdigest()[:16]


def _clean(x, path="report"):
    if isinstance(x, dict):
        return {str(k): _clean(v, f"{path}.{k}") for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v, f"{path}[{i}]") for i, v in enumerate(x)]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist(), path)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite number at {path}")
        return float(x)
    return x


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _vector(params, key, dim):
    v = params.get(key)
    if v is None:
        return np.zeros(dim)
    if len(v) != dim:
        raise ConfigError(f"parameter {key} must have length {dim}")
    return np.asarray(v, dtype=float)


def _element(group, text):
    if text is None:
        return group.identity
    return group.parse(text)


def _table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _load_labelling(path, graph: LabelledGraph) -> SLabelling:
    d = read_json(path)
    if not isinstance(d, dict) or "m" not in d or "edges" not in d:
        raise InputError(path, "", "expected fields 'm' and 'edges'")
    F = FreeGroup(int(d["m"]))
    labels = []
    for i, e in enumerate(d["edges"]):
        try:
            u, v, tok = e
            if (int(u), int(v)) != graph.edges[i]:
                raise InputError(path, f"edges[{i}]", "edge order must match the graph file")
            labels.append(F.parse_token(tok))
        except (ValueError, TypeError, IndexError, GroupError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(path, f"edges[{i}]", str(exc)) from None
    if len(labels) != graph.E:
        raise InputError(path, "edges", f"expected {graph.E} labelled edges")
    return SLabelling(graph, F.m, tuple(labels))


def _labelling(cfg, graph):
    if "labelling" in cfg.inputs:
        return _load_labelling(cfg.inputs["labelling"], graph)
    m = int(cfg.params.get("m", 2))
    return sample_labelling(graph, m, np.random.SeedSequence([int(cfg.seed)]))


def _energy_growth(f, max_n):
    E = local_energy(f)
    rows = []
    for n in range(1, max_n + 1):
        En = n_step_energy(f, None, n)
        rows.append([n, En, En / E if E > 0 else 0.0])
    return _table(["n", "E_n", "E_n_over_E"], rows)


def _run_flow(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    p = cfg.params
    f = EquivariantMap(action, _vector(p, "base", action.dim))
    radius = int(p.get("radius", 4))
    cap = int(p.get("cap", 10_000))
    trace, verdict = run_flow(f, radius=radius, cap=cap, tol=float(p.get("tol", 1e-8)))
    rows = [[i, a, b] for i, (a, b) in enumerate(zip(trace.delta_e, trace.ball_max))]
    max_n = int(p.get("max_n", 8))
    return {
        "results": {"iterations": len(trace.iterates) - 1, "final_base": trace.iterates[-1],
                    "monotonicity_violations": trace.violations,
                    "equality_cases": trace.equality_cases, "rigidity_ok": trace.rigidity_ok,
                    "local_energy": local_energy(f)},
        "verdicts": {"stability": verdict.as_dict(group)},
        "tables": {"flow_trace": _table(["i", "delta_e", "ball_max"], rows),
                   "energy_growth": _energy_growth(f, max_n)},
    }


def _run_flow_solve(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    sol = solve_harmonic(action)
    out = {"kind": sol.kind, "particular": sol.particular, "kernel_basis": sol.kernel.T,
           "residual": sol.residual}
    if sol.particular is not None:
        out["laplacian_norm"] = float(np.linalg.norm(laplacian(EquivariantMap(action, sol.particular))))
    return {"results": out, "verdicts": {"harmonic": sol.kind}}


def _run_energy(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    p = cfg.params
    f = EquivariantMap(action, _vector(p, "base", action.dim))
    x = _element(group, p.get("at"))
    mode = p.get("mode", "local")
    if mode == "local":
        return {"results": {"at": group.format(x), "local_energy": local_energy(f, x)}}
    if mode != "nstep":
        raise ConfigError(f"unknown energy mode {mode!r}")
    n = int(p.get("n", 1))
    out = {"results": {"at": group.format(x), "n": n, "n_step_energy": n_step_energy(f, x, n),
                       "local_energy": local_energy(f, x)}}
    if "max_n" in p:
        out["tables"] = {"energy_growth": _energy_growth(f, int(p["max_n"]))}
    return out


def _run_fixedpoint(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    v = find_fixed_point(action)
    vmin, residual = min_energy_vector(action)
    return {"results": {"fixed_point": v, "min_energy_vector": vmin,
                        "min_energy": local_energy(EquivariantMap(action, vmin)),
                        "min_energy_harmonic_residual": residual},
            "verdicts": {"has_fixed_point": v is not None}}


def _run_delta(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    p = cfg.params
    v0 = _vector(p, "base", action.dim)
    j = float(p.get("j", 1.0))
    cap = int(p.get("cap", 60))
    v, path = near_critical_search(action, v0, j, cap=cap, seed=int(cfg.seed))
    rows = [[i, delta(action, w)] for i, w in enumerate(path)]
    return {"results": {"start": v0, "delta_start": delta(action, v0), "end": v,
                        "delta_end": delta(action, v), "moves": len(path) - 1},
            "verdicts": {"search": {"j": j, "cap": cap, "terminated": True}},
            "tables": {"delta_path": _table(["move", "delta"], rows)}}


def _run_growth(cfg):
    group, _ = load_group(cfg.inputs["group"])
    action = load_action(cfg.inputs["action"], group)
    p = cfg.params
    radius = int(p.get("radius", 4))
    kind = p.get("bound_kind", "conjugacy")
    rep = verify_growth(action, radius, kind)
    out = {"results": {"growth": rep.as_dict(group)}, "verdicts": {"growth": rep.passed}}
    if "base" in p:
        out["results"]["renorm_estimate"] = {"value": renorm_estimate(action, _vector(p, "base", action.dim), radius),
                                             "radius": radius}
    return out


def _run_graph_gen(cfg):
    p = cfg.params
    g = random_regular(int(p.get("V", 50)), int(p.get("k", 4)), int(cfg.seed),
                       min_girth=p.get("min_girth"))
    return {"results": {"V": g.V, "edges": g.edges, "stats": stats(g).as_dict()},
            "files": {"graph.txt": g.to_edge_list()}}


def _run_graph_stats(cfg):
    g = load_graph(cfg.inputs["graph"])
    return {"results": {"V": g.V, "E": g.E, "stats": stats(g).as_dict()}}


def _run_graph_energy(cfg):
    g = load_graph(cfg.inputs["graph"])
    p = cfg.params
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed)]))
    max_n = int(p.get("n", 10))
    maps = int(p.get("maps", 10))
    dim = int(p.get("dim", 2))
    s = stats(g)
    rows, fails = [], 0
    for k in range(maps):
        phi = rng.standard_normal((g.V, dim))
        for n in range(1, max_n + 1):
            r = check_energy_inequality(g, phi, n, s.lambda1)
            fails += not r["pass"]
            rows.append([k, n, r["lhs"], r["rhs"]])
    return {"results": {"lambda1": s.lambda1, "failures": fails},
            "verdicts": {"energy_inequality": {"pass": fails == 0, "n": max_n, "maps": maps}},
            "tables": {"energy_inequality": _table(["map", "n", "lhs", "rhs"], rows)}}


def _labelling_dict(alpha: SLabelling) -> dict:
    F = FreeGroup(alpha.m)
    return {"m": alpha.m, "edges": [[u, v, F.token_name(t)] for (u, v), t in
                                    zip(alpha.graph.edges, alpha.labels)]}


def _run_gmodel_sample(cfg):
    g = load_graph(cfg.inputs["graph"])
    alpha = _labelling(cfg, g)
    lab = _labelling_dict(alpha)
    return {"results": {"labelling": lab}, "files": {"labelling.json": canonical_json(lab)}}


def _run_gmodel_pushforward(cfg):
    g = load_graph(cfg.inputs["graph"])
    alpha = _labelling(cfg, g)
    F = FreeGroup(alpha.m)
    n = int(cfg.params.get("n", 1))
    x = _element(F, cfg.params.get("at"))
    pw = pushforward_walk(alpha, x, n)
    measure = {F.format(w): p for w, p in sorted(pw.support.items(), key=lambda kv: (len(kv[0]), kv[0]))}
    return {"results": {"measure": measure, "total": pw.measure.total(),
                        "girth": None if math.isinf(pw.girth) else int(pw.girth)},
            "verdicts": {"pushforward": {"n": n, "valid_below_half_girth": True}}}


def _run_gmodel_fit(cfg):
    g = load_graph(cfg.inputs["graph"])
    p = cfg.params
    fit = fit_mixture(g, int(p.get("m", 2)), int(p.get("n", 1)), int(p.get("samples", 2000)),
                      int(cfg.seed), jobs=cfg.jobs)
    rows = [[l, w] for l, w in enumerate(fit.weights)]
    return {"results": fit.as_dict(),
            "verdicts": {"fit": {"residual": fit.residual, "n": fit.n, "samples": fit.samples}},
            "tables": {"mixture": _table(["l", "w_l"], rows)}}


def _run_gmodel_conc(cfg):
    g = load_graph(cfg.inputs["graph"])
    p = cfg.params
    r = concentration_experiment(g, int(p.get("m", 2)), int(p.get("n", 2)),
                                 int(p.get("samples", 500)), int(cfg.seed), jobs=cfg.jobs)
    return {"results": r, "verdicts": {"concentration": {"fraction": r["fraction"], "n": r["n"],
                                                         "samples": r["samples"]}}}


def _run_gmodel_relators(cfg):
    g = load_graph(cfg.inputs["graph"])
    alpha = _labelling(cfg, g)
    pres = emit_presentation(alpha, int(cfg.params.get("root", 0)))
    return {"results": {"presentation": pres, "count": len(pres["relators"])},
            "files": {"presentation.json": canonical_json(pres)}}


def _link(cfg):
    group, relators = load_group(cfg.inputs["group"])
    weights = load_weights(cfg.inputs["weights"]) if "weights" in cfg.inputs else None
    return build_link(group, relators, weights)


def _run_criterion(cfg):
    link = _link(cfg)
    out = {"results": {"link": link.as_dict(), "connected": link.is_connected()}}
    if cfg.kind == "criterion-link":
        return out
    rep = poincare_k2(link)
    out["results"]["poincare"] = rep.as_dict()
    if cfg.kind == "criterion-check":
        if "C" not in cfg.params:
            raise ConfigError("criterion-check needs parameter C")
        verdict = fixed_point_criterion(rep, float(cfg.params["C"]))
        out["verdicts"] = {"fixed_point_certified": verdict}
    return out


def _run_suite(cfg):
    from .suite import run_suite
    only = cfg.params.get("only")
    results, _ = run_suite(int(cfg.seed), only=set(only) if only else None)
    return {"results": results,
            "verdicts": {k: v["pass"] for k, v in results.items()}}


DISPATCH = {
    "flow": _run_flow, "flow-solve": _run_flow_solve, "energy": _run_energy,
    "fixedpoint": _run_fixedpoint, "delta": _run_delta, "growth": _run_growth,
    "graph-gen": _run_graph_gen, "graph-stats": _run_graph_stats,
    "graph-energy-ineq": _run_graph_energy,
    "gmodel-sample": _run_gmodel_sample, "gmodel-pushforward": _run_gmodel_pushforward,
    "gmodel-fit-mixture": _run_gmodel_fit, "gmodel-concentration": _run_gmodel_conc,
    "gmodel-relators": _run_gmodel_relators,
    "criterion-link": _run_criterion, "criterion-k2": _run_criterion,
    "criterion-check": _run_criterion, "suite": _run_suite,
}


def run(config: ExperimentConfig) -> dict:
    """Execute ``config`` and return the report dictionary (no side effects)."""
    config.validate()
    body = DISPATCH[config.kind](config)
    report = {
        "artifact": "hfl",
        "version": __version__,
        "config": {"kind": config.kind, "inputs": dict(config.inputs),
                   "params": dict(config.params), "seed": config.seed},
        "results": body.get("results", {}),
        "verdicts": body.get("verdicts", {}),
        "tables": body.get("tables", {}),
    }
    if body.get("files"):
        report["files"] = body["files"]
    return _clean(report)


def emit_csv(report: dict, table: str, path) -> Path:
    tables = report.get("tables", {})
    if table not in tables:
        raise KeyError(f"report has no table {table!r}; available: {sorted(tables)}")
    t = tables[table]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(t["columns"])
        for row in t["rows"]:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    return path


def persist(config: ExperimentConfig, cache_dir=None):
    """Run (or fetch from the cache) and write the report, its CSVs and files.

    Returns ``(report_path, report, cached)``.  Report files are never
    overwritten; an existing file for the same content hash is reused.
    """
    config.validate()
    key = config.content_hash()
    cache_dir = cache_dir if cache_dir is not None else os.environ.get("HFL_CACHE_DIR")
    name = f"report-{config.kind}-{key}.json"
    cached = None
    if cache_dir and (Path(cache_dir) / name).is_file():
        cached = json.loads((Path(cache_dir) / name).read_text())
    report = cached if cached is not None else run(config)
    text = canonical_json(report)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    if not target.exists():
        target.write_text(text)
    for tname in report.get("tables", {}):
        csv_path = out / f"{target.stem}-{tname}.csv"
        if not csv_path.exists():
            emit_csv(report, tname, csv_path)
    for fname, content in report.get("files", {}).items():
        fpath = out / f"{target.stem}-{fname}"
        if not fpath.exists():
            fpath.write_text(content)
    if cache_dir and cached is None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        cpath = Path(cache_dir) / name
        if not cpath.exists():
            cpath.write_text(text)
    return target, report, cached is not None
