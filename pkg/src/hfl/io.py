"""Reading and writing the JSON and edge-list input formats.

Validation failures raise :class:`InputError`, which names the file, the
JSON path and the offending field.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .affine import ActionError, AffineAction
from .expanders import GraphError, LabelledGraph
from .groups import FiniteGroup, FreeGroup, Group, GroupError


class InputError(ValueError):
    def __init__(self, file, path: str, message: str):
        self.file = str(file)
        self.path = path
        self.message = message
        super().__init__(f"{self.file}: {path or '<root>'}: {message}")


def read_json(path) -> object:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(p, f"line {exc.lineno} col {exc.colno}", f"malformed JSON: {exc.msg}") from None


def _need(d, key, file, path, kind=None):
    if not isinstance(d, dict):
        raise InputError(file, path, "expected an object")
    if key not in d:
        raise InputError(file, f"{path}.{key}" if path else key, "missing field")
    v = d[key]
    if kind is not None and (not isinstance(v, kind) or (isinstance(v, bool) and kind is not bool)):
        raise InputError(file, f"{path}.{key}" if path else key,
                         f"expected {getattr(kind, '__name__', kind)}")
    return v


def group_from_dict(d, file="<memory>"):
    """Build ``(group, relators)`` from a group/presentation document."""
    kind = _need(d, "type", file, "", str)
    relators = []
    if kind == "free":
        m = _need(d, "m", file, "", int)
        try:
            group = FreeGroup(m)
        except GroupError as exc:
            raise InputError(file, "m", str(exc)) from None
        for i, r in enumerate(d.get("relators", [])):
            try:
                relators.append(group.parse(r) if isinstance(r, str)
                                else group.element(group.parse_token(t) for t in r))
            except (GroupError, TypeError) as exc:
                raise InputError(file, f"relators[{i}]", str(exc)) from None
        return group, relators
    if kind == "finite":
        order = _need(d, "order", file, "", int)
        table = _need(d, "table", file, "", list)
        gens = _need(d, "generators", file, "", list)
        if len(table) != order:
            raise InputError(file, "table", f"expected {order} rows, got {len(table)}")
        for i, row in enumerate(table):
            if not isinstance(row, list) or len(row) != order:
                raise InputError(file, f"table[{i}]", f"expected a row of {order} integers")
        try:
            group = FiniteGroup(table, gens)
        except (GroupError, TypeError) as exc:
            raise InputError(file, "table", str(exc)) from None
        if not group.check_associative():
            raise InputError(file, "table", "multiplication is not associative")
        return group, relators
    raise InputError(file, "type", f"unknown group type {kind!r}")


def group_to_dict(group: Group, relators=()) -> dict:
    if isinstance(group, FreeGroup):
        d = {"type": "free", "m": group.m}
        if relators:
            d["relators"] = [group.format(r) for r in relators]
        return d
    return {"type": "finite", "order": group.order, "table": [list(r) for r in group.table],
            "generators": list(group.tokens)}


def _finite_number(x, file, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise InputError(file, path, "expected a finite number")
    return float(x)


def action_from_dict(d, group: Group, file="<memory>") -> AffineAction:
    dim = _need(d, "dim", file, "", int)
    C = _finite_number(d.get("C", 1.0), file, "C")
    sigma = _finite_number(d.get("sigma", 0.0), file, "sigma")
    gens = _need(d, "generators", file, "", dict)
    data = {}
    for name, entry in gens.items():
        path = f"generators.{name}"
        try:
            t = group.parse_token(name)
        except GroupError as exc:
            raise InputError(file, path, str(exc)) from None
        A = _need(entry, "A", file, path, list)
        b = _need(entry, "b", file, path, list)
        if len(A) != dim or any(not isinstance(r, list) or len(r) != dim for r in A):
            raise InputError(file, f"{path}.A", f"expected a {dim}x{dim} matrix")
        if len(b) != dim:
            raise InputError(file, f"{path}.b", f"expected a vector of length {dim}")
        A = [[_finite_number(x, file, f"{path}.A[{i}][{j}]") for j, x in enumerate(r)]
             for i, r in enumerate(A)]
        b = [_finite_number(x, file, f"{path}.b[{i}]") for i, x in enumerate(b)]
        data[t] = (A, b)
    try:
        return AffineAction(group, dim, data, C=C, sigma=sigma)
    except ActionError as exc:
        raise InputError(file, "generators", str(exc)) from None


def action_to_dict(action: AffineAction) -> dict:
    g = action.group
    seen = set()
    gens = {}
    for t in g.tokens:
        if t in seen:
            continue
        seen.update({t, g.token_inverse(t)})
        A, b = action.generator_map(t)
        gens[g.token_name(t)] = {"A": A.tolist(), "b": b.tolist()}
    return {"dim": action.dim, "C": action.C, "sigma": action.sigma, "generators": gens}


def load_group(path):
    return group_from_dict(read_json(path), path)


def load_action(path, group: Group) -> AffineAction:
    return action_from_dict(read_json(path), group, path)


def load_graph(path) -> LabelledGraph:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    try:
        return LabelledGraph.from_edge_list(p.read_text())
    except GraphError as exc:
        raise InputError(p, "", str(exc)) from None


def load_weights(path) -> dict:
    d = read_json(path)
    edges = _need(d, "edges", path, "", list)
    out = {}
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 3 and isinstance(e[0], str) and isinstance(e[1], str)):
            raise InputError(path, f"edges[{i}]", 'expected ["s", "t", weight]')
        out[(e[0], e[1])] = _finite_number(e[2], path, f"edges[{i}][2]")
    return out
