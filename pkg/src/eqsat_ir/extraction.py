"""Greedy bottom-up extraction of plain SSA code from an e-graph.

Each class gets the cheapest tree cost over its e-nodes, computed as a
least fixpoint.  The chosen e-nodes are then emitted once each, so shared
subterms stay shared in the output even though the objective counts them
per use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .eqsat import EGraph, eclass_of, egraphs_in, is_eclass_result
from .ir import IRError, Operation, Value, erase_op, replace_all_uses


class ExtractionError(IRError):
    pass


@dataclass(frozen=True)
class CostModel:
    costs: dict[str, Fraction] = field(default_factory=dict)
    default: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        for name, c in [*self.costs.items(), ("default", self.default)]:
            if c < 0:
                raise ValueError(f"cost of {name} must be non-negative, got {c}")

    def __call__(self, op: Operation) -> Fraction:
        return self.costs.get(op.name, self.default)

    @classmethod
    def unit(cls) -> CostModel:
        return cls()

    @classmethod
    def from_mapping(cls, costs: dict[str, object], default: object = 1) -> CostModel:
        return cls({k: Fraction(str(v)) for k, v in costs.items()}, Fraction(str(default)))

    @classmethod
    def parse(cls, text: str) -> CostModel:
        """Read the ``.cost`` format: ``op.name <decimal>`` per line,
        ``default <decimal>`` for the fallback, ``#`` comments."""
        costs: dict[str, Fraction] = {}
        default = Fraction(1)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"(\S+)\s+([0-9]+(?:\.[0-9]*)?|\.[0-9]+)", line)
            if m is None:
                raise ValueError(f"line {lineno}: expected '<op.name> <non-negative decimal>'")
            name, value = m.group(1), Fraction(m.group(2))
            if name == "default":
                default = value
            else:
                costs[name] = value
        return cls(costs, default)

    @classmethod
    def load(cls, path: str | Path) -> CostModel:
        return cls.parse(Path(path).read_text())


@dataclass
class ExtractionChoice:
    """Per eclass (keyed by op id): total cost and the chosen e-node."""

    costs: dict[int, Fraction] = field(default_factory=dict)
    choice: dict[int, Value] = field(default_factory=dict)

    def cost_of(self, eclass: Operation) -> Fraction | None:
        return self.costs.get(eclass.id)

    def chosen(self, eclass: Operation) -> Value | None:
        return self.choice.get(eclass.id)


def _dependencies(op: Operation) -> list[Value]:
    """Operands plus values captured from outside by nested regions."""
    deps = list(op.operands)
    if op.regions:
        inner = {id(o) for o in op.walk()}
        for o in op.walk():
            if o is op:
                continue
            for v in o.operands:
                producer = getattr(v, "op", None)
                if producer is not None and id(producer) not in inner and v not in deps:
                    deps.append(v)
    return deps


def _class_of(egraph: EGraph, v: Value) -> Operation | None:
    if is_eclass_result(v) and egraph.contains(v):
        return v.op
    if egraph.contains(v):
        return eclass_of(v)
    return None


def compute_costs(egraph: EGraph, cm: CostModel) -> ExtractionChoice:
    choice = ExtractionChoice()
    classes = egraph.eclasses()

    def node_cost(v: Value) -> Fraction | None:
        if not egraph.contains(v):
            return Fraction(0)
        total = cm(v.op)
        for dep in _dependencies(v.op):
            ec = _class_of(egraph, dep)
            if ec is None:
                continue
            c = choice.costs.get(ec.id)
            if c is None:
                return None
            total += c
        return total

    changed = True
    while changed:
        changed = False
        for ec in classes:
            best, best_node = choice.costs.get(ec.id), None
            for v in ec.operands:
                c = node_cost(v)
                if c is not None and (best is None or c < best):
                    best, best_node = c, v
            if best_node is not None:
                choice.costs[ec.id] = best
                choice.choice[ec.id] = best_node
                changed = True

    for v in egraph.yield_op.operands:
        if v.op.id not in choice.costs:
            raise ExtractionError("no acyclic extraction")
    return choice


def extract(egraph: EGraph, cm: CostModel) -> list[Operation]:
    """Replace ``egraph`` by the cheapest code it represents.

    Returns the materialized ops, in the order they were inserted before the
    egraph's former position.
    """
    choice = compute_costs(egraph, cm)
    block = egraph.block
    position = {op.id: i for i, op in enumerate(block.ops)}
    needed: set[int] = set()
    stack = [v.op for v in egraph.yield_op.operands]
    while stack:
        ec = stack.pop()
        v = choice.choice[ec.id]
        if not egraph.contains(v) or v.op.id in needed:
            continue
        needed.add(v.op.id)
        for dep in _dependencies(v.op):
            dep_class = _class_of(egraph, dep)
            if dep_class is not None:
                stack.append(dep_class)

    value_map: dict[Value, Value] = {}

    def resolve(v: Value) -> Value:
        ec = _class_of(egraph, v)
        if ec is None:
            return value_map.get(v, v)
        chosen = choice.choice[ec.id]
        return value_map.get(chosen, chosen)

    emitted: list[Operation] = []
    done: set[int] = set()

    def emit(op: Operation) -> None:
        if op.id in done:
            return
        done.add(op.id)
        for dep in _dependencies(op):
            ec = _class_of(egraph, dep)
            if ec is not None:
                target = choice.choice[ec.id]
                if egraph.contains(target):
                    emit(target.op)
        local = {}
        for dep in _dependencies(op):
            local[dep] = resolve(dep)
        clone = op.clone(local)
        for old, new in zip(op.results, clone.results):
            value_map[old] = new
        egraph.op.parent.insert_before(egraph.op, clone)
        emitted.append(clone)

    for op in sorted((o for o in block.ops if o.id in needed), key=lambda o: position[o.id]):
        emit(op)

    for res, v in zip(egraph.op.results, egraph.yield_op.operands):
        replace_all_uses(res, resolve(v))
    erase_op(egraph.op)
    return emitted


def extract_all(module, cm: CostModel) -> int:
    graphs = egraphs_in(module)
    for g in graphs:
        extract(g, cm)
    return len(graphs)


def extractable_terms(egraph: EGraph, eclass: Operation, max_size: int) -> set[tuple]:
    """All terms of at most ``max_size`` nodes represented by ``eclass``.

    Terms are nested tuples ``(op name, attrs, *children)``; values defined
    outside the egraph appear as ``("arg", index)`` for block arguments and
    ``("ext", id)`` otherwise.  Region-carrying e-nodes are skipped.
    """
    memo: dict[tuple[int, int], set[tuple]] = {}

    def leaf(v: Value) -> tuple:
        index = getattr(v, "index", None)
        if getattr(v, "op", None) is None and index is not None:
            return ("arg", index)
        return ("ext", id(v))

    def terms(ec: Operation, budget: int) -> set[tuple]:
        if budget <= 0:
            return set()
        key = (ec.id, budget)
        if key in memo:
            return memo[key]
        out: set[tuple] = set()
        for v in ec.operands:
            if not egraph.contains(v):
                out.add(leaf(v))
                continue
            op = v.op
            if op.regions:
                continue
            head = (op.name, tuple(sorted(op.attributes.items(), key=lambda kv: kv[0])))
            partial: list[tuple[tuple, int]] = [((), 1)]
            for operand in op.operands:
                child_class = _class_of(egraph, operand)
                nxt = []
                for kids, size in partial:
                    if child_class is None:
                        nxt.append((kids + (leaf(operand),), size + 1))
                        continue
                    for t in terms(child_class, budget - size):
                        s = term_size(t)
                        if size + s <= budget:
                            nxt.append((kids + (t,), size + s))
                partial = nxt
            for kids, size in partial:
                if size <= budget:
                    out.add(head + kids)
        memo[key] = out
        return out

    return terms(eclass, max_size)


def term_size(t: tuple) -> int:
    if t and t[0] in ("arg", "ext"):
        return 1
    return 1 + sum(term_size(c) for c in t[2:])
