"""Independent reference models for the randomized tests.

Nothing here imports the matcher, rebuild or saturation code: the models are
plain Python over tuples, and only the bridge helpers touch the IR.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from eqsat_ir import Block, Module, Operation, Region, RegionKind, Type, build_op
from eqsat_ir.dialects import function_type_token
from eqsat_ir.eqsat import EGraph, eclass_of
from eqsat_ir.patterns import Node, Var

I64 = Type("i64")

# ---------------------------------------------------------------------------
# e-graph models: classes hold e-nodes; an e-node is (name, attrs, child classes)
# or ("arg", index) for a function argument.


@dataclass
class EGraphModel:
    classes: list[list[tuple]]
    num_args: int


@dataclass
class Built:
    module: Module
    egraph: EGraph
    class_ops: list[Operation]
    node_ops: dict[tuple[int, int], Operation]  # (class, position) -> op


def random_ematch_model(rng: random.Random, max_classes: int = 4, max_nodes: int = 3) -> EGraphModel:
    """Small e-graphs (cycles allowed) over a tiny signature."""
    n = rng.randint(1, max_classes)
    num_args = rng.randint(0, 2)
    classes: list[list[tuple]] = []
    args_left = list(range(num_args))
    for _ in range(n):
        nodes: list[tuple] = []
        for _ in range(rng.randint(1, max_nodes)):
            roll = rng.random()
            if args_left and roll < 0.15:
                node = ("arg", args_left.pop())
            elif roll < 0.35:
                node = ("arith.constant", (("value", rng.choice([0, 1, 2])),), ())
            elif roll < 0.65:
                node = ("test.f", (), (rng.randrange(n),))
            else:
                node = ("test.g", (), (rng.randrange(n), rng.randrange(n)))
            if node not in nodes:
                nodes.append(node)
        classes.append(nodes)
    return EGraphModel(classes, num_args)


def build_egraph(model: EGraphModel) -> Built:
    """Materialize a model as a function holding one hand-built egraph."""
    body = Block([I64] * model.num_args)
    func = build_op(
        "func.func",
        attributes={"sym_name": "m", "function_type": function_type_token([I64] * model.num_args, [I64])},
        regions=[Region(body)],
    )
    gblock = Block()
    egraph = build_op("eqsat.egraph", [], [I64], regions=[Region(gblock, RegionKind.GRAPH)])
    body.append(egraph)
    class_ops = [Operation("eqsat.eclass", [], [I64]) for _ in model.classes]
    node_ops: dict[tuple[int, int], Operation] = {}
    members: list[list] = [[] for _ in model.classes]
    for ci, nodes in enumerate(model.classes):
        for ni, node in enumerate(nodes):
            if node[0] == "arg":
                members[ci].append(body.args[node[1]])
                continue
            name, attrs, kids = node
            op = build_op(name, [class_ops[k].result for k in kids], [I64], dict(attrs))
            gblock.append(op)
            node_ops[(ci, ni)] = op
            members[ci].append(op.result)
    for ci, ec in enumerate(class_ops):
        ec.set_operands(members[ci])
        gblock.append(ec)
    gblock.append(build_op("eqsat.yield", [class_ops[0].result]))
    body.append(build_op("func.return", [egraph.result]))
    return Built(Module([func]), EGraph(egraph), class_ops, node_ops)


# ---------------------------------------------------------------------------
# patterns


def random_pattern(rng: random.Random, depth: int = 3, root: bool = True):
    if not root and (depth <= 1 or rng.random() < 0.35):
        return Var(rng.choice("xyz"))
    roll = rng.random()
    if depth <= 1 or roll < 0.2:
        return Node("arith.constant", (), (("value", rng.choice([0, 1, 2])),))
    if roll < 0.6:
        return Node("test.f", (random_pattern(rng, depth - 1, False),))
    return Node("test.g", (random_pattern(rng, depth - 1, False), random_pattern(rng, depth - 1, False)))


def _node_positions(p, path=()):
    """Paths of the non-root operation patterns, parents before children."""
    out = []
    if isinstance(p, Node):
        for i, c in enumerate(p.children):
            if isinstance(c, Node):
                out.append(path + (i,))
            out.extend(_node_positions(c, path + (i,)))
    return out


def _walk_match(p, node, choose, model, path, bindings):
    """Syntactic match of pattern ``p`` against ``node``, picking the e-node
    for each nested position with ``choose(path, class)``."""
    if node[0] == "arg":
        return False
    name, attrs, kids = node
    if name != p.op or len(kids) != len(p.children):
        return False
    if any(dict(attrs).get(k) != v for k, v in p.attrs):
        return False
    for i, (child, cls) in enumerate(zip(p.children, kids)):
        if isinstance(child, Var):
            if bindings.setdefault(child.name, cls) != cls:
                return False
            continue
        pick = choose(path + (i,), cls)
        if pick is None or not _walk_match(child, model.classes[cls][pick], choose, model, path + (i,), bindings):
            return False
    return True


def oracle_matches_per_position(model: EGraphModel, rule_id: int, pattern: Node) -> set[tuple]:
    """Enumerate every assignment of an e-node index to each nested pattern
    position (one choice per traversed class occurrence)."""
    positions = _node_positions(pattern)
    width = max(len(c) for c in model.classes)
    found = set()
    for ci, nodes in enumerate(model.classes):
        for ni, node in enumerate(nodes):
            for combo in itertools.product(range(width), repeat=len(positions)):
                table = dict(zip(positions, combo))

                def choose(path, cls, table=table):
                    k = table[path]
                    return k if k < len(model.classes[cls]) else None

                bindings: dict[str, int] = {}
                if _walk_match(pattern, node, choose, model, (), bindings):
                    found.add((rule_id, (ci, ni), tuple(sorted(bindings.items()))))
    return found


def oracle_matches_per_class(model: EGraphModel, rule_id: int, pattern: Node) -> set[tuple]:
    """Enumerate every function class -> e-node, shared by all positions."""
    found = set()
    ranges = [range(len(c)) for c in model.classes]
    for ci, nodes in enumerate(model.classes):
        for ni, node in enumerate(nodes):
            for sigma in itertools.product(*ranges):
                bindings: dict[str, int] = {}
                if _walk_match(pattern, node, lambda path, cls, s=sigma: s[cls], model, (), bindings):
                    found.add((rule_id, (ci, ni), tuple(sorted(bindings.items()))))
    return found


# ---------------------------------------------------------------------------
# congruence closure over ground terms


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def random_term_dag(rng: random.Random, max_nodes: int = 20) -> list[tuple]:
    """Distinct ground nodes; children refer to earlier indices."""
    nodes: list[tuple] = []
    for i in range(rng.randint(1, 3)):
        nodes.append(("arg", i))
    target = rng.randint(len(nodes), max_nodes)
    attempts = 0
    while len(nodes) < target and attempts < 200:
        attempts += 1
        roll = rng.random()
        if roll < 0.1:
            node = ("arith.constant", (("value", rng.choice([0, 1])),), ())
        elif roll < 0.55:
            node = ("test.f", (), (rng.randrange(len(nodes)),))
        else:
            node = ("test.g", (), (rng.randrange(len(nodes)), rng.randrange(len(nodes))))
        if node not in nodes:
            nodes.append(node)
    return nodes


def congruence_closure(nodes: list[tuple], unions: list[tuple[int, int]]) -> list[int]:
    """Textbook closure: union, then merge congruent parents until stable."""
    uf = UnionFind(len(nodes))
    for a, b in unions:
        uf.union(a, b)
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(len(nodes)), 2):
            a, b = nodes[i], nodes[j]
            if a[0] == "arg" or b[0] == "arg" or a[:2] != b[:2] or len(a[2]) != len(b[2]):
                continue
            if uf.find(i) != uf.find(j) and all(uf.find(x) == uf.find(y) for x, y in zip(a[2], b[2])):
                uf.union(i, j)
                changed = True
    return [uf.find(i) for i in range(len(nodes))]


def dag_model(nodes: list[tuple]) -> EGraphModel:
    """One class per node; children refer to classes by node index."""
    num_args = sum(1 for n in nodes if n[0] == "arg")
    return EGraphModel([[n] for n in nodes], num_args)


def partition(labels: list[int]) -> set[frozenset[int]]:
    groups: dict[int, set[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def lookup_ground(built: Built, nodes: list[tuple]) -> list[int]:
    """Class (by op id) representing each ground node in the current egraph,
    found by searching for a matching op; no implementation bookkeeping."""
    func = built.module.ops[0]
    args = func.regions[0].block.args
    handles: list = []
    for node in nodes:
        if node[0] == "arg":
            ec = eclass_of(args[node[1]])
        else:
            name, attrs, kids = node
            want = tuple(handles[k] for k in kids)
            [op] = [
                o
                for o in built.egraph.nodes()
                if o.name == name and tuple(o.attributes.items()) == attrs and o.operands == want
            ]
            ec = eclass_of(op.result)
        handles.append(ec.result)
    return [h.op.id for h in handles]


# ---------------------------------------------------------------------------
# term rewriting model for saturation
#
# Terms: ("arg", 0) | ("arith.constant", (("value", k),)) | (name, (), t1, t2)

ARG = ("arg", 0)
BINOPS = ("arith.addi", "arith.muli", "arith.shli")


def const(k: int) -> tuple:
    return ("arith.constant", (("value", k),))


def random_seed_term(rng: random.Random, depth: int = 3) -> tuple:
    if depth == 0 or rng.random() < 0.25:
        return rng.choice([ARG, const(0), const(1), const(2)])
    return (rng.choice(BINOPS), (), random_seed_term(rng, depth - 1), random_seed_term(rng, depth - 1))


def term_size(t: tuple) -> int:
    return 1 + sum(term_size(c) for c in t[2:])


def subterms(t: tuple):
    yield t
    for c in t[2:]:
        yield from subterms(c)


def _instantiate(p, env):
    if isinstance(p, Var):
        return env[p.name]
    return (p.op, tuple(p.attrs), *(_instantiate(c, env) for c in p.children))


class TermClosure:
    """Explicit finite term set with an equivalence, grown by rule instances
    matched modulo the equivalence and closed under congruence."""

    def __init__(self, rules, budget: int) -> None:
        self.rules = rules  # list of (lhs Node, rhs pattern)
        self.budget = budget
        self.terms: list[tuple] = []
        self.index: dict[tuple, int] = {}
        self.parent: list[int] = []

    def add(self, t: tuple) -> int:
        for c in t[2:]:
            self.add(c)
        if t not in self.index:
            self.index[t] = len(self.terms)
            self.terms.append(t)
            self.parent.append(len(self.parent))
        return self.index[t]

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True

    def members(self) -> dict[int, list[tuple]]:
        out: dict[int, list[tuple]] = {}
        for t, i in self.index.items():
            out.setdefault(self.find(i), []).append(t)
        return out

    def _match(self, p, cls: int, groups, env):
        if isinstance(p, Var):
            if p.name in env:
                return [env] if env[p.name] == cls else []
            return [{**env, p.name: cls}]
        found = []
        for t in groups[cls]:
            found.extend(self._match_term(p, t, groups, env))
        return found

    def _match_term(self, p, t, groups, env):
        if t[0] != p.op or tuple(p.attrs) != t[1] or len(t) - 2 != len(p.children):
            return []
        envs = [env]
        for child_p, child_t in zip(p.children, t[2:]):
            cls = self.find(self.index[child_t])
            envs = [e2 for e in envs for e2 in self._match(child_p, cls, groups, e)]
        return envs

    def run(self, seed: tuple) -> bool:
        """Grow to a fixpoint; False when the term budget is exhausted."""
        self.add(seed)
        while True:
            if len(self.terms) > self.budget:
                return False
            groups = self.members()
            reps = {c: min(ts, key=lambda t: self.index[t]) for c, ts in groups.items()}
            progress = False
            for t in list(self.terms):
                for lhs, rhs in self.rules:
                    for env in self._match_term(lhs, t, groups, {}):
                        new = _instantiate(rhs, {k: reps[c] for k, c in env.items()})
                        before = len(self.terms)
                        j = self.add(new)
                        progress |= len(self.terms) != before
                        progress |= self.union(self.index[t], j)
            # congruence
            changed = True
            while changed:
                changed = False
                sig: dict[tuple, int] = {}
                for t, i in self.index.items():
                    key = (t[0], t[1], *(self.find(self.index[c]) for c in t[2:]))
                    if key in sig:
                        if self.union(sig[key], i):
                            changed = progress = True
                    else:
                        sig[key] = i
            if not progress:
                return True

    def represented(self, t: tuple, max_size: int) -> set[tuple]:
        """All terms of at most ``max_size`` nodes in the class of ``t``,
        assembling children from the classes of the stored terms' children."""
        groups = self.members()
        memo: dict[tuple[int, int], set[tuple]] = {}

        def terms_of(cls: int, budget: int) -> set[tuple]:
            if budget <= 0:
                return set()
            key = (cls, budget)
            if key in memo:
                return memo[key]
            out: set[tuple] = set()
            for u in groups[cls]:
                partial = [((), 1)]
                for c in u[2:]:
                    ccls = self.find(self.index[c])
                    partial = [
                        (kids + (s,), size + term_size(s))
                        for kids, size in partial
                        for s in terms_of(ccls, budget - size)
                        if size + term_size(s) <= budget
                    ]
                out.update(u[:2] + kids for kids, size in partial if size <= budget)
            memo[key] = out
            return out

        return terms_of(self.find(self.index[t]), max_size)


def function_from_term(t: tuple) -> str:
    """Straight-line ``.ir`` text computing ``t`` from one argument."""
    lines: list[str] = []
    names: dict[tuple, str] = {ARG: "%a"}

    def emit(u: tuple) -> str:
        if u in names:
            return names[u]
        if u[0] == "arith.constant":
            name = f"%v{len(lines)}"
            lines.append(f"  {name} = arith.constant {u[1][0][1]} : i64")
        else:
            lhs, rhs = emit(u[2]), emit(u[3])
            name = f"%v{len(lines)}"
            lines.append(f"  {name} = {u[0]} {lhs}, {rhs} : i64")
        names[u] = name
        return name

    root = emit(t)
    body = "\n".join(lines)
    return f"func.func @seed(%a : i64) -> i64 {{\n{body}\n  func.return {root} : i64\n}}\n".replace("{\n\n", "{\n")


def terms_from_extractable(ts: set[tuple]) -> set[tuple]:
    """Map extraction tuples onto the model's term shape."""

    def conv(t):
        if t[0] == "arg":
            return ARG
        if t[0] == "arith.constant":
            return (t[0], t[1])
        return (t[0], t[1], *(conv(c) for c in t[2:]))

    return {conv(t) for t in ts}


# ---------------------------------------------------------------------------
# random straight-line functions


def random_function(rng: random.Random, name: str = "gen") -> str:
    """A function where every op result is used exactly by later code."""
    types = rng.choice([["i64"], ["i32"], ["i64", "i64"]])
    ty = types[0]
    n_args = rng.randint(1, 3)
    values = [f"%arg{i}" for i in range(n_args)]
    unused: list[str] = []
    lines = []
    for k in range(rng.randint(1, 8)):
        roll = rng.random()
        res = f"%t{k}"
        if roll < 0.2:
            lines.append(f"  {res} = arith.constant {rng.randint(-3, 9)} : {ty}")
        else:
            op = rng.choice(["arith.addi", "arith.muli", "arith.subi", "arith.shli", "arith.xori"])
            pool = unused if unused and rng.random() < 0.7 else values
            lhs = rng.choice(pool)
            rhs = rng.choice(values)
            for v in (lhs, rhs):
                if v in unused:
                    unused.remove(v)
            lines.append(f"  {res} = {op} {lhs}, {rhs} : {ty}")
        values.append(res)
        unused.append(res)
    results = unused or [values[-1]]
    rtypes = ", ".join(ty for _ in results)
    sig = rtypes if len(results) == 1 else f"({rtypes})"
    args = ", ".join(f"%arg{i} : {ty}" for i in range(n_args))
    body = "\n".join(lines)
    return (
        f"func.func @{name}({args}) -> {sig} {{\n{body}\n"
        f"  func.return {', '.join(results)} : {rtypes}\n}}\n"
    )
