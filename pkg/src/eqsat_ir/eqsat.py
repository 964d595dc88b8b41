"""The ``eqsat`` dialect: e-graphs embedded directly in SSA IR.

* ``eqsat.eclass`` groups equivalent values (its operands are the e-nodes)
  and produces one class handle.
* ``eqsat.egraph`` owns a graph region, so use-def cycles are legal inside.
* ``eqsat.yield`` terminates that region and exports class handles.
"""

from __future__ import annotations

from collections.abc import Iterator

from .ir import (
    Block,
    IRError,
    OpInfo,
    Operation,
    OpResult,
    Region,
    RegionKind,
    Value,
    op_info,
    register_op,
)

ECLASS = "eqsat.eclass"
EGRAPH = "eqsat.egraph"
YIELD = "eqsat.yield"


class ConversionError(IRError):
    pass


def is_eclass(op: Operation | None) -> bool:
    return op is not None and op.name == ECLASS


def is_eclass_result(value: Value) -> bool:
    return isinstance(value, OpResult) and value.op.name == ECLASS


def eclass_of(value: Value) -> Operation | None:
    """The eclass op that lists ``value`` as an e-node, if any."""
    for use in value.uses:
        if use.op.name == ECLASS:
            return use.op
    return None


def eclass_users(value: Value) -> list[Operation]:
    return [op for op in value.users if op.name == ECLASS]


def enclosing_egraph(op: Operation) -> Operation | None:
    for anc in op.ancestors():
        if anc.name == EGRAPH:
            return anc
    return None


class EGraph:
    """Convenience view over an ``eqsat.egraph`` operation."""

    def __init__(self, op: Operation) -> None:
        if op.name != EGRAPH:
            raise IRError(f"expected {EGRAPH}, got {op.name}")
        self.op = op

    @property
    def block(self) -> Block:
        return self.op.regions[0].block

    @property
    def yield_op(self) -> Operation:
        term = self.block.terminator
        if term is None or term.name != YIELD:
            raise IRError("egraph is not terminated by eqsat.yield")
        return term

    def eclasses(self) -> list[Operation]:
        return [op for op in self.block.ops if op.name == ECLASS]

    def nodes(self) -> list[Operation]:
        """Non-eclass, non-terminator ops directly in the egraph block."""
        return [op for op in self.block.ops if op.name not in (ECLASS, YIELD)]

    def enodes(self) -> list[Value]:
        return [v for ec in self.eclasses() for v in ec.operands]

    @property
    def num_enodes(self) -> int:
        return sum(len(ec.operands) for ec in self.eclasses())

    @property
    def num_eclasses(self) -> int:
        return len(self.eclasses())

    def contains(self, value: Value) -> bool:
        """True when ``value`` is defined by an op directly inside this egraph."""
        return isinstance(value, OpResult) and value.op.parent is self.block

    def insert(self, op: Operation) -> Operation:
        return self.block.insert_before(self.yield_op, op)

    def walk(self) -> Iterator[Operation]:
        return self.op.walk()


def egraphs_in(root) -> list[EGraph]:
    """All egraph ops below ``root`` (a Module or Operation), in walk order."""
    return [EGraph(op) for op in root.walk() if op.name == EGRAPH]


def make_eclass(*values: Value) -> Operation:
    if not values:
        raise IRError("an eclass needs at least one e-node")
    return Operation(ECLASS, values, [values[0].type])


# ---------------------------------------------------------------------------
# verifiers


def _verify_eclass(op: Operation) -> list[str]:
    msgs = []
    if not op.operands:
        msgs.append("eqsat.eclass takes one or more operands")
    if len(op.results) != 1:
        msgs.append("eqsat.eclass produces exactly one result")
    types = {v.type for v in op.operands} | {r.type for r in op.results}
    if len(types) > 1:
        msgs.append("e-nodes and class handle must share one type")
    for i, v in enumerate(op.operands):
        if is_eclass_result(v):
            msgs.append(f"operand #{i} is itself an eclass result")
        n = len(eclass_users(v))
        if n != 1:
            msgs.append(f"operand #{i} belongs to {n} eclass operations, expected 1")
        if op.operands.index(v) != i:
            msgs.append(f"operand #{i} duplicates an earlier e-node")
    if enclosing_egraph(op) is None:
        msgs.append("eqsat.eclass must be contained within an eqsat.egraph")
    return msgs


def _verify_egraph(op: Operation) -> list[str]:
    if len(op.regions) != 1:
        return ["eqsat.egraph needs exactly one region"]
    term = op.regions[0].block.terminator
    if term is None or term.name != YIELD:
        return []  # reported by the generic terminator check
    msgs = []
    if tuple(v.type for v in term.operands) != op.result_types:
        msgs.append("eqsat.yield operands do not match the egraph result types")
    for i, v in enumerate(term.operands):
        if not is_eclass_result(v):
            msgs.append(f"yield operand #{i} is not an eclass result")
    return msgs


def _verify_yield(op: Operation) -> list[str]:
    parent = op.parent_op
    if parent is None or parent.name != EGRAPH:
        return ["eqsat.yield must terminate an eqsat.egraph region"]
    return []


def verify_eqsat(op: Operation) -> list[str]:
    """Dialect-level checks for a single ``eqsat.*`` operation."""
    if not op.name.startswith("eqsat."):
        raise ValueError(f"{op.name} is not an eqsat operation")
    info = op_info(op.name)
    if info is None or info.verifier is None:
        return [f"unknown eqsat operation {op.name}"]
    return info.verifier(op)


register_op(ECLASS, OpInfo(None, 1, verifier=_verify_eclass))
register_op(
    EGRAPH,
    OpInfo(0, None, region_kind=RegionKind.GRAPH, terminator=YIELD, verifier=_verify_egraph),
)
register_op(YIELD, OpInfo(None, 0, is_terminator=True, verifier=_verify_yield))


# ---------------------------------------------------------------------------
# conversion


def convert_to_egraph(body: Block) -> Block:
    """Wrap the straight-line ``body`` into a trivial e-graph.

    Every non-terminator op moves into a new ``eqsat.egraph`` and every value
    gets exactly one single-element eclass.  Returns the egraph's block.
    """
    term = body.terminator
    if term is None:
        raise ConversionError("block has no terminator")
    info = op_info(term.name)
    if info is None or not info.is_terminator:
        raise ConversionError(f"block must end in a terminator, found {term.name}")
    moving = body.ops[:-1]
    for op in moving:
        if op.name == EGRAPH:
            raise ConversionError("block already contains an eqsat.egraph")
        if op.regions:
            raise ConversionError(f"unsupported op {op.name}: region-carrying ops cannot be converted")

    produced = {r for op in moving for r in op.results}
    graph_block = Block()
    classes: dict[Value, Operation] = {}

    # values flowing in from outside (usually block arguments) come first
    external: list[Value] = [a for a in body.args if a.has_uses()]
    for op in moving + [term]:
        for v in op.operands:
            if v not in produced and v not in external:
                external.append(v)
    for v in external:
        classes[v] = graph_block.append(make_eclass(v))

    for op in moving:
        body.detach(op)
        graph_block.append(op)
        for r in op.results:
            classes[r] = graph_block.append(make_eclass(r))
    for op in moving:
        op.set_operands(classes[v].result for v in op.operands)

    exported = list(dict.fromkeys(term.operands))
    graph_block.append(Operation(YIELD, [classes[v].result for v in exported]))
    egraph = Operation(
        EGRAPH, (), [v.type for v in exported], regions=[Region(graph_block, RegionKind.GRAPH)]
    )
    body.insert_before(term, egraph)
    slot = {v: i for i, v in enumerate(exported)}
    term.set_operands(egraph.results[slot[v]] for v in term.operands)
    return graph_block


def convert_module(module) -> list[EGraph]:
    """Run :func:`convert_to_egraph` over the body of every ``func.func``."""
    out = []
    for op in module.ops:
        if op.name == "func.func":
            block = convert_to_egraph(op.regions[0].block)
            out.append(EGraph(block.parent_op))
    return out
