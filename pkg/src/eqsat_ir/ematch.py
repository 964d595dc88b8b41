"""E-class aware interpretation of match programs, and rewrite application.

The interpreter differs from a plain pattern-matching VM in two places:

* ``GetDefiningOp`` on a class handle opens a choice point over the class's
  e-nodes.  When control later reaches the instruction's failure successor
  (every path out of the guarded subprogram ends there), the interpreter
  restores the saved registers and resumes with the next e-node.
* ``GetResult`` returns the class handle wrapping a result, not the raw
  result itself.

Applying a match never deletes anything: created ops are hashconsed against
the existing e-graph and replacements become class unions.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

from .eqsat import EGraph, eclass_of, is_eclass_result, make_eclass
from .ir import IRError, Operation, OpResult, Value, structural_key
from .patterns import (
    Action,
    CheckAttribute,
    CheckOpName,
    CheckOperandCount,
    CheckResultCount,
    CheckSameValue,
    CheckType,
    Created,
    CreateOperation,
    Finalize,
    GetDefiningOp,
    GetOperand,
    GetResult,
    IsNotNull,
    MatchProgram,
    RecordMatch,
    Replace,
)


class RewriteError(IRError):
    pass


@dataclass(frozen=True)
class MatchResult:
    rule: int
    root: Operation
    bindings: dict[str, Value]

    @property
    def key(self) -> tuple:
        return (self.rule, self.root.id, tuple((k, id(v)) for k, v in sorted(self.bindings.items())))


@dataclass
class ChoicePoint:
    pc: int
    eclass: Operation
    out: int
    cursor: int
    snapshot: list
    exit: int


@dataclass
class MatchState:
    registers: list
    stack: list[ChoicePoint] = field(default_factory=list)


def _producer(v: Value) -> Operation | None:
    return v.op if isinstance(v, OpResult) else None


def _run(program: MatchProgram, root: Operation, out: list[MatchResult]) -> None:
    state = MatchState([None] * program.num_registers)
    regs = state.registers
    regs[0] = root
    steps = program.steps
    pc = program.entry
    while True:
        while state.stack and pc == state.stack[-1].exit:
            cp = state.stack[-1]
            cp.cursor += 1
            if cp.cursor < len(cp.eclass.operands):
                regs = state.registers = list(cp.snapshot)
                regs[cp.out] = _producer(cp.eclass.operands[cp.cursor])
                pc = steps[cp.pc].succ
            else:
                state.stack.pop()
                regs = state.registers = list(cp.snapshot)
        step = steps[pc]
        ins = step.instr
        ok = True
        if isinstance(ins, Finalize):
            return
        elif isinstance(ins, GetDefiningOp):
            v = regs[ins.value]
            if v is not None and is_eclass_result(v):
                ec = v.op
                snapshot = list(regs)
                state.stack.append(ChoicePoint(pc, ec, ins.out, 0, snapshot, step.fail))
                regs[ins.out] = _producer(ec.operands[0])
            else:
                regs[ins.out] = None if v is None else _producer(v)
        elif isinstance(ins, GetOperand):
            op = regs[ins.op]
            regs[ins.out] = op.operands[ins.index] if ins.index < len(op.operands) else None
        elif isinstance(ins, GetResult):
            op = regs[ins.op]
            if ins.index < len(op.results):
                r = op.results[ins.index]
                ec = eclass_of(r)
                regs[ins.out] = ec.result if ec is not None else r
            else:
                regs[ins.out] = None
        elif isinstance(ins, IsNotNull):
            ok = regs[ins.reg] is not None
        elif isinstance(ins, CheckOpName):
            ok = regs[ins.op].name == ins.name
        elif isinstance(ins, CheckOperandCount):
            ok = len(regs[ins.op].operands) == ins.count
        elif isinstance(ins, CheckResultCount):
            ok = len(regs[ins.op].results) == ins.count
        elif isinstance(ins, CheckAttribute):
            attr = regs[ins.op].attributes.get(ins.name)
            ok = attr is not None and type(attr) is type(ins.value) and attr == ins.value
        elif isinstance(ins, CheckType):
            ok = regs[ins.value].type == ins.type
        elif isinstance(ins, CheckSameValue):
            ok = regs[ins.a] is regs[ins.b]
        elif isinstance(ins, RecordMatch):
            out.append(MatchResult(ins.rule, regs[ins.root], {k: regs[r] for k, r in ins.captures}))
        else:  # pragma: no cover
            raise TypeError(f"unknown instruction {ins!r}")
        pc = step.succ if ok else step.fail


def find_matches(program: MatchProgram, egraph: EGraph) -> list[MatchResult]:
    """Every match of ``program`` rooted at an e-node of ``egraph``.

    Roots are visited in block order; duplicate (rule, root, bindings)
    triples are dropped.  The e-graph is not modified.
    """
    raw: list[MatchResult] = []
    for op in egraph.nodes():
        _run(program, op, raw)
    seen = set()
    matches = []
    for m in raw:
        if m.key not in seen:
            seen.add(m.key)
            matches.append(m)
    return matches


# ---------------------------------------------------------------------------
# application


@dataclass
class ChangeReport:
    created: list[Operation] = field(default_factory=list)
    unions: list[tuple[Operation, Operation]] = field(default_factory=list)

    def extend(self, other: ChangeReport) -> None:
        self.created.extend(other.created)
        self.unions.extend(other.unions)

    @property
    def changed(self) -> bool:
        return bool(self.created or self.unions)


def class_handle(v: Value) -> Value:
    if is_eclass_result(v):
        return v
    ec = eclass_of(v)
    return ec.result if ec is not None else v


class Applier:
    """Applies action lists to one e-graph, keeping a hashcons table.

    The table is built once; create it per batch of matches, since rebuilding
    invalidates the keys.
    """

    def __init__(self, egraph: EGraph) -> None:
        self.egraph = egraph
        self.table: dict[tuple, Operation] = {}
        for op in egraph.nodes():
            if not op.regions:
                self.table.setdefault(structural_key(op), op)

    def apply(self, actions: Sequence[Action]) -> ChangeReport:
        self._check_types(actions)
        report = ChangeReport()
        values: list[Value] = []
        for action in actions:
            if isinstance(action, CreateOperation):
                values.append(self._create(action, values, report))
            else:
                self._replace(action, values, report)
        return report

    def _resolve(self, ref, values: list[Value]) -> Value:
        return values[ref.index] if isinstance(ref, Created) else ref

    def _check_types(self, actions: Sequence[Action]) -> None:
        types = []
        for action in actions:
            if isinstance(action, CreateOperation):
                types.append(action.result_type)
            else:
                ref = action.value
                ty = types[ref.index] if isinstance(ref, Created) else ref.type
                root_ty = action.root.result.type
                if ty != root_ty:
                    raise RewriteError(
                        f"cannot replace {action.root.name} of type {root_ty} with a value of type {ty}"
                    )

    def _create(self, action: CreateOperation, values: list[Value], report: ChangeReport) -> Value:
        operands = tuple(self._resolve(r, values) for r in action.operands)
        attrs = dict(action.attributes)
        key = (action.name, tuple(attrs.items()), operands, (action.result_type,))
        hit = self.table.get(key)
        if hit is not None:
            return class_handle(hit.result)
        op = Operation(action.name, operands, [action.result_type], attrs)
        self.egraph.insert(op)
        self.table[key] = op
        report.created.append(op)
        if not action.wrap:
            return op.result
        ec = self.egraph.insert(make_eclass(op.result))
        return ec.result

    def _replace(self, action: Replace, values: list[Value], report: ChangeReport) -> None:
        root_class = eclass_of(action.root.result)
        if root_class is None:
            raise RewriteError(f"matched root {action.root.name} is not a member of any eclass")
        value = self._resolve(action.value, values)
        if is_eclass_result(value):
            if value is not root_class.result:
                report.unions.append((root_class, value.op))
            return
        other = eclass_of(value)
        if other is not None:
            if other is not root_class:
                report.unions.append((root_class, other))
            return
        root_class.set_operands([*root_class.operands, value])


def apply_match(egraph: EGraph, actions: Sequence[Action], applier: Applier | None = None) -> ChangeReport:
    """Apply one rewrite's actions; pass a shared ``applier`` within a batch."""
    return (applier or Applier(egraph)).apply(actions)
