"""Declarative rewrite rules and their lowering to a branching match program.

Rule files hold one rule per clause::

    rule "add-zero": (arith.addi ?a (arith.constant {value = 0})) => ?a
    rule "comm": (arith.addi ?a ?b) <=> (arith.addi ?b ?a)

All rules of a set are lowered together.  Each rule becomes a sequence of
primitive checks keyed by pattern position; sequences are merged into a
prefix trie, so shared checks run once, and the trie is flattened into
numbered instructions with explicit success and failure successors.
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Union

from .ir import AttrValue, Operation, Type, Value, op_info
from .text import ParseError, SourceDiagnostic


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Node:
    op: str
    children: tuple[Pattern, ...] = ()
    attrs: tuple[tuple[str, AttrValue], ...] = ()
    type: Type | None = None

    def __str__(self) -> str:
        parts = [self.op, *map(str, self.children)]
        if self.attrs:
            parts.append("{" + ", ".join(f"{k} = {_lit(v)}" for k, v in self.attrs) + "}")
        if self.type is not None:
            parts.append(f": {self.type}")
        return "(" + " ".join(parts) + ")"


Pattern = Union[Var, Node]


def _lit(v: AttrValue) -> str:
    return json.dumps(v) if isinstance(v, str) else str(v)


def pattern_vars(p: Pattern) -> list[str]:
    """Variable names in first-occurrence order."""
    if isinstance(p, Var):
        return [p.name]
    out: list[str] = []
    for c in p.children:
        for v in pattern_vars(c):
            if v not in out:
                out.append(v)
    return out


def pattern_depth(p: Pattern) -> int:
    if isinstance(p, Var):
        return 0
    return 1 + max((pattern_depth(c) for c in p.children), default=0)


@dataclass(frozen=True)
class RewriteRule:
    name: str
    lhs: Node
    rhs: Pattern
    bidirectional: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.lhs, Node):
            raise ValueError(f"rule {self.name!r}: left-hand side must be an operation pattern")
        missing = set(pattern_vars(self.rhs)) - set(pattern_vars(self.lhs))
        if missing:
            raise ValueError(f"rule {self.name!r}: unbound variable {', '.join(sorted(missing))}")

    def directed(self) -> list[RewriteRule]:
        """Expand a bidirectional rule into its two one-way halves."""
        if not self.bidirectional:
            return [self]
        if not isinstance(self.rhs, Node):
            raise ValueError(f"rule {self.name!r}: '<=>' needs an operation on both sides")
        return [
            RewriteRule(self.name, self.lhs, self.rhs),
            RewriteRule(f"{self.name}-rev", self.rhs, self.lhs),
        ]

    def __str__(self) -> str:
        arrow = "<=>" if self.bidirectional else "=>"
        return f'rule "{self.name}": {self.lhs} {arrow} {self.rhs}'


# ---------------------------------------------------------------------------
# rule file parsing

_RULE_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>(?://|\#)[^\n]*)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<int>-?[0-9]+)
  | (?P<arrow><=>|=>)
  | (?P<ident>[A-Za-z_!][A-Za-z0-9_$.]*)
  | (?P<punct>[(){}:=,])
    """,
    re.VERBOSE,
)


class _RuleParser:
    def __init__(self, text: str) -> None:
        self.toks: list[tuple[str, str, int, int]] = []
        pos, line, line_start = 0, 1, 0
        while pos < len(text):
            m = _RULE_TOKEN.match(text, pos)
            if m is None:
                raise ParseError(
                    [SourceDiagnostic(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")]
                )
            if m.lastgroup not in ("ws", "comment"):
                self.toks.append((m.lastgroup, m.group(), line, pos - line_start + 1))
            nl = m.group().count("\n")
            if nl:
                line += nl
                line_start = m.start() + m.group().rfind("\n") + 1
            pos = m.end()
        self.toks.append(("eof", "", line, pos - line_start + 1))
        self.i = 0

    def error(self, msg: str, at: int | None = None) -> ParseError:
        _, _, line, col = self.toks[self.i if at is None else at]
        return ParseError([SourceDiagnostic(line, col, msg)])

    @property
    def kind(self) -> str:
        return self.toks[self.i][0]

    @property
    def text(self) -> str:
        return self.toks[self.i][1]

    def expect(self, text: str) -> None:
        if self.text != text or self.kind == "string":
            raise self.error(f"expected '{text}', found '{self.text or 'end of input'}'")
        self.i += 1

    def parse(self) -> list[RewriteRule]:
        rules = []
        while self.kind != "eof":
            rules.append(self.parse_rule())
        return rules

    def parse_rule(self) -> RewriteRule:
        start = self.i
        self.expect("rule")
        if self.kind != "string":
            raise self.error("expected a quoted rule name")
        name = json.loads(self.text)
        self.i += 1
        self.expect(":")
        lhs = self.parse_pattern()
        if self.kind != "arrow":
            raise self.error(f"expected '=>' or '<=>', found '{self.text or 'end of input'}'")
        bidirectional = self.text == "<=>"
        self.i += 1
        rhs = self.parse_pattern()
        if not isinstance(lhs, Node):
            raise self.error(f"rule {name!r}: left-hand side must be an operation pattern", start)
        for side in (lhs, rhs) if bidirectional else (lhs,):
            other = rhs if side is lhs else lhs
            missing = [v for v in pattern_vars(other) if v not in pattern_vars(side)]
            if missing:
                raise self.error(f"rule {name!r}: unbound variable {', '.join(missing)}", start)
        if bidirectional and not isinstance(rhs, Node):
            raise self.error(f"rule {name!r}: '<=>' needs an operation on both sides", start)
        return RewriteRule(name, lhs, rhs, bidirectional)

    def parse_pattern(self) -> Pattern:
        if self.kind == "var":
            name = self.text[1:]
            self.i += 1
            return Var(name)
        at = self.i
        self.expect("(")
        if self.kind != "ident" or "." not in self.text:
            raise self.error("expected a dialect-qualified operation name")
        op = self.text
        self.i += 1
        children = []
        while self.kind == "var" or self.text == "(":
            children.append(self.parse_pattern())
        attrs: list[tuple[str, AttrValue]] = []
        if self.text == "{":
            self.i += 1
            while self.text != "}":
                if self.kind != "ident":
                    raise self.error("expected an attribute name")
                key = self.text
                self.i += 1
                self.expect("=")
                if self.kind == "int":
                    attrs.append((key, int(self.text)))
                elif self.kind == "string":
                    attrs.append((key, json.loads(self.text)))
                else:
                    raise self.error("attribute constraints must be integer or string literals")
                self.i += 1
                if self.text != ",":
                    break
                self.i += 1
            self.expect("}")
        ty = None
        if self.text == ":":
            self.i += 1
            if self.kind != "ident":
                raise self.error("expected a type")
            ty = Type(self.text)
            self.i += 1
        self.expect(")")
        info = op_info(op)
        if info is not None and info.num_operands is not None and info.num_operands != len(children):
            raise self.error(
                f"arity mismatch: {op} takes {info.num_operands} operands, pattern has {len(children)}", at
            )
        return Node(op, tuple(children), tuple(attrs), ty)


def parse_rules(text: str) -> list[RewriteRule]:
    """Parse a rule file.  Raises :class:`ParseError` with source positions."""
    return _RuleParser(text).parse()


# ---------------------------------------------------------------------------
# match program

# Registers are integers; register 0 always holds the candidate root op.


@dataclass(frozen=True)
class GetDefiningOp:
    value: int
    out: int


@dataclass(frozen=True)
class GetOperand:
    op: int
    index: int
    out: int


@dataclass(frozen=True)
class GetResult:
    op: int
    index: int
    out: int


@dataclass(frozen=True)
class CheckOpName:
    op: int
    name: str


@dataclass(frozen=True)
class CheckOperandCount:
    op: int
    count: int


@dataclass(frozen=True)
class CheckResultCount:
    op: int
    count: int


@dataclass(frozen=True)
class CheckAttribute:
    op: int
    name: str
    value: AttrValue


@dataclass(frozen=True)
class CheckType:
    value: int
    type: Type


@dataclass(frozen=True)
class CheckSameValue:
    a: int
    b: int


@dataclass(frozen=True)
class IsNotNull:
    reg: int


@dataclass(frozen=True)
class RecordMatch:
    rule: int
    captures: tuple[tuple[str, int], ...]
    root: int = 0


@dataclass(frozen=True)
class Finalize:
    pass


Instruction = Union[
    GetDefiningOp,
    GetOperand,
    GetResult,
    CheckOpName,
    CheckOperandCount,
    CheckResultCount,
    CheckAttribute,
    CheckType,
    CheckSameValue,
    IsNotNull,
    RecordMatch,
    Finalize,
]


@dataclass(frozen=True)
class Step:
    """One program instruction.  ``fail`` is where control goes on a failed
    check, or once every alternative below a ``GetDefiningOp`` is exhausted."""

    instr: Instruction
    succ: int | None
    fail: int | None


@dataclass(frozen=True)
class MatchProgram:
    steps: tuple[Step, ...]
    rules: tuple[RewriteRule, ...]
    num_registers: int
    entry: int = 0

    def count(self, kind: type) -> int:
        return sum(isinstance(s.instr, kind) for s in self.steps)

    def dump(self) -> str:
        lines = []
        for i, s in enumerate(self.steps):
            lines.append(f"{i:3d}: {s.instr} -> {s.succ}, {s.fail}")
        return "\n".join(lines)


class _Registers:
    def __init__(self) -> None:
        self.slots: dict[tuple, int] = {("op", ()): 0}

    def get(self, kind: str, path: tuple[int, ...]) -> int:
        return self.slots.setdefault((kind, path), len(self.slots))


def _compile_rule(rule_id: int, rule: RewriteRule, regs: _Registers) -> list[Instruction]:
    seq: list[Instruction] = []
    bound: dict[str, int] = {}

    def node(p: Node, path: tuple[int, ...]) -> None:
        r = regs.get("op", path)
        seq.append(CheckOpName(r, p.op))
        seq.append(CheckOperandCount(r, len(p.children)))
        if not path:
            seq.append(CheckResultCount(r, 1))
            if p.type is not None:
                res = regs.get("res", path)
                seq.append(GetResult(r, 0, res))
                seq.append(IsNotNull(res))
                seq.append(CheckType(res, p.type))
        for key, value in p.attrs:
            seq.append(CheckAttribute(r, key, value))
        for i, child in enumerate(p.children):
            cpath = path + (i,)
            v = regs.get("val", cpath)
            seq.append(GetOperand(r, i, v))
            if isinstance(child, Var):
                if child.name in bound:
                    seq.append(CheckSameValue(bound[child.name], v))
                else:
                    bound[child.name] = v
                continue
            if child.type is not None:
                seq.append(CheckType(v, child.type))
            op_reg = regs.get("op", cpath)
            seq.append(GetDefiningOp(v, op_reg))
            seq.append(IsNotNull(op_reg))
            node(child, cpath)

    node(rule.lhs, ())
    seq.append(RecordMatch(rule_id, tuple(bound.items())))
    return seq


@dataclass(eq=False)
class _Trie:
    instr: Instruction | None
    children: dict = field(default_factory=dict)


def lower_rules(rules: Iterable[RewriteRule], *, share_prefixes: bool = True) -> MatchProgram:
    """Lower ``rules`` into one program.

    With ``share_prefixes=False`` every rule keeps its own chain of checks;
    that naive form exists for comparison and testing.
    """
    directed = tuple(d for r in rules for d in r.directed())
    regs = _Registers()
    seqs = [_compile_rule(i, r, regs) for i, r in enumerate(directed)]

    root = _Trie(None)
    for seq in seqs:
        cur = root
        if not share_prefixes:
            cur = root.children.setdefault(("rule", len(root.children)), _Trie(None))
        for ins in seq:
            cur = cur.children.setdefault(ins, _Trie(ins))

    order: list[_Trie] = []

    def collect(t: _Trie) -> None:
        if t.instr is not None:
            order.append(t)
        for c in t.children.values():
            collect(c)

    collect(root)
    index = {id(t): i for i, t in enumerate(order)}
    finalize = len(order)
    succ: dict[int, int | None] = {}
    fail: dict[int, int | None] = {}

    def first(t: _Trie) -> int:
        # wrapper nodes (naive mode) carry no instruction
        while t.instr is None:
            if not t.children:
                raise AssertionError("empty rule chain")
            t = next(iter(t.children.values()))
        return index[id(t)]

    def link(t: _Trie, cont: int) -> None:
        kids = list(t.children.values())
        if t.instr is not None:
            i = index[id(t)]
            fail[i] = cont
            succ[i] = first(kids[0]) if kids else cont
        for j, k in enumerate(kids):
            link(k, first(kids[j + 1]) if j + 1 < len(kids) else cont)

    link(root, finalize)
    steps = [Step(t.instr, succ[i], fail[i]) for i, t in enumerate(order)]  # type: ignore[arg-type]
    steps.append(Step(Finalize(), None, None))
    entry = first(root) if order else finalize
    return MatchProgram(tuple(steps), directed, len(regs.slots), entry)


# ---------------------------------------------------------------------------
# rewrite actions


@dataclass(frozen=True)
class Created:
    """Reference to the result of an earlier CreateOperation in the same list."""

    index: int


Ref = Union[Value, Created]


@dataclass(frozen=True)
class CreateOperation:
    name: str
    operands: tuple[Ref, ...]
    attributes: tuple[tuple[str, AttrValue], ...]
    result_type: Type
    # the replacement root is appended to the matched class directly
    wrap: bool = True


@dataclass(frozen=True)
class Replace:
    root: Operation
    value: Ref


Action = Union[CreateOperation, Replace]


def rhs_actions(rule: RewriteRule, bindings: Mapping[str, Value], root: Operation) -> list[Action]:
    """Build list for the right-hand side, children before parents."""
    missing = [v for v in pattern_vars(rule.lhs) if v not in bindings]
    if missing:
        raise ValueError(f"bindings do not cover {', '.join(missing)}")
    root_type = root.result.type
    actions: list[Action] = []

    def type_of(ref: Ref) -> Type:
        if isinstance(ref, Created):
            return actions[ref.index].result_type  # type: ignore[union-attr]
        return ref.type

    def build(p: Pattern, is_root: bool) -> Ref:
        if isinstance(p, Var):
            return bindings[p.name]
        operands = tuple(build(c, False) for c in p.children)
        if p.type is not None:
            ty = p.type
        elif is_root or not operands:
            ty = root_type
        else:
            ty = type_of(operands[0])
        actions.append(CreateOperation(p.op, operands, p.attrs, ty, wrap=not is_root))
        return Created(len(actions) - 1)

    value = build(rule.rhs, True)
    actions.append(Replace(root, value))
    return actions
