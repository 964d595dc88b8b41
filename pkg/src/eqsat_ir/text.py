"""Textual IR format: parser, printer and Graphviz export.

The grammar is a small subset of MLIR's generic/pretty syntax::

    func.func @f(%a : i64) -> i64 {
      %two = arith.constant {value = 2} : i64
      %res = arith.muli %a, %two : i64
      func.return %res : i64
    }

The ``: types`` suffix lists result types, or operand types for ops without
results.  ``arith.constant 2`` is accepted as shorthand for
``arith.constant {value = 2}``.  Forward references are allowed only inside
graph regions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .dialects import function_result_types, function_type_token
from .eqsat import EGRAPH, EGraph
from .ir import (
    AttrValue,
    Block,
    BlockArgument,
    Module,
    Operation,
    OpResult,
    Region,
    RegionKind,
    Type,
    Value,
    region_kind_for,
    replace_all_uses,
    verify_module,
)


@dataclass(frozen=True)
class SourceDiagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[SourceDiagnostic]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<value>%[A-Za-z0-9_$.\-]+)
  | (?P<symbol>@[A-Za-z_][A-Za-z0-9_$.]*)
  | (?P<label>\^[A-Za-z0-9_$.]+)
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<int>-?[0-9]+)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_!][A-Za-z0-9_$.]*)
  | (?P<punct>[(){}\[\],:=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                [SourceDiagnostic(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")]
            )
        kind = m.lastgroup
        assert kind is not None
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Forward(Value):
    """Placeholder for a graph-region value used before its definition."""

    def __init__(self, token: Token) -> None:
        super().__init__(Type("<forward>"))
        self.token = token

    @property
    def block(self) -> Block | None:
        return None

    @property
    def valid(self) -> bool:
        return False


class _Frame:
    def __init__(self, kind: RegionKind) -> None:
        self.kind = kind
        self.names: dict[str, Value] = {}
        self.pending: dict[str, _Forward] = {}


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.frames: list[_Frame] = []
        # (op, declared operand types, token) for zero-result ops, checked at the end
        self.operand_type_checks: list[tuple[Operation, list[Type], Token]] = []

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, n: int = 1) -> Token:
        return self.tokens[min(self.pos + n, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError([SourceDiagnostic(tok.line, tok.column, message)])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "arrow", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        tok = self.tok
        self.pos += 1
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found '{found}'")
        tok = self.tok
        self.pos += 1
        return tok

    # -- scoping

    def lookup(self, tok: Token) -> Value:
        name = tok.text
        for frame in reversed(self.frames):
            if name in frame.names:
                return frame.names[name]
        for frame in reversed(self.frames):
            if frame.kind is RegionKind.GRAPH:
                if name not in frame.pending:
                    frame.pending[name] = _Forward(tok)
                return frame.pending[name]
        raise self.error(f"use before definition of {name}", tok)

    def define(self, tok: Token, value: Value) -> None:
        name = tok.text
        for frame in self.frames:
            if name in frame.names:
                raise self.error(f"redefinition of {name}", tok)
        frame = self.frames[-1]
        frame.names[name] = value
        fwd = frame.pending.pop(name, None)
        if fwd is not None:
            replace_all_uses(fwd, value, check_type=False)

    def pop_frame(self) -> None:
        frame = self.frames.pop()
        if not frame.pending:
            return
        outer = next((f for f in reversed(self.frames) if f.kind is RegionKind.GRAPH), None)
        for name, fwd in frame.pending.items():
            if outer is None:
                raise self.error(f"use of undefined value {name}", fwd.token)
            if name in outer.names:
                replace_all_uses(fwd, outer.names[name], check_type=False)
            elif name in outer.pending:
                replace_all_uses(fwd, outer.pending[name], check_type=False)
            else:
                outer.pending[name] = fwd

    # -- grammar

    def parse_module(self) -> Module:
        module = Module()
        self.frames.append(_Frame(RegionKind.SSACFG))
        while self.tok.kind != "eof":
            module.body.append(self.parse_op())
        self.pop_frame()
        for op, declared, tok in self.operand_type_checks:
            actual = [v.type for v in op.operands]
            if actual != declared:
                got = ", ".join(map(str, actual))
                want = ", ".join(map(str, declared))
                raise self.error(f"{op.name} operand types ({got}) do not match declared ({want})", tok)
        return module

    def parse_type(self) -> Type:
        tok = self.expect_kind("ident", "a type")
        try:
            return Type(tok.text)
        except ValueError as exc:
            raise self.error(str(exc), tok) from None

    def parse_type_list(self) -> list[Type]:
        if self.accept("("):
            types = []
            if not self.at(")"):
                types.append(self.parse_type())
                while self.accept(","):
                    types.append(self.parse_type())
            self.expect(")")
            return types
        types = [self.parse_type()]
        while self.accept(","):
            types.append(self.parse_type())
        return types

    def parse_attr_dict(self) -> dict[str, AttrValue]:
        self.expect("{")
        attrs: dict[str, AttrValue] = {}
        while not self.at("}"):
            key = self.expect_kind("ident", "an attribute name")
            if key.text in attrs:
                raise self.error(f"duplicate attribute '{key.text}'", key)
            self.expect("=")
            attrs[key.text] = self.parse_attr_value()
            if not self.accept(","):
                break
        self.expect("}")
        return attrs

    def parse_attr_value(self) -> AttrValue:
        tok = self.tok
        if tok.kind == "int":
            self.pos += 1
            return int(tok.text)
        if tok.kind == "string":
            self.pos += 1
            return json.loads(tok.text)
        if tok.kind == "ident":
            return self.parse_type()
        raise self.error(f"expected an attribute value, found '{tok.text}'")

    def at_attr_dict(self) -> bool:
        if not self.at("{"):
            return False
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.text == "}":
            return True
        return nxt.kind == "ident" and self.peek(2).text == "="

    def parse_op(self) -> Operation:
        start = self.tok
        result_toks: list[Token] = []
        if self.tok.kind == "value":
            result_toks.append(self.expect_kind("value", "a value name"))
            while self.accept(","):
                result_toks.append(self.expect_kind("value", "a value name"))
            self.expect("=")
        name_tok = self.expect_kind("ident", "an operation name")
        if "." not in name_tok.text:
            raise self.error(f"'{name_tok.text}' is not a dialect-qualified op name", name_tok)
        if name_tok.text == "func.func":
            if result_toks:
                raise self.error("func.func produces no results", start)
            return self.parse_func()

        operands: list[Value] = []
        if self.tok.kind == "value":
            operands.append(self.lookup(self.expect_kind("value", "a value")))
            while self.accept(","):
                operands.append(self.lookup(self.expect_kind("value", "a value")))
        attrs: dict[str, AttrValue] = {}
        if self.tok.kind == "int" and not operands:
            attrs["value"] = int(self.tok.text)
            self.pos += 1
        if self.at_attr_dict():
            for k, v in self.parse_attr_dict().items():
                if k in attrs:
                    raise self.error(f"duplicate attribute '{k}'", name_tok)
                attrs[k] = v

        sig_tok = self.tok
        operand_types: list[Type] | None = None
        result_types: list[Type] = []
        if self.accept(":"):
            if self.at("("):
                operand_types = self.parse_type_list()
                self.expect("->")
                result_types = self.parse_type_list()
            elif result_toks:
                result_types = self.parse_type_list()
            else:
                operand_types = self.parse_type_list()
        elif self.accept("->"):
            result_types = self.parse_type_list()
        if len(result_types) != len(result_toks):
            raise self.error(
                f"{name_tok.text}: {len(result_toks)} result names but {len(result_types)} result types",
                sig_tok,
            )
        if operand_types is not None and len(operand_types) != len(operands):
            raise self.error(
                f"{name_tok.text}: {len(operands)} operands but {len(operand_types)} operand types",
                sig_tok,
            )

        regions = []
        kind = region_kind_for(name_tok.text)
        while self.at("{"):
            regions.append(self.parse_region(kind))

        op = Operation(name_tok.text, operands, result_types, attrs, regions)
        if operand_types is not None:
            self.operand_type_checks.append((op, operand_types, sig_tok))
        for tok, r in zip(result_toks, op.results):
            self.define(tok, r)
        return op

    def parse_region(self, kind: RegionKind, arg_specs: list[tuple[Token, Type]] | None = None) -> Region:
        self.expect("{")
        block = Block()
        self.frames.append(_Frame(kind))
        specs = list(arg_specs or [])
        if self.tok.kind == "label":
            if arg_specs:
                raise self.error("function bodies take arguments from the signature")
            self.pos += 1
            if self.accept("("):
                specs = self.parse_arg_list()
            self.expect(":")
        for tok, t in specs:
            self.define(tok, block.add_arg(t))
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated region: expected '}'")
            block.append(self.parse_op())
        self.expect("}")
        self.pop_frame()
        return Region(block, kind)

    def parse_arg_list(self) -> list[tuple[Token, Type]]:
        specs = []
        if not self.at(")"):
            while True:
                tok = self.expect_kind("value", "an argument name")
                self.expect(":")
                specs.append((tok, self.parse_type()))
                if not self.accept(","):
                    break
        self.expect(")")
        return specs

    def parse_func(self) -> Operation:
        sym = self.expect_kind("symbol", "a function name")
        self.expect("(")
        specs = self.parse_arg_list()
        results: list[Type] = []
        if self.accept("->"):
            results = self.parse_type_list()
        attrs: dict[str, AttrValue] = {}
        if self.accept("attributes"):
            attrs = self.parse_attr_dict()
        attrs["sym_name"] = sym.text[1:]
        attrs["function_type"] = function_type_token([t for _, t in specs], results)
        region = self.parse_region(RegionKind.SSACFG, specs)
        return Operation("func.func", (), (), attrs, [region])


def parse_module(text: str, *, verify: bool = True) -> Module:
    """Parse ``text``; raises :class:`ParseError` on syntax or scoping errors.

    With ``verify`` the parsed module must also pass :func:`verify_module`;
    verifier diagnostics are reported at line 1, column 1.
    """
    module = _Parser(text).parse_module()
    if verify:
        diags = verify_module(module)
        if diags:
            raise ParseError([SourceDiagnostic(1, 1, str(d)) for d in diags])
    return module


# ---------------------------------------------------------------------------
# printing


def _format_attr(value: AttrValue) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean attributes are not supported")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    return value.token


def format_attr_dict(attrs) -> str:
    return "{" + ", ".join(f"{k} = {_format_attr(v)}" for k, v in attrs.items()) + "}"


class Printer:
    def __init__(self) -> None:
        self.names: dict[Value, str] = {}
        self.lines: list[str] = []

    def _assign(self, op: Operation, counter: list[int]) -> None:
        for r in op.results:
            self.names[r] = f"%{counter[0]}"
            counter[0] += 1
        for region in op.regions:
            for block in region.blocks:
                for a in block.args:
                    self.names[a] = f"%{counter[0]}"
                    counter[0] += 1
                for inner in block.ops:
                    self._assign(inner, counter)

    def name(self, v: Value) -> str:
        try:
            return self.names[v]
        except KeyError:
            return "%<unknown>"

    def print_top(self, op: Operation) -> str:
        self._assign(op, [0])
        self.lines = []
        self._print_op(op, 0)
        return "\n".join(self.lines)

    def _print_op(self, op: Operation, depth: int) -> None:
        pad = "  " * depth
        if op.name == "func.func" and op.regions:
            self._print_func(op, pad, depth)
            return
        head = pad
        if op.results:
            head += ", ".join(self.name(r) for r in op.results) + " = "
        head += op.name
        if op.operands:
            head += " " + ", ".join(self.name(v) for v in op.operands)
        if op.attributes:
            head += " " + format_attr_dict(op.attributes)
        if op.results:
            head += " : " + ", ".join(str(t) for t in op.result_types)
        elif op.operands:
            head += " : " + ", ".join(str(v.type) for v in op.operands)
        if not op.regions:
            self.lines.append(head)
            return
        for i, region in enumerate(op.regions):
            self.lines.append(head + " {" if i == 0 else pad + "} {")
            block = region.block
            if block.args:
                args = ", ".join(f"{self.name(a)} : {a.type}" for a in block.args)
                self.lines.append(f"{pad}^bb0({args}):")
            for inner in block.ops:
                self._print_op(inner, depth + 1)
        self.lines.append(pad + "}")

    def _print_func(self, op: Operation, pad: str, depth: int) -> None:
        block = op.regions[0].block
        args = ", ".join(f"{self.name(a)} : {a.type}" for a in block.args)
        results = function_result_types(op)
        head = f"{pad}func.func @{op.attributes.get('sym_name', '')}({args})"
        if len(results) == 1:
            head += f" -> {results[0]}"
        elif results:
            head += " -> (" + ", ".join(map(str, results)) + ")"
        extra = {k: v for k, v in op.attributes.items() if k not in ("sym_name", "function_type")}
        if extra:
            head += " attributes " + format_attr_dict(extra)
        self.lines.append(head + " {")
        for inner in block.ops:
            self._print_op(inner, depth + 1)
        self.lines.append(pad + "}")


def print_op(op: Operation) -> str:
    return Printer().print_top(op)


def print_module(module: Module) -> str:
    """Render ``module``; value names are renumbered per top-level op."""
    chunks = [Printer().print_top(op) for op in module.ops]
    if not chunks:
        return ""
    return "\n\n".join(chunks) + "\n"


# ---------------------------------------------------------------------------
# graphviz


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _enode_label(v: Value, printer: Printer) -> str:
    if isinstance(v, OpResult):
        op = v.op
        label = op.name
        value = op.attributes.get("value")
        if value is not None:
            label += f" {_format_attr(value)}"
        if len(op.results) > 1:
            label += f" #{v.index}"
        return label
    if isinstance(v, BlockArgument):
        return f"arg{v.index}"
    return printer.name(v)


def emit_dot(egraph_op: Operation) -> str:
    """Graphviz digraph with one dotted cluster per eclass and one node per e-node."""
    if egraph_op.name != EGRAPH:
        raise ValueError(f"emit_dot expects {EGRAPH}, got {egraph_op.name}")
    eg = EGraph(egraph_op)
    printer = Printer()
    printer._assign(egraph_op, [0])
    classes = eg.eclasses()
    node_id: dict[Value, str] = {}
    cluster_of: dict[Value, int] = {}
    lines = ["digraph egraph {", "  compound=true;", "  node [shape=box];"]
    for ci, ec in enumerate(classes):
        cluster_of[ec.result] = ci
        lines.append(f"  subgraph cluster_{ci} {{")
        lines.append("    style=dotted;")
        lines.append(f'    label="{_dot_escape(printer.name(ec.result))}";')
        for v in ec.operands:
            nid = node_id.setdefault(v, f"n{len(node_id)}")
            lines.append(f'    {nid} [label="{_dot_escape(_enode_label(v, printer))}"];')
        lines.append("  }")
    first_node = {ci: node_id[ec.operands[0]] for ci, ec in enumerate(classes) if ec.operands}
    for v, nid in node_id.items():
        if not isinstance(v, OpResult) or v.op.parent is not eg.block:
            continue
        for operand in v.op.operands:
            if operand in cluster_of and cluster_of[operand] in first_node:
                ci = cluster_of[operand]
                lines.append(f"  {nid} -> {first_node[ci]} [lhead=cluster_{ci}];")
            elif operand in node_id:
                lines.append(f"  {nid} -> {node_id[operand]};")
    lines.append("}")
    return "\n".join(lines) + "\n"

