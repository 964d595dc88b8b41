"""Generic SSA IR with nested single-block regions.

Values are produced either by operations (``OpResult``) or by blocks
(``BlockArgument``).  Every value keeps an exact, incrementally maintained
list of its uses, so rewrites such as :func:`replace_all_uses` are cheap and
the verifier can cross-check the bookkeeping.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Union

_INT_TYPE = re.compile(r"i[0-9]+")
_ATTR_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_$.]*")
_OP_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*(\.[A-Za-z_][A-Za-z0-9_$]*)+")

_op_ids = itertools.count()


class IRError(Exception):
    """Raised when an IR mutation violates a structural contract."""


@dataclass(frozen=True)
class Type:
    """A textual type token such as ``i64``, ``f32`` or ``index``."""

    token: str

    def __post_init__(self) -> None:
        if not self.token.strip() or "\n" in self.token:
            raise ValueError(f"invalid type token {self.token!r}")
        if _INT_TYPE.fullmatch(self.token) and int(self.token[1:]) <= 0:
            raise ValueError(f"integer type width must be positive: {self.token!r}")

    @property
    def is_integer(self) -> bool:
        return _INT_TYPE.fullmatch(self.token) is not None

    def __str__(self) -> str:
        return self.token


AttrValue = Union[int, str, Type]


def as_type(t: Type | str) -> Type:
    return t if isinstance(t, Type) else Type(t)


@dataclass(frozen=True)
class Use:
    op: Operation
    index: int


class Value:
    """An SSA value.  Never instantiate directly; see the two subclasses."""

    def __init__(self, type: Type) -> None:
        self.type = type
        self._uses: dict[Use, None] = {}

    @property
    def uses(self) -> list[Use]:
        return list(self._uses)

    @property
    def users(self) -> list[Operation]:
        return list(dict.fromkeys(u.op for u in self._uses))

    def has_uses(self) -> bool:
        return bool(self._uses)

    @property
    def block(self) -> Block | None:
        raise NotImplementedError

    @property
    def valid(self) -> bool:
        return True


class OpResult(Value):
    def __init__(self, type: Type, op: Operation, index: int) -> None:
        super().__init__(type)
        self.op = op
        self.index = index

    @property
    def block(self) -> Block | None:
        return self.op.parent

    @property
    def valid(self) -> bool:
        return not self.op.erased

    def __repr__(self) -> str:
        return f"<OpResult {self.op.name}#{self.op.id}[{self.index}] : {self.type}>"


class BlockArgument(Value):
    def __init__(self, type: Type, block: Block, index: int) -> None:
        super().__init__(type)
        self._block = block
        self.index = index

    @property
    def block(self) -> Block | None:
        return self._block

    def __repr__(self) -> str:
        return f"<BlockArgument {self.index} : {self.type}>"


class RegionKind(str, Enum):
    SSACFG = "ssacfg"
    GRAPH = "graph"


class Operation:
    """One IR operation.  Identity (and hashing) is by object."""

    def __init__(
        self,
        name: str,
        operands: Iterable[Value] = (),
        result_types: Iterable[Type | str] = (),
        attributes: Mapping[str, AttrValue] | None = None,
        regions: Iterable[Region] = (),
    ) -> None:
        self.id = next(_op_ids)
        self.name = name
        self.attributes: dict[str, AttrValue] = dict(attributes or {})
        self.results = [OpResult(as_type(t), self, i) for i, t in enumerate(result_types)]
        self.regions: list[Region] = []
        self.parent: Block | None = None
        self.erased = False
        self._operands: list[Value] = []
        for region in regions:
            self.add_region(region)
        self.set_operands(operands)

    def __repr__(self) -> str:
        return f"<Operation {self.name}#{self.id}>"

    @property
    def dialect(self) -> str:
        return self.name.split(".", 1)[0]

    @property
    def operands(self) -> tuple[Value, ...]:
        return tuple(self._operands)

    @property
    def result(self) -> OpResult:
        if len(self.results) != 1:
            raise IRError(f"{self.name} has {len(self.results)} results, expected 1")
        return self.results[0]

    @property
    def result_types(self) -> tuple[Type, ...]:
        return tuple(r.type for r in self.results)

    def set_operand(self, index: int, value: Value) -> None:
        old = self._operands[index]
        del old._uses[Use(self, index)]
        self._operands[index] = value
        value._uses[Use(self, index)] = None

    def set_operands(self, values: Iterable[Value]) -> None:
        self.drop_operands()
        self._operands = list(values)
        for i, v in enumerate(self._operands):
            v._uses[Use(self, i)] = None

    def drop_operands(self) -> None:
        for i, v in enumerate(self._operands):
            v._uses.pop(Use(self, i), None)
        self._operands = []

    def add_region(self, region: Region) -> Region:
        if region.parent is not None:
            raise IRError("region already attached to an operation")
        region.parent = self
        self.regions.append(region)
        return region

    @property
    def parent_op(self) -> Operation | None:
        if self.parent is None or self.parent.parent is None:
            return None
        return self.parent.parent.parent

    def ancestors(self) -> Iterator[Operation]:
        op = self.parent_op
        while op is not None:
            yield op
            op = op.parent_op

    def is_proper_ancestor_of(self, other: Operation) -> bool:
        return any(a is self for a in other.ancestors())

    def walk(self) -> Iterator[Operation]:
        """Pre-order traversal of this operation and everything nested in it."""
        yield self
        for region in self.regions:
            for block in region.blocks:
                for op in list(block.ops):
                    yield from op.walk()

    def clone(self, value_map: dict[Value, Value] | None = None) -> Operation:
        """Deep copy; operands found in ``value_map`` are remapped."""
        value_map = {} if value_map is None else value_map
        new = Operation(self.name, (), self.result_types, self.attributes)
        for old_r, new_r in zip(self.results, new.results):
            value_map[old_r] = new_r
        for region in self.regions:
            new.add_region(region.clone(value_map))
        new.set_operands(value_map.get(v, v) for v in self._operands)
        return new


class Block:
    def __init__(self, arg_types: Iterable[Type | str] = ()) -> None:
        self.args: list[BlockArgument] = []
        self.ops: list[Operation] = []
        self.parent: Region | None = None
        for t in arg_types:
            self.add_arg(t)

    def add_arg(self, type: Type | str) -> BlockArgument:
        arg = BlockArgument(as_type(type), self, len(self.args))
        self.args.append(arg)
        return arg

    @property
    def parent_op(self) -> Operation | None:
        return None if self.parent is None else self.parent.parent

    @property
    def terminator(self) -> Operation | None:
        return self.ops[-1] if self.ops else None

    def _attach(self, op: Operation) -> None:
        if op.parent is not None:
            raise IRError(f"{op!r} is already inside a block")
        if op.erased:
            raise IRError(f"{op!r} has been erased")
        op.parent = self

    def append(self, op: Operation) -> Operation:
        self._attach(op)
        self.ops.append(op)
        return op

    def insert(self, index: int, op: Operation) -> Operation:
        self._attach(op)
        self.ops.insert(index, op)
        return op

    def insert_before(self, anchor: Operation, op: Operation) -> Operation:
        return self.insert(self.index(anchor), op)

    def index(self, op: Operation) -> int:
        for i, other in enumerate(self.ops):
            if other is op:
                return i
        raise IRError(f"{op!r} is not in this block")

    def detach(self, op: Operation) -> Operation:
        del self.ops[self.index(op)]
        op.parent = None
        return op


class Region:
    """A region holding exactly one block."""

    def __init__(self, block: Block | None = None, kind: RegionKind = RegionKind.SSACFG) -> None:
        self.kind = RegionKind(kind)
        self.parent: Operation | None = None
        self.blocks: list[Block] = []
        self.add_block(block if block is not None else Block())

    def add_block(self, block: Block) -> Block:
        if block.parent is not None:
            raise IRError("block already attached to a region")
        block.parent = self
        self.blocks.append(block)
        return block

    @property
    def block(self) -> Block:
        return self.blocks[0]

    def clone(self, value_map: dict[Value, Value]) -> Region:
        old = self.block
        new_block = Block()
        for arg in old.args:
            value_map[arg] = new_block.add_arg(arg.type)
        # graph regions may reference later results; pre-map them via placeholders
        clones = [op.clone(value_map) for op in old.ops]
        for op in clones:
            new_block.append(op)
            op.set_operands(value_map.get(v, v) for v in op.operands)
        return Region(new_block, self.kind)


class Module:
    """Top-level container: a single ssacfg block of operations (functions)."""

    def __init__(self, ops: Iterable[Operation] = ()) -> None:
        self.body = Block()
        self.region = Region(self.body)
        for op in ops:
            self.body.append(op)

    @property
    def ops(self) -> list[Operation]:
        return self.body.ops

    def walk(self) -> Iterator[Operation]:
        for op in list(self.body.ops):
            yield from op.walk()


# ---------------------------------------------------------------------------
# op registry


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}" if self.path else self.message


Verifier = Callable[[Operation], list[str]]


@dataclass(frozen=True)
class OpInfo:
    """Static facts about a registered operation.

    ``num_operands``/``num_results`` of ``None`` mean variadic.  ``terminator``
    names the op every region of this op must end with.
    """

    num_operands: int | None = None
    num_results: int | None = None
    region_kind: RegionKind = RegionKind.SSACFG
    terminator: str | None = None
    is_terminator: bool = False
    verifier: Verifier | None = None


_REGISTRY: dict[str, OpInfo] = {}


def register_op(name: str, info: OpInfo) -> None:
    _REGISTRY[name] = info


def op_info(name: str) -> OpInfo | None:
    return _REGISTRY.get(name)


def region_kind_for(op_name: str) -> RegionKind:
    info = _REGISTRY.get(op_name)
    return info.region_kind if info else RegionKind.SSACFG


# ---------------------------------------------------------------------------
# mutation primitives


def build_op(
    name: str,
    operands: Sequence[Value] = (),
    result_types: Sequence[Type | str] = (),
    attributes: Mapping[str, AttrValue] | None = None,
    regions: Sequence[Region] = (),
) -> Operation:
    """Create a detached operation.  Validation is left to :func:`verify_module`."""
    return Operation(name, operands, result_types, attributes, regions)


def replace_all_uses(old: Value, new: Value, *, check_type: bool = True) -> int:
    """Point every use of ``old`` at ``new``; returns the number of rewritten uses."""
    if old is new:
        raise IRError("cannot replace a value with itself")
    if check_type and old.type != new.type:
        raise IRError(f"type mismatch: replacing {old.type} with {new.type}")
    uses = old.uses
    for use in uses:
        use.op.set_operand(use.index, new)
    return len(uses)


def erase_op(op: Operation) -> None:
    live = [
        u
        for r in op.results
        for u in r.uses
        if u.op is not op and not op.is_proper_ancestor_of(u.op)
    ]
    if live:
        users = ", ".join(f"{u.op.name}#{u.op.id} (operand {u.index})" for u in live)
        raise IRError(f"cannot erase {op.name}#{op.id}: result still used by {users}")
    for nested in list(op.walk()):
        nested.drop_operands()
    if op.parent is not None:
        op.parent.detach(op)
    for nested in op.walk():
        nested.erased = True


def is_visible(value: Value, user: Operation) -> bool:
    """Whether ``value`` may be used as an operand of ``user``.

    A value is visible in its defining block and in every region nested below
    it.  In ssacfg blocks the definition must also come first.
    """
    def_block = value.block
    if def_block is None or not value.valid:
        return False
    op: Operation | None = user
    while op is not None:
        block = op.parent
        if block is None:
            return False
        if block is def_block:
            if isinstance(value, BlockArgument):
                return True
            producer = value.op  # type: ignore[attr-defined]
            if producer is op:
                # an op's own results are not in scope inside its regions
                return op is user and _block_kind(block) is RegionKind.GRAPH
            if _block_kind(block) is RegionKind.GRAPH:
                return True
            return block.index(producer) < block.index(op)
        op = block.parent_op
    return False


def _block_kind(block: Block) -> RegionKind:
    return block.parent.kind if block.parent is not None else RegionKind.SSACFG


class NotKeyable(IRError):
    pass


def structural_key(op: Operation) -> tuple:
    """Hashable identity used by CSE and hashconsing.

    Two region-free ops share a key iff they agree on name, attributes,
    operand identities and result types.
    """
    if op.regions:
        raise NotKeyable(f"{op.name} carries regions and cannot be keyed")
    return (
        op.name,
        tuple(op.attributes.items()),
        tuple(op.operands),
        op.result_types,
    )


# ---------------------------------------------------------------------------
# verification


def op_path(op: Operation) -> str:
    parts = []
    cur: Operation | None = op
    while cur is not None:
        label = cur.name
        if cur.parent is not None:
            label += f"[{cur.parent.index(cur)}]"
        sym = cur.attributes.get("sym_name")
        if isinstance(sym, str):
            label = f"@{sym}"
        parts.append(label)
        cur = cur.parent_op
    return "/".join(reversed(parts))


def verify_op(op: Operation) -> list[Diagnostic]:
    """Verify ``op`` and everything nested below it."""
    diags: list[Diagnostic] = []
    for nested in op.walk():
        diags.extend(_verify_single(nested))
    return diags


def verify_module(module: Module) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for op in module.ops:
        diags.extend(verify_op(op))
    return diags


def _verify_single(op: Operation) -> list[Diagnostic]:
    msgs: list[str] = []
    if op.erased:
        msgs.append("operation has been erased but is still reachable")
    if not _OP_NAME.fullmatch(op.name):
        msgs.append(f"'{op.name}' is not a dialect-qualified name")

    for i, v in enumerate(op.operands):
        if Use(op, i) not in v._uses:
            msgs.append(f"operand #{i} missing from the use list of its value")
        if not v.valid:
            msgs.append(f"operand #{i} refers to an erased operation")
        elif not is_visible(v, op):
            msgs.append(f"operand #{i}: {_visibility_reason(v, op)}")
    for i, r in enumerate(op.results):
        if r.op is not op or r.index != i:
            msgs.append(f"result #{i} does not point back to this operation")
        for use in r._uses:
            if use.index >= len(use.op._operands) or use.op._operands[use.index] is not r:
                msgs.append(f"result #{i} has a stale use record")
    for name in op.attributes:
        if not _ATTR_NAME.fullmatch(name):
            msgs.append(f"invalid attribute name {name!r}")

    info = _REGISTRY.get(op.name)
    for region in op.regions:
        if len(region.blocks) != 1:
            msgs.append(f"region must hold exactly one block, found {len(region.blocks)}")
            continue
        block = region.block
        if block.parent is not region or region.parent is not op:
            msgs.append("region/block parent links are inconsistent")
        for child in block.ops:
            if child.parent is not block:
                msgs.append(f"nested {child.name} has a wrong parent link")
        if info is not None:
            if region.kind is not info.region_kind:
                msgs.append(f"region must be of kind {info.region_kind.value}")
            if info.terminator is not None:
                term = block.terminator
                if term is None or term.name != info.terminator:
                    msgs.append(f"region must end with '{info.terminator}'")
                for inner in block.ops[:-1]:
                    if inner.name == info.terminator:
                        msgs.append(f"'{info.terminator}' must be the last operation")

    if info is not None:
        if info.num_operands is not None and len(op.operands) != info.num_operands:
            msgs.append(f"expected {info.num_operands} operands, found {len(op.operands)}")
        if info.num_results is not None and len(op.results) != info.num_results:
            msgs.append(f"expected {info.num_results} results, found {len(op.results)}")
        if info.is_terminator and op.parent is not None and op.parent.terminator is not op:
            msgs.append("terminator must be the last operation of its block")
        if info.verifier is not None:
            msgs.extend(info.verifier(op))

    if not msgs:
        return []
    path = op_path(op)
    return [Diagnostic(path, m) for m in msgs]


def _visibility_reason(value: Value, user: Operation) -> str:
    def_block = value.block
    op: Operation | None = user
    while op is not None and op.parent is not None:
        if op.parent is def_block:
            return "use before definition"
        op = op.parent.parent_op
    return "value is not visible here (defined in an unrelated or nested region)"


def recompute_uses(root: Iterable[Operation]) -> dict[Value, set[Use]]:
    """Use lists rebuilt from scratch; the verifier's independent cross-check."""
    table: dict[Value, set[Use]] = {}
    for top in root:
        for op in top.walk():
            for i, v in enumerate(op.operands):
                table.setdefault(v, set()).add(Use(op, i))
    return table
