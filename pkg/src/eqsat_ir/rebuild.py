"""Restoring the e-graph invariants after rewrites.

Two operations alternate until nothing changes:

* merging eclass pairs that were declared equal, and
* structural CSE of e-nodes, which exposes new congruences: once two
  e-nodes become identical, the classes holding them must merge.
"""

from __future__ import annotations

from collections.abc import Iterable

from .eqsat import EGraph, eclass_users
from .ir import IRError, NotKeyable, Operation, erase_op, replace_all_uses, structural_key


class PendingUnions:
    """Worklist of eclass pairs awaiting a merge."""

    def __init__(self, pairs: Iterable[tuple[Operation, Operation]] = ()) -> None:
        self.pairs: list[tuple[Operation, Operation]] = list(pairs)

    def add(self, a: Operation, b: Operation) -> None:
        self.pairs.append((a, b))

    def extend(self, pairs: Iterable[tuple[Operation, Operation]]) -> None:
        self.pairs.extend(pairs)

    def pop_all(self) -> list[tuple[Operation, Operation]]:
        out, self.pairs = self.pairs, []
        return out

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)


def merge_eclasses(egraph: EGraph, a: Operation, b: Operation) -> Operation:
    """Merge two eclasses; the one earlier in the block survives."""
    if a is b:
        return a
    if a.result.type != b.result.type:
        raise IRError(f"cannot merge eclasses of types {a.result.type} and {b.result.type}")
    block = egraph.block
    survivor, dead = (a, b) if block.index(a) < block.index(b) else (b, a)
    operands = list(dict.fromkeys([*survivor.operands, *dead.operands]))
    dead.drop_operands()
    survivor.set_operands(operands)
    replace_all_uses(dead.result, survivor.result)
    erase_op(dead)
    return survivor


def cse_once(egraph: EGraph, pending: PendingUnions) -> bool:
    """One structural CSE sweep over the e-nodes of ``egraph``.

    Duplicates are folded into the earliest identical node.  Any value left
    listed by more than one eclass queues those classes for merging.
    """
    changed = False
    seen: dict[tuple, Operation] = {}
    for op in list(egraph.nodes()):
        try:
            key = structural_key(op)
        except NotKeyable:
            continue
        first = seen.get(key)
        if first is None:
            seen[key] = op
            continue
        for old, new in zip(op.results, first.results):
            replace_all_uses(old, new)
        erase_op(op)
        changed = True

    for ec in egraph.eclasses():
        operands = list(dict.fromkeys(ec.operands))
        if len(operands) != len(ec.operands):
            ec.set_operands(operands)
            changed = True

    for ec in egraph.eclasses():
        for v in ec.operands:
            users = list(dict.fromkeys(eclass_users(v)))
            for other in users[1:]:
                pending.add(users[0], other)
    return changed


def rebuild(egraph: EGraph, pending: PendingUnions | None = None) -> int:
    """Merge queued unions and re-canonicalize up to congruence.

    Returns the number of rounds that changed something; zero means the
    e-graph was already canonical and ``pending`` was empty.
    """
    pending = pending if pending is not None else PendingUnions()
    forward: dict[int, Operation] = {}

    def find(ec: Operation) -> Operation:
        while ec.id in forward:
            ec = forward[ec.id]
        return ec

    rounds = 0
    while True:
        merged = False
        for a, b in pending.pop_all():
            a, b = find(a), find(b)
            if a is b:
                continue
            survivor = merge_eclasses(egraph, a, b)
            dead = b if survivor is a else a
            forward[dead.id] = survivor
            merged = True
        changed = cse_once(egraph, pending)
        if not merged and not changed and not pending:
            return rounds
        rounds += 1
