"""Registrations for the handful of upstream-style dialects the tool knows.

Unregistered operations are allowed everywhere; registration only adds
arity, region and terminator checks.
"""

from __future__ import annotations

from .ir import OpInfo, Operation, Type, register_op

_INT_BINARY = ("addi", "subi", "muli", "divui", "divsi", "shli", "shrui", "andi", "ori", "xori")
_FLOAT_BINARY = ("addf", "subf", "mulf", "divf")


def _same_types(op: Operation) -> list[str]:
    types = {v.type for v in op.operands} | {r.type for r in op.results}
    if len(types) > 1:
        return ["operands and result must share one type"]
    return []


def _verify_constant(op: Operation) -> list[str]:
    value = op.attributes.get("value")
    if value is None:
        return ["arith.constant requires a 'value' attribute"]
    if isinstance(value, bool) or not isinstance(value, int):
        return ["arith.constant 'value' must be an integer"]
    return []


def function_result_types(func: Operation) -> tuple[Type, ...]:
    sig = func.attributes.get("function_type")
    if not isinstance(sig, Type):
        return ()
    text = sig.token
    _, _, rhs = text.partition("->")
    rhs = rhs.strip().strip("()").strip()
    return tuple(Type(t.strip()) for t in rhs.split(",") if t.strip())


def function_type_token(arg_types, result_types) -> Type:
    args = ", ".join(str(t) for t in arg_types)
    results = ", ".join(str(t) for t in result_types)
    return Type(f"({args}) -> ({results})")


def _verify_func(op: Operation) -> list[str]:
    if not isinstance(op.attributes.get("sym_name"), str):
        return ["func.func requires a 'sym_name' string attribute"]
    return []


def _verify_return(op: Operation) -> list[str]:
    func = op.parent_op
    if func is None or func.name != "func.func":
        return ["func.return must be directly inside func.func"]
    expected = function_result_types(func)
    if tuple(v.type for v in op.operands) != expected:
        got = ", ".join(str(v.type) for v in op.operands)
        want = ", ".join(str(t) for t in expected)
        return [f"returned types ({got}) do not match function results ({want})"]
    return []


for _name in _INT_BINARY + _FLOAT_BINARY:
    register_op(f"arith.{_name}", OpInfo(2, 1, verifier=_same_types))
register_op("arith.constant", OpInfo(0, 1, verifier=_verify_constant))

register_op("func.func", OpInfo(0, 0, terminator="func.return", verifier=_verify_func))
register_op("func.return", OpInfo(None, 0, is_terminator=True, verifier=_verify_return))
register_op("func.call", OpInfo())

register_op("scf.for", OpInfo(terminator="scf.yield"))
register_op("scf.if", OpInfo(terminator="scf.yield"))
register_op("scf.yield", OpInfo(None, 0, is_terminator=True))
