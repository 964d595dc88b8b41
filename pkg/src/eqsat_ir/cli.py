"""``eqsat-opt``: parse a module, run a pass pipeline, print the result."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from .eqsat import ConversionError, convert_module, egraphs_in
from .extraction import CostModel, ExtractionError, extract_all
from .ir import IRError, Module, NotKeyable, erase_op, replace_all_uses, structural_key, verify_module
from .patterns import lower_rules, parse_rules
from .rebuild import rebuild
from .saturation import SaturationLimits, SaturationReport, saturate
from .text import ParseError, emit_dot, parse_module, print_module

PASSES = ("convert-to-egraph", "eqsat-saturate", "eqsat-rebuild", "extract", "cse", "verify")


class _Failure(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqsat-opt", description="Run equality saturation passes over an .ir module.")
    p.add_argument("input", nargs="?", help="input .ir file (default: standard input)")
    p.add_argument("-p", "--passes", default="", help="comma-separated pass list: " + ", ".join(PASSES))
    p.add_argument("--rules", type=Path, help="rewrite rule file (.eqr)")
    p.add_argument("--cost", type=Path, help="cost model file (.cost)")
    p.add_argument("--max-iterations", type=int, default=SaturationLimits.max_iterations)
    p.add_argument("--max-enodes", type=int, default=SaturationLimits.max_enodes)
    p.add_argument("--time-budget-ms", type=int, default=int(SaturationLimits.time_budget * 1000))
    p.add_argument("--emit-dot", metavar="PREFIX", help="write one DOT file per egraph, PREFIX<index>.dot")
    p.add_argument("--report", action="store_true", help="print saturation statistics to standard error")
    return p


def _write_dot(module: Module, prefix: str) -> None:
    for i, g in enumerate(egraphs_in(module)):
        Path(f"{prefix}{i}.dot").write_text(emit_dot(g.op))


def _format_report(index: int, report: SaturationReport) -> list[str]:
    lines = [
        f"egraph={index}",
        f"stop_reason={report.stop_reason.value}",
        f"iterations={report.num_iterations}",
        f"enodes={report.num_enodes}",
        f"eclasses={report.num_eclasses}",
    ]
    for it in report.iterations:
        lines.append(f"iteration.{it.index}.matches={it.matches}")
        lines.append(f"iteration.{it.index}.created={it.created}")
        lines.append(f"iteration.{it.index}.unions={it.unions}")
    return lines


def _verify(module: Module, after: str) -> None:
    diags = verify_module(module)
    if diags:
        raise _Failure("\n".join(f"error (after {after}): {d}" for d in diags))


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    passes = [p.strip() for p in args.passes.split(",") if p.strip()]
    unknown = [p for p in passes if p not in PASSES]
    if unknown:
        parser.error(f"unknown pass {unknown[0]!r}; choose from {', '.join(PASSES)}")
    if "eqsat-saturate" in passes and args.rules is None:
        parser.error("eqsat-saturate requires --rules FILE")
    try:
        limits = SaturationLimits(args.max_iterations, args.max_enodes, args.time_budget_ms / 1000)
    except ValueError as e:
        parser.error(str(e))

    try:
        program = None
        if args.rules is not None:
            program = lower_rules(parse_rules(args.rules.read_text()))
        cost = CostModel.load(args.cost) if args.cost is not None else CostModel.unit()
        text = Path(args.input).read_text() if args.input else sys.stdin.read()
        module = parse_module(text)

        dot_written = False
        for name in passes:
            if name == "convert-to-egraph":
                convert_module(module)
            elif name == "eqsat-saturate":
                for i, g in enumerate(egraphs_in(module)):
                    report = saturate(g, program, limits)
                    if args.report:
                        print("\n".join(_format_report(i, report)), file=sys.stderr)
                if args.emit_dot:
                    _write_dot(module, args.emit_dot)
                    dot_written = True
            elif name == "eqsat-rebuild":
                for g in egraphs_in(module):
                    rebuild(g)
            elif name == "extract":
                extract_all(module, cost)
            elif name == "cse":
                for g in egraphs_in(module):
                    rebuild(g)
                _cse_plain(module)
            _verify(module, name)
        if args.emit_dot and not dot_written:
            _write_dot(module, args.emit_dot)
    except ParseError as e:
        for d in e.diagnostics:
            print(f"{args.input or '<stdin>'}:{d}", file=sys.stderr)
        return 1
    except (_Failure, ConversionError, ExtractionError, IRError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    sys.stdout.write(print_module(module))
    return 0


def _cse_plain(module: Module) -> None:
    """Structural CSE over ordinary (non-egraph) blocks of every function."""
    for top in module.ops:
        for op in list(top.walk()):
            for region in op.regions:
                if op.name == "eqsat.egraph":
                    continue
                seen: dict[tuple, object] = {}
                for inner in list(region.block.ops):
                    if not inner.results:
                        continue
                    try:
                        key = structural_key(inner)
                    except NotKeyable:
                        continue
                    first = seen.setdefault(key, inner)
                    if first is inner:
                        continue
                    for old, new in zip(inner.results, first.results):
                        replace_all_uses(old, new)
                    erase_op(inner)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
