"""Equality saturation carried out directly on an SSA IR."""

from . import dialects as _dialects  # noqa: F401  (registers arith/func/scf)
from .ematch import MatchResult, RewriteError, apply_match, find_matches
from .eqsat import EGraph, convert_module, convert_to_egraph, verify_eqsat
from .extraction import CostModel, ExtractionError, compute_costs, extract
from .ir import (
    Block,
    Diagnostic,
    IRError,
    Module,
    NotKeyable,
    Operation,
    Region,
    RegionKind,
    Type,
    build_op,
    erase_op,
    is_visible,
    replace_all_uses,
    structural_key,
    verify_module,
)
from .patterns import MatchProgram, RewriteRule, lower_rules, parse_rules, rhs_actions
from .rebuild import PendingUnions, cse_once, merge_eclasses, rebuild
from .saturation import SaturationLimits, SaturationReport, StopReason, saturate
from .text import ParseError, emit_dot, parse_module, print_module

__all__ = [
    "Block",
    "CostModel",
    "Diagnostic",
    "EGraph",
    "ExtractionError",
    "IRError",
    "MatchProgram",
    "MatchResult",
    "Module",
    "NotKeyable",
    "Operation",
    "ParseError",
    "PendingUnions",
    "Region",
    "RegionKind",
    "RewriteError",
    "RewriteRule",
    "SaturationLimits",
    "SaturationReport",
    "StopReason",
    "Type",
    "apply_match",
    "build_op",
    "compute_costs",
    "convert_module",
    "convert_to_egraph",
    "cse_once",
    "emit_dot",
    "erase_op",
    "extract",
    "find_matches",
    "is_visible",
    "lower_rules",
    "merge_eclasses",
    "parse_module",
    "parse_rules",
    "print_module",
    "rebuild",
    "replace_all_uses",
    "rhs_actions",
    "saturate",
    "structural_key",
    "verify_eqsat",
    "verify_module",
]
