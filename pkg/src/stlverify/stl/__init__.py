"""Signal temporal logic: syntax, parsing, rewriting, monitoring and checklists."""

from stlverify.stl.ast import (
    FALSE,
    TRUE,
    And,
    Atom,
    FalseF,
    Finally,
    Formula,
    Globally,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
)
from stlverify.stl.monitor import SampledTrace, monitor_trace
from stlverify.stl.parser import StlSyntaxError, parse_stl
from stlverify.stl.rtl import AllOf, AnyOf, Check, RtlChecklist, compile_formula, to_rtl_checklist, violation_polytopes
from stlverify.stl.transform import (
    desugar,
    formula_horizon,
    leaf_times,
    negate,
    negation_normal_form,
    sampled_horizon,
    to_cnf,
    to_sampled_time,
)

__all__ = [
    "FALSE", "TRUE", "And", "Atom", "FalseF", "Finally", "Formula", "Globally", "Next", "Not", "Or",
    "Release", "TrueF", "Until", "SampledTrace", "monitor_trace", "StlSyntaxError", "parse_stl",
    "AllOf", "AnyOf", "Check", "RtlChecklist", "compile_formula", "to_rtl_checklist",
    "violation_polytopes", "desugar", "formula_horizon", "leaf_times", "negate",
    "negation_normal_form", "sampled_horizon", "to_cnf", "to_sampled_time",
]
