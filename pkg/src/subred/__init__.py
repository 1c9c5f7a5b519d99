"""Typed logic programs with subtyping: solving, checking and certified execution."""
from .checker import (
    Certificate,
    Failure,
    VariableTyping,
    check_atom,
    check_nicely_typed,
    check_term_bound,
    principal_variable_typing,
    validate_certificate,
)
from .engine import certify_ordered, match, moded_unify, run
from .modes import check_nicely_moded, check_nicely_moded_clause
from .subsolve import build_system, check_form, solve
from .surface import parse_program, parse_query, parse_term, parse_type
from .typesys import Comp, ConstructorOrder, Param, TypeSubst

__all__ = [
    "Certificate", "Comp", "ConstructorOrder", "Failure", "Param", "TypeSubst",
    "VariableTyping", "build_system", "certify_ordered", "check_atom", "check_form",
    "check_nicely_moded", "check_nicely_moded_clause", "check_nicely_typed",
    "check_term_bound", "match", "moded_unify", "parse_program", "parse_query",
    "parse_term", "parse_type", "principal_variable_typing", "run", "solve",
    "validate_certificate",
]
