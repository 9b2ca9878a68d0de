"""Entailment checking for inductive separation logic via tree automata."""

from .entail import INVALID, UNKNOWN, VALID, ValidationFailed, Verdict, check_entailment
from .frontend import parse_system, print_system, validate_system
from .oracle import bounded_entailment
from .preprocess import run_pipeline

__all__ = [
    "VALID", "INVALID", "UNKNOWN", "ValidationFailed", "Verdict", "check_entailment",
    "parse_system", "print_system", "validate_system", "bounded_entailment", "run_pipeline",
]
