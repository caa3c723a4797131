"""Declarative integration cases, their executor and the smoke test."""

from itb.testkit.case import (
    Assertion,
    AssertionKind,
    CaseSchemaError,
    TestCase,
    TestStep,
    load_case,
    parse_case,
    shipped_case_paths,
)
from itb.testkit.runner import (
    CaseResult,
    StepResult,
    Verdict,
    environment_for,
    render_structured,
    render_text,
    run_case,
    run_suite,
)
from itb.testkit.smoke import SmokeResult, run_smoke

__all__ = [
    "Assertion",
    "AssertionKind",
    "CaseResult",
    "CaseSchemaError",
    "SmokeResult",
    "StepResult",
    "TestCase",
    "TestStep",
    "Verdict",
    "load_case",
    "parse_case",
    "render_structured",
    "render_text",
    "run_case",
    "run_suite",
    "environment_for",
    "run_smoke",
    "shipped_case_paths",
]
