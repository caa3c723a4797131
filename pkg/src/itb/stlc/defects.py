"""Defect filing and the lifecycle graph.

The graph and the role that may walk each edge are plain data: swap
``LIFECYCLE`` / ``EDGE_ROLES`` to model a different workflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from itb.testkit.case import Severity

BLOCKED_CASES_S1_THRESHOLD = 15


class DefectState(str, Enum):
    NEW = "New"
    ASSIGNED = "Assigned"
    OPEN = "Open"
    FIXED = "Fixed"
    RETEST = "Retest"
    REOPENED = "Reopened"
    CLOSED = "Closed"
    REJECTED = "Rejected"
    DEFERRED = "Deferred"


class Role(str, Enum):
    TESTER = "tester"
    LEAD = "lead"
    DEVELOPER = "developer"


S = DefectState

LIFECYCLE: Mapping[DefectState, frozenset[DefectState]] = {
    S.NEW: frozenset({S.ASSIGNED, S.REJECTED, S.DEFERRED}),
    S.ASSIGNED: frozenset({S.OPEN}),
    S.OPEN: frozenset({S.FIXED}),
    S.FIXED: frozenset({S.RETEST}),
    S.RETEST: frozenset({S.CLOSED, S.REOPENED}),
    S.REOPENED: frozenset({S.ASSIGNED}),
    S.CLOSED: frozenset(),
    S.REJECTED: frozenset(),
    S.DEFERRED: frozenset(),
}

EDGE_ROLES: Mapping[tuple[DefectState, DefectState], Role] = {
    (S.NEW, S.ASSIGNED): Role.LEAD,
    (S.NEW, S.REJECTED): Role.LEAD,
    (S.NEW, S.DEFERRED): Role.LEAD,
    (S.ASSIGNED, S.OPEN): Role.DEVELOPER,
    (S.OPEN, S.FIXED): Role.DEVELOPER,
    (S.FIXED, S.RETEST): Role.TESTER,
    (S.RETEST, S.CLOSED): Role.TESTER,
    (S.RETEST, S.REOPENED): Role.TESTER,
    (S.REOPENED, S.ASSIGNED): Role.LEAD,
}

UNRESOLVED = frozenset({S.NEW, S.ASSIGNED, S.OPEN, S.FIXED, S.RETEST, S.REOPENED})


class LifecycleError(ValueError):
    pass


class PermissionDenied(PermissionError):
    pass


class DefectRejected(ValueError):
    def __init__(self, missing: list[str]):
        super().__init__(f"defect is missing mandatory fields: {', '.join(missing)}")
        self.missing = missing


@dataclass(frozen=True)
class DefectDraft:
    description: str
    steps_to_reproduce: str
    environment: str
    application: str
    test_data: str
    expected: str = ""
    actual: str = ""
    blocked_case_ids: frozenset[str] = frozenset()
    severity: Severity | None = None
    severity_justification: str = ""
    trace_excerpt: str = ""


@dataclass(frozen=True)
class Transition:
    from_state: DefectState
    to_state: DefectState
    role: Role


@dataclass(frozen=True)
class Defect:
    defect_id: str
    title: str
    severity: Severity
    suggested_severity: Severity
    state: DefectState
    draft: DefectDraft
    history: tuple[Transition, ...] = field(default=())

    @property
    def blocked_case_ids(self) -> frozenset[str]:
        return self.draft.blocked_case_ids


def suggest_severity(blocked_cases: int) -> Severity:
    return Severity.S1 if blocked_cases > BLOCKED_CASES_S1_THRESHOLD else Severity.S2


def format_title(environment: str, application: str, description: str) -> str:
    return f"[{environment.strip()}][{application.strip()}] – {description.strip()}"


MANDATORY = ("description", "steps_to_reproduce", "environment", "application", "test_data")


def defect_file(draft: DefectDraft, defect_id: str) -> Defect:
    missing = [name for name in MANDATORY if not getattr(draft, name).strip()]
    if missing:
        raise DefectRejected(missing)
    suggested = suggest_severity(len(draft.blocked_case_ids))
    severity = draft.severity or suggested
    if severity is not suggested and not draft.severity_justification.strip():
        raise DefectRejected(["severity_justification"])
    title = format_title(draft.environment, draft.application, draft.description)
    return Defect(defect_id, title, severity, suggested, DefectState.NEW, draft)


def defect_transition(defect: Defect, to_state: DefectState | str, role: Role | str) -> Defect:
    to_state, role = DefectState(to_state), Role(role)
    if to_state not in LIFECYCLE[defect.state]:
        raise LifecycleError(f"{defect.defect_id}: no transition {defect.state.value} -> {to_state.value}")
    allowed = EDGE_ROLES[(defect.state, to_state)]
    if role is not allowed:
        raise PermissionDenied(
            f"{defect.defect_id}: {defect.state.value} -> {to_state.value} is reserved for the {allowed.value}"
        )
    step = Transition(defect.state, to_state, role)
    return replace(defect, state=to_state, history=defect.history + (step,))
