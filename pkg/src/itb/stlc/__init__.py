"""Process layer: traceability, cycles, defects and reporting."""

from itb.stlc.campaign import Campaign, CampaignFormatError
from itb.stlc.cycles import (
    ENTRY_PASS_RATE,
    EXIT_PASS_RATE,
    STANDARD_CYCLES,
    Cycle,
    CycleState,
    EntryInputs,
    ExitDecision,
    OpenDecision,
    SequencingError,
    campaign_exit_check,
    cycle_close,
    cycle_open,
    plan_cycle,
    record_result,
)
from itb.stlc.defects import (
    BLOCKED_CASES_S1_THRESHOLD,
    EDGE_ROLES,
    LIFECYCLE,
    Defect,
    DefectDraft,
    DefectRejected,
    DefectState,
    LifecycleError,
    PermissionDenied,
    Role,
    defect_file,
    defect_transition,
    suggest_severity,
)
from itb.stlc.report import report
from itb.stlc.rtm import Coverage, Direction, Requirement, Rtm, RtmError, Source, UncoveredRequirementWarning

__all__ = [
    "BLOCKED_CASES_S1_THRESHOLD",
    "Campaign",
    "CampaignFormatError",
    "Coverage",
    "Cycle",
    "CycleState",
    "Defect",
    "DefectDraft",
    "DefectRejected",
    "DefectState",
    "Direction",
    "EDGE_ROLES",
    "ENTRY_PASS_RATE",
    "EXIT_PASS_RATE",
    "EntryInputs",
    "ExitDecision",
    "LIFECYCLE",
    "LifecycleError",
    "OpenDecision",
    "PermissionDenied",
    "Requirement",
    "Role",
    "Rtm",
    "RtmError",
    "STANDARD_CYCLES",
    "SequencingError",
    "Source",
    "UncoveredRequirementWarning",
    "campaign_exit_check",
    "cycle_close",
    "cycle_open",
    "defect_file",
    "defect_transition",
    "plan_cycle",
    "record_result",
    "report",
    "suggest_severity",
]
