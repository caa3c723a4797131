"""Test cycles with entry and exit criteria.

Pass rates are compared as exact fractions so boundary values such as 0.80
and 0.90 behave exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

ENTRY_PASS_RATE = Fraction(80, 100)
EXIT_PASS_RATE = Fraction(90, 100)
STANDARD_CYCLES = 3


class SequencingError(RuntimeError):
    """A cycle operation was attempted out of order."""


class CycleState(str, Enum):
    PLANNED = "Planned"
    OPEN = "Open"
    CLOSED = "Closed"


def as_fraction(rate: float | str | Fraction) -> Fraction:
    # str() first so 0.85 becomes 17/20 rather than its binary approximation
    return rate if isinstance(rate, Fraction) else Fraction(str(rate))


@dataclass(frozen=True)
class EntryInputs:
    system_test_pass_rate: Fraction
    smoke_passed: bool
    all_integrated: bool

    @classmethod
    def of(cls, system_test_pass_rate: float | str | Fraction, smoke_passed: bool, all_integrated: bool) -> "EntryInputs":
        rate = as_fraction(system_test_pass_rate)
        if not 0 <= rate <= 1:
            raise ValueError(f"pass rate must be within [0, 1], got {system_test_pass_rate}")
        return cls(rate, smoke_passed, all_integrated)


@dataclass
class Cycle:
    cycle_no: int
    cases: tuple[str, ...]
    state: CycleState = CycleState.PLANNED
    entry: EntryInputs | None = None
    results: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> int:
        return sum(1 for v in self.results.values() if v == "PASS")

    @property
    def pass_rate(self) -> Fraction:
        return Fraction(self.passed, len(self.cases)) if self.cases else Fraction(0)


@dataclass(frozen=True)
class OpenDecision:
    opened: bool
    unmet: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExitDecision:
    done: bool
    reasons: tuple[str, ...] = ()


def _fmt(rate: Fraction) -> str:
    return f"{float(rate):.2f}"


def plan_cycle(cycles: list[Cycle], cases: Iterable[str]) -> Cycle:
    if any(c.state is CycleState.PLANNED for c in cycles):
        raise SequencingError("a cycle is already planned")
    cases = tuple(dict.fromkeys(cases))
    if not cases:
        raise ValueError("a cycle needs at least one case")
    cycle = Cycle(len(cycles) + 1, cases)
    cycles.append(cycle)
    return cycle


def cycle_open(
    cycles: Sequence[Cycle],
    cycle: Cycle,
    inputs: EntryInputs,
    entry_rate: Fraction = ENTRY_PASS_RATE,
) -> OpenDecision:
    """Open ``cycle`` if every entry criterion holds; otherwise name each unmet one."""
    if cycle.state is not CycleState.PLANNED:
        raise SequencingError(f"cycle {cycle.cycle_no} is {cycle.state.value}, not Planned")
    for earlier in cycles:
        if earlier.cycle_no < cycle.cycle_no and earlier.state is not CycleState.CLOSED:
            raise SequencingError(f"cycle {earlier.cycle_no} must be Closed before cycle {cycle.cycle_no} opens")
    unmet = []
    if inputs.system_test_pass_rate < entry_rate:
        unmet.append(
            f"system-test: pass rate {_fmt(inputs.system_test_pass_rate)} is below the {_fmt(entry_rate)} entry floor"
        )
    if not inputs.smoke_passed:
        unmet.append("smoke: the end-to-end smoke test has not passed")
    if not inputs.all_integrated:
        unmet.append("integration: not all applications are integrated")
    if unmet:
        return OpenDecision(False, tuple(unmet))
    cycle.entry = inputs
    cycle.state = CycleState.OPEN
    return OpenDecision(True)


def record_result(cycle: Cycle, case_id: str, verdict: str) -> None:
    if cycle.state is not CycleState.OPEN:
        raise SequencingError(f"cycle {cycle.cycle_no} is {cycle.state.value}; results go into an Open cycle")
    if case_id not in cycle.cases:
        raise ValueError(f"case {case_id} is not part of cycle {cycle.cycle_no}")
    if verdict not in ("PASS", "FAIL", "BLOCKED"):
        raise ValueError(f"unknown verdict {verdict!r}")
    cycle.results[case_id] = verdict


def cycle_close(cycle: Cycle) -> None:
    if cycle.state is not CycleState.OPEN:
        raise SequencingError(f"cycle {cycle.cycle_no} is {cycle.state.value}, not Open")
    missing = [c for c in cycle.cases if c not in cycle.results]
    if missing:
        raise SequencingError(f"cycle {cycle.cycle_no} has cases without a verdict: {', '.join(missing)}")
    cycle.state = CycleState.CLOSED


def campaign_exit_check(
    cycles: Sequence[Cycle],
    regression_done: bool,
    open_s1_defects: Sequence[str] = (),
    min_cycles: int = STANDARD_CYCLES,
    exit_rate: Fraction = EXIT_PASS_RATE,
) -> ExitDecision:
    """Integration testing may stop once enough cycles closed, the last one
    passed at the exit rate, regression ran on frozen code and no S1 defect
    is still unresolved."""
    reasons = []
    closed = [c for c in cycles if c.state is CycleState.CLOSED]
    if len(closed) < min_cycles:
        reasons.append(f"cycle-count: {len(closed)} of {min_cycles} cycles closed")
    if closed:
        final = closed[-1]
        if final.pass_rate < exit_rate:
            reasons.append(
                f"pass-rate: cycle {final.cycle_no} passed {_fmt(final.pass_rate)}, below {_fmt(exit_rate)}"
            )
    else:
        reasons.append("pass-rate: no closed cycle to measure")
    if not regression_done:
        reasons.append("regression: regression on the frozen code has not been performed")
    if open_s1_defects:
        reasons.append(f"defects: unresolved S1 defects {', '.join(sorted(open_s1_defects))}")
    return ExitDecision(not reasons, tuple(reasons))
