"""All STLC state in one plain-text campaign file.

Records are ``[requirement]``, ``[link]``, ``[cycle]`` and ``[defect]``
sections of ``key = value`` lines, preceded by one ``[campaign]`` section.
Values escape backslash and newline as ``\\\\`` and ``\\n``. Field reference:
docs/campaign-format.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from itb.stlc.cycles import (
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
    UNRESOLVED,
    Defect,
    DefectDraft,
    DefectState,
    Role,
    Transition,
    defect_file,
    defect_transition,
)
from itb.stlc.rtm import Link, Requirement, Rtm, Source
from itb.testkit.case import Severity


class CampaignFormatError(ValueError):
    pass


def _esc(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unesc(value: str) -> str:
    out, i = [], 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append("\n" if nxt == "n" else nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _yes(value: str) -> bool:
    return value.strip().lower() in ("yes", "true", "1")


def _yn(flag: bool) -> str:
    return "yes" if flag else "no"


@dataclass
class Campaign:
    rtm: Rtm = field(default_factory=Rtm)
    cycles: list[Cycle] = field(default_factory=list)
    defects: dict[str, Defect] = field(default_factory=dict)
    regression_done: bool = False

    # cycles

    def current(self) -> Cycle | None:
        return self.cycles[-1] if self.cycles else None

    def plan(self, cases: Iterable[str]) -> Cycle:
        return plan_cycle(self.cycles, cases)

    def open_next(self, inputs: EntryInputs, cases: Iterable[str] | None = None) -> tuple[Cycle, OpenDecision]:
        planned = [c for c in self.cycles if c.state is CycleState.PLANNED]
        if planned:
            cycle = planned[0]
        else:
            open_now = [c for c in self.cycles if c.state is CycleState.OPEN]
            if open_now:
                raise SequencingError(f"cycle {open_now[0].cycle_no} is still Open")
            cases = list(cases or sorted(self.rtm.cases()))
            cycle = self.plan(cases)
        return cycle, cycle_open(self.cycles, cycle, inputs)

    def open_cycle(self) -> Cycle:
        for c in self.cycles:
            if c.state is CycleState.OPEN:
                return c
        raise SequencingError("no cycle is Open")

    def record(self, case_id: str, verdict: str) -> None:
        record_result(self.open_cycle(), case_id, verdict)

    def close(self) -> Cycle:
        cycle = self.open_cycle()
        cycle_close(cycle)
        return cycle

    def open_s1(self) -> list[str]:
        return sorted(d.defect_id for d in self.defects.values() if d.severity is Severity.S1 and d.state in UNRESOLVED)

    def exit_check(self) -> ExitDecision:
        return campaign_exit_check(self.cycles, self.regression_done, self.open_s1())

    # defects

    def file_defect(self, draft: DefectDraft) -> Defect:
        defect = defect_file(draft, f"D{len(self.defects) + 1:04d}")
        self.defects[defect.defect_id] = defect
        return defect

    def move_defect(self, defect_id: str, to_state: DefectState | str, role: Role | str) -> Defect:
        try:
            defect = self.defects[defect_id]
        except KeyError:
            raise KeyError(f"unknown defect {defect_id}") from None
        self.defects[defect_id] = updated = defect_transition(defect, to_state, role)
        return updated

    # persistence

    def dumps(self) -> str:
        out = ["# integration test campaign", "[campaign]", f"regression_done = {_yn(self.regression_done)}", ""]
        for req in sorted(self.rtm.requirements.values(), key=lambda r: r.req_id):
            out += [
                "[requirement]",
                f"id = {req.req_id}",
                f"source = {req.source.value}",
                f"in_scope = {_yn(req.in_integration_scope)}",
                f"text = {_esc(req.text)}",
                "",
            ]
        for link in sorted(self.rtm.links):
            out += [
                "[link]",
                f"req = {link.req_id}",
                f"scenario = {link.scenario_id}",
                f"condition = {link.condition_id}",
                f"case = {link.case_id}",
                "",
            ]
        for cycle in self.cycles:
            out += ["[cycle]", f"no = {cycle.cycle_no}", f"state = {cycle.state.value}", f"cases = {','.join(cycle.cases)}"]
            if cycle.entry is not None:
                e = cycle.entry
                out += [
                    f"entry.system_pass = {e.system_test_pass_rate}",
                    f"entry.smoke_passed = {_yn(e.smoke_passed)}",
                    f"entry.all_integrated = {_yn(e.all_integrated)}",
                ]
            out += [f"result.{case} = {cycle.results[case]}" for case in cycle.cases if case in cycle.results]
            out.append("")
        for d in sorted(self.defects.values(), key=lambda d: d.defect_id):
            dr = d.draft
            out += [
                "[defect]",
                f"id = {d.defect_id}",
                f"state = {d.state.value}",
                f"severity = {d.severity.value}",
                f"description = {_esc(dr.description)}",
                f"steps = {_esc(dr.steps_to_reproduce)}",
                f"environment = {_esc(dr.environment)}",
                f"application = {_esc(dr.application)}",
                f"test_data = {_esc(dr.test_data)}",
                f"expected = {_esc(dr.expected)}",
                f"actual = {_esc(dr.actual)}",
                f"blocked = {','.join(sorted(dr.blocked_case_ids))}",
                f"justification = {_esc(dr.severity_justification)}",
                f"trace = {_esc(dr.trace_excerpt)}",
            ]
            out += [f"history = {t.from_state.value}>{t.to_state.value}@{t.role.value}" for t in d.history]
            out.append("")
        return "\n".join(line.rstrip() for line in out)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Campaign":
        records: list[tuple[str, list[tuple[str, str]], int]] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                records.append((line[1:-1], [], lineno))
                continue
            if not records:
                raise CampaignFormatError(f"line {lineno}: content before first record")
            key, sep, value = line.partition("=")
            if not sep:
                raise CampaignFormatError(f"line {lineno}: expected key = value")
            records[-1][1].append((key.strip(), value.strip()))
        camp = cls()
        for name, pairs, lineno in records:
            try:
                camp._load_record(name, pairs)
            except (KeyError, ValueError) as exc:
                raise CampaignFormatError(f"record [{name}] at line {lineno}: {exc}") from None
        return camp

    def _load_record(self, name: str, pairs: list[tuple[str, str]]) -> None:
        d = dict(pairs)
        if name == "campaign":
            self.regression_done = _yes(d.get("regression_done", "no"))
        elif name == "requirement":
            self.rtm.add_requirement(
                Requirement(d["id"], Source(d["source"]), _unesc(d.get("text", "")), _yes(d.get("in_scope", "yes")))
            )
        elif name == "link":
            self.rtm.link(d["req"], d["scenario"], d["condition"], d["case"])
        elif name == "cycle":
            cycle = Cycle(int(d["no"]), tuple(c for c in d["cases"].split(",") if c), CycleState(d["state"]))
            if "entry.system_pass" in d:
                cycle.entry = EntryInputs(
                    Fraction(d["entry.system_pass"]),
                    _yes(d["entry.smoke_passed"]),
                    _yes(d["entry.all_integrated"]),
                )
            cycle.results = {k[len("result."):]: v for k, v in pairs if k.startswith("result.")}
            if cycle.cycle_no != len(self.cycles) + 1:
                raise ValueError(f"cycle {cycle.cycle_no} out of sequence")
            self.cycles.append(cycle)
        elif name == "defect":
            draft = DefectDraft(
                description=_unesc(d["description"]),
                steps_to_reproduce=_unesc(d["steps"]),
                environment=_unesc(d["environment"]),
                application=_unesc(d["application"]),
                test_data=_unesc(d["test_data"]),
                expected=_unesc(d.get("expected", "")),
                actual=_unesc(d.get("actual", "")),
                blocked_case_ids=frozenset(c for c in d.get("blocked", "").split(",") if c),
                severity=Severity(d["severity"]),
                severity_justification=_unesc(d.get("justification", "")),
                trace_excerpt=_unesc(d.get("trace", "")),
            )
            defect = defect_file(draft, d["id"])
            # replay history so the stored state is reachable in the lifecycle graph
            for key, value in pairs:
                if key == "history":
                    edge, _, role = value.partition("@")
                    src, _, dst = edge.partition(">")
                    if DefectState(src) is not defect.state:
                        raise ValueError(f"history edge {edge} does not start at {defect.state.value}")
                    defect = defect_transition(defect, dst, role)
            if defect.state is not DefectState(d["state"]):
                raise ValueError(f"defect {d['id']} history ends at {defect.state.value}, file says {d['state']}")
            self.defects[defect.defect_id] = defect
        else:
            raise ValueError(f"unknown record type [{name}]")

    @classmethod
    def load(cls, path: str | Path) -> "Campaign":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


__all__ = ["Campaign", "CampaignFormatError", "Link", "Transition"]
