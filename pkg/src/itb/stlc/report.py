"""Plain-text campaign report.

Everything is emitted in a fixed order (cycle number, enum order, sorted
ids) so the same campaign always renders to the same bytes.
"""

from __future__ import annotations

from collections import Counter

from itb.stlc.campaign import Campaign
from itb.stlc.defects import DefectState
from itb.testkit.case import Severity

VERDICTS = ("PASS", "FAIL", "BLOCKED")


def _rate(num: int, den: int) -> str:
    return f"{num / den:.2f}" if den else "0.00"


def report(campaign: Campaign) -> str:
    lines = ["INTEGRATION TEST CAMPAIGN REPORT", ""]

    lines.append("Cycles")
    closed = sum(1 for c in campaign.cycles if c.state.value == "Closed")
    lines.append(f"  cycles: {len(campaign.cycles)} (closed {closed})")
    for c in campaign.cycles:
        counts = Counter(c.results.values())
        pending = len(c.cases) - len(c.results)
        cells = " ".join(f"{v.lower()}={counts.get(v, 0)}" for v in VERDICTS)
        lines.append(
            f"  cycle {c.cycle_no} [{c.state.value}] cases={len(c.cases)} {cells} "
            f"pending={pending} pass_rate={_rate(c.passed, len(c.cases))}"
        )
    lines.append("")

    lines.append("Defects")
    lines.append(f"  total: {len(campaign.defects)}")
    sev = Counter(d.severity for d in campaign.defects.values())
    lines.append("  by severity: " + " ".join(f"{s.value}={sev.get(s, 0)}" for s in Severity))
    state = Counter(d.state for d in campaign.defects.values())
    lines.append("  by state: " + " ".join(f"{s.value}={state.get(s, 0)}" for s in DefectState))
    open_s1 = campaign.open_s1()
    lines.append(f"  unresolved S1: {', '.join(open_s1) if open_s1 else 'none'}")
    lines.append("")

    lines.append("Requirement coverage")
    cov = campaign.rtm.coverage()
    in_scope = len(cov.covered) + len(cov.uncovered)
    lines.append(f"  requirements: {len(campaign.rtm.requirements)} (in scope {in_scope})")
    lines.append(f"  covered: {len(cov.covered)} uncovered: {len(cov.uncovered)}")
    lines.append(f"  coverage: {_rate(len(cov.covered), in_scope)}")
    if cov.uncovered:
        lines.append(f"  uncovered ids: {', '.join(cov.uncovered)}")
    lines.append(f"  linked cases: {len(campaign.rtm.cases())}")
    lines.append("")

    decision = campaign.exit_check()
    lines.append("Exit check")
    lines.append(f"  status: {'done' if decision.done else 'not done'}")
    lines += [f"  - {r}" for r in decision.reasons]
    return "\n".join(lines) + "\n"
