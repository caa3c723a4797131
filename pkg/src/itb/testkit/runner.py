"""Drive an environment through a case, step by step."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Mapping, Sequence

from itb.backoffice import RtlogRejected
from itb.domain import CardDetails, ConfigurationError
from itb.env import DEFAULT_BILL_TO, DEFAULT_SHIP_TO, EnvConfig, Environment
from itb.netsim import Envelope, TransportError, export_trace
from itb.storefront import StorefrontError
from itb.testkit.assertions import AssertionOutcome, RunContext, evaluate
from itb.testkit.case import Action, AssertionKind, TestCase, TestStep, build_env_config
from itb.wire import Address


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    BLOCKED = "BLOCKED"


@dataclass(frozen=True)
class StepResult:
    step: TestStep
    outcomes: tuple[AssertionOutcome, ...]
    envelope_seqs: tuple[int, ...] = ()
    action_error: str | None = None

    @property
    def passed(self) -> bool:
        if self.action_error is not None and not self.outcomes:
            return False
        return all(o.passed for o in self.outcomes)


@dataclass(frozen=True)
class CaseResult:
    case: TestCase
    verdict: Verdict
    steps: tuple[StepResult, ...]
    trace: tuple[Envelope, ...] = ()
    blocked_at: str | None = None
    blocked_reason: str | None = None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def top_level_total(self) -> int:
        return len(self.case.top_level_steps)

    @property
    def top_level_passed(self) -> int:
        ran: dict[int, bool] = {}
        for r in self.steps:
            ran[r.step.step_no.top] = ran.get(r.step.step_no.top, True) and r.passed
        if self.blocked_at is not None:
            ran.pop(int(self.blocked_at.split(".")[0]), None)
        return sum(ran.values())

    @property
    def failed_steps(self) -> list[str]:
        return [str(r.step.step_no) for r in self.steps if not r.passed]

    def trace_export(self) -> str:
        return export_trace(self.trace)


def environment_for(
    case: TestCase,
    faults: Mapping[str, str] | None = None,
    clock: datetime | None = None,
    base: EnvConfig | None = None,
) -> Environment:
    settings = list(case.prereq.settings)
    if faults:
        settings += [(f"fault.{svc}", state) for svc, state in faults.items()]
    if clock is not None:
        settings.append(("clock", clock.isoformat()))
    cfg = build_env_config(settings)
    if base is not None:
        cfg = _overlay(base, cfg, dict(settings))
    return Environment(cfg)


def _overlay(base: EnvConfig, case_cfg: EnvConfig, settings: dict[str, str]) -> EnvConfig:
    # operator-level config (BIN table, fraud list, tax rate) fills what the case leaves unset
    cfg = case_cfg.with_faults({})
    if not any(k.startswith("bin.") for k in settings):
        cfg.bin_table = dict(base.bin_table)
    if not any(k.startswith("fraud_rule") for k in settings):
        cfg.fraud_rules = list(base.fraud_rules)
    if "tax_rate" not in settings:
        cfg.tax_rate = base.tax_rate
    return cfg


def _address(params: dict[str, str], prefix: str, default: Address) -> Address:
    return Address(
        params.get(f"{prefix}_name", default.name),
        params.get(f"{prefix}_street", default.street),
        params.get(f"{prefix}_city", default.city),
        params.get(f"{prefix}_postal", default.postal),
    )


def perform(step: TestStep, ctx: RunContext) -> None:
    """Execute the step's actions through the same calls a client would make."""
    for action in step.actions:
        _perform_one(action, ctx)


def _perform_one(action: Action, ctx: RunContext) -> None:
    env, session = ctx.env, ctx.session
    p = {k: ctx.resolve(v) for k, v in action.params.items()}
    name = action.name
    if name == "browse":
        env.ols.browse(session, p["item"])
    elif name == "check_availability":
        env.ols.check_availability(session, p["item"])
    elif name == "add_to_cart":
        env.ols.add_to_cart(session, p["item"], int(p.get("qty", "1")))
    elif name == "checkout":
        env.ols.checkout(session)
    elif name == "set_addresses":
        env.ols.set_addresses(session, _address(p, "ship", DEFAULT_SHIP_TO), _address(p, "bill", DEFAULT_BILL_TO))
    elif name == "submit_payment":
        env.ols.submit_payment(session, CardDetails.of(p["network"], p["pan"], p["expiry"]))
    elif name == "resubmit_payment":
        env.ols.resubmit_payment(session)
    elif name == "place_order":
        env.ols.place_order(session)
    elif name == "oms_fraud_batch":
        env.oms.run_fraud_batch()
    elif name == "rtlog_emit":
        ctx.rtlog_files.append(env.oms.emit_rtlog())
    elif name == "resa_ingest":
        if not ctx.rtlog_files:
            raise RtlogRejected("no RTLOG file has been emitted")
        env.resa.ingest(ctx.rtlog_files[-1])
    elif name == "set_availability":
        env.set_availability(p["service"], p["state"])
    elif name == "advance_clock":
        env.clock.advance_to(datetime.fromisoformat(p["to"]))
    else:  # pragma: no cover - the loader rejects unknown actions
        raise ValueError(f"unknown action {name}")


_BLOCKING = (StorefrontError, TransportError, RtlogRejected, ConfigurationError, KeyError, ValueError)


def run_case(
    case: TestCase,
    env: Environment | None = None,
    faults: Mapping[str, str] | None = None,
    clock: datetime | None = None,
    base: EnvConfig | None = None,
) -> CaseResult:
    """Run every step in order, reporting all assertion failures.

    An action that errors blocks the case unless the step asserts on the
    session error it leaves behind.
    """
    started = time.perf_counter()
    try:
        if env is None:
            env = environment_for(case, faults, clock, base)
        session = env.ols.new_session(case.prereq.customer_ip)
        ctx = RunContext(env, session)
        for item in case.prereq.noted_soh:
            ctx.variables[f"soh.{item}"] = str(env.oms.check_inventory(item).quantity)
    except (ConfigurationError, ValueError, KeyError) as exc:
        return CaseResult(case, Verdict.BLOCKED, (), (), None, f"environment: {exc}", time.perf_counter() - started)

    results: list[StepResult] = []
    for step in case.steps:
        before = len(env.bus.trace)
        error = None
        try:
            perform(step, ctx)
        except _BLOCKING as exc:
            error = f"{type(exc).__name__}: {exc}"
            expects_error = any(a.kind is AssertionKind.SESSION_ERROR for a in step.expected)
            if not expects_error:
                seqs = tuple(e.seq for e in env.bus.trace[before:])
                results.append(StepResult(step, (), seqs, error))
                return CaseResult(
                    case,
                    Verdict.BLOCKED,
                    tuple(results),
                    env.bus.trace,
                    str(step.step_no),
                    error,
                    time.perf_counter() - started,
                )
        outcomes = tuple(evaluate(a, ctx) for a in step.expected)
        seqs = tuple(e.seq for e in env.bus.trace[before:])
        results.append(StepResult(step, outcomes, seqs, error))
    verdict = Verdict.PASS if all(r.passed for r in results) else Verdict.FAIL
    return CaseResult(case, verdict, tuple(results), env.bus.trace, None, None, time.perf_counter() - started)


# --- rendering ------------------------------------------------------------


def render_text(result: CaseResult) -> str:
    """A Table-1 style listing: step, description, expected, application, result."""
    case = result.case
    rows = [("Step No.", "Description", "Expected", "Application", "Result")]
    for r in result.steps:
        expected = "; ".join(a.describe() for a in r.step.expected) or "-"
        if r.action_error and not r.outcomes:
            status = "BLOCKED"
        else:
            status = "PASS" if r.passed else "FAIL"
        rows.append((str(r.step.step_no), r.step.description, expected, r.step.apps or "-", status))
        for o in r.outcomes:
            if not o.passed:
                rows.append(("", "", f"  observed: {o.observed}", "", o.message))
    widths = [min(max(len(row[i]) for row in rows), cap) for i, cap in enumerate((8, 60, 70, 32, 7))]

    def fmt(row: tuple[str, ...]) -> str:
        cells = [c if len(c) <= w else c[: w - 3] + "..." for c, w in zip(row, widths)]
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [f"Case {case.case_id}: {case.objective}", fmt(rows[0]), "-+-".join("-" * w for w in widths)]
    lines += [fmt(row) for row in rows[1:]]
    summary = f"Verdict: {result.verdict.value} ({result.top_level_passed}/{result.top_level_total} steps passed)"
    if result.blocked_at is not None or result.blocked_reason:
        summary += f" blocked at step {result.blocked_at or '-'}: {result.blocked_reason}"
    lines.append(summary)
    return "\n".join(lines) + "\n"


def render_structured(result: CaseResult) -> str:
    """One JSON record per step, then a summary record."""
    out = []
    for r in result.steps:
        out.append(
            json.dumps(
                {
                    "case_id": result.case.case_id,
                    "step": str(r.step.step_no),
                    "description": r.step.description,
                    "apps": r.step.apps,
                    "passed": r.passed,
                    "action_error": r.action_error,
                    "envelopes": list(r.envelope_seqs),
                    "assertions": [
                        {"expect": o.assertion.describe(), "passed": o.passed, "observed": o.observed}
                        for o in r.outcomes
                    ],
                },
                sort_keys=True,
            )
        )
    out.append(
        json.dumps(
            {
                "case_id": result.case.case_id,
                "verdict": result.verdict.value,
                "steps_passed": result.top_level_passed,
                "steps_total": result.top_level_total,
                "blocked_at": result.blocked_at,
                "blocked_reason": result.blocked_reason,
            },
            sort_keys=True,
        )
    )
    return "\n".join(out) + "\n"


def run_suite(
    cases: Sequence[TestCase],
    jobs: int = 1,
    faults: Mapping[str, str] | None = None,
    clock: datetime | None = None,
    base: EnvConfig | None = None,
) -> list[CaseResult]:
    """Run independent cases, each on its own environment; results keep input order."""

    def one(case: TestCase) -> CaseResult:
        return run_case(case, faults=faults, clock=clock, base=base)

    if jobs <= 1:
        return [one(c) for c in cases]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, cases))
