"""Case model and the ``.case`` file loader.

A case file is plain text made of sections::

    [meta]
    case_id = TC-IT-001
    objective = ...
    severity = S1
    priority = P1

    [prereq]
    fault.FRAUD = OFFLINE
    customer_ip = 10.1.1.1

    [step 5.1]
    desc = Validate that Credit Card details are masked
    expect.TraceRequestField = to=MERCHANT kind=AUTH field=masked mask_of=7978998767854345
    apps = OLS > Merchant via Web Service

Parameters after ``action =`` and ``expect.<Kind> =`` are shell-style
``key=value`` words, so values with spaces are quoted. ``action`` and
``expect.*`` keys may repeat within a step (actions run in order); other keys
may not.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace
from datetime import datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Iterable

from itb.domain import ConfigurationError, check_bin_table
from itb.env import EnvConfig, ItemSeed
from itb.netsim import check_availability_pair
from itb.storefront import ip_rule


class CaseSchemaError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None, source: str = "<case>"):
        where = source + (f":{line}" if line is not None else "")
        where += f" [{field}]" if field else ""
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field


class AssertionKind(str, Enum):
    TRACE_REQUEST_FIELD = "TraceRequestField"
    TRACE_RESPONSE_FIELD = "TraceResponseField"
    ORDER_STATUS = "OrderStatus"
    RTLOG_CONTAINS = "RtlogContains"
    INVENTORY_EQUALS = "InventoryEquals"
    SESSION_ERROR = "SessionError"
    SESSION_FIELD = "SessionField"
    NO_ENVELOPE = "NoEnvelope"


class Severity(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


class Priority(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"


ACTIONS = {
    "browse": ("item",),
    "check_availability": ("item",),
    "add_to_cart": ("item",),
    "checkout": (),
    "set_addresses": (),
    "submit_payment": ("network", "pan", "expiry"),
    "resubmit_payment": (),
    "place_order": (),
    "oms_fraud_batch": (),
    "rtlog_emit": (),
    "resa_ingest": (),
    "set_availability": ("service", "state"),
    "advance_clock": ("to",),
}


@dataclass(frozen=True, order=True)
class StepNo:
    parts: tuple[int, ...]

    @classmethod
    def parse(cls, text: str) -> "StepNo":
        try:
            parts = tuple(int(p) for p in text.strip().split("."))
        except ValueError:
            raise ValueError(f"bad step number {text!r}") from None
        if not parts or any(p < 0 for p in parts):
            raise ValueError(f"bad step number {text!r}")
        return cls(parts)

    @property
    def top(self) -> int:
        return self.parts[0]

    def __str__(self) -> str:
        return ".".join(str(p) for p in self.parts)


@dataclass(frozen=True)
class Action:
    name: str
    params: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Assertion:
    kind: AssertionKind
    params: dict[str, str] = field(default_factory=dict)

    def describe(self) -> str:
        args = " ".join(f"{k}={shlex.quote(v)}" for k, v in self.params.items())
        return f"{self.kind.value}({args})"


@dataclass(frozen=True)
class TestStep:
    step_no: StepNo
    description: str
    actions: tuple[Action, ...]
    expected: tuple[Assertion, ...]
    apps: str = ""


@dataclass(frozen=True)
class Prereq:
    settings: tuple[tuple[str, str], ...] = ()
    customer_ip: str = "10.1.1.1"
    noted_soh: tuple[str, ...] = ()

    def env_config(self) -> EnvConfig:
        return build_env_config(self.settings)

    def with_settings(self, extra: Iterable[tuple[str, str]]) -> "Prereq":
        keys = {k for k, _ in extra}
        kept = tuple((k, v) for k, v in self.settings if k not in keys)
        return replace(self, settings=kept + tuple(extra))


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    case_id: str
    objective: str
    prereq: Prereq
    steps: tuple[TestStep, ...]
    severity: Severity = Severity.S2
    priority: Priority = Priority.P2
    apps_involved: str = ""

    @property
    def top_level_steps(self) -> list[int]:
        return sorted({s.step_no.top for s in self.steps})


TestStep.__test__ = False  # type: ignore[attr-defined]


def _words(text: str) -> dict[str, str]:
    out = {}
    for word in shlex.split(text):
        key, sep, value = word.partition("=")
        if not sep or not key:
            raise ValueError(f"expected key=value, got {word!r}")
        if key in out:
            raise ValueError(f"parameter {key!r} given twice")
        out[key] = value
    return out


def build_env_config(settings: Iterable[tuple[str, str]]) -> EnvConfig:
    """Turn ``[prereq]`` settings into an :class:`EnvConfig`.

    Keys not mentioned keep the documented defaults. ``fraud_rules = none``
    and ``items = none`` clear the default rule list and catalog.
    """
    cfg = EnvConfig()
    faults: dict[str, str] = {}
    rules = None
    items = None
    bins: dict[str, tuple[str, ...]] = {}
    for key, value in settings:
        if key == "clock":
            cfg.clock = datetime.fromisoformat(value)
        elif key.startswith("fault."):
            faults[key[len("fault."):]] = value
        elif key == "fraud_rules" and value.strip().lower() == "none":
            rules = []
        elif key.startswith("fraud_rule."):
            ips = [ip.strip() for ip in value.split(",") if ip.strip()]
            rules = (rules or []) + [ip_rule(key[len("fraud_rule."):], ips)]
        elif key == "items" and value.strip().lower() == "none":
            items = {}
        elif key.startswith("item."):
            p = _words(value)
            items = dict(items if items is not None else {})
            items[key[len("item."):]] = ItemSeed(p.get("title", key[5:]), int(p["price"]), int(p["soh"]))
        elif key.startswith("bin."):
            bins[key[len("bin."):]] = tuple(x.strip() for x in value.split(",") if x.strip())
        elif key == "tax_rate":
            try:
                cfg.tax_rate = Decimal(value)
            except InvalidOperation:
                raise ConfigurationError(f"bad tax rate {value!r}") from None
        elif key.startswith("avs."):
            cfg.address_directory[key[len("avs."):]] = value
        elif key in ("customer_ip", "note_soh"):
            pass
        else:
            raise ConfigurationError(f"unknown prerequisite {key!r}")
    if rules is not None:
        cfg.fraud_rules = rules
    if items is not None:
        cfg.items = items
    if bins:
        check_bin_table(bins)
        cfg.bin_table = bins
    return cfg.with_faults(faults)


def _check_prereq(settings: list[tuple[str, str, int]], source: str) -> Prereq:
    customer_ip = "10.1.1.1"
    noted: list[str] = []
    for key, value, line in settings:
        try:
            if key == "customer_ip":
                customer_ip = value
            elif key == "note_soh":
                noted += [v.strip() for v in value.split(",") if v.strip()]
            elif key.startswith("fault."):
                check_availability_pair(key[len("fault."):], value)
            build_env_config([(key, value)])
        except (ConfigurationError, ValueError, KeyError) as exc:
            raise CaseSchemaError(str(exc), line, key, source) from None
    return Prereq(tuple((k, v) for k, v, _ in settings), customer_ip, tuple(noted))


def _section_header(line: str) -> str | None:
    if line.startswith("[") and line.endswith("]"):
        return line[1:-1].strip()
    return None


def parse_case(text: str, source: str = "<case>") -> TestCase:
    sections: list[tuple[str, int, list[tuple[str, str, int]]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = _section_header(line)
        if header is not None:
            sections.append((header, lineno, []))
            continue
        if not sections:
            raise CaseSchemaError("content before first section", lineno, None, source)
        key, sep, value = line.partition("=")
        if not sep:
            raise CaseSchemaError("expected key = value", lineno, None, source)
        sections[-1][2].append((key.strip(), value.strip(), lineno))

    meta: dict[str, str] = {}
    prereq = Prereq()
    steps: list[TestStep] = []
    seen_meta = seen_prereq = False
    for name, header_line, entries in sections:
        if name == "meta":
            if seen_meta:
                raise CaseSchemaError("duplicate [meta] section", header_line, None, source)
            seen_meta = True
            for key, value, line in entries:
                if key in meta:
                    raise CaseSchemaError("duplicate key", line, key, source)
                meta[key] = value
        elif name == "prereq":
            if seen_prereq:
                raise CaseSchemaError("duplicate [prereq] section", header_line, None, source)
            seen_prereq = True
            prereq = _check_prereq(entries, source)
        elif name.startswith("step "):
            steps.append(_parse_step(name[5:], header_line, entries, source))
        else:
            raise CaseSchemaError(f"unknown section [{name}]", header_line, None, source)

    for required in ("case_id", "objective"):
        if not meta.get(required):
            raise CaseSchemaError("missing required meta field", None, required, source)
    if not steps:
        raise CaseSchemaError("case has no steps", None, "steps", source)
    for prev, cur in zip(steps, steps[1:]):
        if cur.step_no == prev.step_no:
            raise CaseSchemaError(f"duplicate step number {cur.step_no}", None, "step", source)
        if cur.step_no < prev.step_no:
            raise CaseSchemaError(f"step {cur.step_no} follows {prev.step_no}", None, "step", source)
    try:
        severity = Severity(meta.get("severity", "S2"))
        priority = Priority(meta.get("priority", "P2"))
    except ValueError as exc:
        raise CaseSchemaError(str(exc), None, "severity/priority", source) from None
    return TestCase(
        case_id=meta["case_id"],
        objective=meta["objective"],
        prereq=prereq,
        steps=tuple(steps),
        severity=severity,
        priority=priority,
        apps_involved=meta.get("apps", ""),
    )


def _parse_step(label: str, header_line: int, entries: list[tuple[str, str, int]], source: str) -> TestStep:
    try:
        step_no = StepNo.parse(label)
    except ValueError as exc:
        raise CaseSchemaError(str(exc), header_line, "step", source) from None
    desc = apps = None
    actions: list[Action] = []
    expected: list[Assertion] = []
    seen: set[str] = set()
    for key, value, line in entries:
        if key not in ("action",) and not key.startswith("expect."):
            if key in seen:
                raise CaseSchemaError("duplicate key", line, key, source)
            seen.add(key)
        if key == "desc":
            desc = value
        elif key == "apps":
            apps = value
        elif key == "action":
            name, _, rest = value.partition(" ")
            if name not in ACTIONS:
                raise CaseSchemaError(f"unknown action {name!r}", line, "action", source)
            try:
                params = _words(rest)
            except ValueError as exc:
                raise CaseSchemaError(str(exc), line, "action", source) from None
            missing = [p for p in ACTIONS[name] if p not in params]
            if missing:
                raise CaseSchemaError(f"action {name} needs {missing}", line, "action", source)
            actions.append(Action(name, params))
        elif key.startswith("expect."):
            kind_name = key[len("expect."):]
            try:
                kind = AssertionKind(kind_name)
            except ValueError:
                raise CaseSchemaError(f"unknown assertion kind {kind_name!r}", line, key, source) from None
            try:
                expected.append(Assertion(kind, _words(value)))
            except ValueError as exc:
                raise CaseSchemaError(str(exc), line, key, source) from None
        else:
            raise CaseSchemaError("unknown step field", line, key, source)
    if not desc:
        raise CaseSchemaError(f"step {step_no} has no desc", header_line, "desc", source)
    if not actions and not expected:
        raise CaseSchemaError(f"step {step_no} has neither an action nor an assertion", header_line, "step", source)
    return TestStep(step_no, desc, tuple(actions), tuple(expected), apps or "")


def load_case(path: str | Path) -> TestCase:
    path = Path(path)
    return parse_case(path.read_text(encoding="utf-8"), source=str(path))


SHIPPED_CASES = Path(__file__).resolve().parent.parent / "cases"


def shipped_case_paths() -> list[Path]:
    """The golden case followed by the error-guessing cases, in a fixed order."""
    return [SHIPPED_CASES / "golden_table1.case"] + sorted((SHIPPED_CASES / "error_guessing").glob("*.case"))
