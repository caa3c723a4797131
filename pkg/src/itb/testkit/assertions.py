"""Evaluate case assertions against the live environment.

Each assertion kind reads exactly one observable: the bus trace, the OMS or
OLS order store, emitted RTLOG text, OMS inventory, or the OLS session.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable

from itb import wire
from itb.domain import Pan, mask_pan
from itb.env import Environment
from itb.netsim import Envelope, Kind, query
from itb.storefront import CartSession
from itb.testkit.case import Assertion, AssertionKind

_VAR_RE = re.compile(r"\$\{([A-Za-z0-9_.\-]+)\}")


@dataclass
class RunContext:
    env: Environment
    session: CartSession
    variables: dict[str, str] = field(default_factory=dict)
    rtlog_files: list[str] = field(default_factory=list)

    def resolve(self, text: str) -> str:
        def sub(m: re.Match) -> str:
            name = m.group(1)
            if name == "order_no":
                return self.session.order_no or ""
            if name == "session_id":
                return self.session.session_id
            if name not in self.variables:
                raise KeyError(f"undefined variable ${{{name}}}")
            return self.variables[name]

        return _VAR_RE.sub(sub, text)


@dataclass(frozen=True)
class AssertionOutcome:
    assertion: Assertion
    passed: bool
    observed: str
    message: str = ""


class AssertionSetupError(ValueError):
    pass


# --- value checks ------------------------------------------------------------

_CHECKS = ("equals", "matches", "contains", "mask_of", "absent")


def _check(observed: str | None, params: dict[str, str]) -> tuple[bool, str]:
    """Apply the single comparison named in ``params``; return (ok, expectation)."""
    named = [c for c in _CHECKS if c in params]
    if len(named) > 1:
        raise AssertionSetupError(f"only one of {_CHECKS} may be given, got {named}")
    if not named:
        return observed is not None, "present"
    check, want = named[0], params[named[0]]
    if check == "absent":
        return observed is None, "absent"
    if observed is None:
        return False, f"{check} {want!r}"
    if check == "equals":
        return observed == want, f"== {want!r}"
    if check == "matches":
        return re.fullmatch(want, observed) is not None, f"matches /{want}/"
    if check == "contains":
        return want in observed, f"contains {want!r}"
    return observed == mask_pan(Pan(want)).text, f"== mask({mask_pan(Pan(want)).text})"


# --- trace field extraction --------------------------------------------------


def _decode(kind: str, raw: bytes) -> dict[str, Any]:
    if kind == Kind.ORDER_FEED.value and raw.startswith(b"<"):
        return wire.feed_fields(raw)
    if kind == Kind.STATUS_SYNC.value and b"|" in raw:
        order_no, status = wire.parse_status_sync(raw)
        return {"order_no": order_no, "status": status}
    try:
        value = wire.loads(raw)
    except ValueError:
        return {"*": raw.decode("utf-8", "replace")}
    return value if isinstance(value, dict) else {"*": value}


def envelope_field(env: Envelope, name: str, response: bool) -> str | None:
    if response:
        if env.transport_error:
            return "ERR" if name == "*" else None
        raw = env.reply or b""
    else:
        raw = env.payload
    if name == "*":
        return raw.decode("utf-8", "replace")
    value: Any = _decode(env.kind, raw)
    for part in name.split("."):
        if not isinstance(value, dict) or part not in value:
            return None
        value = value[part]
    if value is None:
        return None
    return value if isinstance(value, str) else str(value)


def _trace_field(ctx: RunContext, params: dict[str, str], response: bool) -> tuple[bool, str]:
    selected = query(ctx.env.bus.trace, src=params.get("from"), dst=params.get("to"), kind=params.get("kind"))
    name = params.get("field", "*")
    if "count" in params:
        want = int(params["count"])
        if any(c in params for c in _CHECKS) or "field" in params:
            n = sum(1 for e in selected if _check(envelope_field(e, name, response), params)[0])
        else:
            n = len(selected)
        return n == want, f"count={n}"
    index = int(params.get("index", "-1"))
    try:
        env = selected[index]
    except IndexError:
        return False, f"<no envelope; {len(selected)} matched>"
    observed = envelope_field(env, name, response)
    ok, _ = _check(observed, params)
    return ok, f"seq {env.seq}: {observed if observed is not None else '<absent>'}"


def _trace_request(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    return _trace_field(ctx, params, response=False)


def _trace_response(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    return _trace_field(ctx, params, response=True)


def _no_envelope(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    selected = query(ctx.env.bus.trace, src=params.get("from"), dst=params.get("to"), kind=params.get("kind"))
    return not selected, f"count={len(selected)}"


def _order_status(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    system = params.get("system", "OMS")
    order_no = params.get("order") or ctx.session.order_no or ""
    name = params.get("field", "status")
    if system == "OLS":
        if name != "status":
            raise AssertionSetupError("OLS orders only expose 'status'")
        order = ctx.env.ols.orders.get(order_no)
        observed = order.status if order else None
    elif system == "OMS":
        order = ctx.env.oms.orders.get(order_no)
        if order is None:
            observed = None
        elif not hasattr(order, name):
            raise AssertionSetupError(f"OMS order has no field {name!r}")
        else:
            value = getattr(order, name)
            observed = None if value is None else getattr(value, "value", value)
    else:
        raise AssertionSetupError(f"system must be OLS or OMS, got {system!r}")
    ok, _ = _check(observed, params)
    return ok, f"{system} {order_no or '<no order>'} {name}={observed if observed is not None else '<absent>'}"


def _rtlog_contains(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    order_no = params.get("order") or ctx.session.order_no or ""
    code = params.get("code")
    item = params.get("item")
    hits = []
    for content in ctx.rtlog_files:
        for line in content.splitlines():
            parts = line.split("|")
            if parts[0] != "TTRAN" or len(parts) < 6 or parts[1] != order_no:
                continue
            if code and parts[2] != code:
                continue
            if item and parts[3] != item:
                continue
            hits.append(line)
    want = int(params.get("count", "0")) if "count" in params else None
    ok = (len(hits) == want) if want is not None else bool(hits)
    return ok, "; ".join(hits) if hits else f"<no TTRAN for {order_no}>"


def _inventory_equals(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    item = params["item"]
    soh = ctx.env.oms.inventory.get(item)
    observed = None if soh is None else str(soh)
    ok, _ = _check(observed, params)
    return ok, f"{item} SOH={observed if observed is not None else '<unknown item>'}"


def _session_error(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    observed = ctx.session.error
    ok, _ = _check(observed, params)
    return ok, observed if observed is not None else "<no error>"


def _session_value(session: CartSession, name: str) -> str | None:
    if name == "state":
        return session.state.value
    if name.startswith("availability."):
        status = session.availability.get(name.split(".", 1)[1])
        return status.value if status else None
    if name == "cart":
        return ",".join(f"{i}x{q}" for i, q in session.items) or None
    if name == "payment_status":
        return session.last_payment.status.value if session.last_payment else None
    if name in ("shipping_address", "billing_address"):
        addr = getattr(session, name)
        return f"{addr.name}, {addr.street}, {addr.city} {addr.postal}" if addr else None
    if name in ("browsed", "order_no", "customer_ip", "session_id"):
        return getattr(session, name)
    raise AssertionSetupError(f"unknown session field {name!r}")


def _session_field(ctx: RunContext, params: dict[str, str]) -> tuple[bool, str]:
    name = params["field"]
    observed = _session_value(ctx.session, name)
    ok, _ = _check(observed, params)
    return ok, f"{name}={observed if observed is not None else '<absent>'}"


EVALUATORS: dict[AssertionKind, Callable[[RunContext, dict[str, str]], tuple[bool, str]]] = {
    AssertionKind.TRACE_REQUEST_FIELD: _trace_request,
    AssertionKind.TRACE_RESPONSE_FIELD: _trace_response,
    AssertionKind.NO_ENVELOPE: _no_envelope,
    AssertionKind.ORDER_STATUS: _order_status,
    AssertionKind.RTLOG_CONTAINS: _rtlog_contains,
    AssertionKind.INVENTORY_EQUALS: _inventory_equals,
    AssertionKind.SESSION_ERROR: _session_error,
    AssertionKind.SESSION_FIELD: _session_field,
}


def evaluate(assertion: Assertion, ctx: RunContext) -> AssertionOutcome:
    try:
        params = {k: ctx.resolve(v) for k, v in assertion.params.items()}
        ok, observed = EVALUATORS[assertion.kind](ctx, params)
    except (AssertionSetupError, KeyError, ValueError) as exc:
        return AssertionOutcome(assertion, False, "<error>", f"cannot evaluate: {exc}")
    return AssertionOutcome(assertion, ok, observed, "" if ok else f"expected {assertion.describe()}")
