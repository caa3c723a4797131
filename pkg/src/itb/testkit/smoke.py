"""End-to-end smoke test gating the start of integration cycles."""

from __future__ import annotations

from dataclasses import dataclass

from itb.backoffice import OrderStatus, RtlogRejected
from itb.domain import CardDetails
from itb.env import CLEAN_IP, DEFAULT_BILL_TO, DEFAULT_SHIP_TO, Environment
from itb.netsim import Kind, ServiceId, TransportError
from itb.storefront import PaymentStatus, StockStatus, StorefrontError


@dataclass(frozen=True)
class SmokeResult:
    passed: bool
    boundary: str | None = None
    detail: str = ""


def smoke_card(env: Environment) -> CardDetails:
    """A card inside the first configured BIN range that is valid for two more years."""
    network, prefixes = next(iter(env.config.bin_table.items()))
    digits = (prefixes[0] + "0" * 16)[:12] + "1111"
    return CardDetails.of(network, digits, f"12/{env.clock.now.year + 2}")


def run_smoke(env: Environment, customer_ip: str = CLEAN_IP) -> SmokeResult:
    """Happy-path order: valid card, clean IP, screened and released, ORDF logged."""
    ols = env.ols
    item = next((i for i, s in sorted(env.config.items.items()) if s.soh >= 1), None)
    if item is None:
        return SmokeResult(False, "inventory", "no item with stock on hand")
    session = ols.new_session(customer_ip)
    try:
        if ols.check_availability(session, item) is not StockStatus.AVAILABLE:
            return SmokeResult(False, "OLS>OMS availability", f"{item} reported unavailable")
        ols.add_to_cart(session, item)
        ols.checkout(session)
        ols.set_addresses(session, DEFAULT_SHIP_TO, DEFAULT_BILL_TO)
        outcome = ols.submit_payment(session, smoke_card(env))
        if outcome.status is not PaymentStatus.ACCEPTED:
            return SmokeResult(False, "OLS>WEBSVC>MERCHANT payment", f"{outcome.status.value}: {outcome.reason}")
        order_no = ols.place_order(session)
    except StorefrontError as exc:
        boundary = "OLS>OMS availability" if session.state.value == "Browsing" else "OLS order placement"
        return SmokeResult(False, boundary, str(exc))

    env.oms.run_fraud_batch()
    order = env.oms.orders[order_no]
    if order.status is not OrderStatus.RELEASED:
        screens = env.bus.trace_query(dst=ServiceId.FRAUD, kind=Kind.FRAUD_SCREEN.value)
        if screens and all(e.transport_error for e in screens):
            return SmokeResult(False, "OMS>FRAUD screening", "screening-unavailable: fraud engine did not answer")
        return SmokeResult(False, "OMS>FRAUD screening", f"order {order_no} is {order.status.value}")
    if ols.order_status(order_no) != OrderStatus.RELEASED.value:
        return SmokeResult(False, "OMS>OLS status sync", f"OLS shows {ols.order_status(order_no)}")
    rtlog = env.oms.emit_rtlog()
    if f"|{order_no}|ORDF|" not in rtlog:
        return SmokeResult(False, "OMS>RTLOG", f"no ORDF record for {order_no}")
    try:
        env.resa.ingest(rtlog)
    except (RtlogRejected, TransportError) as exc:
        return SmokeResult(False, "RTLOG>ReSA", str(exc))
    return SmokeResult(True, None, f"order {order_no} released")
