from __future__ import annotations

from datetime import datetime
from decimal import Decimal

import pytest

from itb import wire
from itb.domain import CardDetails, ConfigurationError, Money, SimClock
from itb.env import CLEAN_IP, DEFAULT_BILL_TO, DEFAULT_SHIP_TO, FRAUD_IP, EnvConfig, Environment
from itb.netsim import Kind, ServiceId
from itb.storefront import (
    DECLINE_BIN_REASON,
    EXPIRED_REASON,
    GATEWAY_UNAVAILABLE_REASON,
    AuthRequest,
    AuthResponse,
    Avs,
    AvailabilityUnknown,
    InvalidSessionState,
    PaymentStatus,
    PlacementRefused,
    SessionState,
    StockStatus,
    UnknownItem,
    fraud_screen,
    ip_rule,
    merchant_authorize,
    parse_fraud_list,
    tax_quote,
)
from itb.wire import Address

GOOD = CardDetails.of("VISA", "4213238767854345", "05/2012")
OUT_OF_RANGE = CardDetails.of("VISA", "7978998767854345", "05/2012")


def to_payment(env: Environment, ip: str = CLEAN_IP):
    s = env.ols.new_session(ip)
    env.ols.add_to_cart(s, "SKU-1001")
    env.ols.checkout(s)
    env.ols.set_addresses(s, DEFAULT_SHIP_TO, DEFAULT_BILL_TO)
    return s


# --- merchant ---------------------------------------------------------------


def test_merchant_decline_out_of_range():
    resp = merchant_authorize(AuthRequest.for_card(OUT_OF_RANGE, Money(4999)), SimClock())
    assert (resp.code, resp.reason, resp.avs) == ("227", DECLINE_BIN_REASON, None)


def test_merchant_approves_with_avs():
    clock = SimClock()
    directory = {"4345": "10001"}
    cases = {"10001": Avs.MATCH, "99999": Avs.NO_MATCH, "": Avs.UNAVAILABLE}
    for postal, avs in cases.items():
        resp = merchant_authorize(AuthRequest.for_card(GOOD, Money(1), postal), clock, address_directory=directory)
        assert resp.code == "00" and resp.avs is avs


def test_merchant_expired_after_bin_check():
    late = SimClock(datetime(2013, 1, 1))
    assert merchant_authorize(AuthRequest.for_card(GOOD, Money(1)), late).code == "EXPIRED"
    assert merchant_authorize(AuthRequest.for_card(GOOD, Money(1)), late).reason == EXPIRED_REASON
    # BIN range is checked first
    assert merchant_authorize(AuthRequest.for_card(OUT_OF_RANGE, Money(1)), late).code == "227"


def test_auth_response_invariants():
    with pytest.raises(ValueError):
        AuthResponse("00", "ok")
    with pytest.raises(ValueError):
        AuthResponse("227", "nope")


def test_auth_request_carries_no_full_pan():
    req = AuthRequest.for_card(GOOD, Money(4999), "10001")
    payload = req.to_payload()
    assert b"4213238767854345" not in payload
    assert req.bin_prefix == "4213" and req.masked == "************4345"
    assert AuthRequest.from_payload(payload) == req


# --- fraud, tax -------------------------------------------------------------


def test_fraud_screen_rules():
    rules = [ip_rule("FR-IP-001", ["10.1.1.1"]), ip_rule("FR-IP-002", ["10.2.2.2"])]
    assert fraud_screen("W1", "10.2.2.2", rules).rule_id == "FR-IP-002"
    assert fraud_screen("W1", "10.2.2.2", rules).code == "N"
    assert fraud_screen("W1", "192.0.2.1", rules).code == "Y"
    with pytest.raises(ConfigurationError):
        ip_rule("BAD", ["not-an-ip"])


def test_parse_fraud_list():
    rules = parse_fraud_list("# blocked\nFR-1=10.1.1.1, 10.1.1.2\nFR-2=10.9.9.9\n")
    assert [r.rule_id for r in rules] == ["FR-1", "FR-2"]
    assert rules[0].ips == frozenset({"10.1.1.1", "10.1.1.2"})
    with pytest.raises(ConfigurationError):
        parse_fraud_list("10.1.1.1")


@pytest.mark.parametrize(
    "subtotal, rate, expected",
    [(4999, "0.08", 400), (4999, "0", 0), (1250, "0.1", 125), (5, "0.1", 1), (4, "0.125", 1), (3, "0.125", 0)],
)
def test_tax_rounds_half_up(subtotal, rate, expected):
    assert tax_quote(Money(subtotal), Decimal(rate)).tax.amount == expected


# --- OLS --------------------------------------------------------------------


def test_happy_path_places_order():
    env = Environment()
    s = to_payment(env)
    assert env.ols.submit_payment(s, GOOD).status is PaymentStatus.ACCEPTED
    order_no = env.ols.place_order(s)
    assert order_no == "W000000001" and s.state is SessionState.PLACED
    feed = wire.parse_order_feed(env.bus.trace_query(kind=Kind.ORDER_FEED)[0].payload)
    assert feed.fraud_check_ind == "Y"
    assert (feed.tax, feed.total) == (400, 5399)
    assert env.ols.order_status(order_no) == "Created"


def test_decline_then_retry():
    env = Environment()
    s = to_payment(env)
    out = env.ols.submit_payment(s, OUT_OF_RANGE)
    assert out.status is PaymentStatus.DECLINED and s.error == DECLINE_BIN_REASON
    assert s.state is SessionState.PAYMENT_ERROR
    assert env.ols.submit_payment(s, GOOD).code == "00"
    assert s.error is None


def test_websvc_down_is_gateway_unavailable():
    env = Environment(EnvConfig().with_faults({"WEBSVC": "DOWN"}))
    s = to_payment(env)
    out = env.ols.submit_payment(s, GOOD)
    assert out.status is PaymentStatus.GATEWAY_UNAVAILABLE and out.reason == GATEWAY_UNAVAILABLE_REASON
    assert not env.bus.trace_query(dst=ServiceId.MERCHANT)


def test_merchant_down_is_gateway_unavailable():
    env = Environment(EnvConfig().with_faults({"MERCHANT": "DOWN"}))
    s = to_payment(env)
    assert env.ols.submit_payment(s, GOOD).status is PaymentStatus.GATEWAY_UNAVAILABLE
    assert env.bus.trace_query(dst=ServiceId.MERCHANT)[0].transport_error


def test_tax_down_refuses_placement_without_feed():
    env = Environment(EnvConfig().with_faults({"TAX": "DOWN"}))
    s = to_payment(env)
    env.ols.submit_payment(s, GOOD)
    with pytest.raises(PlacementRefused) as err:
        env.ols.place_order(s)
    assert err.value.reason == "tax-unavailable"
    assert not env.bus.trace_query(src=ServiceId.OLS, dst=ServiceId.OMS, kind=Kind.ORDER_FEED)
    assert s.state is SessionState.PAYMENT_ACCEPTED


def test_oms_down_refuses_and_keeps_counter():
    env = Environment()
    s = to_payment(env)
    env.ols.submit_payment(s, GOOD)
    env.set_availability("OMS", "DOWN")
    with pytest.raises(PlacementRefused):
        env.ols.place_order(s)
    env.set_availability("OMS", "UP")
    assert env.ols.place_order(s) == "W000000001"


def test_availability_unknown_when_oms_down():
    env = Environment(EnvConfig().with_faults({"OMS": "DOWN"}))
    s = env.ols.new_session(CLEAN_IP)
    with pytest.raises(AvailabilityUnknown):
        env.ols.check_availability(s, "SKU-1001")
    assert "unknown" in s.error


def test_availability_reports_stock():
    env = Environment()
    s = env.ols.new_session(CLEAN_IP)
    assert env.ols.check_availability(s, "SKU-1001") is StockStatus.AVAILABLE
    env.oms.adjust_inventory("SKU-1001", -10)
    assert env.ols.check_availability(s, "SKU-1001") is StockStatus.UNAVAILABLE
    with pytest.raises(UnknownItem):
        env.ols.check_availability(s, "SKU-0000")


def test_inline_fraud_hit_still_feeds_n():
    env = Environment()
    s = to_payment(env, FRAUD_IP)
    env.ols.submit_payment(s, GOOD)
    env.ols.place_order(s)
    assert wire.feed_fields(env.bus.trace_query(kind=Kind.ORDER_FEED)[0].payload)["FraudCheckInd"] == "N"


def test_fraud_offline_skips_inline_screening():
    env = Environment(EnvConfig().with_faults({"FRAUD": "OFFLINE"}))
    s = to_payment(env)
    env.ols.submit_payment(s, GOOD)
    env.ols.place_order(s)
    assert not env.bus.trace_query(src=ServiceId.OLS, dst=ServiceId.FRAUD)


def test_session_state_guards():
    env = Environment()
    s = env.ols.new_session(CLEAN_IP)
    with pytest.raises(InvalidSessionState):
        env.ols.checkout(s)
    with pytest.raises(InvalidSessionState):
        env.ols.submit_payment(s, GOOD)
    with pytest.raises(InvalidSessionState):
        env.ols.place_order(s)
    with pytest.raises(InvalidSessionState):
        env.ols.resubmit_payment(s)


def test_resubmit_after_accept_sends_nothing():
    env = Environment()
    s = to_payment(env)
    first = env.ols.submit_payment(s, GOOD)
    before = len(env.bus.trace)
    assert env.ols.resubmit_payment(s) == first
    assert len(env.bus.trace) == before


def test_addresses_may_be_changed_before_payment():
    env = Environment()
    s = to_payment(env)
    other = Address("Lee", "1 Side Rd", "Shelbyville", "20002")
    env.ols.set_addresses(s, other, other)
    assert s.billing_address.postal == "20002"
    assert env.ols.submit_payment(s, GOOD).avs is Avs.NO_MATCH
