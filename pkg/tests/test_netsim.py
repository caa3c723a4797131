from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from itb.domain import ConfigurationError
from itb.netsim import (
    Availability,
    Bus,
    Envelope,
    Kind,
    ServiceId,
    TransportError,
    check_availability_pair,
    export_trace,
    parse_trace,
    query,
)
from itb.wire import (
    Address,
    FeedLine,
    FeedRejected,
    OrderFeed,
    build_order_feed,
    dumps,
    feed_fields,
    loads,
    parse_order_feed,
    parse_status_sync,
    status_sync,
)


def echo_bus() -> Bus:
    bus = Bus()
    for svc in ServiceId:
        bus.register(svc, lambda src, kind, payload, svc=svc: svc.value.encode() + b":" + payload)
    return bus


def test_send_traces_request_and_reply():
    bus = echo_bus()
    assert bus.send(ServiceId.OLS, ServiceId.TAX, Kind.TAX_QUOTE, b"x") == b"TAX:x"
    (env,) = bus.trace
    assert (env.seq, env.src, env.dst, env.kind, env.payload, env.reply) == (
        1,
        ServiceId.OLS,
        ServiceId.TAX,
        "TAX_QUOTE",
        b"x",
        b"TAX:x",
    )
    assert not env.transport_error


def test_down_target_raises_and_is_traced():
    bus = echo_bus()
    bus.set_availability("WEBSVC", "DOWN")
    with pytest.raises(TransportError) as err:
        bus.send(ServiceId.OLS, ServiceId.WEBSVC, Kind.PAYMENT, b"p")
    assert err.value.seq == 1
    (env,) = bus.trace
    assert env.transport_error and env.reply is None
    assert bus.invocations[ServiceId.WEBSVC] == 0


def test_offline_still_delivers():
    bus = echo_bus()
    bus.set_availability(ServiceId.FRAUD, Availability.OFFLINE)
    assert bus.send(ServiceId.OMS, ServiceId.FRAUD, Kind.FRAUD_SCREEN, b"o") == b"FRAUD:o"


@pytest.mark.parametrize("svc", [s for s in ServiceId if s is not ServiceId.FRAUD])
def test_offline_only_for_fraud(svc):
    with pytest.raises(ConfigurationError):
        check_availability_pair(svc, Availability.OFFLINE)


def test_unknown_service_or_state():
    with pytest.raises(ConfigurationError):
        check_availability_pair("BANK", "UP")
    with pytest.raises(ConfigurationError):
        check_availability_pair("OMS", "SLEEPY")


def test_nested_sends_get_later_sequence_numbers():
    bus = Bus()
    for svc in ServiceId:
        bus.register(svc, lambda src, kind, payload: b"ok")
    bus.register(ServiceId.WEBSVC, lambda src, kind, payload: bus.send(ServiceId.WEBSVC, ServiceId.MERCHANT, "AUTH", payload))
    bus.send(ServiceId.OLS, ServiceId.WEBSVC, Kind.PAYMENT, b"p")
    assert [(e.seq, e.dst.value) for e in bus.trace] == [(1, "WEBSVC"), (2, "MERCHANT")]
    assert bus.trace[0].reply == b"ok"


def test_query_filters():
    bus = echo_bus()
    bus.send(ServiceId.OLS, ServiceId.OMS, Kind.AVAILABILITY, b"a")
    bus.send(ServiceId.OLS, ServiceId.OMS, Kind.ORDER_FEED, b"f")
    bus.send(ServiceId.OMS, ServiceId.OLS, Kind.STATUS_SYNC, b"s")
    assert [e.seq for e in bus.trace_query(dst="OMS")] == [1, 2]
    assert [e.seq for e in query(bus.trace, src=ServiceId.OMS)] == [3]
    assert [e.seq for e in query(bus.trace, kind=Kind.ORDER_FEED)] == [2]


envelopes = st.builds(
    lambda seq, src, dst, kind, payload, reply: Envelope(seq, src, dst, kind, payload, reply, reply is None),
    st.integers(1, 10_000),
    st.sampled_from(list(ServiceId)),
    st.sampled_from(list(ServiceId)),
    st.sampled_from([k.value for k in Kind]),
    st.binary(max_size=40),
    st.none() | st.binary(max_size=40),
)


@given(st.lists(envelopes, max_size=20))
def test_trace_export_round_trip(envs):
    text = export_trace(envs)
    assert parse_trace(text) == envs
    assert export_trace(parse_trace(text)) == text


def test_export_line_format():
    env = Envelope(7, ServiceId.OMS, ServiceId.OLS, "STATUS_SYNC", b"W1|Cancelled", b"ACK")
    assert env.export_line() == "7|OMS|OLS|STATUS_SYNC|57317c43616e63656c6c6564|41434b"
    err = Envelope(8, ServiceId.OLS, ServiceId.TAX, "TAX_QUOTE", b"{}", None, True)
    assert err.export_line().endswith("|ERR")


def test_parse_trace_rejects_short_lines():
    with pytest.raises(ValueError):
        parse_trace("1|OLS|OMS|X|00\n")


# --- wire -------------------------------------------------------------------


def sample_feed(**over) -> OrderFeed:
    addr = Address("Pat Buyer", "12 Main St", "Springfield", "10001")
    base = dict(
        order_no="W000000001",
        status="Created",
        fraud_check_ind="N",
        customer_ip="10.1.1.1",
        lines=(FeedLine("SKU-1001", 1, 4999),),
        tax=400,
        total=5399,
        ship_to=addr,
        bill_to=addr,
    )
    base.update(over)
    return OrderFeed(**base)


def test_json_is_canonical():
    assert dumps({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'
    assert loads(dumps({"x": "y"})) == {"x": "y"}


def test_feed_round_trip_and_shape():
    raw = build_order_feed(sample_feed())
    assert not raw.startswith(b"<?xml")
    assert b'<Line itemId="SKU-1001" qty="1" unitPrice="4999" />' in raw
    assert parse_order_feed(raw) == sample_feed()
    fields = feed_fields(raw)
    assert fields["FraudCheckInd"] == "N" and fields["Status"] == "Created"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda s: s.replace("<FraudCheckInd>N</FraudCheckInd>", "<FraudCheckInd>X</FraudCheckInd>"),
        lambda s: s.replace("<Status>Created</Status>", "<Status>Open</Status>"),
        lambda s: s.replace("<Tax>400</Tax>", "<Tax>04</Tax>"),
        lambda s: s.replace("<Tax>400</Tax>", ""),
        lambda s: s[:-5],
    ],
)
def test_feed_schema_violations(mutate):
    raw = build_order_feed(sample_feed()).decode()
    with pytest.raises(FeedRejected):
        parse_order_feed(mutate(raw).encode())


def test_status_sync_round_trip():
    assert parse_status_sync(status_sync("W000000001", "Cancelled")) == ("W000000001", "Cancelled")
