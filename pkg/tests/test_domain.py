from __future__ import annotations

import calendar
from datetime import date, datetime, timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from itb.domain import (
    DEFAULT_BIN_TABLE,
    CardDetails,
    ConfigurationError,
    Money,
    Pan,
    SimClock,
    StockOnHand,
    YearMonth,
    bin_in_network,
    check_bin_table,
    expired_at,
    mask_pan,
    parse_bin_table,
    prefix_in_network,
)

pans = st.text(alphabet="0123456789", min_size=12, max_size=19)


def test_mask_keeps_last_four_only():
    assert mask_pan(Pan("7978998767854345")).text == "************4345"
    assert mask_pan(Pan("421323876785")).text == "********6785"


def test_pan_repr_and_str_do_not_leak():
    pan = Pan("4213238767854345")
    assert "42132387" not in repr(pan)
    assert str(pan) == "************4345"


@pytest.mark.parametrize("bad", ["", "12345678901", "12345678901234567890", "4213-2387-6785-4345", 4213238767854345])
def test_pan_rejects_malformed(bad):
    with pytest.raises(ValueError):
        Pan(bad)


@given(pans)
def test_mask_invariant(digits):
    masked = mask_pan(Pan(digits)).text
    assert len(masked) == len(digits)
    assert masked[-4:] == digits[-4:]
    assert set(masked[:-4]) <= {"*"}


def test_bin_membership_against_default_table():
    assert bin_in_network(Pan("4213238767854345"), "VISA")
    assert not bin_in_network(Pan("7978998767854345"), "VISA")
    assert DEFAULT_BIN_TABLE["VISA"] == ("4",)


def test_prefix_shorter_than_range_is_a_miss():
    table = {"VISA": ("421323",)}
    assert prefix_in_network("4213238", "VISA", table)
    assert not prefix_in_network("4213", "VISA", table)


def test_unknown_network_is_configuration_error():
    with pytest.raises(ConfigurationError):
        prefix_in_network("4", "AMEX")


@pytest.mark.parametrize("table", [{"VISA": ()}, {"VISA": ("4x",)}, {"VISA": ("1234567",)}])
def test_bin_table_validation(table):
    with pytest.raises(ConfigurationError):
        check_bin_table(table)


def test_parse_bin_table():
    text = "# ranges\nVISA=4, 49\n\nPRIVATE=7978  # store card\n"
    assert parse_bin_table(text) == {"VISA": ("4", "49"), "PRIVATE": ("7978",)}
    with pytest.raises(ConfigurationError):
        parse_bin_table("VISA 4")


def test_year_month_parsing():
    assert YearMonth.parse("05/2012") == YearMonth(2012, 5)
    assert YearMonth.parse("2012-05") == YearMonth(2012, 5)
    assert YearMonth(2012, 2).last_day() == date(2012, 2, 29)
    assert str(YearMonth(2012, 5)) == "05/2012"
    for bad in ("13/2012", "2012/05", "5-2012"):
        with pytest.raises(ValueError):
            YearMonth.parse(bad)


def test_expiry_boundary():
    # valid through the last day of the month
    exp = YearMonth(2012, 5)
    assert not expired_at(exp, datetime(2012, 5, 31, 23, 59))
    assert expired_at(exp, datetime(2012, 6, 1))


@given(
    st.integers(2000, 2030),
    st.integers(1, 12),
    st.datetimes(min_value=datetime(1999, 1, 1), max_value=datetime(2032, 1, 1)),
    st.integers(0, 4000),
)
def test_expiry_is_monotone_in_time(year, month, now, days):
    exp = YearMonth(year, month)
    later = now + timedelta(days=days)
    if expired_at(exp, now):
        assert expired_at(exp, later)
    # oracle: expired iff strictly past the month's last calendar day
    last = date(year, month, calendar.monthrange(year, month)[1])
    assert expired_at(exp, now) == (now.date() > last)


def test_card_details_of():
    card = CardDetails.of("VISA", "4213238767854345", "05/2012")
    assert card.expiry == YearMonth(2012, 5)
    with pytest.raises(ValueError):
        CardDetails.of("DISCOVER", "4213238767854345", "05/2012")


def test_money_rules():
    assert (Money(100) + Money(250)).amount == 350
    assert Money(4999).times(3) == Money(14997)
    with pytest.raises(ValueError):
        Money(-1)
    with pytest.raises(ValueError):
        Money(1, "usd")
    with pytest.raises(ValueError):
        Money(1, "USD") + Money(1, "EUR")


def test_stock_on_hand_non_negative():
    with pytest.raises(ValueError):
        StockOnHand("SKU-1", -1)


def test_clock_never_moves_backwards():
    clock = SimClock()
    clock.advance_to(datetime(2013, 1, 1))
    assert clock.iso() == "2013-01-01T00:00:00"
    with pytest.raises(ValueError):
        clock.advance_to(datetime(2012, 12, 31))
