"""Value types shared by every simulated service.

Everything here is immutable and side-effect free.
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import Mapping


class ConfigurationError(ValueError):
    """Raised when an environment or table is configured inconsistently."""


class Network(str, Enum):
    VISA = "VISA"


# Leading-digit prefixes per network. Environments may pass their own table.
DEFAULT_BIN_TABLE: Mapping[str, tuple[str, ...]] = {"VISA": ("4",)}

_PAN_RE = re.compile(r"[0-9]{12,19}")


@dataclass(frozen=True)
class Pan:
    digits: str

    def __post_init__(self) -> None:
        if not isinstance(self.digits, str) or not _PAN_RE.fullmatch(self.digits):
            raise ValueError(f"PAN must be 12-19 decimal digits, got {self.digits!r}")

    @property
    def last4(self) -> str:
        return self.digits[-4:]

    def __str__(self) -> str:
        # keep raw digits out of logs and reprs by default
        return mask_pan(self).text

    def __repr__(self) -> str:
        return f"Pan({mask_pan(self).text!r})"


@dataclass(frozen=True, order=True)
class YearMonth:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if not 1 <= self.year <= 9999:
            raise ValueError(f"year out of range: {self.year}")

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        """Accept ``MM/YYYY`` (as printed on cards) or ``YYYY-MM``."""
        text = text.strip()
        m = re.fullmatch(r"(\d{1,2})/(\d{4})", text)
        if m:
            return cls(int(m.group(2)), int(m.group(1)))
        m = re.fullmatch(r"(\d{4})-(\d{1,2})", text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        raise ValueError(f"unrecognised expiry {text!r}")

    def last_day(self) -> date:
        return date(self.year, self.month, calendar.monthrange(self.year, self.month)[1])

    def iso(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def __str__(self) -> str:
        return f"{self.month:02d}/{self.year:04d}"


@dataclass(frozen=True)
class CardDetails:
    network: Network
    pan: Pan
    expiry: YearMonth

    @classmethod
    def of(cls, network: str, pan: str, expiry: str) -> "CardDetails":
        return cls(Network(network), Pan(pan), YearMonth.parse(expiry))


@dataclass(frozen=True)
class MaskedPan:
    text: str

    @property
    def last4(self) -> str:
        return self.text[-4:]


@dataclass(frozen=True)
class Money:
    amount: int
    currency: str = "USD"

    def __post_init__(self) -> None:
        if not isinstance(self.amount, int) or self.amount < 0:
            raise ValueError(f"amount must be a non-negative integer of minor units, got {self.amount!r}")
        if not re.fullmatch(r"[A-Z]{3}", self.currency):
            raise ValueError(f"bad currency code {self.currency!r}")

    def __add__(self, other: "Money") -> "Money":
        if other.currency != self.currency:
            raise ValueError("currency mismatch")
        return Money(self.amount + other.amount, self.currency)

    def times(self, n: int) -> "Money":
        return Money(self.amount * n, self.currency)


@dataclass(frozen=True)
class StockOnHand:
    item_id: str
    quantity: int

    def __post_init__(self) -> None:
        if self.quantity < 0:
            raise ValueError("stock on hand cannot be negative")


DEFAULT_NOW = datetime(2012, 1, 1)


@dataclass
class SimClock:
    """Simulation time. Never moves backwards."""

    now: datetime = field(default=DEFAULT_NOW)

    def advance_to(self, when: datetime) -> None:
        if when < self.now:
            raise ValueError(f"clock cannot move backwards ({when} < {self.now})")
        self.now = when

    def iso(self) -> str:
        return self.now.isoformat(timespec="seconds")


def mask_pan(pan: Pan) -> MaskedPan:
    digits = pan.digits
    return MaskedPan("*" * (len(digits) - 4) + digits[-4:])


def check_bin_table(table: Mapping[str, tuple[str, ...]]) -> None:
    for network, prefixes in table.items():
        if not prefixes:
            raise ConfigurationError(f"BIN table entry for {network} is empty")
        for p in prefixes:
            if not re.fullmatch(r"[0-9]{1,6}", p):
                raise ConfigurationError(f"bad BIN prefix {p!r} for {network}")


def prefix_in_network(prefix: str, network: str, bin_table: Mapping[str, tuple[str, ...]] = DEFAULT_BIN_TABLE) -> bool:
    """True iff ``prefix`` (leading PAN digits) starts with one of the network's BIN prefixes.

    A table prefix longer than the supplied digits cannot be confirmed and
    counts as a miss.
    """
    key = network.value if isinstance(network, Network) else network
    try:
        ranges = bin_table[key]
    except KeyError:
        raise ConfigurationError(f"network {key!r} has no BIN table entry") from None
    return any(prefix.startswith(r) for r in ranges)


def bin_in_network(pan: Pan, network: str, bin_table: Mapping[str, tuple[str, ...]] = DEFAULT_BIN_TABLE) -> bool:
    return prefix_in_network(pan.digits, network, bin_table)


def is_expired(card: CardDetails, clock: SimClock) -> bool:
    return expired_at(card.expiry, clock.now)


def expired_at(expiry: YearMonth, now: datetime) -> bool:
    # valid through the last day of the expiry month
    return expiry.last_day() < now.date()


def parse_bin_table(text: str) -> dict[str, tuple[str, ...]]:
    """Parse ``NETWORK=prefix,prefix`` lines (``#`` comments allowed)."""
    table: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected NETWORK=prefixes")
        name, _, rest = line.partition("=")
        table[name.strip()] = tuple(p.strip() for p in rest.split(",") if p.strip())
    check_bin_table(table)
    return table
