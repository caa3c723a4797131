"""Construct a fully integrated simulated environment from a config."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from typing import Mapping

from itb.backoffice import Oms, Resa
from itb.domain import DEFAULT_BIN_TABLE, DEFAULT_NOW, Money, SimClock, check_bin_table
from itb.netsim import Availability, Bus, ServiceId, check_availability_pair
from itb.storefront import CatalogItem, FraudEngine, FraudRule, Gateway, Merchant, Storefront, TaxService, ip_rule
from itb.wire import Address

DEFAULT_ITEM = "SKU-1001"
FRAUD_IP = "10.1.1.1"
CLEAN_IP = "192.0.2.10"
DEFAULT_SHIP_TO = Address("Pat Buyer", "12 Main St", "Springfield", "10001")
DEFAULT_BILL_TO = Address("Pat Buyer", "12 Main St", "Springfield", "10001")


@dataclass(frozen=True)
class ItemSeed:
    title: str
    price: int
    soh: int


def default_items() -> dict[str, ItemSeed]:
    return {
        DEFAULT_ITEM: ItemSeed("Cotton crew-neck sweater", 4999, 10),
        "SKU-2002": ItemSeed("Leather belt", 2500, 25),
    }


def default_fraud_rules() -> list[FraudRule]:
    return [ip_rule("FR-IP-001", [FRAUD_IP])]


@dataclass
class EnvConfig:
    clock: datetime = DEFAULT_NOW
    bin_table: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_BIN_TABLE))
    fraud_rules: list[FraudRule] = field(default_factory=default_fraud_rules)
    tax_rate: Decimal = Decimal("0.08")
    items: dict[str, ItemSeed] = field(default_factory=default_items)
    availability: dict[ServiceId, Availability] = field(default_factory=dict)
    # last four digits -> billing postal code on file with the card issuer
    address_directory: dict[str, str] = field(default_factory=lambda: {"4345": "10001"})

    def with_faults(self, faults: Mapping[ServiceId | str, Availability | str]) -> "EnvConfig":
        merged = dict(self.availability)
        for svc, state in faults.items():
            svc, state = check_availability_pair(svc, state)
            merged[svc] = state
        return EnvConfig(
            self.clock,
            dict(self.bin_table),
            list(self.fraud_rules),
            self.tax_rate,
            dict(self.items),
            merged,
            dict(self.address_directory),
        )


class Environment:
    """All seven services on one bus, plus the shared clock."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config = config or EnvConfig()
        check_bin_table(config.bin_table)
        self.clock = SimClock(config.clock)
        self.bus = Bus()
        catalog = {k: CatalogItem(k, v.title, Money(v.price)) for k, v in config.items.items()}
        self.ols = Storefront(self.bus, catalog)
        self.gateway = Gateway(self.bus)
        self.merchant = Merchant(self.clock, config.bin_table, config.address_directory)
        self.fraud = FraudEngine(config.fraud_rules)
        self.tax = TaxService(config.tax_rate)
        self.oms = Oms(self.bus, self.clock, {k: v.soh for k, v in config.items.items()})
        self.resa = Resa(self.bus)
        for svc, handler in (
            (ServiceId.OLS, self.ols.handle),
            (ServiceId.WEBSVC, self.gateway.handle),
            (ServiceId.MERCHANT, self.merchant.handle),
            (ServiceId.FRAUD, self.fraud.handle),
            (ServiceId.TAX, self.tax.handle),
            (ServiceId.OMS, self.oms.handle),
            (ServiceId.RESA, self.resa.handle),
        ):
            self.bus.register(svc, handler)
        for svc, state in config.availability.items():
            self.bus.set_availability(svc, state)

    def set_availability(self, svc: ServiceId | str, state: Availability | str) -> None:
        self.bus.set_availability(svc, state)
