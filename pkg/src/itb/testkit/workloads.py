"""Seeded random workloads for property checks.

Each generator takes a :class:`random.Random` so a seed reproduces the exact
same sessions, faults and traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from itb.backoffice import RtlogRejected
from itb.domain import CardDetails
from itb.env import DEFAULT_BILL_TO, DEFAULT_SHIP_TO, EnvConfig, Environment, ItemSeed
from itb.netsim import Availability, Envelope, ServiceId, TransportError
from itb.storefront import StorefrontError, ip_rule

FAULTABLE = tuple(ServiceId)


def random_pan(rng: random.Random) -> str:
    length = rng.randint(12, 19)
    first = rng.choice("4" * 3 + "123567890")
    return first + "".join(rng.choice("0123456789") for _ in range(length - 1))


def random_faults(rng: random.Random, p_fault: float = 0.3) -> dict[str, str]:
    faults = {}
    for svc in FAULTABLE:
        if rng.random() < p_fault:
            states = [Availability.DOWN]
            if svc is ServiceId.FRAUD:
                states.append(Availability.OFFLINE)
            faults[svc.value] = rng.choice(states).value
    return faults


@dataclass
class SessionRun:
    env: Environment
    pans: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def trace(self) -> tuple[Envelope, ...]:
        return self.env.bus.trace


def _attempt(run: SessionRun, fn, *args):
    try:
        return fn(*args)
    except (StorefrontError, TransportError, RtlogRejected) as exc:
        run.errors.append(type(exc).__name__)
        return None


def random_session(rng: random.Random) -> SessionRun:
    """One customer session with random cards and faults, driven to the end of the pipeline."""
    cfg = EnvConfig(clock=EnvConfig().clock.replace(year=rng.choice((2012, 2013))))
    env = Environment(cfg.with_faults(random_faults(rng)))
    run = SessionRun(env)
    ols = env.ols
    ip = rng.choice(("10.1.1.1", "192.0.2.10", "198.51.100.7"))
    session = ols.new_session(ip)
    item = rng.choice(sorted(cfg.items))
    _attempt(run, ols.browse, session, item)
    _attempt(run, ols.check_availability, session, item)
    _attempt(run, ols.add_to_cart, session, item, rng.randint(1, 3))
    _attempt(run, ols.checkout, session)
    _attempt(run, ols.set_addresses, session, DEFAULT_SHIP_TO, DEFAULT_BILL_TO)
    for _ in range(rng.randint(1, 3)):
        pan = random_pan(rng)
        run.pans.append(pan)
        card = CardDetails.of("VISA", pan, f"{rng.randint(1, 12):02d}/{rng.randint(2011, 2016)}")
        _attempt(run, ols.submit_payment, session, card)
        if rng.random() < 0.3:
            _attempt(run, ols.resubmit_payment, session)
    if rng.random() < 0.3:
        # faults may also change mid-session
        svc = rng.choice(FAULTABLE)
        env.set_availability(svc, rng.choice(("UP", "DOWN")))
    _attempt(run, ols.place_order, session)
    _attempt(run, env.oms.run_fraud_batch)
    rtlog = env.oms.emit_rtlog()
    _attempt(run, env.resa.ingest, rtlog)
    return run


@dataclass(frozen=True)
class PlannedOrder:
    ip: str
    item_id: str
    qty: int


@dataclass(frozen=True)
class OrderBatch:
    seed_soh: dict[str, int]
    fraud_ips: frozenset[str]
    orders: tuple[PlannedOrder, ...]
    fraud_offline: bool


def random_batch(rng: random.Random, max_orders: int = 50) -> OrderBatch:
    items = {"SKU-1001": rng.randint(150, 300), "SKU-2002": rng.randint(150, 300)}
    ips = [f"10.0.{rng.randint(0, 3)}.{i}" for i in range(1, 13)]
    fraud_ips = frozenset(ip for ip in ips if rng.random() < 0.35)
    orders = tuple(
        PlannedOrder(rng.choice(ips), rng.choice(sorted(items)), rng.randint(1, 3))
        for _ in range(rng.randint(1, max_orders))
    )
    return OrderBatch(items, fraud_ips, orders, rng.random() < 0.5)


GOOD_CARD = CardDetails.of("VISA", "4213238767854345", "05/2012")


def run_batch(batch: OrderBatch, chunks: int = 1) -> Environment:
    """Place every order, then screen, log and audit in ``chunks`` rounds."""
    cfg = EnvConfig(
        fraud_rules=[ip_rule("FR-BATCH", sorted(batch.fraud_ips))] if batch.fraud_ips else [],
        items={k: ItemSeed(k, 1000, v) for k, v in batch.seed_soh.items()},
    )
    if batch.fraud_offline:
        cfg = cfg.with_faults({"FRAUD": "OFFLINE"})
    env = Environment(cfg)
    step = max(1, -(-len(batch.orders) // chunks))
    for start in range(0, len(batch.orders), step):
        for order in batch.orders[start : start + step]:
            s = env.ols.new_session(order.ip)
            env.ols.add_to_cart(s, order.item_id, order.qty)
            env.ols.checkout(s)
            env.ols.set_addresses(s, DEFAULT_SHIP_TO, DEFAULT_BILL_TO)
            env.ols.submit_payment(s, GOOD_CARD)
            env.ols.place_order(s)
        env.oms.run_fraud_batch()
        env.resa.ingest(env.oms.emit_rtlog())
    return env
