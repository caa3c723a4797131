"""Order management, transaction log emission and sales audit.

OMS stores orders fed by OLS, screens the ones that arrive unscreened in an
explicitly triggered batch, pushes status changes back to OLS and queues one
RTLOG record per order line when an order is cancelled or released. ReSA
reads RTLOG files and applies the inventory effect through OMS.

RTLOG layout (pipe-delimited, one record per line)::

    FHEAD|<file-id>|<emit timestamp>
    TTRAN|<order_no>|<ORDC|ORDF>|<item_id>|<qty>|<timestamp>
    FTAIL|<count of TTRAN lines>
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from itb import wire
from itb.domain import SimClock, StockOnHand
from itb.netsim import Bus, Kind, ServiceId, TransportError
from itb.storefront import FraudResult
from itb.wire import FeedLine, FeedRejected


class OrderStatus(str, Enum):
    CREATED = "Created"
    CANCELLED = "Cancelled"
    RELEASED = "Released"


class FraudCleared(str, Enum):
    UNSET = "Unset"
    Y = "Y"
    N = "N"


class TxStatus(str, Enum):
    ORDC = "ORDC"  # order cancelled
    ORDF = "ORDF"  # order fulfilled


class UnknownItemError(KeyError):
    pass


@dataclass
class OmsOrder:
    order_no: str
    lines: tuple[FeedLine, ...]
    customer_ip: str
    fraud_check_ind: str
    fraud_cleared: FraudCleared = FraudCleared.UNSET
    status: OrderStatus = OrderStatus.CREATED
    fraud_rule: str | None = None


@dataclass(frozen=True)
class RtlogRecord:
    order_no: str
    tx_status: TxStatus
    item_id: str
    qty: int
    timestamp: str

    def line(self) -> str:
        return f"TTRAN|{self.order_no}|{self.tx_status.value}|{self.item_id}|{self.qty}|{self.timestamp}"


@dataclass(frozen=True)
class BatchOutcome:
    order_no: str
    result: str  # "Y", "N", or "UNAVAILABLE"
    rule_id: str | None = None


class Oms:
    def __init__(self, bus: Bus, clock: SimClock, inventory: Mapping[str, int]):
        self.bus = bus
        self.clock = clock
        self.inventory: dict[str, int] = {}
        for item_id, qty in inventory.items():
            self.inventory[item_id] = StockOnHand(item_id, qty).quantity
        self.orders: dict[str, OmsOrder] = {}
        self.fraud_queue: list[str] = []
        self.release_queue: list[str] = []
        self.pending_rtlog: list[RtlogRecord] = []
        self.pending_sync: list[tuple[str, str]] = []
        self.rtlog_files_emitted = 0

    # bus side

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        if kind == Kind.AVAILABILITY.value:
            item_id = wire.loads(payload)["item_id"]
            if item_id not in self.inventory:
                return wire.dumps({"error": f"unknown item {item_id}"})
            return wire.dumps({"item_id": item_id, "soh": self.inventory[item_id]})
        if kind == Kind.ORDER_FEED.value:
            try:
                order = self.receive_order(payload)
            except FeedRejected as exc:
                return wire.dumps({"status": "REJECTED", "error": str(exc)})
            return wire.dumps({"status": "ACCEPTED", "order_no": order.order_no})
        if kind == Kind.INVENTORY_ADJUST.value:
            d = wire.loads(payload)
            try:
                soh = self.adjust_inventory(d["item_id"], d["delta"])
            except (UnknownItemError, ValueError) as exc:
                return wire.dumps({"error": str(exc)})
            return wire.dumps({"item_id": d["item_id"], "soh": soh})
        return wire.dumps({"error": f"unsupported kind {kind}"})

    # operations

    def receive_order(self, feed_xml: bytes) -> OmsOrder:
        feed = wire.parse_order_feed(feed_xml)
        if feed.order_no in self.orders:
            raise FeedRejected(f"duplicate order {feed.order_no}")
        for ln in feed.lines:
            if ln.item_id not in self.inventory:
                raise FeedRejected(f"unknown item {ln.item_id}")
        order = OmsOrder(feed.order_no, feed.lines, feed.customer_ip, feed.fraud_check_ind)
        if feed.fraud_check_ind == "Y":
            order.fraud_cleared = FraudCleared.Y
            self.release_queue.append(order.order_no)
        else:
            self.fraud_queue.append(order.order_no)
        self.orders[order.order_no] = order
        return order

    def check_inventory(self, item_id: str) -> StockOnHand:
        if item_id not in self.inventory:
            raise UnknownItemError(item_id)
        return StockOnHand(item_id, self.inventory[item_id])

    def adjust_inventory(self, item_id: str, delta: int) -> int:
        if item_id not in self.inventory:
            raise UnknownItemError(item_id)
        new = self.inventory[item_id] + delta
        if new < 0:
            raise ValueError(f"adjustment would make {item_id} negative")
        self.inventory[item_id] = new
        return new

    def _finalize(self, order: OmsOrder, status: OrderStatus) -> None:
        order.status = status
        tx = TxStatus.ORDC if status is OrderStatus.CANCELLED else TxStatus.ORDF
        for ln in order.lines:
            self.pending_rtlog.append(RtlogRecord(order.order_no, tx, ln.item_id, ln.qty, self.clock.iso()))
        self.pending_sync.append((order.order_no, status.value))

    def _flush_status_sync(self) -> None:
        remaining = []
        for i, (order_no, status) in enumerate(self.pending_sync):
            try:
                self.bus.send(ServiceId.OMS, ServiceId.OLS, Kind.STATUS_SYNC, wire.status_sync(order_no, status))
            except TransportError:
                remaining = self.pending_sync[i:]
                break
        self.pending_sync = remaining

    def run_fraud_batch(self) -> list[BatchOutcome]:
        """Screen queued orders, release pre-screened ones, sync status to OLS.

        Orders whose screening call fails stay queued for the next batch.
        """
        outcomes = []
        still_queued = []
        for order_no in self.fraud_queue:
            order = self.orders[order_no]
            payload = wire.dumps({"order_no": order_no, "customer_ip": order.customer_ip})
            try:
                raw = self.bus.send(ServiceId.OMS, ServiceId.FRAUD, Kind.FRAUD_SCREEN, payload)
            except TransportError:
                still_queued.append(order_no)
                outcomes.append(BatchOutcome(order_no, "UNAVAILABLE"))
                continue
            result = FraudResult.from_payload(raw)
            if result.cleared:
                order.fraud_cleared = FraudCleared.Y
                self._finalize(order, OrderStatus.RELEASED)
            else:
                order.fraud_cleared = FraudCleared.N
                order.fraud_rule = result.rule_id
                self._finalize(order, OrderStatus.CANCELLED)
            outcomes.append(BatchOutcome(order_no, result.code, result.rule_id))
        self.fraud_queue = still_queued
        for order_no in self.release_queue:
            self._finalize(self.orders[order_no], OrderStatus.RELEASED)
            outcomes.append(BatchOutcome(order_no, "Y"))
        self.release_queue = []
        self._flush_status_sync()
        return outcomes

    def emit_rtlog(self) -> str:
        """Serialize and clear the pending RTLOG records."""
        self.rtlog_files_emitted += 1
        file_id = f"RTLOG{self.rtlog_files_emitted:06d}"
        lines = [f"FHEAD|{file_id}|{self.clock.iso()}"]
        lines += [r.line() for r in self.pending_rtlog]
        lines.append(f"FTAIL|{len(self.pending_rtlog)}")
        self.pending_rtlog = []
        return "\n".join(lines) + "\n"


class RtlogRejected(ValueError):
    """An RTLOG file failed framing checks and was not applied."""


@dataclass(frozen=True)
class RtlogFile:
    file_id: str
    emitted_at: str
    records: tuple[tuple[str, ...], ...]
    declared_count: int


def parse_rtlog(content: str) -> RtlogFile:
    lines = [ln for ln in content.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise RtlogRejected("file needs at least FHEAD and FTAIL")
    head, tail, body = lines[0].split("|"), lines[-1].split("|"), lines[1:-1]
    if head[0] != "FHEAD" or len(head) != 3 or not head[1]:
        raise RtlogRejected(f"bad FHEAD line: {lines[0]!r}")
    if tail[0] != "FTAIL" or len(tail) != 2 or not tail[1].isdigit():
        raise RtlogRejected(f"bad FTAIL line: {lines[-1]!r}")
    records = []
    for ln in body:
        parts = tuple(ln.split("|"))
        if parts[0] != "TTRAN":
            raise RtlogRejected(f"unexpected record type in body: {ln!r}")
        records.append(parts)
    return RtlogFile(head[1], head[2], tuple(records), int(tail[1]))


@dataclass(frozen=True)
class AuditResult:
    file_id: str
    deltas: dict[str, int] = field(default_factory=dict)
    records_read: int = 0
    records_accepted: int = 0
    records_rejected: int = 0
    duplicate: bool = False


class Resa:
    def __init__(self, bus: Bus):
        self.bus = bus
        self.ingested: set[str] = set()
        self.results: list[AuditResult] = []

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        return wire.dumps({"error": f"unsupported kind {kind}"})

    def ingest(self, content: str) -> AuditResult:
        rtlog = parse_rtlog(content)
        if rtlog.declared_count != len(rtlog.records):
            raise RtlogRejected(f"FTAIL declares {rtlog.declared_count} records, body has {len(rtlog.records)}")
        if rtlog.file_id in self.ingested:
            result = AuditResult(rtlog.file_id, duplicate=True)
            self.results.append(result)
            return result
        deltas: dict[str, int] = defaultdict(int)
        accepted = rejected = 0
        for rec in rtlog.records:
            if len(rec) != 6 or rec[2] not in ("ORDC", "ORDF") or not rec[4].isdigit():
                rejected += 1
                continue
            accepted += 1
            item_id, qty = rec[3], int(rec[4])
            # a cancelled order never left the shelf
            deltas[item_id] += -qty if rec[2] == "ORDF" else 0
        for item_id in sorted(deltas):
            if deltas[item_id]:
                self.bus.send(
                    ServiceId.RESA,
                    ServiceId.OMS,
                    Kind.INVENTORY_ADJUST,
                    wire.dumps({"item_id": item_id, "delta": deltas[item_id]}),
                )
        self.ingested.add(rtlog.file_id)
        result = AuditResult(rtlog.file_id, dict(deltas), len(rtlog.records), accepted, rejected)
        self.results.append(result)
        return result
