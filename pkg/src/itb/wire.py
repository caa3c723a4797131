"""Payload encodings used on the bus.

JSON payloads are canonical (sorted keys, no whitespace) so traces are
byte-stable. The order feed is a fixed-order XML document.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Any


def dumps(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def loads(raw: bytes) -> Any:
    return json.loads(raw.decode("utf-8"))


@dataclass(frozen=True)
class Address:
    name: str
    street: str
    city: str
    postal: str

    def as_dict(self) -> dict[str, str]:
        return {"name": self.name, "street": self.street, "city": self.city, "postal": self.postal}


@dataclass(frozen=True)
class FeedLine:
    item_id: str
    qty: int
    unit_price: int


@dataclass(frozen=True)
class OrderFeed:
    order_no: str
    status: str
    fraud_check_ind: str
    customer_ip: str
    lines: tuple[FeedLine, ...]
    tax: int
    total: int
    ship_to: Address
    bill_to: Address


class FeedRejected(ValueError):
    """The order feed document does not satisfy the schema."""


FEED_ELEMENTS = ("OrderNo", "Status", "FraudCheckInd", "CustomerIP", "Lines", "Tax", "Total", "ShipTo", "BillTo")
_ADDRESS_ELEMENTS = ("Name", "Street", "City", "Postal")
_INT_RE = re.compile(r"0|[1-9][0-9]*")


def _address_xml(parent: ET.Element, tag: str, addr: Address) -> None:
    el = ET.SubElement(parent, tag)
    for child, value in zip(_ADDRESS_ELEMENTS, (addr.name, addr.street, addr.city, addr.postal)):
        ET.SubElement(el, child).text = value


def build_order_feed(feed: OrderFeed) -> bytes:
    root = ET.Element("Order")
    ET.SubElement(root, "OrderNo").text = feed.order_no
    ET.SubElement(root, "Status").text = feed.status
    ET.SubElement(root, "FraudCheckInd").text = feed.fraud_check_ind
    ET.SubElement(root, "CustomerIP").text = feed.customer_ip
    lines = ET.SubElement(root, "Lines")
    for ln in feed.lines:
        ET.SubElement(lines, "Line", {"itemId": ln.item_id, "qty": str(ln.qty), "unitPrice": str(ln.unit_price)})
    ET.SubElement(root, "Tax").text = str(feed.tax)
    ET.SubElement(root, "Total").text = str(feed.total)
    _address_xml(root, "ShipTo", feed.ship_to)
    _address_xml(root, "BillTo", feed.bill_to)
    return ET.tostring(root, encoding="unicode").encode("utf-8")


def _text(el: ET.Element) -> str:
    if len(el):
        raise FeedRejected(f"<{el.tag}> must not have children")
    text = (el.text or "").strip()
    if not text:
        raise FeedRejected(f"<{el.tag}> is empty")
    return text


def _int(el: ET.Element) -> int:
    text = _text(el)
    if not _INT_RE.fullmatch(text):
        raise FeedRejected(f"<{el.tag}> is not a non-negative integer: {text!r}")
    return int(text)


def _address(el: ET.Element) -> Address:
    tags = tuple(c.tag for c in el)
    if tags != _ADDRESS_ELEMENTS:
        raise FeedRejected(f"<{el.tag}> children must be {_ADDRESS_ELEMENTS}, got {tags}")
    return Address(*(_text(c) for c in el))


def parse_order_feed(raw: bytes) -> OrderFeed:
    """Parse and validate an order feed. Raises :class:`FeedRejected`."""
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as exc:
        raise FeedRejected(f"not well-formed XML: {exc}") from None
    if root.tag != "Order":
        raise FeedRejected(f"root element must be <Order>, got <{root.tag}>")
    tags = tuple(c.tag for c in root)
    if tags != FEED_ELEMENTS:
        missing = [t for t in FEED_ELEMENTS if t not in tags]
        detail = f"missing {missing}" if missing else f"order must be {FEED_ELEMENTS}"
        raise FeedRejected(f"<Order> children {tags}: {detail}")
    el = dict(zip(tags, root))
    ind = _text(el["FraudCheckInd"])
    if ind not in ("Y", "N"):
        raise FeedRejected(f"FraudCheckInd must be Y or N, got {ind!r}")
    status = _text(el["Status"])
    if status != "Created":
        raise FeedRejected(f"Status must be Created at emission, got {status!r}")
    lines = []
    for ln in el["Lines"]:
        if ln.tag != "Line":
            raise FeedRejected(f"unexpected <{ln.tag}> in <Lines>")
        try:
            item_id = ln.attrib["itemId"]
            qty, price = ln.attrib["qty"], ln.attrib["unitPrice"]
        except KeyError as exc:
            raise FeedRejected(f"<Line> missing attribute {exc.args[0]}") from None
        if not (_INT_RE.fullmatch(qty) and _INT_RE.fullmatch(price)) or int(qty) < 1:
            raise FeedRejected(f"<Line> qty/unitPrice invalid: {qty!r}/{price!r}")
        lines.append(FeedLine(item_id, int(qty), int(price)))
    if not lines:
        raise FeedRejected("<Lines> is empty")
    return OrderFeed(
        order_no=_text(el["OrderNo"]),
        status=status,
        fraud_check_ind=ind,
        customer_ip=_text(el["CustomerIP"]),
        lines=tuple(lines),
        tax=_int(el["Tax"]),
        total=_int(el["Total"]),
        ship_to=_address(el["ShipTo"]),
        bill_to=_address(el["BillTo"]),
    )


def feed_fields(raw: bytes) -> dict[str, str]:
    """Flat element-text view of a feed, used by trace assertions."""
    root = ET.fromstring(raw)
    out = {}
    for child in root:
        out[child.tag] = (child.text or "").strip()
    return out


def status_sync(order_no: str, status: str) -> bytes:
    return f"{order_no}|{status}".encode("ascii")


def parse_status_sync(raw: bytes) -> tuple[str, str]:
    order_no, sep, status = raw.decode("ascii").partition("|")
    if not sep or not order_no or not status:
        raise ValueError(f"bad status-sync payload {raw!r}")
    return order_no, status
