"""Customer-facing half of the pipeline.

``Storefront`` is the online system (OLS). It talks to the payment web
service (``Gateway``), which forwards to the card ``Merchant``; to the
``TaxService``; to the ``FraudEngine`` for inline screening; and to OMS for
availability checks and order feeds. Card numbers are masked inside OLS and
never leave it.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Mapping, Optional, Sequence

from itb import wire
from itb.domain import (
    DEFAULT_BIN_TABLE,
    CardDetails,
    ConfigurationError,
    Money,
    SimClock,
    YearMonth,
    expired_at,
    mask_pan,
    prefix_in_network,
)
from itb.netsim import Availability, Bus, Kind, ServiceId, TransportError
from itb.wire import Address, FeedLine, OrderFeed

DECLINE_BIN_REASON = "Merchant cannot accept this Private Label BIN range"
EXPIRED_REASON = "Card has expired"
GATEWAY_UNAVAILABLE_REASON = "Payment service is unavailable, please try again later"

# Leading digits carried next to the masked number. Kept under five so no
# run of five raw digits outside the last four ever crosses the OLS boundary.
BIN_WIRE_DIGITS = 4


class Avs(str, Enum):
    MATCH = "MATCH"
    NO_MATCH = "NO_MATCH"
    UNAVAILABLE = "UNAVAILABLE"


AVS_DESCRIPTIONS = {
    Avs.MATCH: "Billing postal code matches the address on file",
    Avs.NO_MATCH: "Billing postal code does not match the address on file",
    Avs.UNAVAILABLE: "Address information unavailable",
}


@dataclass(frozen=True)
class AuthRequest:
    masked: str
    network: str
    bin_prefix: str
    expiry: YearMonth
    amount: Money
    billing_postal: str = ""

    @classmethod
    def for_card(cls, card: CardDetails, amount: Money, billing_postal: str = "") -> "AuthRequest":
        return cls(
            masked=mask_pan(card.pan).text,
            network=card.network.value,
            bin_prefix=card.pan.digits[:BIN_WIRE_DIGITS],
            expiry=card.expiry,
            amount=amount,
            billing_postal=billing_postal,
        )

    def to_payload(self) -> bytes:
        return wire.dumps(
            {
                "masked": self.masked,
                "network": self.network,
                "bin_prefix": self.bin_prefix,
                "expiry": self.expiry.iso(),
                "amount": self.amount.amount,
                "currency": self.amount.currency,
                "billing_postal": self.billing_postal,
            }
        )

    @classmethod
    def from_payload(cls, raw: bytes) -> "AuthRequest":
        d = wire.loads(raw)
        return cls(
            masked=d["masked"],
            network=d["network"],
            bin_prefix=d["bin_prefix"],
            expiry=YearMonth.parse(d["expiry"]),
            amount=Money(d["amount"], d["currency"]),
            billing_postal=d.get("billing_postal", ""),
        )


@dataclass(frozen=True)
class AuthResponse:
    code: str
    reason: str
    avs: Optional[Avs] = None

    def __post_init__(self) -> None:
        if self.code == "00" and self.avs is None:
            raise ValueError("approval must carry an AVS result")
        if self.code == "227" and self.reason != DECLINE_BIN_REASON:
            raise ValueError("227 decline must carry the BIN-range reason")

    @property
    def approved(self) -> bool:
        return self.code == "00"

    def to_payload(self) -> bytes:
        return wire.dumps({"code": self.code, "reason": self.reason, "avs": self.avs.value if self.avs else None})

    @classmethod
    def from_payload(cls, raw: bytes) -> "AuthResponse":
        d = wire.loads(raw)
        return cls(d["code"], d["reason"], Avs(d["avs"]) if d.get("avs") else None)


def merchant_authorize(
    req: AuthRequest,
    clock: SimClock,
    bin_table: Mapping[str, tuple[str, ...]] = DEFAULT_BIN_TABLE,
    address_directory: Mapping[str, str] | None = None,
) -> AuthResponse:
    """Decide an authorization: BIN range first, then expiry, then approve with AVS."""
    if req.network not in bin_table or not prefix_in_network(req.bin_prefix, req.network, bin_table):
        return AuthResponse("227", DECLINE_BIN_REASON)
    if expired_at(req.expiry, clock.now):
        return AuthResponse("EXPIRED", EXPIRED_REASON)
    on_file = (address_directory or {}).get(req.masked[-4:])
    if not req.billing_postal:
        avs = Avs.UNAVAILABLE
    elif on_file == req.billing_postal:
        avs = Avs.MATCH
    else:
        avs = Avs.NO_MATCH
    return AuthResponse("00", f"Approved - AVS {avs.value}: {AVS_DESCRIPTIONS[avs]}", avs)


class Merchant:
    def __init__(self, clock: SimClock, bin_table: Mapping[str, tuple[str, ...]], address_directory: Mapping[str, str]):
        self.clock = clock
        self.bin_table = bin_table
        self.address_directory = dict(address_directory)

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        if kind != Kind.AUTH.value:
            return wire.dumps({"error": f"unsupported kind {kind}"})
        resp = merchant_authorize(AuthRequest.from_payload(payload), self.clock, self.bin_table, self.address_directory)
        return resp.to_payload()


class Gateway:
    """Payment web service between OLS and the merchant."""

    def __init__(self, bus: Bus):
        self.bus = bus

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        if kind != Kind.PAYMENT.value:
            return wire.dumps({"error": f"unsupported kind {kind}"})
        try:
            return self.bus.send(ServiceId.WEBSVC, ServiceId.MERCHANT, Kind.AUTH, payload)
        except TransportError:
            return wire.dumps({"error": "MERCHANT_UNAVAILABLE"})


class RuleKind(str, Enum):
    IP_IN_FRAUD_LIST = "IP_IN_FRAUD_LIST"


@dataclass(frozen=True)
class FraudRule:
    rule_id: str
    kind: RuleKind
    ips: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for ip in self.ips:
            try:
                ipaddress.IPv4Address(ip)
            except ValueError:
                raise ConfigurationError(f"fraud list entry {ip!r} is not an IPv4 address") from None

    def matches(self, order_no: str, customer_ip: str) -> bool:
        if self.kind is RuleKind.IP_IN_FRAUD_LIST:
            return customer_ip in self.ips
        raise ConfigurationError(f"unsupported rule kind {self.kind}")


def ip_rule(rule_id: str, ips: Sequence[str]) -> FraudRule:
    return FraudRule(rule_id, RuleKind.IP_IN_FRAUD_LIST, frozenset(ips))


@dataclass(frozen=True)
class FraudResult:
    cleared: bool
    rule_id: Optional[str] = None

    @property
    def code(self) -> str:
        return "Y" if self.cleared else "N"

    def to_payload(self) -> bytes:
        d = {"result": self.code}
        if self.rule_id is not None:
            d["rule_id"] = self.rule_id
        return wire.dumps(d)

    @classmethod
    def from_payload(cls, raw: bytes) -> "FraudResult":
        d = wire.loads(raw)
        return cls(d["result"] == "Y", d.get("rule_id"))


CLEARED = FraudResult(True)


def fraud_screen(order_no: str, customer_ip: str, rules: Sequence[FraudRule]) -> FraudResult:
    for rule in rules:
        if rule.matches(order_no, customer_ip):
            return FraudResult(False, rule.rule_id)
    return CLEARED


class FraudEngine:
    def __init__(self, rules: Sequence[FraudRule] = ()):
        self.rules = list(rules)

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        d = wire.loads(payload)
        return fraud_screen(d["order_no"], d["customer_ip"], self.rules).to_payload()


@dataclass(frozen=True)
class TaxQuote:
    subtotal: Money
    tax: Money


def tax_quote(subtotal: Money, rate: Decimal) -> TaxQuote:
    tax = (Decimal(subtotal.amount) * rate).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return TaxQuote(subtotal, Money(int(tax), subtotal.currency))


class TaxService:
    def __init__(self, rate: Decimal = Decimal("0.08")):
        if rate < 0:
            raise ConfigurationError("tax rate must be non-negative")
        self.rate = rate

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        d = wire.loads(payload)
        q = tax_quote(Money(d["subtotal"], d["currency"]), self.rate)
        return wire.dumps({"subtotal": q.subtotal.amount, "tax": q.tax.amount, "currency": q.tax.currency})


# --- OLS -------------------------------------------------------------------


class StorefrontError(Exception):
    """A user-facing failure in OLS. The message is what the session shows."""


class AvailabilityUnknown(StorefrontError):
    pass


class InvalidSessionState(StorefrontError):
    pass


class UnknownItem(StorefrontError):
    pass


class UnknownOrder(StorefrontError):
    pass


class PlacementRefused(StorefrontError):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class SessionState(str, Enum):
    BROWSING = "Browsing"
    CHECKED_OUT = "CheckedOut"
    ADDRESS_SET = "AddressSet"
    PAYMENT_ACCEPTED = "PaymentAccepted"
    PLACED = "Placed"
    PAYMENT_ERROR = "PaymentError"


class StockStatus(str, Enum):
    AVAILABLE = "Available"
    UNAVAILABLE = "Unavailable"


class PaymentStatus(str, Enum):
    ACCEPTED = "Accepted"
    DECLINED = "Declined"
    GATEWAY_UNAVAILABLE = "GatewayUnavailable"


@dataclass(frozen=True)
class PaymentOutcome:
    status: PaymentStatus
    code: Optional[str] = None
    reason: str = ""
    avs: Optional[Avs] = None


@dataclass(frozen=True)
class CatalogItem:
    item_id: str
    title: str
    price: Money


@dataclass
class CartSession:
    session_id: str
    customer_ip: str
    items: list[tuple[str, int]] = field(default_factory=list)
    shipping_address: Optional[Address] = None
    billing_address: Optional[Address] = None
    payment: Optional[CardDetails] = None
    state: SessionState = SessionState.BROWSING
    browsed: Optional[str] = None
    availability: dict[str, StockStatus] = field(default_factory=dict)
    last_payment: Optional[PaymentOutcome] = None
    order_no: Optional[str] = None
    error: Optional[str] = None


@dataclass
class OlsOrder:
    order_no: str
    session_id: str
    status: str


class Storefront:
    def __init__(self, bus: Bus, catalog: Mapping[str, CatalogItem]):
        self.bus = bus
        self.catalog = dict(catalog)
        self.sessions: dict[str, CartSession] = {}
        self.orders: dict[str, OlsOrder] = {}
        self._order_counter = 0

    # bus side

    def handle(self, src: ServiceId, kind: str, payload: bytes) -> bytes:
        if kind == Kind.STATUS_SYNC.value:
            order_no, status = wire.parse_status_sync(payload)
            if order_no not in self.orders:
                return b"NACK|unknown order"
            self.orders[order_no].status = status
            return b"ACK"
        return b"NACK|unsupported kind"

    # customer side

    def new_session(self, customer_ip: str) -> CartSession:
        ipaddress.IPv4Address(customer_ip)
        sid = f"S{len(self.sessions) + 1:04d}"
        session = CartSession(sid, customer_ip)
        self.sessions[sid] = session
        return session

    def _fail(self, session: CartSession, exc: StorefrontError) -> StorefrontError:
        session.error = str(exc)
        return exc

    def _require(self, session: CartSession, *states: SessionState) -> None:
        if session.state not in states:
            allowed = ", ".join(s.value for s in states)
            raise self._fail(session, InvalidSessionState(f"session is {session.state.value}; expected {allowed}"))

    def browse(self, session: CartSession, item_id: str) -> CatalogItem:
        if item_id not in self.catalog:
            raise self._fail(session, UnknownItem(f"item {item_id} is not in the catalog"))
        session.browsed = item_id
        return self.catalog[item_id]

    def check_availability(self, session: CartSession, item_id: str) -> StockStatus:
        try:
            raw = self.bus.send(ServiceId.OLS, ServiceId.OMS, Kind.AVAILABILITY, wire.dumps({"item_id": item_id}))
        except TransportError:
            raise self._fail(session, AvailabilityUnknown(f"availability of {item_id} is unknown (OMS unreachable)"))
        reply = wire.loads(raw)
        if "error" in reply:
            raise self._fail(session, UnknownItem(reply["error"]))
        status = StockStatus.AVAILABLE if reply["soh"] >= 1 else StockStatus.UNAVAILABLE
        session.availability[item_id] = status
        return status

    def add_to_cart(self, session: CartSession, item_id: str, qty: int = 1) -> None:
        self._require(session, SessionState.BROWSING)
        if item_id not in self.catalog:
            raise self._fail(session, UnknownItem(f"item {item_id} is not in the catalog"))
        if qty < 1:
            raise self._fail(session, InvalidSessionState("quantity must be at least 1"))
        session.items.append((item_id, qty))

    def checkout(self, session: CartSession) -> None:
        self._require(session, SessionState.BROWSING)
        if not session.items:
            raise self._fail(session, InvalidSessionState("cart is empty"))
        session.state = SessionState.CHECKED_OUT

    def set_addresses(self, session: CartSession, shipping: Address, billing: Address) -> None:
        self._require(session, SessionState.CHECKED_OUT, SessionState.ADDRESS_SET)
        session.shipping_address = shipping
        session.billing_address = billing
        session.state = SessionState.ADDRESS_SET

    def subtotal(self, session: CartSession) -> Money:
        total = Money(0)
        for item_id, qty in session.items:
            total = total + self.catalog[item_id].price.times(qty)
        return total

    def submit_payment(self, session: CartSession, card: CardDetails) -> PaymentOutcome:
        self._require(session, SessionState.ADDRESS_SET, SessionState.PAYMENT_ERROR)
        session.payment = card
        postal = session.billing_address.postal if session.billing_address else ""
        req = AuthRequest.for_card(card, self.subtotal(session), postal)
        try:
            raw = self.bus.send(ServiceId.OLS, ServiceId.WEBSVC, Kind.PAYMENT, req.to_payload())
            reply = wire.loads(raw)
        except TransportError:
            reply = {"error": "WEBSVC_UNAVAILABLE"}
        if "error" in reply:
            outcome = PaymentOutcome(PaymentStatus.GATEWAY_UNAVAILABLE, None, GATEWAY_UNAVAILABLE_REASON)
        else:
            resp = AuthResponse.from_payload(raw)
            status = PaymentStatus.ACCEPTED if resp.approved else PaymentStatus.DECLINED
            outcome = PaymentOutcome(status, resp.code, resp.reason, resp.avs)
        session.last_payment = outcome
        if outcome.status is PaymentStatus.ACCEPTED:
            session.state = SessionState.PAYMENT_ACCEPTED
            session.error = None
        else:
            session.state = SessionState.PAYMENT_ERROR
            session.error = outcome.reason
        return outcome

    def resubmit_payment(self, session: CartSession) -> PaymentOutcome:
        """Replay of the last payment submit (browser back, then continue).

        An already accepted payment is answered from the session without a
        second authorization.
        """
        if session.state in (SessionState.PAYMENT_ACCEPTED, SessionState.PLACED) and session.last_payment:
            return session.last_payment
        if session.payment is None:
            raise self._fail(session, InvalidSessionState("no payment to resubmit"))
        return self.submit_payment(session, session.payment)

    def _inline_fraud_indicator(self, order_no: str, customer_ip: str) -> str:
        if self.bus.availability(ServiceId.FRAUD) is Availability.OFFLINE:
            return "N"
        payload = wire.dumps({"order_no": order_no, "customer_ip": customer_ip})
        try:
            raw = self.bus.send(ServiceId.OLS, ServiceId.FRAUD, Kind.FRAUD_SCREEN, payload)
        except TransportError:
            return "N"
        # a hit inline is left for OMS screening, which owns cancellation
        return FraudResult.from_payload(raw).code

    def place_order(self, session: CartSession) -> str:
        self._require(session, SessionState.PAYMENT_ACCEPTED)
        subtotal = self.subtotal(session)
        try:
            raw = self.bus.send(
                ServiceId.OLS,
                ServiceId.TAX,
                Kind.TAX_QUOTE,
                wire.dumps({"subtotal": subtotal.amount, "currency": subtotal.currency}),
            )
        except TransportError:
            raise self._fail(
                session, PlacementRefused("tax-unavailable", "Order cannot be placed: tax service is unavailable")
            )
        tax = wire.loads(raw)["tax"]
        order_no = f"W{self._order_counter + 1:09d}"
        indicator = self._inline_fraud_indicator(order_no, session.customer_ip)
        feed = OrderFeed(
            order_no=order_no,
            status="Created",
            fraud_check_ind=indicator,
            customer_ip=session.customer_ip,
            lines=tuple(FeedLine(i, q, self.catalog[i].price.amount) for i, q in session.items),
            tax=tax,
            total=subtotal.amount + tax,
            ship_to=session.shipping_address,
            bill_to=session.billing_address,
        )
        try:
            reply = wire.loads(self.bus.send(ServiceId.OLS, ServiceId.OMS, Kind.ORDER_FEED, wire.build_order_feed(feed)))
        except TransportError:
            raise self._fail(
                session, PlacementRefused("oms-unavailable", "Order cannot be placed: order management is unavailable")
            )
        if reply.get("status") != "ACCEPTED":
            raise self._fail(session, PlacementRefused("feed-rejected", f"Order feed rejected: {reply.get('error')}"))
        self._order_counter += 1
        self.orders[order_no] = OlsOrder(order_no, session.session_id, "Created")
        session.order_no = order_no
        session.state = SessionState.PLACED
        session.error = None
        return order_no

    def order_status(self, order_no: str) -> str:
        try:
            return self.orders[order_no].status
        except KeyError:
            raise UnknownOrder(f"unknown order {order_no}") from None


def parse_fraud_list(text: str) -> list[FraudRule]:
    """Parse ``RULE_ID=ip,ip`` lines (``#`` comments allowed) into IP rules."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rule_id, sep, rest = line.partition("=")
        if not sep or not rule_id.strip():
            raise ConfigurationError(f"line {lineno}: expected RULE_ID=ip,ip")
        rules.append(ip_rule(rule_id.strip(), [ip.strip() for ip in rest.split(",") if ip.strip()]))
    return rules
