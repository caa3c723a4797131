"""Synchronous in-process message bus with fault injection and a full trace.

Every cross-service call goes through :meth:`Bus.send`, which appends one
:class:`Envelope` per request. The envelope is allocated its sequence number
when the request is emitted, so a nested call made from inside a handler
always sorts after the request that triggered it.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from itb.domain import ConfigurationError


class ServiceId(str, Enum):
    OLS = "OLS"
    WEBSVC = "WEBSVC"
    MERCHANT = "MERCHANT"
    FRAUD = "FRAUD"
    OMS = "OMS"
    RESA = "RESA"
    TAX = "TAX"


class Availability(str, Enum):
    UP = "UP"
    DOWN = "DOWN"
    OFFLINE = "OFFLINE"


class Kind(str, Enum):
    AVAILABILITY = "AVAILABILITY"
    PAYMENT = "PAYMENT"
    AUTH = "AUTH"
    TAX_QUOTE = "TAX_QUOTE"
    FRAUD_SCREEN = "FRAUD_SCREEN"
    ORDER_FEED = "ORDER_FEED"
    STATUS_SYNC = "STATUS_SYNC"
    INVENTORY_ADJUST = "INVENTORY_ADJUST"


class TransportError(ConnectionError):
    """The target service did not answer. The envelope is still traced."""

    def __init__(self, src: ServiceId, dst: ServiceId, kind: str, seq: int):
        super().__init__(f"{dst.value} unavailable ({kind} from {src.value}, seq {seq})")
        self.src = src
        self.dst = dst
        self.kind = kind
        self.seq = seq


@dataclass(frozen=True)
class Envelope:
    seq: int
    src: ServiceId
    dst: ServiceId
    kind: str
    payload: bytes
    reply: Optional[bytes] = None
    transport_error: bool = False

    @property
    def complete(self) -> bool:
        return self.transport_error or self.reply is not None

    def export_line(self) -> str:
        reply = "ERR" if self.transport_error else (self.reply or b"").hex()
        return f"{self.seq}|{self.src.value}|{self.dst.value}|{self.kind}|{self.payload.hex()}|{reply}"


Handler = Callable[[ServiceId, str, bytes], bytes]


def _as_service(value: ServiceId | str) -> ServiceId:
    try:
        return ServiceId(value)
    except ValueError:
        raise ConfigurationError(f"unknown service {value!r}") from None


def _as_availability(value: Availability | str) -> Availability:
    try:
        return Availability(value)
    except ValueError:
        raise ConfigurationError(f"unknown availability {value!r}") from None


def check_availability_pair(svc: ServiceId | str, state: Availability | str) -> tuple[ServiceId, Availability]:
    svc, state = _as_service(svc), _as_availability(state)
    if state is Availability.OFFLINE and svc is not ServiceId.FRAUD:
        raise ConfigurationError(f"OFFLINE applies only to FRAUD, not {svc.value}")
    return svc, state


class Bus:
    def __init__(self) -> None:
        self._handlers: dict[ServiceId, Handler] = {}
        self._availability: dict[ServiceId, Availability] = {s: Availability.UP for s in ServiceId}
        self._envelopes: list[Envelope] = []
        self.invocations: Counter[ServiceId] = Counter()

    def register(self, svc: ServiceId, handler: Handler) -> None:
        self._handlers[svc] = handler

    def set_availability(self, svc: ServiceId | str, state: Availability | str) -> None:
        svc, state = check_availability_pair(svc, state)
        self._availability[svc] = state

    def availability(self, svc: ServiceId) -> Availability:
        return self._availability[svc]

    def send(self, src: ServiceId, dst: ServiceId, kind: str, payload: bytes) -> bytes:
        """Deliver ``payload`` and return the handler's reply.

        Raises :class:`TransportError` when ``dst`` is DOWN; the attempt is
        traced either way. OFFLINE targets still execute (batch interface).
        """
        kind = kind.value if isinstance(kind, Kind) else str(kind)
        for svc in (src, dst):
            if svc not in self._handlers:
                raise ConfigurationError(f"service {svc.value} is not registered")
        seq = len(self._envelopes) + 1
        self._envelopes.append(Envelope(seq, src, dst, kind, bytes(payload)))
        if self._availability[dst] is Availability.DOWN:
            self._envelopes[seq - 1] = dataclasses.replace(self._envelopes[seq - 1], transport_error=True)
            raise TransportError(src, dst, kind, seq)
        self.invocations[dst] += 1
        reply = self._handlers[dst](src, kind, bytes(payload))
        self._envelopes[seq - 1] = dataclasses.replace(self._envelopes[seq - 1], reply=bytes(reply))
        return reply

    @property
    def trace(self) -> tuple[Envelope, ...]:
        """Snapshot of the trace; safe to share."""
        return tuple(self._envelopes)

    def trace_query(
        self,
        src: ServiceId | str | None = None,
        dst: ServiceId | str | None = None,
        kind: str | None = None,
    ) -> list[Envelope]:
        return query(self._envelopes, src=src, dst=dst, kind=kind)

    def export(self) -> str:
        return export_trace(self._envelopes)


def query(
    envelopes: Iterable[Envelope],
    src: ServiceId | str | None = None,
    dst: ServiceId | str | None = None,
    kind: str | None = None,
) -> list[Envelope]:
    src = _as_service(src) if src is not None else None
    dst = _as_service(dst) if dst is not None else None
    kind = kind.value if isinstance(kind, Kind) else kind
    return [
        e
        for e in envelopes
        if (src is None or e.src is src) and (dst is None or e.dst is dst) and (kind is None or e.kind == kind)
    ]


def export_trace(envelopes: Iterable[Envelope]) -> str:
    lines = [e.export_line() for e in envelopes]
    return "".join(line + "\n" for line in lines)


def parse_trace(text: str) -> list[Envelope]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 6:
            raise ValueError(f"trace line {lineno}: expected 6 fields, got {len(parts)}")
        seq, src, dst, kind, payload, reply = parts
        err = reply == "ERR"
        out.append(
            Envelope(
                int(seq),
                _as_service(src),
                _as_service(dst),
                kind,
                bytes.fromhex(payload),
                None if err else bytes.fromhex(reply),
                err,
            )
        )
    return out
