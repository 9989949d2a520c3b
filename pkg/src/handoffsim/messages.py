"""Wire objects: signaling messages with their byte sizes, and data packets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

AH_BYTES = 24
TUNNEL_OVERHEAD_BYTES = 40
EXTRA_TARGET_BYTES = 32
FNA_RANGE_BYTES = 8
UDP_HEADER_BYTES = 48  # IPv6 40 + UDP 8
TCP_HEADER_BYTES = 60  # IPv6 40 + TCP 20
ACK_BYTES = TCP_HEADER_BYTES


class MessageKind(str, enum.Enum):
    FBU = "FBU"
    FBACK = "FBAck"
    HI = "HI"
    HACK = "HAck"
    RTSOLPR = "RtSolPr"
    PRRTADV = "PrRtAdv"
    FNA = "FNA"
    STOP_BICAST = "StopBicast"


# (plain, with Authentication Header)
MESSAGE_SIZES: dict[MessageKind, tuple[int, int]] = {
    MessageKind.FBU: (112, 136),
    MessageKind.FBACK: (72, 96),
    MessageKind.HI: (112, 136),
    MessageKind.HACK: (72, 96),
    MessageKind.RTSOLPR: (64, 88),
    MessageKind.PRRTADV: (80, 104),
    MessageKind.FNA: (64, 88),
    MessageKind.STOP_BICAST: (48, 72),
}


def message_size(kind: MessageKind, with_ah: bool = True) -> int:
    plain, ah = MESSAGE_SIZES[MessageKind(kind)]
    return ah if with_ah else plain


def fbu_size(num_targets: int, with_ah: bool = True) -> int:
    if num_targets < 1:
        raise ValueError("a Fast Binding Update needs at least one target router")
    return message_size(MessageKind.FBU, with_ah) + EXTRA_TARGET_BYTES * (num_targets - 1)


def fna_size(num_ranges: int, with_ah: bool = True) -> int:
    # the base message has room for one received-counter range
    return message_size(MessageKind.FNA, with_ah) + FNA_RANGE_BYTES * max(0, num_ranges - 1)


def counter_ranges(counters) -> list[tuple[int, int]]:
    """Collapse a set of integers into sorted inclusive ``(lo, hi)`` ranges."""
    out: list[tuple[int, int]] = []
    for c in sorted(counters):
        if out and c == out[-1][1] + 1:
            out[-1] = (out[-1][0], c)
        else:
            out.append((c, c))
    return out


def expand_ranges(ranges) -> set[int]:
    got: set[int] = set()
    for lo, hi in ranges:
        got.update(range(lo, hi + 1))
    return got


@dataclass
class SignalingMessage:
    kind: MessageKind
    size_bytes: int
    src: str
    dst: str
    with_ah: bool = True
    targets: tuple[str, ...] = ()
    received_ranges: tuple[tuple[int, int], ...] = ()
    chosen: Optional[str] = None
    accepted: bool = True
    relayed: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def make(cls, kind: MessageKind, src: str, dst: str, with_ah: bool = True,
             **kw) -> "SignalingMessage":
        kind = MessageKind(kind)
        if kind is MessageKind.FBU:
            size = fbu_size(max(1, len(kw.get("targets", ()))), with_ah)
        elif kind is MessageKind.FNA:
            size = fna_size(len(kw.get("received_ranges", ())), with_ah)
        else:
            size = message_size(kind, with_ah)
        return cls(kind, size, src, dst, with_ah, **kw)


class Path(str, enum.Enum):
    DIRECT_FROM_PAR = "direct"
    TUNNELED_TO_NAR = "tunneled"
    FLUSHED_FROM_BUFFER = "flushed"
    POST_HANDOFF_DIRECT = "forwarded"


@dataclass
class DataPacket:
    """One application packet (UDP datagram or TCP segment) heading to the MN.

    ``uid`` identifies the CN transmission; every copy made by routers keeps
    it. ``seq`` is the flow's own sequence (datagram index or TCP byte
    offset). ``counter`` is the per-handoff marking, ``None`` when unmarked.
    """

    uid: int
    flow_id: str
    seq: int
    payload_bytes: int
    header_bytes: int
    sent_at: int
    counter: Optional[int] = None
    path: Path = Path.DIRECT_FROM_PAR
    tunnel_overhead_bytes: int = 0
    retransmission: bool = False

    @property
    def wire_bytes(self) -> int:
        return self.payload_bytes + self.header_bytes + self.tunnel_overhead_bytes

    def copy(self, **changes) -> "DataPacket":
        data = dict(self.__dict__)
        data.update(changes)
        path = data["path"]
        data["tunnel_overhead_bytes"] = TUNNEL_OVERHEAD_BYTES if path is Path.TUNNELED_TO_NAR else 0
        return DataPacket(**data)


@dataclass
class AckPacket:
    flow_id: str
    ack: int
    sent_at: int
    size_bytes: int = ACK_BYTES
