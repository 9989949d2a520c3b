"""Closed-form handoff overheads: message sizes, signaling totals, data costs.

Byte counts follow the message formats of FMIPv6 with the Authentication
Header unless ``with_ah=False``. Rates are bit/s, times seconds, results bytes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional

from . import trace as tr
from .messages import (MESSAGE_SIZES, TUNNEL_OVERHEAD_BYTES, MessageKind, fbu_size,
                       message_size)
from .protocols import ProtocolKind
from .scenario import normalize_protocol


@dataclass(frozen=True)
class MessageSizeTable:
    sizes: tuple = tuple((k.value, plain, ah) for k, (plain, ah) in MESSAGE_SIZES.items())

    def plain(self, kind) -> int:
        return message_size(MessageKind(kind), with_ah=False)

    def with_ah(self, kind) -> int:
        return message_size(MessageKind(kind), with_ah=True)

    def rows(self) -> list[tuple[str, int, int]]:
        return list(self.sizes)


SIZE_TABLE = MessageSizeTable()


def as_protocol(protocol) -> ProtocolKind:
    if isinstance(protocol, ProtocolKind):
        return protocol
    return ProtocolKind(normalize_protocol(protocol))


def _check_targets(protocol: ProtocolKind, num_targets: int) -> None:
    if num_targets < 1:
        raise ValueError("num_targets must be at least 1")
    if protocol is not ProtocolKind.SAFETYNET and num_targets != 1:
        raise ValueError(f"{protocol.value} hands off to exactly one nAR")


def ota_signaling(protocol, num_targets: int = 1, with_ah: bool = True) -> int:
    """Signaling bytes sent over the air per handoff."""
    p = as_protocol(protocol)
    _check_targets(p, num_targets)
    size = lambda k: message_size(k, with_ah)  # noqa: E731
    fbu = fbu_size(num_targets, with_ah)
    if p is ProtocolKind.FMIPV6_REACTIVE:
        return size(MessageKind.FNA) + fbu + size(MessageKind.FBACK)
    total = (size(MessageKind.RTSOLPR) + size(MessageKind.PRRTADV) + fbu
             + size(MessageKind.FBACK) + size(MessageKind.FNA))
    if p is ProtocolKind.SAFETYNET:
        total += size(MessageKind.STOP_BICAST)
    return total


def otw_signaling(num_targets: int = 1, protocol=ProtocolKind.SAFETYNET,
                  with_ah: bool = True) -> int:
    """Signaling bytes on the wired pAR/nAR segment per handoff."""
    p = as_protocol(protocol)
    _check_targets(p, num_targets)
    size = lambda k: message_size(k, with_ah)  # noqa: E731
    total = num_targets * (size(MessageKind.HI) + size(MessageKind.HACK))
    if p is ProtocolKind.SAFETYNET:
        total += size(MessageKind.STOP_BICAST)
    elif p is ProtocolKind.FMIPV6_REACTIVE:
        # FBU relayed by the nAR, FBAck sent back through it
        total += fbu_size(1, with_ah) + size(MessageKind.FBACK)
    return total


@dataclass(frozen=True)
class CostReport:
    """Per-handoff byte accounting.

    ``total_ota_bytes`` counts what the handoff adds on the air: signaling,
    duplicate data transmissions and TCP resends. The old/new link data
    figures are the raw volumes each link carried during the episode; they
    include first deliveries and so are reported but not added to the total.
    ``literal_total_bytes`` is the plain sum of signaling and both volumes.
    """

    protocol: str
    ota_signaling_bytes: float
    otw_signaling_bytes: float
    ota_old_link_data_bytes: float
    ota_new_link_data_bytes: float
    otw_tunnel_bytes: float
    duplicate_bytes: float = 0.0
    resend_bytes: float = 0.0
    resend_missing: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @property
    def total_ota_bytes(self) -> float:
        return self.ota_signaling_bytes + self.duplicate_bytes + self.resend_bytes

    @property
    def literal_total_bytes(self) -> float:
        return (self.ota_signaling_bytes + self.ota_old_link_data_bytes
                + self.ota_new_link_data_bytes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_ota_bytes"] = self.total_ota_bytes
        d["literal_total_bytes"] = self.literal_total_bytes
        return d


def data_overhead(protocol, rate_bps: float, handoff_latency_s: float, stop_latency_s: float,
                  num_targets: int = 1, bicast_timer_s: float = 0.0, *,
                  old_link_loss: float = 0.0, packet_bytes: Optional[int] = None,
                  resend_bytes: Optional[float] = None, with_ah: bool = True,
                  old_link_delay_s: float = 0.0, fna_delay_s: float = 0.0) -> CostReport:
    """Analytic data and signaling costs of one handoff.

    ``rate_bps`` counts payload bits. ``old_link_loss`` is the fraction of
    direct copies SafetyNet loses on the old link while the handoff is in
    progress. ``packet_bytes`` sets the payload size used for the per-packet
    tunnel overhead; without it the overhead is left out.

    Two optional delays refine the window edges. ``old_link_delay_s`` is how
    long a direct copy takes to reach the MN: copies still in flight when the
    MN reports its receipts get flushed as well. ``fna_delay_s`` is the FNA's
    transit to the nAR, during which the nAR keeps buffering.
    """
    p = as_protocol(protocol)
    _check_targets(p, num_targets)
    for name, v in (("rate_bps", rate_bps), ("handoff_latency_s", handoff_latency_s),
                    ("stop_latency_s", stop_latency_s), ("bicast_timer_s", bicast_timer_s),
                    ("old_link_delay_s", old_link_delay_s), ("fna_delay_s", fna_delay_s)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    if not 0.0 <= old_link_loss <= 1.0:
        raise ValueError("old_link_loss must lie in [0, 1]")
    byte_rate = rate_bps / 8
    during = byte_rate * handoff_latency_s
    buffered = byte_rate * (handoff_latency_s + fna_delay_s)
    if p is ProtocolKind.SAFETYNET:
        old = byte_rate * (handoff_latency_s + stop_latency_s)
        lost = old_link_loss * during
        new = lost + byte_rate * (old_link_delay_s + fna_delay_s)
        dup = lost + byte_rate * (stop_latency_s + old_link_delay_s)
    elif p is ProtocolKind.FMIPV6_BICAST:
        old = byte_rate * bicast_timer_s
        new = buffered
        dup = byte_rate * bicast_timer_s
    elif p is ProtocolKind.FMIPV6_REACTIVE:
        # nothing is buffered: tunneling starts after the MN is already attached
        old = new = dup = buffered = 0.0
    else:
        old, new, dup = 0.0, buffered, 0.0
    tunnel = buffered * num_targets
    if packet_bytes:
        tunnel += TUNNEL_OVERHEAD_BYTES * (buffered / packet_bytes) * num_targets
    return CostReport(p.value, ota_signaling(p, num_targets, with_ah),
                      otw_signaling(num_targets, p, with_ah), old, new, tunnel, dup,
                      resend_bytes or 0.0, resend_bytes is None)


def experimental_total(protocol, scenario, resend_bytes: Optional[float] = None,
                       handoff_latency_s: Optional[float] = None,
                       stop_latency_s: Optional[float] = None) -> CostReport:
    """Total air cost of a handoff in ``scenario`` with resends from a run.

    Handoff latency defaults to the scenario's attach latency and the stop
    latency to the pAR link latency.
    """
    p = as_protocol(protocol)
    ho = scenario.handoff
    h = ho.attach_latency_ms / 1000 if handoff_latency_s is None else handoff_latency_s
    s = scenario.par.downlink.latency_ms / 1000 if stop_latency_s is None else stop_latency_s
    targets = len(scenario.targets) if p is ProtocolKind.SAFETYNET else 1
    tr_ = scenario.traffic
    pkt = tr_.segment_bytes if tr_.kind == "tcp" else tr_.payload_bytes
    loss = ho.par_downlink_loss or 0.0
    return data_overhead(p, tr_.rate_bps, h, s, targets, ho.bicast_timer_ms / 1000,
                         old_link_loss=loss, packet_bytes=pkt, resend_bytes=resend_bytes,
                         with_ah=ho.with_ah)


COST_COLUMNS = ["protocol", "handoff_latency_ms", "par_latency_ms", "ota_signaling",
                "otw_signaling", "ota_old", "ota_new", "otw_tunnel", "total"]


def cost_row(protocol, handoff_latency_ms: float, par_latency_ms: float, rate_bps: float,
             num_targets: int = 1, bicast_timer_ms: Optional[float] = None,
             packet_bytes: Optional[int] = None, old_link_loss: float = 0.0) -> dict:
    """One row of the analytic cost table.

    The bicast timer defaults to the handoff latency, i.e. the pAR duplicates
    for as long as the MN is switching links.
    """
    p = as_protocol(protocol)
    timer = handoff_latency_ms if bicast_timer_ms is None else bicast_timer_ms
    n = num_targets if p is ProtocolKind.SAFETYNET else 1
    rep = data_overhead(p, rate_bps, handoff_latency_ms / 1000, par_latency_ms / 1000, n,
                        timer / 1000, old_link_loss=old_link_loss, packet_bytes=packet_bytes)
    return {"protocol": p.value, "handoff_latency_ms": handoff_latency_ms,
            "par_latency_ms": par_latency_ms, "ota_signaling": rep.ota_signaling_bytes,
            "otw_signaling": rep.otw_signaling_bytes, "ota_old": rep.ota_old_link_data_bytes,
            "ota_new": rep.ota_new_link_data_bytes, "otw_tunnel": rep.otw_tunnel_bytes,
            "total": rep.total_ota_bytes}


def report_from_trace(records: Iterable[tr.TraceRecord], protocol, mn: str = "MN",
                      par: str = "pAR", forward_start: Optional[int] = None,
                      episode_start: Optional[int] = None) -> CostReport:
    """Count the same cost components from a simulation trace.

    Old-link data is what the pAR sent to the MN after it started forwarding;
    new-link data is what nARs flushed from their buffers; tunnel bytes are the
    tunneled frames that reached a buffer. Duplicates are air transmissions of
    a CN packet beyond its first; resends are CN retransmissions from the start
    of the episode on.
    """
    p = as_protocol(protocol)
    ota_sig = otw_sig = old = new = tunnel = resend = 0
    air_sends: dict[int, list[int]] = {}
    old_link = f"{par}>{mn}"
    for r in records:
        if r.event == tr.SIGNAL:
            if r.detail == "air":
                ota_sig += r.bytes
            else:
                otw_sig += r.bytes
        elif r.event == tr.SEND and r.kind == "data" and r.link.endswith(f">{mn}"):
            air_sends.setdefault(r.uid, []).append(r.bytes)
            if r.link == old_link and forward_start is not None and r.time_us >= forward_start:
                old += r.bytes
        elif r.event == tr.FLUSH:
            new += r.bytes
        elif r.event == tr.BUFFER:
            tunnel += r.bytes + TUNNEL_OVERHEAD_BYTES
        elif r.event == tr.RESEND and (episode_start is None or r.time_us >= episode_start):
            resend += r.bytes
    dup = sum(sum(sizes[1:]) for sizes in air_sends.values())
    return CostReport(p.value, ota_sig, otw_sig, old, new, tunnel, dup, resend)
