"""Link plumbing between nodes: transmit, trace, and schedule the arrival."""

from __future__ import annotations

from typing import Any, Callable

from . import trace as tr
from .messages import AckPacket, DataPacket, SignalingMessage
from .simcore import Delivered, Link, Lost, QueueDrop, Simulator


class Network:
    def __init__(self, sim: Simulator, trace: tr.Trace):
        self.sim = sim
        self.trace = trace
        self.links: dict[str, Link] = {}

    def add_link(self, src: str, dst: str, bandwidth_bps: float, propagation_us: int,
                 loss=0.0, queue_capacity: int = 0, air: bool = False) -> Link:
        name = f"{src}>{dst}"
        link = Link(name, bandwidth_bps, propagation_us, loss, queue_capacity, air,
                    rng=self.sim.rng(name))
        self.links[name] = link
        return link

    def link(self, src: str, dst: str) -> Link:
        return self.links[f"{src}>{dst}"]

    def _transmit(self, link: Link, size: int, arrive: Callable[[], None]):
        outcome = link.transmit(size, self.sim.now)
        if isinstance(outcome, Delivered):
            self.sim.schedule(outcome.arrival, arrive, target=link.name)
        return outcome

    def send_data(self, node: str, src: str, dst: str, pkt: DataPacket,
                  handler: Callable[[DataPacket, str], Any], detail: str = "") -> None:
        link = self.link(src, dst)
        t = self.sim.now

        def arrive():
            self.trace.add(self.sim.now, dst, tr.RECV, link=link.name, kind="data",
                           flow=pkt.flow_id, seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                           bytes=pkt.payload_bytes, wire_bytes=pkt.wire_bytes,
                           path=pkt.path.value)
            handler(pkt, link.name)

        self.trace.add(t, node, tr.SEND, link=link.name, kind="data", flow=pkt.flow_id,
                       seq=pkt.seq, counter=pkt.counter, uid=pkt.uid, bytes=pkt.payload_bytes,
                       wire_bytes=pkt.wire_bytes, path=pkt.path.value, detail=detail)
        outcome = self._transmit(link, pkt.wire_bytes, arrive)
        if not isinstance(outcome, Delivered):
            event = tr.LOSS if isinstance(outcome, Lost) else tr.DROP
            self.trace.add(t, node, event, link=link.name, kind="data", flow=pkt.flow_id,
                           seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                           bytes=pkt.payload_bytes, wire_bytes=pkt.wire_bytes,
                           path=pkt.path.value,
                           detail="link-loss" if isinstance(outcome, Lost) else "queue-full")

    def send_signal(self, node: str, src: str, dst: str, msg: SignalingMessage,
                    handler: Callable[[SignalingMessage], Any]) -> None:
        link = self.link(src, dst)
        t = self.sim.now
        medium = "air" if link.air else "wire"

        def arrive():
            self.trace.add(self.sim.now, dst, tr.RECV, link=link.name, kind=msg.kind.value,
                           bytes=msg.size_bytes, wire_bytes=msg.size_bytes, detail=medium)
            handler(msg)

        self.trace.add(t, node, tr.SIGNAL, link=link.name, kind=msg.kind.value,
                       bytes=msg.size_bytes, wire_bytes=msg.size_bytes, detail=medium)
        outcome = self._transmit(link, msg.size_bytes, arrive)
        if not isinstance(outcome, Delivered):
            event = tr.LOSS if isinstance(outcome, Lost) else tr.DROP
            self.trace.add(t, node, event, link=link.name, kind=msg.kind.value,
                           bytes=msg.size_bytes, wire_bytes=msg.size_bytes, detail=medium)

    def send_ack(self, src: str, dst: str, ack: AckPacket,
                 handler: Callable[[AckPacket], Any]) -> None:
        link = self.link(src, dst)
        self._transmit(link, ack.size_bytes, lambda: handler(ack))
