"""Handoff state machines at the mobile node and the access routers.

Covers FMIPv6 (predictive and reactive), FMIPv6 with bicasting, and
SafetyNet (counter-marked multicast to several candidate routers, selective
flush of the packets the MN missed, Stop-Bicast sent over both paths).
"""

from __future__ import annotations

import enum
import math
from bisect import insort
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import trace as tr
from .messages import (AckPacket, DataPacket, MessageKind, Path, SignalingMessage,
                       counter_ranges, expand_ranges)
from .network import Network
from .simcore import SECOND
from .timing import (Action, FinalizeDecision, NarView, TimingInputs, decide_finalize)


class ProtocolKind(str, enum.Enum):
    FMIPV6_PREDICTIVE = "fmipv6"
    FMIPV6_REACTIVE = "fmipv6_reactive"
    FMIPV6_BICAST = "bicast"
    SAFETYNET = "safetynet"

    @property
    def marks_packets(self) -> bool:
        return self is ProtocolKind.SAFETYNET

    @property
    def predictive(self) -> bool:
        return self is not ProtocolKind.FMIPV6_REACTIVE


class Phase(str, enum.Enum):
    IDLE = "Idle"
    DISCOVERING = "Discovering"
    INITIATED = "Initiated"
    LINK_SWITCHING = "LinkSwitching"
    ATTACHED = "Attached"
    FINALIZED = "Finalized"


_LADDER = [Phase.IDLE, Phase.DISCOVERING, Phase.INITIATED, Phase.LINK_SWITCHING,
           Phase.ATTACHED, Phase.FINALIZED]


def allowed_transition(protocol: ProtocolKind, old: Phase, new: Phase) -> bool:
    """Phases advance one rung at a time; reactive FMIPv6 skips discovery."""
    i, j = _LADDER.index(old), _LADDER.index(new)
    if j == i + 1:
        return not (protocol is ProtocolKind.FMIPV6_REACTIVE and new is Phase.DISCOVERING)
    return (protocol is ProtocolKind.FMIPV6_REACTIVE
            and old is Phase.IDLE and new is Phase.INITIATED)


def default_buffer_packets(rate_bps: float, expected_handoff_s: float, packet_bytes: int) -> int:
    return max(1, math.ceil(rate_bps * expected_handoff_s / (packet_bytes * 8)) * 2)


class NarBuffer:
    """Packets held at an nAR, keyed by counter (or arrival index when unmarked).

    Overflow drops the oldest entry; the dropped keys are remembered so a
    later flush request can report them as unrecoverable.
    """

    def __init__(self, owner: str, capacity: int = 0):
        self.owner = owner
        self.capacity = capacity
        self._keys: list[int] = []
        self._entries: dict[int, DataPacket] = {}
        self.byte_total = 0
        self.dropped: list[int] = []

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> list[int]:
        return list(self._keys)

    def add(self, key: int, pkt: DataPacket) -> tuple[bool, Optional[tuple[int, DataPacket]]]:
        """Store ``pkt``; returns (stored, evicted entry or None)."""
        if key in self._entries:
            return False, None
        evicted = None
        if self.capacity and len(self._keys) >= self.capacity:
            old = self._keys.pop(0)
            old_pkt = self._entries.pop(old)
            self.byte_total -= old_pkt.payload_bytes
            self.dropped.append(old)
            evicted = (old, old_pkt)
        insort(self._keys, key)
        self._entries[key] = pkt
        self.byte_total += pkt.payload_bytes
        return True, evicted

    def take(self, keep: Callable[[int], bool] = lambda k: False) -> list[tuple[int, DataPacket]]:
        """Remove and return, in key order, every entry for which ``keep`` is false."""
        out = [(k, self._entries[k]) for k in self._keys if not keep(k)]
        self._keys.clear()
        self._entries.clear()
        self.byte_total = 0
        return out

    def clear(self) -> int:
        n = len(self._keys)
        self.take()
        return n


class ReceiptSet:
    def __init__(self):
        self.received: set[int] = set()
        self.highest_seen = 0

    def accept(self, counter: int) -> bool:
        if counter in self.received:
            return False
        self.received.add(counter)
        self.highest_seen = max(self.highest_seen, counter)
        return True

    def ranges(self) -> list[tuple[int, int]]:
        return counter_ranges(self.received)


@dataclass
class HandoffConfig:
    protocol: ProtocolKind
    targets: list
    with_ah: bool = True
    attach_latency_us: int = 200_000
    attach_jitter_us: int = 0
    bicast_timer_us: int = 400_000
    prrtadv_timeout_us: int = 100_000
    fback_timeout_us: int = 50_000
    nar_buffer_packets: int = 0
    buffer_lifetime_us: int = 5 * SECOND
    par_downlink_loss: Optional[float] = None
    finalize_policy: str = "immediate"
    loss_budget: int = 10
    poll_us: int = 10_000
    silence_us: int = 0


@dataclass
class DecisionRecord:
    time_us: int
    decision: FinalizeDecision
    losses: int
    elapsed_us: int


class PreviousAR:
    def __init__(self, name: str, tier: str, net: Network, cfg: HandoffConfig, mn: str = "MN",
                 cn: str = "CN"):
        self.name = name
        self.tier = tier
        self.net = net
        self.cfg = cfg
        self.mn_name = mn
        self.cn_name = cn
        self.mn: "MobileNode" = None
        self.nars: dict[str, "NewAR"] = {}
        self.on_ack_to_cn: Callable[[AckPacket], None] = None
        self.forwarding = False
        self.direct_active = True
        self.stopped = False
        self.counter = 0
        self.targets: list = []
        self.accepted: list = []
        self._pending: set = set()
        self.chosen: Optional[str] = None
        self.reactive = False
        self.t_forward: Optional[int] = None
        self.t_stop: Optional[int] = None
        self.t_direct_end: Optional[int] = None
        self.stop_messages = 0

    @property
    def now(self) -> int:
        return self.net.sim.now

    # -- data plane -------------------------------------------------------
    def on_data(self, pkt: DataPacket, link: str = "") -> None:
        if not self.forwarding:
            self._direct(pkt)
            return
        proto = self.cfg.protocol
        if proto is ProtocolKind.SAFETYNET:
            self.counter += 1
            pkt = pkt.copy(counter=self.counter)
            if not self.stopped:
                self._direct(pkt)
                for nar in self.accepted:
                    self._tunnel(pkt, nar)
            else:
                self._tunnel(pkt, self.chosen)
        elif proto is ProtocolKind.FMIPV6_BICAST:
            if self.direct_active:
                self._direct(pkt)
            self._tunnel(pkt, self.accepted[0])
        else:
            self._tunnel(pkt, self.accepted[0])

    def _direct(self, pkt: DataPacket) -> None:
        self.net.send_data(self.name, self.name, self.mn_name,
                           pkt.copy(path=Path.DIRECT_FROM_PAR), self.mn.on_data)

    def _tunnel(self, pkt: DataPacket, nar: str) -> None:
        self.net.send_data(self.name, self.name, nar, pkt.copy(path=Path.TUNNELED_TO_NAR),
                           self.nars[nar].on_tunneled)

    def on_ack(self, ack: AckPacket) -> None:
        self.net.send_ack(self.name, self.cn_name, ack, self.on_ack_to_cn)

    # -- signaling ---------------------------------------------------------
    def _signal(self, kind: MessageKind, dst: str, handler, via: Optional[str] = None, **kw):
        msg = SignalingMessage.make(kind, self.name, dst, self.cfg.with_ah, **kw)
        self.net.send_signal(self.name, self.name, via or dst, msg, handler)

    def on_signal(self, msg: SignalingMessage) -> None:
        kind = msg.kind
        if kind is MessageKind.RTSOLPR:
            self._signal(MessageKind.PRRTADV, self.mn_name, self.mn.on_signal,
                         targets=tuple(self.nars))
        elif kind is MessageKind.FBU:
            if self.targets:
                return  # duplicate FBU for an episode already in progress
            self.reactive = msg.relayed
            self.targets = list(msg.targets)
            self._pending = set(self.targets)
            for nar in self.targets:
                self._signal(MessageKind.HI, nar, self.nars[nar].on_signal)
        elif kind is MessageKind.HACK:
            if msg.src not in self._pending:
                return
            self._pending.discard(msg.src)
            if msg.accepted:
                self.accepted.append(msg.src)
            else:
                self.net.trace.add(self.now, self.name, tr.PHASE, kind="handoff-denied",
                                   detail=msg.src)
            if not self._pending:
                self._handoff_acknowledged()
        elif kind is MessageKind.STOP_BICAST:
            self.stop_messages += 1
            if self.stopped:
                self.net.trace.add(self.now, self.name, tr.PHASE, kind="stop-ignored",
                                   detail=msg.src)
                return
            self.stopped = True
            self.direct_active = False
            self.chosen = msg.chosen
            self.t_stop = self.t_direct_end = self.now
            self.net.trace.add(self.now, self.name, tr.PHASE, kind="multicast-stop",
                               detail=f"from={msg.src};chosen={msg.chosen}")

    def _handoff_acknowledged(self) -> None:
        # keep accepted in target order so counters line up across nARs
        self.accepted = [t for t in self.targets if t in self.accepted]
        if self.accepted:
            self._start_forwarding()
        ok = bool(self.accepted)
        if self.reactive:
            nar = self.accepted[0] if ok else self.targets[0]
            self._signal(MessageKind.FBACK, self.mn_name, self.nars[nar].on_signal, via=nar,
                         accepted=ok)
        else:
            self._signal(MessageKind.FBACK, self.mn_name, self.mn.on_signal, accepted=ok,
                         targets=tuple(self.accepted))

    def _start_forwarding(self) -> None:
        proto = self.cfg.protocol
        self.forwarding = True
        self.t_forward = self.now
        self.direct_active = proto in (ProtocolKind.SAFETYNET, ProtocolKind.FMIPV6_BICAST)
        if proto is ProtocolKind.FMIPV6_BICAST:
            if self.cfg.bicast_timer_us <= 0:
                self.direct_active = False
                self.t_direct_end = self.now
            else:
                self.net.sim.schedule_in(self.cfg.bicast_timer_us, self.bicast_timer_expiry,
                                         target=self.name)
        if self.cfg.par_downlink_loss is not None:
            self.net.link(self.name, self.mn_name).loss_override = self.cfg.par_downlink_loss
        self.net.trace.add(self.now, self.name, tr.PHASE, kind="forwarding-start",
                           detail=";".join(self.accepted))

    def bicast_timer_expiry(self) -> None:
        if self.direct_active:
            self.direct_active = False
            self.t_direct_end = self.now
            self.net.trace.add(self.now, self.name, tr.PHASE, kind="bicast-timer-expired")


class NewAR:
    def __init__(self, name: str, tier: str, net: Network, cfg: HandoffConfig, par: str,
                 mn: str = "MN", cn: str = "CN"):
        self.name = name
        self.tier = tier
        self.net = net
        self.cfg = cfg
        self.par_name = par
        self.mn_name = mn
        self.cn_name = cn
        self.par: PreviousAR = None
        self.mn: "MobileNode" = None
        self.on_ack_to_cn: Callable[[AckPacket], None] = None
        self.accept_handoff = True
        self.accepted = False
        self.attached = False
        self.discarded = False
        self.buffer = NarBuffer(name, cfg.nar_buffer_packets)
        self._arrivals = 0
        self._lifetime = None
        self.flushed: list[int] = []
        self.flushed_bytes = 0
        self.unrecoverable: list[int] = []
        self.t_fna: Optional[int] = None

    @property
    def now(self) -> int:
        return self.net.sim.now

    def _signal(self, kind: MessageKind, dst: str, handler, via: Optional[str] = None, **kw):
        msg = SignalingMessage.make(kind, self.name, dst, self.cfg.with_ah, **kw)
        self.net.send_signal(self.name, self.name, via or dst, msg, handler)

    def on_signal(self, msg: SignalingMessage) -> None:
        kind = msg.kind
        if kind is MessageKind.HI:
            if not self.accept_handoff:
                self._signal(MessageKind.HACK, self.par_name, self.par.on_signal, accepted=False)
                return
            self.accepted = True
            if not self.attached:
                self._lifetime = self.net.sim.schedule_in(
                    self.cfg.buffer_lifetime_us, self._expire, target=self.name)
            self._signal(MessageKind.HACK, self.par_name, self.par.on_signal)
        elif kind is MessageKind.FNA:
            self.on_fna(msg)
        elif kind is MessageKind.FBU:
            # reactive mode: the MN's FBU arrives over our link and is relayed to the pAR
            relayed = SignalingMessage.make(MessageKind.FBU, msg.src, self.par_name,
                                            self.cfg.with_ah, targets=msg.targets, relayed=True)
            self.net.send_signal(self.name, self.name, self.par_name, relayed, self.par.on_signal)
        elif kind is MessageKind.FBACK:
            fwd = SignalingMessage.make(MessageKind.FBACK, msg.src, self.mn_name,
                                        self.cfg.with_ah, accepted=msg.accepted)
            self.net.send_signal(self.name, self.name, self.mn_name, fwd, self.mn.on_signal)

    def on_fna(self, msg: SignalingMessage) -> None:
        self.attached = True
        self.t_fna = self.now
        if self._lifetime is not None:
            self._lifetime.cancel()
        if self.cfg.protocol is ProtocolKind.SAFETYNET:
            received = expand_ranges(msg.received_ranges)
            for k in self.buffer.dropped:
                if k not in received:
                    self.unrecoverable.append(k)
                    self.net.trace.add(self.now, self.name, tr.UNRECOVERABLE, counter=k,
                                       detail="dropped-by-buffer-overflow")
            entries = self.buffer.take(keep=received.__contains__)
        else:
            entries = self.buffer.take()
        for key, pkt in entries:
            out = pkt.copy(path=Path.FLUSHED_FROM_BUFFER)
            self.flushed.append(key)
            self.flushed_bytes += out.payload_bytes
            self.net.trace.add(self.now, self.name, tr.FLUSH, kind="data", flow=out.flow_id,
                               seq=out.seq, counter=out.counter, uid=out.uid,
                               bytes=out.payload_bytes, path=out.path.value, detail=str(key))
            self.net.send_data(self.name, self.name, self.mn_name, out, self.mn.on_data)
        if self.cfg.protocol is ProtocolKind.SAFETYNET:
            self._signal(MessageKind.STOP_BICAST, self.par_name, self.par.on_signal,
                         chosen=self.name)

    def on_tunneled(self, pkt: DataPacket, link: str = "") -> None:
        if self.attached:
            out = pkt.copy(path=Path.POST_HANDOFF_DIRECT)
            self.net.trace.add(self.now, self.name, tr.FORWARD, kind="data", flow=out.flow_id,
                               seq=out.seq, counter=out.counter, uid=out.uid,
                               bytes=out.payload_bytes, path=out.path.value)
            self.net.send_data(self.name, self.name, self.mn_name, out, self.mn.on_data)
            return
        if not self.accepted or self.discarded:
            self.net.trace.add(self.now, self.name, tr.DROP, kind="data", flow=pkt.flow_id,
                               seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                               bytes=pkt.payload_bytes, detail="no-handoff-state")
            return
        self._arrivals += 1
        key = pkt.counter if pkt.counter is not None else self._arrivals
        stored = pkt.copy(path=Path.TUNNELED_TO_NAR)
        ok, evicted = self.buffer.add(key, stored)
        if ok:
            self.net.trace.add(self.now, self.name, tr.BUFFER, kind="data", flow=pkt.flow_id,
                               seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                               bytes=pkt.payload_bytes, wire_bytes=pkt.wire_bytes,
                               path=Path.TUNNELED_TO_NAR.value, detail=str(key))
        else:
            self.net.trace.add(self.now, self.name, tr.DROP, kind="data", flow=pkt.flow_id,
                               seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                               bytes=pkt.payload_bytes, detail="duplicate-counter")
        if evicted is not None:
            k, old = evicted
            self.net.trace.add(self.now, self.name, tr.DROP, kind="data", flow=old.flow_id,
                               seq=old.seq, counter=old.counter, uid=old.uid,
                               bytes=old.payload_bytes, detail="buffer-overflow")

    def _expire(self) -> None:
        if self.attached:
            return
        self.discarded = True
        n = self.buffer.clear()
        self.net.trace.add(self.now, self.name, tr.DISCARD, detail=f"packets={n}")

    def on_ack(self, ack: AckPacket) -> None:
        self.net.send_ack(self.name, self.cn_name, ack, self.on_ack_to_cn)


class MobileNode:
    def __init__(self, name: str, net: Network, cfg: HandoffConfig, par: PreviousAR,
                 nars: dict, nar_available_from: dict,
                 timing_inputs: Optional[Callable[["MobileNode"], Optional[TimingInputs]]] = None):
        self.name = name
        self.net = net
        self.cfg = cfg
        self.par = par
        self.nars: dict[str, NewAR] = nars
        self.available_from = nar_available_from
        self.timing_inputs = timing_inputs
        self.phase = Phase.IDLE
        self.receipts = ReceiptSet()
        self.direct_high = 0
        self.losses = 0
        self.last_direct: Optional[int] = None
        self.attached_to: Optional[str] = None
        self.old_if_up = True
        self.candidates: list = []
        self.accepted_targets: list = []
        self.chosen: Optional[str] = None
        self.episode_start: Optional[int] = None
        self.episode_end: Optional[int] = None
        self.fbu_sent_at: Optional[int] = None
        self.fna_sent_at: Optional[int] = None
        self.finalize_at: Optional[int] = None
        self.decisions: list[DecisionRecord] = []
        self.frozen_inputs: Optional[TimingInputs] = None
        self.hard_disconnect = False
        self.deliver_app: Callable[[DataPacket], None] = lambda pkt: None
        self.rtsolpr_sent = 0
        self._retry = None
        self._fback_timer = None
        self._attach_rng = net.sim.rng("attach")

    @property
    def now(self) -> int:
        return self.net.sim.now

    def set_phase(self, new: Phase) -> None:
        if not allowed_transition(self.cfg.protocol, self.phase, new):
            raise RuntimeError(f"{self.cfg.protocol.value}: illegal phase change "
                               f"{self.phase.value} -> {new.value}")
        self.net.trace.add(self.now, self.name, tr.PHASE, kind=new.value,
                           detail=f"from={self.phase.value}")
        self.phase = new

    def _signal(self, kind: MessageKind, dst: str, handler, via: Optional[str] = None, **kw):
        msg = SignalingMessage.make(kind, self.name, dst, self.cfg.with_ah, **kw)
        self.net.send_signal(self.name, self.name, via or dst, msg, handler)

    # -- handoff control ---------------------------------------------------
    def start_handoff(self) -> None:
        if self.phase is not Phase.IDLE:
            return
        if self.cfg.protocol is ProtocolKind.FMIPV6_REACTIVE:
            # connectivity to the pAR is already gone when a reactive handoff starts
            self.old_if_up = False
            self.set_phase(Phase.INITIATED)
            self.episode_start = self.now
            self._record(FinalizeDecision(self._tier_action(self.cfg.targets[0]),
                                          self.cfg.targets[0]), detail="reactive")
            self.begin_link_switch(self.cfg.targets[0])
            return
        self.set_phase(Phase.DISCOVERING)
        self.mn_discover()

    def mn_discover(self) -> None:
        self.rtsolpr_sent += 1
        self._signal(MessageKind.RTSOLPR, self.par.name, self.par.on_signal)
        self._retry = self.net.sim.schedule_in(self.cfg.prrtadv_timeout_us, self._rtsolpr_timeout,
                                               target=self.name)

    def _rtsolpr_timeout(self) -> None:
        if self.phase is Phase.DISCOVERING:
            self.net.trace.add(self.now, self.name, tr.TIMEOUT, kind=MessageKind.PRRTADV.value,
                               detail="retry")
            self.mn_discover()

    def on_signal(self, msg: SignalingMessage) -> None:
        if msg.kind is MessageKind.PRRTADV:
            if self.phase is not Phase.DISCOVERING:
                return
            if self._retry is not None:
                self._retry.cancel()
            self.candidates = list(msg.targets)
            targets = [t for t in self.cfg.targets if t in self.candidates]
            self.mn_initiate(targets)
        elif msg.kind is MessageKind.FBACK:
            if msg.targets:
                self.accepted_targets = list(msg.targets)
            if not msg.accepted:
                self.net.trace.add(self.now, self.name, tr.PHASE, kind="handoff-rejected")
                return
            if self.phase is Phase.INITIATED and self.cfg.finalize_policy == "immediate":
                self._finalize_immediate()

    def mn_initiate(self, targets: list) -> None:
        if not targets:
            raise ValueError("handoff initiation needs at least one target nAR")
        self.fbu_sent_at = self.now
        self._signal(MessageKind.FBU, self.par.name, self.par.on_signal, targets=tuple(targets))
        self.set_phase(Phase.INITIATED)
        self.episode_start = self.now
        if self.cfg.finalize_policy == "immediate":
            self._fback_timer = self.net.sim.schedule_in(
                self.cfg.fback_timeout_us, self._fback_timeout, target=self.name)
            return
        if self.timing_inputs is not None:
            self.frozen_inputs = self.timing_inputs(self)
        if self.frozen_inputs is not None:
            from .timing import tolerable_delay
            t_t = max(0.0, tolerable_delay(self.frozen_inputs))
            self.net.sim.schedule(self.episode_start + int(t_t * SECOND), self.evaluate,
                                  target=self.name)
        for name in self.cfg.targets:
            t = self.available_from.get(name, 0)
            if t > self.now:
                self.net.sim.schedule(t, self.evaluate, target=self.name)
        self.net.sim.schedule_in(self.cfg.poll_us, self._poll, target=self.name)
        self.evaluate()

    def _fback_timeout(self) -> None:
        if self.phase is Phase.INITIATED:
            self.net.trace.add(self.now, self.name, tr.TIMEOUT, kind=MessageKind.FBACK.value)
            self._finalize_immediate()

    def _tier_action(self, target: str) -> Action:
        from .timing import TIER_COST
        cur = TIER_COST[self.par.tier]
        return (Action.FINALIZE_HORIZONTAL if TIER_COST[self.nars[target].tier] <= cur
                else Action.FINALIZE_VERTICAL)

    def _finalize_immediate(self) -> None:
        if self._fback_timer is not None:
            self._fback_timer.cancel()
        target = self.cfg.targets[0]
        self._record(FinalizeDecision(self._tier_action(target), target), detail="immediate")
        self.begin_link_switch(target)

    def _poll(self) -> None:
        if self.phase is not Phase.INITIATED or self.hard_disconnect:
            return
        self.evaluate()
        if self.phase is Phase.INITIATED and not self.hard_disconnect:
            self.net.sim.schedule_in(self.cfg.poll_us, self._poll, target=self.name)

    def nar_views(self) -> list[NarView]:
        names = self.accepted_targets or self.cfg.targets
        return [NarView(n, self.nars[n].tier, self.now >= self.available_from.get(n, 0))
                for n in names]

    def evaluate(self) -> FinalizeDecision:
        """Run the finalize decision with what the MN knows right now."""
        if self.phase is not Phase.INITIATED or self.hard_disconnect:
            return FinalizeDecision(Action.KEEP_WAITING)
        elapsed = self.now - self.episode_start
        losses = self.losses
        if self.cfg.silence_us:
            quiet_since = max(self.last_direct or 0, self.episode_start)
            if self.now - quiet_since >= self.cfg.silence_us:
                losses = max(losses, self.cfg.loss_budget)
        # the tolerance deadline is honoured to the clock tick
        elapsed_s = (elapsed + 1) / SECOND if self.frozen_inputs is not None else elapsed / SECOND
        decision = decide_finalize(elapsed_s, self.nar_views(), self.par.tier,
                                   self.cfg.loss_budget, losses, self.frozen_inputs)
        if decision.action is Action.KEEP_WAITING:
            return decision
        self._record(decision)
        if decision.action is Action.HARD_DISCONNECT:
            self.hard_disconnect = True
            return decision
        self.begin_link_switch(decision.target)
        return decision

    def _record(self, decision: FinalizeDecision, detail: str = "") -> None:
        rec = DecisionRecord(self.now, decision, self.losses,
                             self.now - (self.episode_start or self.now))
        self.decisions.append(rec)
        tt = "" if decision.tolerable_delay_s is None else f";tt={decision.tolerable_delay_s:.6f}"
        self.net.trace.add(self.now, self.name, tr.DECISION, kind=decision.action.value,
                           link=decision.target or "",
                           detail=f"reason={decision.reason.value or detail};"
                                  f"losses={self.losses}{tt}")

    def begin_link_switch(self, target: str) -> None:
        self.chosen = target
        self.finalize_at = self.now
        self.set_phase(Phase.LINK_SWITCHING)
        delay = self.cfg.attach_latency_us
        if self.cfg.attach_jitter_us:
            delay += int(self._attach_rng.uniform(-1, 1) * self.cfg.attach_jitter_us)
        self.net.sim.schedule_in(max(0, delay), self.mn_attach, target=self.name)

    def mn_attach(self) -> None:
        self.set_phase(Phase.ATTACHED)
        nar = self.nars[self.chosen]
        self.attached_to = self.chosen
        self.fna_sent_at = self.now
        proto = self.cfg.protocol
        if proto is ProtocolKind.SAFETYNET:
            self._signal(MessageKind.FNA, nar.name, nar.on_signal,
                         received_ranges=tuple(self.receipts.ranges()))
            self.mn_send_stop_bicast_direct()
        else:
            self._signal(MessageKind.FNA, nar.name, nar.on_signal)
            if proto is ProtocolKind.FMIPV6_REACTIVE:
                self._signal(MessageKind.FBU, self.par.name, nar.on_signal, via=nar.name,
                             targets=(nar.name,))
                self.fbu_sent_at = self.now
        self.set_phase(Phase.FINALIZED)
        self.episode_end = self.now

    def mn_send_stop_bicast_direct(self) -> None:
        self._signal(MessageKind.STOP_BICAST, self.par.name, self.par.on_signal,
                     chosen=self.chosen)

    # -- data plane ---------------------------------------------------------
    def on_data(self, pkt: DataPacket, link: str = "") -> None:
        direct = pkt.path is Path.DIRECT_FROM_PAR
        if direct and not self.old_if_up:
            self.net.trace.add(self.now, self.name, tr.LOSS, kind="data", flow=pkt.flow_id,
                               seq=pkt.seq, uid=pkt.uid, bytes=pkt.payload_bytes,
                               path=pkt.path.value, detail="interface-down")
            return
        if direct:
            self.last_direct = self.now
        if pkt.counter is not None:
            if direct and pkt.counter > self.direct_high:
                self.losses += pkt.counter - self.direct_high - 1
                self.direct_high = pkt.counter
            if not self.mn_filter_duplicates(pkt):
                return
        self.net.trace.add(self.now, self.name, tr.DELIVER, kind="data", flow=pkt.flow_id,
                           seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                           bytes=pkt.payload_bytes, path=pkt.path.value)
        self.deliver_app(pkt)
        if self.cfg.finalize_policy == "timing" and self.phase is Phase.INITIATED:
            self.evaluate()

    def mn_filter_duplicates(self, pkt: DataPacket) -> bool:
        """True when the packet goes up to the application."""
        if pkt.counter is None:
            return True
        if self.receipts.accept(pkt.counter):
            return True
        self.net.trace.add(self.now, self.name, tr.DUPLICATE, kind="data", flow=pkt.flow_id,
                           seq=pkt.seq, counter=pkt.counter, uid=pkt.uid,
                           bytes=pkt.payload_bytes, path=pkt.path.value)
        return False

    def send_ack(self, ack: AckPacket) -> None:
        if self.attached_to is None:
            self.net.send_ack(self.name, self.par.name, ack, self.par.on_ack)
        else:
            nar = self.nars[self.attached_to]
            self.net.send_ack(self.name, nar.name, ack, nar.on_ack)
