"""Build a simulation from a Scenario, run it, and summarize the outcome."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

from . import trace as tr
from .cost import CostReport, data_overhead, report_from_trace
from .messages import (TCP_HEADER_BYTES, UDP_HEADER_BYTES, AckPacket, DataPacket,
                       fna_size)
from .network import Network
from .protocols import (HandoffConfig, MobileNode, NewAR, PreviousAR, ProtocolKind,
                        default_buffer_packets)
from .scenario import LinkSpec, Scenario
from .simcore import MILLISECOND, SECOND, LossSchedule, Simulator, millis, seconds, to_seconds
from .timing import Action, TimingInputs, buffer_delivery_time, tolerable_delay
from .traffic import FlowStats, Impact, TcpConfig, TcpReceiver, TcpSender, UdpFlow, measure_impact

MN, CN = "MN", "CN"
FLOW = "flow0"


def _loss(spec: LinkSpec):
    if isinstance(spec.loss, list):
        return LossSchedule([(seconds(t), p) for t, p in spec.loss])
    return spec.loss


def _prop(spec: LinkSpec) -> int:
    return int(round(spec.latency_ms * MILLISECOND))


@dataclass
class RunResult:
    scenario: Scenario
    trace: tr.Trace
    stats: FlowStats
    impact: Optional[Impact]
    cost: CostReport
    analytic: CostReport
    summary: dict
    seqlog: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    flushed: dict = field(default_factory=dict)


class Simulation:
    """All nodes and links for one scenario, ready to run."""

    def __init__(self, sc: Scenario, seed: Optional[int] = None):
        self.sc = sc
        self.seed = sc.seed if seed is None else seed
        self.sim = Simulator(self.seed)
        self.trace = tr.Trace()
        self.net = Network(self.sim, self.trace)
        self.protocol = ProtocolKind(sc.protocol)
        self.end_us = seconds(sc.duration_s)
        self.uids = itertools.count(1)
        self._build_links()
        self.cfg = self._handoff_config()
        self._build_nodes()
        self._build_traffic()
        if sc.handoff.enabled:
            self.sim.schedule(seconds(sc.handoff.initiate_at_s), self.mn.start_handoff,
                              target=MN)

    # -- construction ---------------------------------------------------------
    def _build_links(self) -> None:
        sc, add = self.sc, self.net.add_link
        par = sc.par.name
        add(CN, par, sc.cn_link.bandwidth_bps, _prop(sc.cn_link), _loss(sc.cn_link),
            sc.cn_link.queue_capacity)
        add(par, CN, sc.cn_link.bandwidth_bps, _prop(sc.cn_link), 0.0)
        d, u = sc.par.downlink, sc.par.uplink
        add(par, MN, d.bandwidth_bps, _prop(d), _loss(d), d.queue_capacity, air=True)
        add(MN, par, u.bandwidth_bps, _prop(u), _loss(u), u.queue_capacity, air=True)
        for n in sc.nars:
            w = n.wired or sc.backbone
            add(par, n.name, w.bandwidth_bps, _prop(w), _loss(w), w.queue_capacity)
            add(n.name, par, w.bandwidth_bps, _prop(w), 0.0)
            add(n.name, MN, n.downlink.bandwidth_bps, _prop(n.downlink), _loss(n.downlink),
                n.downlink.queue_capacity, air=True)
            add(MN, n.name, n.uplink.bandwidth_bps, _prop(n.uplink), _loss(n.uplink),
                n.uplink.queue_capacity, air=True)
            # return path for acks once the MN is attached at this nAR
            add(n.name, CN, sc.cn_link.bandwidth_bps, _prop(w) + _prop(sc.cn_link), 0.0)

    def _rate_bps(self) -> float:
        t = self.sc.traffic
        if t.kind == "udp":
            return t.rate_bps
        return t.rate_bps or min(self.sc.cn_link.bandwidth_bps, self.sc.par.downlink.bandwidth_bps)

    def _handoff_config(self) -> HandoffConfig:
        sc, ho = self.sc, self.sc.handoff
        pkt = sc.traffic.payload_bytes if sc.traffic.kind == "udp" else sc.traffic.segment_bytes
        expected = (ho.expected_handoff_ms if ho.expected_handoff_ms is not None
                    else ho.attach_latency_ms) / 1000
        cap = ho.nar_buffer_packets
        if cap is None:
            cap = default_buffer_packets(self._rate_bps(), expected, pkt)
        return HandoffConfig(
            protocol=self.protocol, targets=sc.targets, with_ah=ho.with_ah,
            attach_latency_us=millis(ho.attach_latency_ms),
            attach_jitter_us=millis(ho.attach_jitter_ms),
            bicast_timer_us=millis(ho.bicast_timer_ms),
            prrtadv_timeout_us=millis(ho.prrtadv_timeout_ms),
            fback_timeout_us=millis(ho.fback_timeout_ms),
            nar_buffer_packets=cap, buffer_lifetime_us=millis(ho.buffer_lifetime_ms),
            par_downlink_loss=ho.par_downlink_loss, finalize_policy=ho.finalize_policy,
            loss_budget=sc.timing.loss_budget, poll_us=millis(sc.timing.poll_ms),
            silence_us=millis(sc.timing.silence_ms))

    def _build_nodes(self) -> None:
        sc = self.sc
        self.par = PreviousAR(sc.par.name, sc.par.tier, self.net, self.cfg, MN, CN)
        self.nars = {}
        for n in sc.nars:
            nar = NewAR(n.name, n.tier, self.net, self.cfg, sc.par.name, MN, CN)
            nar.accept_handoff = n.accept_handoff
            self.nars[n.name] = nar
        avail = {n.name: seconds(n.available_from_s) for n in sc.nars}
        self.mn = MobileNode(MN, self.net, self.cfg, self.par, self.nars, avail,
                             timing_inputs=self._timing_inputs)
        self.par.mn = self.mn
        self.par.nars = self.nars
        self.par.on_ack_to_cn = self._on_ack
        for nar in self.nars.values():
            nar.par, nar.mn, nar.on_ack_to_cn = self.par, self.mn, self._on_ack
        self.mn.deliver_app = self._deliver

    def _build_traffic(self) -> None:
        t = self.sc.traffic
        self.stats = FlowStats(FLOW, t.kind)
        self.seqlog: list[tuple[int, int, str]] = []
        self.sender: Optional[TcpSender] = None
        self.receiver: Optional[TcpReceiver] = None
        self.udp: Optional[UdpFlow] = None
        self._seen: set[int] = set()
        start = seconds(t.start_s)
        if t.kind == "udp":
            self.udp = UdpFlow(FLOW, t.rate_bps, t.payload_bytes, start, self.end_us, self.uids)
            if self.udp.next_departure is not None:
                self.sim.schedule(start, self._udp_tick, target=CN)
        else:
            cfg = TcpConfig(t.segment_bytes, t.rwnd_bytes, t.init_cwnd_segments,
                            t.initial_rto_s, t.min_rto_s)
            self.sender = TcpSender(self.sim, FLOW, self._cn_send, cfg, self.uids, self.end_us)
            self.receiver = TcpReceiver(FLOW, t.segment_bytes)
            self.sim.schedule(start, self.sender.start, target=CN)

    # -- traffic plumbing -------------------------------------------------------
    def _cn_send(self, pkt: DataPacket) -> None:
        self.stats.sent_packets += 1
        self.stats.sent_bytes += pkt.payload_bytes
        if pkt.retransmission:
            self.stats.resent_bytes += pkt.payload_bytes
            self.stats.resend_log.append((self.sim.now, pkt.payload_bytes))
            self.trace.add(self.sim.now, CN, tr.RESEND, kind="data", flow=pkt.flow_id,
                           seq=pkt.seq, uid=pkt.uid, bytes=pkt.payload_bytes)
        self.net.send_data(CN, CN, self.par.name, pkt, self.par.on_data)

    def _udp_tick(self) -> None:
        pkt = self.udp.tick(self.sim.now)
        self._cn_send(pkt)
        if self.udp.next_departure is not None:
            self.sim.schedule(self.udp.next_departure, self._udp_tick, target=CN)

    def _deliver(self, pkt: DataPacket) -> None:
        now = self.sim.now
        st = self.stats
        st.arrivals.append((now, pkt.payload_bytes))
        self.seqlog.append((now, pkt.seq, pkt.path.value))
        if self.receiver is not None:
            before = self.receiver.rcv_nxt
            ack = self.receiver.on_segment(pkt.seq, pkt.payload_bytes, now)
            st.duplicate_count = self.receiver.duplicate_segments
            if ack > before:
                st.delivered_packets += 1
                st.times.append(now)
                st.values.append(ack)
            self.mn.send_ack(AckPacket(FLOW, ack, now))
            return
        if pkt.seq in self._seen:
            st.duplicate_count += 1
            return
        self._seen.add(pkt.seq)
        st.delivered_packets += 1
        st.times.append(now)
        st.values.append(st.values[-1] + pkt.payload_bytes)

    def _on_ack(self, ack: AckPacket) -> None:
        if self.sender is not None:
            self.sender.on_ack(ack.ack, self.sim.now)

    def _timing_inputs(self, mn: MobileNode) -> Optional[TimingInputs]:
        if self.sender is None:
            return None
        sc = self.sc
        targets = [sc.nar(n) for n in (mn.accepted_targets or self.cfg.targets)]
        bottleneck = sc.timing.bottleneck_bps or min(sc.cn_link.bandwidth_bps,
                                                     sc.par.downlink.bandwidth_bps)
        if sc.timing.rtt_source == "srtt" and self.sender.srtt is not None:
            one_way = self.sender.srtt / 2
        else:
            one_way = max(sc.cn_link.latency_ms + (n.wired or sc.backbone).latency_ms
                          + n.downlink.latency_ms for n in targets) / 1000
        nar_bw = min(n.downlink.bandwidth_bps for n in targets)
        nar_rtt = max(n.downlink.latency_ms + n.uplink.latency_ms for n in targets) / 1000
        missed = mn.losses * sc.traffic.segment_bytes
        return TimingInputs(self.sender.remaining_window(), bottleneck, one_way,
                            buffer_delivery_time(missed, nar_bw, nar_rtt))

    # -- running ------------------------------------------------------------------
    def run(self) -> RunResult:
        self.sim.run_until(self.end_us + seconds(self.sc.drain_s))
        return self._result()

    def _result(self) -> RunResult:
        sc, mn, par = self.sc, self.mn, self.par
        hw = tuple(seconds(x) for x in sc.handoff_window_s)
        rw = tuple(seconds(x) for x in sc.reference_window_s)
        impact = measure_impact(self.stats, hw, rw)
        sim_cost = report_from_trace(self.trace.records, self.protocol, MN, par.name,
                                     par.t_forward, mn.episode_start)
        h_us, s_us = self.latencies()
        targets = len(par.accepted) if self.protocol is ProtocolKind.SAFETYNET else 1
        rate = self._rate_bps()
        pkt = sc.traffic.payload_bytes if sc.traffic.kind == "udp" else sc.traffic.segment_bytes
        timer = self.bicast_window_us() / SECOND
        d_old, d_fna = self.edge_delays()
        analytic = data_overhead(self.protocol, rate, h_us / SECOND, s_us / SECOND,
                                 max(1, targets), timer, packet_bytes=pkt,
                                 old_link_loss=sc.handoff.par_downlink_loss or 0.0,
                                 resend_bytes=sim_cost.resend_bytes, with_ah=sc.handoff.with_ah,
                                 old_link_delay_s=d_old / SECOND, fna_delay_s=d_fna / SECOND)
        summary = self._summary(impact, sim_cost, analytic, h_us, s_us)
        flushed = {name: list(n.flushed) for name, n in self.nars.items()}
        return RunResult(sc, self.trace, self.stats, impact, sim_cost, analytic, summary,
                         self.seqlog, list(mn.decisions), flushed)

    def latencies(self) -> tuple[int, int]:
        """(handoff latency, stop latency) in microseconds as the run measured them.

        Handoff latency runs from the start of forwarding at the pAR to the
        FNA; stop latency from the FNA to the end of direct delivery.
        """
        mn, par = self.mn, self.par
        if par.t_forward is None or mn.fna_sent_at is None:
            return 0, 0
        h = max(0, mn.fna_sent_at - par.t_forward)
        end = par.t_stop if par.t_stop is not None else mn.fna_sent_at
        return h, max(0, end - mn.fna_sent_at)

    def edge_delays(self) -> tuple[int, int]:
        """(direct copy pAR to MN, FNA MN to nAR) transit times in microseconds."""
        sc = self.sc
        t = sc.traffic
        frame = (t.payload_bytes + UDP_HEADER_BYTES if t.kind == "udp"
                 else t.segment_bytes + TCP_HEADER_BYTES)
        down = self.net.link(sc.par.name, MN)
        d_old = down.propagation_us + down.serialization_us(frame)
        chosen = self.mn.chosen or self.cfg.targets[0]
        up = self.net.link(MN, chosen)
        d_fna = up.propagation_us + up.serialization_us(fna_size(1, sc.handoff.with_ah))
        return d_old, d_fna

    def bicast_window_us(self) -> int:
        par = self.par
        if self.protocol is not ProtocolKind.FMIPV6_BICAST or par.t_forward is None:
            return 0
        end = par.t_direct_end if par.t_direct_end is not None else self.end_us
        return end - par.t_forward

    def _blackout_us(self) -> int:
        """Longest gap between application deliveries inside the handoff episode."""
        start = self.mn.episode_start
        if start is None:
            return 0
        times = [t for t, _ in self.stats.arrivals]
        after = [t for t in times if t >= start]
        before = [t for t in times if t < start]
        prev = before[-1] if before else start
        gap = 0
        for t in after:
            gap = max(gap, t - prev)
            prev = t
        return gap

    def _summary(self, impact: Impact, sim_cost: CostReport, analytic: CostReport,
                 h_us: int, s_us: int) -> dict:
        sc, mn, par, st = self.sc, self.mn, self.par, self.stats
        final = mn.decisions[-1] if mn.decisions else None
        sent_unique = (self.udp.next_seq if self.udp is not None
                       else math.ceil(self.sender.high_water / sc.traffic.segment_bytes))
        opt = lambda t: "" if t is None else to_seconds(t)  # noqa: E731
        row = {
            "scenario": sc.name, "protocol": self.protocol.value, "seed": self.seed,
            "traffic": sc.traffic.kind, "sent_packets": st.sent_packets,
            "sent_unique": sent_unique, "delivered_unique": st.delivered_packets,
            "app_losses": (sent_unique - st.delivered_packets) if self.udp is not None
            else max(0, sent_unique - self.receiver.rcv_nxt // sc.traffic.segment_bytes),
            "app_duplicates": st.duplicate_count,
            "progress_handoff_bytes": impact.progress_handoff,
            "progress_reference_bytes": impact.progress_reference,
            "impact": "" if impact.impact is None else impact.impact,
            "resent_handoff_bytes": impact.resent_handoff,
            "resent_total_bytes": st.resent_bytes,
            "timeouts": self.sender.timeouts if self.sender else 0,
            "fast_retransmits": self.sender.fast_retransmits if self.sender else 0,
            "episode_start_s": opt(mn.episode_start), "forwarding_start_s": opt(par.t_forward),
            "fna_sent_s": opt(mn.fna_sent_at), "stop_at_par_s": opt(par.t_stop),
            "handoff_latency_ms": h_us / MILLISECOND, "stop_latency_ms": s_us / MILLISECOND,
            "blackout_ms": self._blackout_us() / MILLISECOND,
            "flushed_packets": sum(len(n.flushed) for n in self.nars.values()),
            "flushed_bytes": sum(n.flushed_bytes for n in self.nars.values()),
            "unrecoverable": sum(len(n.unrecoverable) for n in self.nars.values()),
            "decision": final.decision.action.value if final else "",
            "decision_target": (final.decision.target or "") if final else "",
            "decision_reason": final.decision.reason.value if final else "",
            "finalize_s": opt(mn.finalize_at),
            "tolerable_delay_s": ("" if mn.frozen_inputs is None
                                  else tolerable_delay(mn.frozen_inputs)),
            "vertical_handoffs": sum(d.decision.action is Action.FINALIZE_VERTICAL
                                     for d in mn.decisions),
            "hard_disconnect": mn.hard_disconnect,
        }
        for prefix, rep in (("sim", sim_cost), ("analytic", analytic)):
            for k, v in rep.to_dict().items():
                if k not in ("protocol", "resend_missing"):
                    row[f"{prefix}_{k}"] = v
        return row


def run(sc: Scenario, seed: Optional[int] = None) -> RunResult:
    return Simulation(sc, seed).run()
