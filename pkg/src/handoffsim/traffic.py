"""Traffic sources and sinks: constant-bit-rate UDP and a NewReno-style TCP."""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .messages import TCP_HEADER_BYTES, UDP_HEADER_BYTES, DataPacket
from .simcore import SECOND, Event, Simulator, to_seconds


class UdpFlow:
    """Constant-bit-rate source; ``rate_bps`` counts payload bits only."""

    def __init__(self, flow_id: str, rate_bps: float, payload_bytes: int, start: int = 0,
                 stop: Optional[int] = None, uids: Optional[Iterator[int]] = None):
        if payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")
        self.flow_id = flow_id
        self.rate_bps = rate_bps
        self.payload_bytes = payload_bytes
        self.stop = stop
        self.uids = uids or itertools.count(1)
        self.next_seq = 0
        self.interval_us = (round(payload_bytes * 8 * SECOND / rate_bps) if rate_bps > 0 else None)
        self.next_departure: Optional[int] = start if self.interval_us else None

    def tick(self, clock: int) -> DataPacket:
        if self.next_departure is None or clock != self.next_departure:
            raise ValueError(f"UDP tick at {clock} does not match departure {self.next_departure}")
        pkt = DataPacket(next(self.uids), self.flow_id, self.next_seq, self.payload_bytes,
                         UDP_HEADER_BYTES, clock)
        self.next_seq += 1
        nxt = clock + self.interval_us
        self.next_departure = nxt if self.stop is None or nxt < self.stop else None
        return pkt


@dataclass
class TcpConfig:
    segment_bytes: int = 1400
    rwnd_bytes: int = 65536
    init_cwnd_segments: int = 2
    initial_rto_s: float = 1.0
    min_rto_s: float = 0.2
    max_rto_s: float = 60.0


class TcpSender:
    """Bulk-transfer sender at the CN.

    Slow start, congestion avoidance, fast retransmit and NewReno fast
    recovery, RTO with exponential backoff and go-back-N after a timeout.
    ``send`` is called with each outgoing segment.
    """

    def __init__(self, sim: Simulator, flow_id: str, send: Callable[[DataPacket], None],
                 config: TcpConfig = TcpConfig(), uids: Optional[Iterator[int]] = None,
                 stop: Optional[int] = None):
        self.sim = sim
        self.flow_id = flow_id
        self.send = send
        self.cfg = config
        self.mss = config.segment_bytes
        self.uids = uids or itertools.count(1)
        self.stop = stop
        self.cwnd = float(config.init_cwnd_segments * self.mss)
        self.ssthresh = float(config.rwnd_bytes)
        self.rwnd = config.rwnd_bytes
        self.snd_una = 0
        self.snd_nxt = 0
        self.high_water = 0
        self.recover = 0
        self.in_recovery = False
        self.dupack_count = 0
        self.srtt: Optional[float] = None
        self.rttvar: Optional[float] = None
        self.rto = config.initial_rto_s
        self.resent_bytes = 0
        self.sent_bytes = 0
        self.resend_log: list[tuple[int, int]] = []
        self.timeouts = 0
        self.fast_retransmits = 0
        self._first_sent: dict[int, int] = {}
        self._retransmitted: set[int] = set()
        self._timer: Optional[Event] = None

    # -- window -----------------------------------------------------------
    @property
    def flight(self) -> int:
        return self.snd_nxt - self.snd_una

    def remaining_window(self) -> int:
        return max(0, int(min(self.cwnd, self.rwnd)) - self.flight)

    def start(self) -> None:
        self._try_send()

    def _stopped(self) -> bool:
        return self.stop is not None and self.sim.now >= self.stop

    def _emit(self, seq: int) -> DataPacket:
        now = self.sim.now
        resend = seq < self.high_water
        pkt = DataPacket(next(self.uids), self.flow_id, seq, self.mss, TCP_HEADER_BYTES, now,
                         retransmission=resend)
        if resend:
            self.resent_bytes += self.mss
            self.resend_log.append((now, self.mss))
            self._retransmitted.add(seq)
        else:
            self._first_sent[seq] = now
        self.sent_bytes += self.mss
        self.high_water = max(self.high_water, seq + self.mss)
        self.send(pkt)
        if self._timer is None:
            self._arm_timer()
        return pkt

    def _try_send(self) -> list[DataPacket]:
        out = []
        limit = self.snd_una + int(min(self.cwnd, self.rwnd))
        while self.snd_nxt + self.mss <= limit:
            if self._stopped() and self.snd_nxt >= self.high_water:
                break
            out.append(self._emit(self.snd_nxt))
            self.snd_nxt += self.mss
        return out

    # -- timers -----------------------------------------------------------
    def _arm_timer(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
        self._timer = self.sim.schedule_in(int(round(self.rto * SECOND)), self._on_timer,
                                           target=self.flow_id)

    def _disarm_timer(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def _on_timer(self) -> None:
        self._timer = None
        if self.snd_una < self.high_water:
            self.on_timeout(self.sim.now)

    def _rtt_sample(self, r: float) -> None:
        if self.srtt is None:
            self.srtt, self.rttvar = r, r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        self.rto = min(self.cfg.max_rto_s, max(self.cfg.min_rto_s, self.srtt + 4 * self.rttvar))

    # -- events -----------------------------------------------------------
    def on_ack(self, ack: int, clock: int) -> list[DataPacket]:
        mss = self.mss
        if ack > self.snd_una:
            last = ack - mss
            if last in self._first_sent and last not in self._retransmitted:
                self._rtt_sample(to_seconds(clock - self._first_sent[last]))
            for seq in range(self.snd_una, ack, mss):
                self._first_sent.pop(seq, None)
            acked = ack - self.snd_una
            if self.in_recovery:
                if ack >= self.recover:
                    self.in_recovery = False
                    self.cwnd = self.ssthresh
                else:
                    # partial ack: resend the next hole, deflate by the amount acked
                    self.snd_una = ack
                    self._emit(ack)
                    self.cwnd = max(float(mss), self.cwnd - acked + mss)
            elif self.cwnd < self.ssthresh:
                self.cwnd += mss
            else:
                self.cwnd += mss * mss / self.cwnd
            self.snd_una = ack
            self.snd_nxt = max(self.snd_nxt, ack)
            if not self.in_recovery:
                self.dupack_count = 0
            if self.snd_una < self.high_water:
                self._arm_timer()
            else:
                self._disarm_timer()
        elif ack == self.snd_una and self.high_water > self.snd_una:
            self.dupack_count += 1
            if self.in_recovery:
                self.cwnd += mss
            elif self.dupack_count == 3 and self.snd_una >= self.recover:
                self.fast_retransmits += 1
                self.ssthresh = max(self.flight / 2, 2.0 * mss)
                self.recover = self.high_water
                self.in_recovery = True
                self._emit(self.snd_una)
                self.cwnd = self.ssthresh + 3 * mss
        return self._try_send()

    def on_timeout(self, clock: int) -> DataPacket:
        self.timeouts += 1
        self.ssthresh = max(self.flight / 2, 2.0 * self.mss)
        self.cwnd = float(self.mss)
        self.recover = self.high_water
        self.in_recovery = False
        self.dupack_count = 0
        self.snd_nxt = self.snd_una
        self.rto = min(self.cfg.max_rto_s, self.rto * 2)
        pkt = self._emit(self.snd_una)
        self.snd_nxt += self.mss
        self._arm_timer()
        return pkt


class TcpReceiver:
    """In-order reassembly at the MN; acks every arriving segment at once."""

    def __init__(self, flow_id: str, mss: int):
        self.flow_id = flow_id
        self.mss = mss
        self.rcv_nxt = 0
        self._ooo: set[int] = set()
        self.duplicate_segments = 0
        self.progress_times: list[int] = [0]
        self.progress_values: list[int] = [0]

    def on_segment(self, seq: int, length: int, clock: int) -> int:
        if seq < self.rcv_nxt or seq in self._ooo:
            self.duplicate_segments += 1
        elif seq == self.rcv_nxt:
            self.rcv_nxt += length
            while self.rcv_nxt in self._ooo:
                self._ooo.remove(self.rcv_nxt)
                self.rcv_nxt += self.mss
            self.progress_times.append(clock)
            self.progress_values.append(self.rcv_nxt)
        else:
            self._ooo.add(seq)
        return self.rcv_nxt


@dataclass
class FlowStats:
    """Application-side view of one flow at the MN.

    ``progress`` is a step function of delivered in-order bytes over time.
    """

    flow_id: str
    kind: str
    sent_packets: int = 0
    sent_bytes: int = 0
    delivered_packets: int = 0
    duplicate_count: int = 0
    loss_count: int = 0
    resent_bytes: int = 0
    times: list[int] = field(default_factory=lambda: [0])
    values: list[int] = field(default_factory=lambda: [0])
    resend_log: list[tuple[int, int]] = field(default_factory=list)
    arrivals: list[tuple[int, int]] = field(default_factory=list)

    def value_at(self, t: int) -> int:
        i = bisect_right(self.times, t) - 1
        return self.values[i] if i >= 0 else 0

    def progress(self, t1: int, t2: int) -> int:
        return self.value_at(t2) - self.value_at(t1)

    def resent_between(self, t1: int, t2: int) -> int:
        return sum(b for t, b in self.resend_log if t1 <= t < t2)

    def received_rate(self, bin_us: int, t_end: int) -> list[tuple[float, float]]:
        """Delivered payload rate (bit/s) per time bin, as (bin start s, rate)."""
        nbins = max(1, -(-t_end // bin_us))
        bins = [0] * nbins
        for t, b in self.arrivals:
            i = min(t // bin_us, nbins - 1)
            bins[i] += b
        return [(to_seconds(i * bin_us), v * 8 * SECOND / bin_us) for i, v in enumerate(bins)]


@dataclass(frozen=True)
class Impact:
    impact: Optional[float]
    progress_handoff: int
    progress_reference: int
    resent_handoff: int
    resent_reference: int


def measure_impact(stats: FlowStats, handoff_window: tuple[int, int],
                   reference_window: tuple[int, int]) -> Impact:
    """Relative loss of progress during the handoff window versus a reference window.

    Returns ``impact=None`` when the reference window made no progress.
    """
    t1, t2 = handoff_window
    r1, r2 = reference_window
    if t2 - t1 != r2 - r1:
        raise ValueError("handoff and reference windows must have equal length")
    hw = stats.progress(t1, t2)
    rw = stats.progress(r1, r2)
    impact = None if rw <= 0 else min(1.0, max(0.0, 1.0 - hw / rw))
    return Impact(impact, hw, rw, stats.resent_between(t1, t2), stats.resent_between(r1, r2))
