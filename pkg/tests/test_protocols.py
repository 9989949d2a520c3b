import pytest
from hypothesis import given, strategies as st

from handoffsim import trace as tr
from handoffsim.messages import DataPacket
from handoffsim.protocols import (NarBuffer, Phase, ProtocolKind, ReceiptSet, allowed_transition,
                                  default_buffer_packets)
from handoffsim.runner import Simulation
from handoffsim.scenario import load_preset


def pkt(i):
    return DataPacket(i, "f", i, 100, 48, 0)


def test_nar_buffer_orders_and_ignores_duplicates():
    b = NarBuffer("n", 10)
    for k in (3, 1, 2, 2):
        b.add(k, pkt(k))
    assert b.keys() == [1, 2, 3]
    assert b.byte_total == 300
    out = b.take(keep={2}.__contains__)
    assert [k for k, _ in out] == [1, 3]
    assert len(b) == 0 and b.byte_total == 0


def test_nar_buffer_overflow_drops_oldest():
    b = NarBuffer("n", 2)
    b.add(1, pkt(1))
    b.add(2, pkt(2))
    stored, evicted = b.add(3, pkt(3))
    assert stored and evicted[0] == 1
    assert b.keys() == [2, 3] and b.dropped == [1]


@given(st.lists(st.integers(1, 50)), st.integers(1, 20))
def test_nar_buffer_bounded_sorted_unique(keys, cap):
    b = NarBuffer("n", cap)
    for k in keys:
        b.add(k, pkt(k))
    ks = b.keys()
    assert len(ks) <= cap
    assert ks == sorted(set(ks))


def test_receipt_set():
    r = ReceiptSet()
    assert r.accept(2) and r.accept(3) and r.accept(7)
    assert not r.accept(3)
    assert r.ranges() == [(2, 3), (7, 7)]


def test_default_buffer_is_twice_the_expected_handoff():
    assert default_buffer_packets(100_000, 0.2, 100) == 50


def test_phase_ladder():
    S, R = ProtocolKind.SAFETYNET, ProtocolKind.FMIPV6_REACTIVE
    assert allowed_transition(S, Phase.IDLE, Phase.DISCOVERING)
    assert not allowed_transition(S, Phase.IDLE, Phase.INITIATED)
    assert not allowed_transition(S, Phase.INITIATED, Phase.ATTACHED)
    assert allowed_transition(R, Phase.IDLE, Phase.INITIATED)
    assert not allowed_transition(R, Phase.IDLE, Phase.DISCOVERING)


def simulate(protocol="safetynet", name="fig4_udp", **changes):
    sim = Simulation(load_preset(name).with_changes(protocol=protocol, **changes))
    result = sim.run()
    return sim, result


def records(result, **kw):
    return [r for r in result.trace.records
            if all(getattr(r, k) == v for k, v in kw.items())]


def test_mn_walks_the_phase_ladder():
    _, res = simulate()
    phases = [r.kind for r in records(res, node="MN", event=tr.PHASE)]
    assert phases == ["Discovering", "Initiated", "LinkSwitching", "Attached", "Finalized"]


def test_safetynet_marks_direct_and_tunneled_copies_alike():
    sim, res = simulate()
    direct = {r.counter for r in records(res, event=tr.SEND, link="pAR>MN") if r.counter}
    tunneled = {r.counter for r in records(res, event=tr.SEND, link="pAR>nAR") if r.counter}
    assert direct and direct <= tunneled
    assert min(tunneled) == 1
    assert sorted(tunneled) == list(range(1, max(tunneled) + 1))


def test_second_stop_bicast_is_a_no_op():
    sim, res = simulate()
    assert sim.par.stop_messages == 2
    assert len(records(res, node="pAR", event=tr.PHASE, kind="multicast-stop")) == 1
    assert len(records(res, node="pAR", event=tr.PHASE, kind="stop-ignored")) == 1


def test_fmipv6_tunnels_only():
    sim, res = simulate("fmipv6")
    after = [r for r in records(res, event=tr.SEND, link="pAR>MN", kind="data")
             if r.time_us >= sim.par.t_forward]
    assert after == []
    assert res.summary["flushed_packets"] > 20
    assert all(r.counter is None for r in records(res, event=tr.FLUSH))


@pytest.mark.parametrize("timer_ms", [0.0, 50.0, 20_000.0])
def test_bicast_timer_bounds_direct_copies(timer_ms):
    sim, res = simulate("bicast", **{"handoff.bicast_timer_ms": timer_ms})
    t0 = sim.par.t_forward
    direct = [r.time_us for r in records(res, event=tr.SEND, link="pAR>MN", kind="data")
              if r.time_us >= t0]
    if timer_ms == 0:
        assert direct == []
    elif timer_ms == 50:
        assert direct and max(direct) < t0 + 50_000
    else:
        assert max(direct) > sim.end_us - 10_000
    fm, fres = simulate("fmipv6")
    assert res.summary["flushed_packets"] == fres.summary["flushed_packets"]


def test_denied_handoff_keeps_mn_on_old_link():
    sim, res = simulate("fmipv6", **{"nars.0.accept_handoff": False})
    assert records(res, node="MN", event=tr.PHASE, kind="handoff-rejected")
    assert not sim.par.forwarding
    assert res.summary["app_losses"] == 0


def test_unchosen_target_discards_its_buffer():
    sc = load_preset("fig1_pathA").with_changes(**{"handoff.buffer_lifetime_ms": 1000.0})
    sim = Simulation(sc)
    res = sim.run()
    assert res.summary["decision_target"] == "WLAN2"
    assert records(res, node="WWAN", event=tr.DISCARD)
    assert not records(res, node="WWAN", event=tr.FLUSH)
    assert records(res, node="WLAN2", event=tr.FLUSH)


def test_reactive_loses_packets_while_detached():
    sim, res = simulate("fmipv6_reactive")
    assert res.summary["app_losses"] > 0
    assert records(res, node="MN", event=tr.LOSS, detail="interface-down")
    relayed = records(res, node="nAR", event=tr.SIGNAL, kind="FBU")
    assert relayed and relayed[0].link == "nAR>pAR"
    assert sim.par.t_forward > sim.mn.fna_sent_at


def test_lost_fback_falls_back_to_timeout():
    sim, res = simulate("fmipv6", **{"handoff.par_downlink_loss": 1.0})
    assert records(res, node="MN", event=tr.TIMEOUT, kind="FBAck")
    assert res.summary["app_losses"] == 0


def test_lost_prrtadv_is_retried():
    sim, res = simulate("safetynet", **{"par.downlink.loss": [[3.8, 1.0], [3.85, 0.0]]})
    assert sim.mn.rtsolpr_sent == 2
    assert records(res, node="MN", event=tr.TIMEOUT, kind="PrRtAdv")
    assert res.summary["decision"] == "finalize_horizontal"


def test_buffer_overflow_is_reported_unrecoverable():
    sim, res = simulate("safetynet", **{"handoff.nar_buffer_packets": 5,
                                        "handoff.par_downlink_loss": 1.0})
    assert res.summary["unrecoverable"] > 0
    assert res.summary["app_losses"] == res.summary["unrecoverable"]
