"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line."""

import filecmp
import io
import random

import pytest

from handoffsim import trace as tr
from handoffsim.cli import main
from handoffsim.cost import ota_signaling, otw_signaling
from handoffsim.messages import message_size
from handoffsim.runner import Simulation, run
from handoffsim.scenario import load_preset
from handoffsim.simcore import SECOND
from handoffsim.timing import TimingInputs, buffer_delivery_time, tolerable_delay


@pytest.fixture
def verdict(capsys):
    def _verdict(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title}"
                  + (f" ({detail})" if detail else ""))
        assert ok, detail
    return _verdict


TABLE2 = {"FBU": (112, 136), "FBAck": (72, 96), "HI": (112, 136), "HAck": (72, 96),
          "RtSolPr": (64, 88), "PrRtAdv": (80, 104), "FNA": (64, 88), "StopBicast": (48, 72)}


def test_c1_signaling_oracles(verdict):
    got = (ota_signaling("safetynet", 1), ota_signaling("safetynet", 2), otw_signaling(1),
           otw_signaling(2))
    sizes_ok = all(message_size(k, False) == p and message_size(k, True) == a
                   for k, (p, a) in TABLE2.items())
    verdict(1, "byte-exact signaling oracles", got == (584, 616, 304, 536) and sizes_ok,
            f"ota={got[:2]} otw={got[2:]} table2_exact={sizes_ok}")


def test_c2_lossless_handoff(verdict):
    bad = []
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        for seed in range(1, 21):
            sc = load_preset("fig4_udp").with_changes(**{"handoff.par_downlink_loss": p,
                                                         "seed": seed})
            s = run(sc).summary
            if not (s["delivered_unique"] == s["sent_unique"] == 1250
                    and s["app_losses"] == 0 and s["app_duplicates"] == 0):
                bad.append((p, seed, s["app_losses"], s["app_duplicates"]))
    verdict(2, "SafetyNet delivers every CN packet exactly once", not bad,
            f"100 runs, failures={bad[:5]}")


def test_c3_worst_case_degeneracy(verdict):
    pairs = []
    for name in ("fig4_udp", "fig5_tcp"):
        flushed = {}
        for proto in ("safetynet", "fmipv6"):
            sc = load_preset(name).with_changes(protocol=proto,
                                                **{"handoff.par_downlink_loss": 1.0})
            flushed[proto] = run(sc).summary["flushed_bytes"]
        pairs.append((name, flushed["safetynet"], flushed["fmipv6"]))
    ok = all(a == b and a > 0 for _, a, b in pairs)
    verdict(3, "loss 1: SafetyNet flushed bytes == FMIPv6 flushed bytes", ok, str(pairs))


def flush_oracle(rows, chosen):
    """Replay a trace: buffered-before-FNA minus received-directly-before-FNA."""
    fna_sent = next(i for i, r in enumerate(rows)
                    if r.event == tr.SIGNAL and r.node == "MN" and r.kind == "FNA")
    fna_recv = next(i for i, r in enumerate(rows)
                    if r.event == tr.RECV and r.node == chosen and r.kind == "FNA")
    buffered = {r.counter for r in rows[:fna_recv]
                if r.event == tr.BUFFER and r.node == chosen}
    direct = {r.counter for r in rows[:fna_sent]
              if r.event == tr.RECV and r.node == "MN" and r.link == "pAR>MN"
              and r.counter is not None}
    flushed = [r.counter for r in rows if r.event == tr.FLUSH and r.node == chosen]
    return buffered - direct, flushed


def test_c4_selective_delivery_minimality(verdict):
    mismatches, lossy = [], 0
    for seed in range(1, 101):
        p = random.Random(seed).uniform(0.05, 0.95)
        sc = load_preset("fig4_udp").with_changes(seed=seed,
                                                  **{"handoff.par_downlink_loss": p})
        res = run(sc)
        rows = tr.read_csv(io.StringIO(res.trace.to_csv()))
        expected, flushed = flush_oracle(rows, res.summary["decision_target"])
        lossy += bool(expected)
        if sorted(expected) != flushed or len(set(flushed)) != len(flushed):
            mismatches.append(seed)
    verdict(4, "flush set equals sent-during-episode minus received-directly",
            not mismatches and lossy > 90, f"100 seeds, {lossy} with losses, mismatches={mismatches}")


def test_c5_tcp_impact_ordering(verdict):
    impact = {p: run(load_preset("fig5_tcp").with_changes(protocol=p)).summary["impact"]
              for p in ("safetynet", "fmipv6", "bicast")}
    ok = impact["safetynet"] <= 0.05 and impact["fmipv6"] > impact["bicast"] > impact["safetynet"]
    verdict(5, "impact FMIPv6 > Bicast > SafetyNet, SafetyNet <= 5%", ok,
            ", ".join(f"{k}={100 * v:.1f}%" for k, v in impact.items()))


def test_c6_overhead_reduction(verdict):
    total = {}
    for p in ("safetynet", "fmipv6", "bicast"):
        res = run(load_preset("fig8_totals").with_changes(protocol=p))
        total[p] = res.cost.total_ota_bytes
    r_f = total["safetynet"] / total["fmipv6"]
    r_b = total["safetynet"] / total["bicast"]
    verdict(6, "SafetyNet OTA total <= 15% of FMIPv6 and <= 10% of Bicast",
            r_f <= 0.15 and r_b <= 0.10,
            f"totals={ {k: round(v) for k, v in total.items()} } "
            f"ratios={100 * r_f:.1f}%/{100 * r_b:.1f}%")


def budget_exhausted_at(rows, start, budget):
    high, losses = 0, 0
    for r in rows:
        if (r.event == tr.RECV and r.node == "MN" and r.link == "pAR>MN"
                and r.counter is not None and r.time_us >= start):
            if r.counter > high:
                losses += r.counter - high - 1
                high = r.counter
            if losses >= budget:
                return r.time_us
    return None


def test_c7_timing_algorithm(verdict):
    notes, ok = [], True
    for seed in range(1, 11):
        a = run(load_preset("fig1_pathA"), seed=seed).summary
        good = (a["decision"] == "finalize_horizontal" and a["decision_target"] == "WLAN2"
                and a["vertical_handoffs"] == 0)
        ok &= good
        sim = Simulation(load_preset("fig1_pathB"), seed=seed)
        res = sim.run()
        b = res.summary
        limit = budget_exhausted_at(res.trace.records, sim.mn.episode_start,
                                    sim.sc.timing.loss_budget)
        good = (b["decision"] == "finalize_vertical" and b["decision_target"] == "WWAN"
                and limit is not None and sim.mn.finalize_at <= limit)
        ok &= good
        if not good:
            notes.append(f"seed {seed}: A={a['decision_target']} B={b['decision']}")
    tcp = load_preset("fig1_pathB").with_changes(**{
        "traffic.kind": "tcp", "traffic.rate_bps": 3.75e6, "cn_link.bandwidth_bps": 3_910_715})
    sim = Simulation(tcp)
    b = sim.run().summary
    t_t = b["tolerable_delay_s"]
    tcp_ok = (b["decision"] == "finalize_vertical"
              and sim.mn.finalize_at <= sim.mn.episode_start + max(0.0, t_t) * SECOND)
    hand = [(tolerable_delay(TimingInputs(65536, 3.75e6, 0.020, 0.030)),
             65536 * 8 / 3.75e6 - 0.05),
            (tolerable_delay(TimingInputs(1e6 / 8, 1e6, 0, 0)), 1.0),
            (buffer_delivery_time(12_500, 1e6, 0), 0.1),
            (buffer_delivery_time(500, 11e6, 0.004), 0.004 + 4000 / 11e6)]
    hand_ok = all(abs(x - y) <= 1e-6 for x, y in hand)
    verdict(7, "Path A horizontal to WLAN2, Path B vertical to WWAN in time",
            ok and tcp_ok and hand_ok,
            f"10 seeds each; tcp T_t={t_t:.4f}s finalize_ok={tcp_ok}; hand values={hand_ok}"
            + (f"; {notes}" if notes else ""))


def test_c8_analytic_matches_simulation(verdict):
    worst = {}
    ok = True
    for loss in (0.0, 1.0):
        for p in ("safetynet", "fmipv6", "bicast"):
            sc = load_preset("fig4_udp").with_changes(protocol=p,
                                                      **{"handoff.par_downlink_loss": loss})
            res = run(sc)
            sim, ana = res.cost, res.analytic
            ok &= sim.ota_signaling_bytes == ana.ota_signaling_bytes
            ok &= sim.otw_signaling_bytes == ana.otw_signaling_bytes
            pkt = sc.traffic.payload_bytes
            for field, unit in (("ota_old_link_data_bytes", pkt), ("ota_new_link_data_bytes", pkt),
                                ("duplicate_bytes", pkt), ("otw_tunnel_bytes", pkt + 40)):
                gap = abs(getattr(sim, field) - getattr(ana, field))
                worst[field] = max(worst.get(field, 0), gap)
                ok &= gap <= unit
    verdict(8, "analytic signaling exact, data within one packet",
            ok, ", ".join(f"{k}<= {v:.1f}" for k, v in worst.items()))


def test_c9_determinism(verdict, tmp_path):
    same = True
    for name in ("fig4_udp", "fig1_pathB"):
        dirs = []
        for i in range(3):
            d = tmp_path / f"{name}-{i}"
            main(["run", name, "--seed", "7", "--out", str(d)])
            dirs.append(d)
        same &= all(filecmp.cmp(dirs[0] / "trace.csv", d / "trace.csv", shallow=False)
                    for d in dirs[1:])
    verdict(9, "same seed and scenario give byte-identical trace.csv", same, "3 runs each")
