import pytest
from hypothesis import given, strategies as st

from handoffsim.timing import (Action, NarView, Reason, TimingInputs, buffer_delivery_time,
                               decide_finalize, tolerable_delay)

US = 1e-6


def test_tolerable_delay_example():
    t = tolerable_delay(TimingInputs(65536, 3.75e6, 0.020, 0.030))
    assert t == pytest.approx(65536 * 8 / 3.75e6 - 0.05, abs=US)
    assert t == pytest.approx(0.0898, abs=1e-4)


def test_tolerable_delay_empty_window_is_negative():
    assert tolerable_delay(TimingInputs(0, 1e6, 0.01, 0.02)) == pytest.approx(-0.03, abs=US)


def test_tolerable_delay_unit_case():
    assert tolerable_delay(TimingInputs(1e6 / 8, 1e6, 0, 0)) == pytest.approx(1.0, abs=US)


def test_buffer_delivery_examples():
    assert buffer_delivery_time(0, 1e6, 0.004) == pytest.approx(0.004, abs=US)
    assert buffer_delivery_time(12_500, 1e6, 0) == pytest.approx(0.1, abs=US)
    assert buffer_delivery_time(500, 11e6, 0.004) == pytest.approx(0.004 + 4000 / 11e6, abs=US)
    with pytest.raises(ValueError):
        buffer_delivery_time(1, 0, 0)


def test_inputs_are_validated():
    with pytest.raises(ValueError):
        TimingInputs(1, 0, 0, 0)
    with pytest.raises(ValueError):
        TimingInputs(-1, 1, 0, 0)


pos = st.floats(0, 1e6, allow_nan=False)
small = st.floats(0, 10, allow_nan=False)


@given(pos, pos, st.floats(1, 1e9), small, small)
def test_tolerable_delay_monotone(w1, w2, b, t, d):
    lo, hi = sorted((w1, w2))
    assert tolerable_delay(TimingInputs(lo, b, t, d)) <= tolerable_delay(TimingInputs(hi, b, t, d))
    assert tolerable_delay(TimingInputs(lo, b, t + 1, d)) <= tolerable_delay(TimingInputs(lo, b, t, d))
    assert tolerable_delay(TimingInputs(lo, b, t, d + 1)) <= tolerable_delay(TimingInputs(lo, b, t, d))


WLAN2 = NarView("WLAN2", "WLAN", True)
WWAN = NarView("WWAN", "WWAN", True)


def test_path_a_preferred_network_wins():
    d = decide_finalize(0.6, [WLAN2, WWAN], "WLAN", 10, 3)
    assert d.action is Action.FINALIZE_HORIZONTAL and d.target == "WLAN2"
    assert d.reason is Reason.PREFERRED_NETWORK_APPEARED


def test_path_b_budget_forces_vertical():
    wlan_gone = NarView("WLAN2", "WLAN", False)
    assert decide_finalize(0.5, [wlan_gone, WWAN], "WLAN", 10, 9).action is Action.KEEP_WAITING
    d = decide_finalize(0.5, [wlan_gone, WWAN], "WLAN", 10, 10)
    assert d.action is Action.FINALIZE_VERTICAL and d.target == "WWAN"
    assert d.reason is Reason.LOSS_BUDGET_EXHAUSTED


def test_negative_tolerance_finalizes_at_once():
    d = decide_finalize(0.0, [WWAN], "WLAN", 10, 0, TimingInputs(0, 1e6, 0.01, 0.01))
    assert d.action is Action.FINALIZE_VERTICAL
    assert d.reason is Reason.TOLERANCE_EXPIRED
    assert d.tolerable_delay_s == pytest.approx(-0.02)


def test_tolerance_waits_until_deadline():
    inputs = TimingInputs(125_000, 1e6, 0.0, 0.0)  # T_t = 1 s
    assert decide_finalize(0.999, [WWAN], "WLAN", 10, 0, inputs).action is Action.KEEP_WAITING
    assert decide_finalize(1.0, [WWAN], "WLAN", 10, 0, inputs).finalizes


def test_no_reachable_nar_is_a_hard_disconnect():
    d = decide_finalize(0.1, [NarView("WWAN", "WWAN", False)], "WLAN", 1, 5)
    assert d.action is Action.HARD_DISCONNECT and d.target is None


def test_wwan_to_wwan_counts_as_horizontal():
    d = decide_finalize(0.0, [WWAN], "WWAN", 10, 0)
    assert d.action is Action.FINALIZE_HORIZONTAL


@given(st.lists(st.tuples(st.sampled_from(["WLAN", "WWAN"]), st.booleans()), min_size=1,
                max_size=5),
       st.sampled_from(["WLAN", "WWAN"]), st.integers(0, 20), st.integers(0, 20),
       st.floats(0, 5))
def test_never_horizontal_to_a_costlier_tier(nars, current, budget, losses, elapsed):
    views = [NarView(f"n{i}", tier, up) for i, (tier, up) in enumerate(nars)]
    d = decide_finalize(elapsed, views, current, budget, losses)
    by_name = {v.name: v for v in views}
    if d.action is Action.FINALIZE_HORIZONTAL:
        assert by_name[d.target].tier == current or by_name[d.target].cost <= 0
        assert by_name[d.target].reachable
    if d.finalizes:
        assert by_name[d.target].reachable
