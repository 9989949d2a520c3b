import pytest
import yaml
from hypothesis import given, settings, strategies as st

from handoffsim.scenario import (ScenarioError, dumps, load_preset, load_scenario, loads,
                                 preset_names, save_scenario, scenario_from_dict)

PRESETS = ["fig1_pathA", "fig1_pathB", "fig4_udp", "fig5_tcp", "fig7_sweep", "fig8_totals"]


def test_all_presets_ship():
    assert preset_names() == sorted(PRESETS)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_round_trip(name):
    sc = load_preset(name)
    assert loads(dumps(sc)) == sc


def test_fig4_parameters():
    sc = load_preset("fig4_udp")
    assert sc.traffic.kind == "udp" and sc.traffic.rate_bps == 100_000
    assert sc.traffic.payload_bytes == 100 and sc.handoff.attach_latency_ms == 200


def test_path_a_schedule():
    sc = load_preset("fig1_pathA")
    assert sc.nar("WLAN2").available_from_s == 4.6
    assert sc.handoff.finalize_policy == "timing"


def test_file_round_trip(tmp_path):
    sc = load_preset("fig5_tcp")
    path = tmp_path / "s.yaml"
    save_scenario(sc, path)
    assert load_scenario(path) == sc
    assert load_scenario("fig5_tcp") == sc


def base():
    return yaml.safe_load(dumps(load_preset("fig4_udp")))


def expect_error(data, field):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(data)
    assert exc.value.field == field
    return exc.value


def test_missing_nar_list_names_the_field():
    d = base()
    del d["nars"]
    expect_error(d, "nars")


def test_empty_nar_list_rejected():
    d = base()
    d["nars"] = []
    expect_error(d, "nars")


def test_unknown_field_rejected():
    d = base()
    d["handoff"]["attach_latncy_ms"] = 5
    expect_error(d, "handoff.attach_latncy_ms")


def test_bad_types_and_values_name_the_field():
    d = base()
    d["nars"][0]["downlink"]["bandwidth_bps"] = "fast"
    expect_error(d, "nars[0].downlink.bandwidth_bps")
    d = base()
    d["nars"][0]["tier"] = "LTE"
    expect_error(d, "nars[0].tier")
    d = base()
    d["handoff"]["initiate_at_s"] = 20.0
    expect_error(d, "handoff.initiate_at_s")
    d = base()
    d["protocol"] = "mip4"
    expect_error(d, "protocol")
    d = base()
    d["par"]["downlink"]["loss"] = [[0, 1.5]]
    expect_error(d, "par.downlink.loss[0]")


def test_baseline_with_two_targets_rejected():
    d = yaml.safe_load(dumps(load_preset("fig1_pathA")))
    d["protocol"] = "fmipv6"
    d["handoff"]["finalize_policy"] = "immediate"
    expect_error(d, "handoff.targets")


def test_parse_error_reported():
    with pytest.raises(ScenarioError):
        loads("nars: [unclosed")


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "none.yaml")


def test_protocol_aliases():
    sc = load_preset("fig4_udp")
    assert sc.with_changes(protocol="FMIPv6-Bicast").protocol == "bicast"
    assert sc.with_changes(protocol="FMIPv6_Predictive").protocol == "fmipv6"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 9.9), st.floats(0, 1000), st.floats(1e3, 1e9),
       st.sampled_from(["safetynet", "fmipv6", "bicast", "fmipv6_reactive"]))
def test_round_trip_property(seed, init, attach, bw, proto):
    sc = load_preset("fig4_udp").with_changes(**{
        "seed": seed, "handoff.initiate_at_s": init, "handoff.attach_latency_ms": attach,
        "par.downlink.bandwidth_bps": bw, "protocol": proto})
    assert loads(dumps(sc)) == sc
