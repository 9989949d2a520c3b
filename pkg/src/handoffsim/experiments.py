"""Sweeps and side-by-side protocol comparisons built on single runs."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional, Sequence

from .runner import run
from .scenario import Scenario, ScenarioError, normalize_protocol

AXES = {
    "handoff_latency": ("handoff.attach_latency_ms",),
    "loss_prob": ("handoff.par_downlink_loss",),
    "par_latency": ("par.downlink.latency_ms", "par.uplink.latency_ms"),
    "stop_timer": ("handoff.bicast_timer_ms",),
}

COMPARE_COLUMNS = ["scenario", "protocol", "progress_handoff_bytes", "progress_reference_bytes",
                   "resent_handoff_bytes", "impact_pct", "total_ota_bytes"]


def sweep_point(sc: Scenario, axis: str, value: float, protocol: Optional[str] = None,
                seed: Optional[int] = None) -> Scenario:
    if axis not in AXES:
        raise ScenarioError("axis", f"unknown sweep axis {axis!r}; expected one of {sorted(AXES)}")
    changes = {path: value for path in AXES[axis]}
    if protocol is not None:
        changes["protocol"] = protocol
    if seed is not None:
        changes["seed"] = seed
    return sc.with_changes(**changes)


def _run_row(args) -> dict:
    sc, axis, value = args
    row = {"axis": axis, "value": value}
    row.update(run(sc).summary)
    return row


def sweep(sc: Scenario, axis: str, values: Sequence[float],
          protocols: Optional[Sequence[str]] = None, jobs: int = 1,
          seed: Optional[int] = None) -> list[dict]:
    """One summary row per (value, protocol), ordered by value then protocol."""
    protos = [normalize_protocol(p) for p in (protocols or [sc.protocol])]
    work = [(sweep_point(sc, axis, v, p, seed), axis, v) for v in values for p in protos]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_row, work))
    return [_run_row(w) for w in work]


def _shape(sc: Scenario) -> dict:
    d = sc.to_dict()
    d.pop("protocol")
    d.pop("name")
    if d["handoff"]["targets"] is None:
        d["handoff"]["targets"] = sc.targets
    return d


def compare(scenarios: Sequence[Scenario], jobs: int = 1) -> list[dict]:
    """Run scenarios that differ only in protocol and tabulate them side by side."""
    if not scenarios:
        raise ScenarioError("scenarios", "nothing to compare")
    base = _shape(scenarios[0])
    for i, sc in enumerate(scenarios[1:], 1):
        if _shape(sc) != base:
            diff = sorted(k for k in base if base[k] != _shape(sc)[k])
            raise ScenarioError(f"scenarios[{i}]",
                                f"differs from the first in more than the protocol: {diff}")
    work = [(sc, "protocol", sc.protocol) for sc in scenarios]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_row, work))
    else:
        rows = [_run_row(w) for w in work]
    out = []
    for r in rows:
        impact = r["impact"]
        out.append({
            "scenario": r["scenario"], "protocol": r["protocol"],
            "progress_handoff_bytes": r["progress_handoff_bytes"],
            "progress_reference_bytes": r["progress_reference_bytes"],
            "resent_handoff_bytes": r["resent_handoff_bytes"],
            "impact_pct": "" if impact == "" else round(100 * impact, 2),
            "total_ota_bytes": r["sim_total_ota_bytes"],
        })
    return out


def write_rows(rows: Iterable[dict], fh, columns: Optional[Sequence[str]] = None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
