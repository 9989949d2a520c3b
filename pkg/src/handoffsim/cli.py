"""Command line: run, sweep, cost and compare."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import experiments
from .cost import COST_COLUMNS, cost_row
from .runner import run
from .scenario import PROTOCOLS, ScenarioError, load_scenario, normalize_protocol, preset_names
from .simcore import MILLISECOND, to_seconds

SEQLOG_COLUMNS = ["time_s", "seq", "path"]


def _protocols(values):
    if not values:
        return None
    out = []
    for v in values:
        for p in v.split(","):
            out.extend(PROTOCOLS if p == "all" else [normalize_protocol(p)])
    return out


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, rows, columns=None) -> None:
    with path.open("w", newline="") as fh:
        experiments.write_rows(rows, fh, columns)


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    changes = {}
    if args.protocol:
        changes["protocol"] = args.protocol
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        sc = sc.with_changes(**changes)
    result = run(sc)
    out = _out_dir(args.out)
    with (out / "trace.csv").open("w", newline="") as fh:
        result.trace.write_csv(fh)
    _write_csv(out / "summary.csv", [result.summary])
    s = result.summary
    c = result.cost
    cost = {"protocol": s["protocol"], "handoff_latency_ms": s["handoff_latency_ms"],
            "par_latency_ms": sc.par.downlink.latency_ms, "ota_signaling": c.ota_signaling_bytes,
            "otw_signaling": c.otw_signaling_bytes, "ota_old": c.ota_old_link_data_bytes,
            "ota_new": c.ota_new_link_data_bytes, "otw_tunnel": c.otw_tunnel_bytes,
            "total": c.total_ota_bytes}
    _write_csv(out / "cost.csv", [cost], COST_COLUMNS)
    if args.decimate:
        rows = [{"time_s": to_seconds(t), "seq": seq, "path": path}
                for i, (t, seq, path) in enumerate(result.seqlog) if i % args.decimate == 0]
        _write_csv(out / "seqlog.csv", rows, SEQLOG_COLUMNS)
    impact = s["impact"]
    print(f"{sc.name} [{s['protocol']}] seed={s['seed']}: delivered {s['delivered_unique']}"
          f"/{s['sent_unique']}, duplicates {s['app_duplicates']}, "
          f"impact {'n/a' if impact == '' else f'{100 * impact:.1f}%'}, "
          f"decision {s['decision']}->{s['decision_target'] or '-'}"
          f"{' (HARD DISCONNECT)' if s['hard_disconnect'] else ''}, "
          f"OTA total {c.total_ota_bytes:.0f} B")
    print(f"wrote {out}/trace.csv, summary.csv, cost.csv")
    return 0


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    rows = experiments.sweep(sc, args.axis, args.values, _protocols(args.protocols),
                             jobs=args.jobs, seed=args.seed)
    out = _out_dir(args.out)
    _write_csv(out / "summary.csv", rows)
    for r in rows:
        impact = r["impact"]
        print(f"{args.axis}={r['value']:<8g} {r['protocol']:<16} "
              f"impact={'n/a' if impact == '' else f'{100 * impact:.1f}%':>7} "
              f"ota_total={r['sim_total_ota_bytes']:.0f}")
    print(f"wrote {out}/summary.csv ({len(rows)} rows)")
    return 0


def cmd_cost(args) -> int:
    protos = _protocols(args.protocol) or ["safetynet", "fmipv6", "bicast"]
    rows = []
    for lat in args.latency_ms:
        for par_lat in args.par_latency_ms:
            for p in protos:
                rows.append(cost_row(p, lat, par_lat, args.rate_bps, args.targets,
                                     args.bicast_timer_ms, args.packet_bytes))
    if args.out:
        out = _out_dir(args.out)
        _write_csv(out / "cost.csv", rows, COST_COLUMNS)
        print(f"wrote {out}/cost.csv ({len(rows)} rows)")
    else:
        experiments.write_rows(rows, sys.stdout, COST_COLUMNS)
    return 0


def cmd_compare(args) -> int:
    scenarios = [load_scenario(s) for s in args.scenarios]
    protos = _protocols(args.protocols)
    if protos:
        if len(scenarios) != 1:
            raise ScenarioError("--protocols", "give one scenario when expanding protocols")
        scenarios = [scenarios[0].with_changes(protocol=p) for p in protos]
    if args.seed is not None:
        scenarios = [s.with_changes(seed=args.seed) for s in scenarios]
    rows = experiments.compare(scenarios, jobs=args.jobs)
    if args.out:
        out = _out_dir(args.out)
        _write_csv(out / "summary.csv", rows, experiments.COMPARE_COLUMNS)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(experiments.COMPARE_COLUMNS)
    for r in rows:
        w.writerow([r[c] for c in experiments.COMPARE_COLUMNS])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="handoffsim",
                                 description="Packet-level handoff simulator and cost model.")
    sub = ap.add_subparsers(dest="command", required=True)
    scen_help = f"YAML file or preset name ({', '.join(preset_names())})"

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario", help=scen_help)
    p.add_argument("--protocol", help="override the scenario's protocol")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--decimate", type=int, default=0, metavar="N",
                   help="also write seqlog.csv keeping every Nth delivered packet")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario over a range of one parameter")
    p.add_argument("scenario", help=scen_help)
    p.add_argument("--axis", required=True, choices=sorted(experiments.AXES))
    p.add_argument("--values", required=True, type=float, nargs="+")
    p.add_argument("--protocols", nargs="+", help="protocol names, comma lists or 'all'")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost", help="analytic per-handoff cost table")
    p.add_argument("--protocol", nargs="+", help="protocol names, comma lists or 'all'")
    p.add_argument("--latency-ms", type=float, nargs="+", required=True)
    p.add_argument("--par-latency-ms", type=float, nargs="+", default=[5.0])
    p.add_argument("--rate-bps", type=float, required=True)
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--bicast-timer-ms", type=float,
                   help="bicasting duration (default: the handoff latency)")
    p.add_argument("--packet-bytes", type=int,
                   help="payload per packet, adds the 40 B tunnel header to otw_tunnel")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("compare", help="side-by-side protocol comparison")
    p.add_argument("scenarios", nargs="+", help=scen_help)
    p.add_argument("--protocols", nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
