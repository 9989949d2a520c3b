"""Per-event trace records and their fixed CSV layout."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Optional

# event kinds written by the simulator
SEND = "send"
RECV = "recv"
LOSS = "loss"
DROP = "drop"
BUFFER = "buffer"
FLUSH = "flush"
FORWARD = "forward"
DELIVER = "deliver"
DUPLICATE = "duplicate"
SIGNAL = "signal"
DECISION = "decision"
PHASE = "phase"
TIMEOUT = "timeout"
RESEND = "resend"
UNRECOVERABLE = "unrecoverable"
DISCARD = "discard"


@dataclass
class TraceRecord:
    time_us: int
    node: str
    event: str
    link: str = ""
    kind: str = ""
    flow: str = ""
    seq: Optional[int] = None
    counter: Optional[int] = None
    uid: Optional[int] = None
    bytes: int = 0
    wire_bytes: int = 0
    path: str = ""
    detail: str = ""


COLUMNS = [f.name for f in fields(TraceRecord)]


class Trace:
    """Append-only record list, ordered by (time, emission order)."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def add(self, time_us: int, node: str, event: str, **kw) -> TraceRecord:
        if self.records and time_us < self.records[-1].time_us:
            raise RuntimeError("trace records must be appended in time order")
        rec = TraceRecord(time_us, node, event, **kw)
        self.records.append(rec)
        return rec

    def select(self, event: Optional[str] = None, node: Optional[str] = None,
               link: Optional[str] = None) -> list[TraceRecord]:
        return [r for r in self.records
                if (event is None or r.event == event)
                and (node is None or r.node == node)
                and (link is None or r.link == link)]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.records:
            w.writerow(["" if v is None else v for v in astuple(r)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _opt_int(s: str) -> Optional[int]:
    return None if s == "" else int(s)


def read_csv(fh) -> list[TraceRecord]:
    out = []
    for row in csv.DictReader(fh):
        out.append(TraceRecord(
            int(row["time_us"]), row["node"], row["event"], row["link"], row["kind"],
            row["flow"], _opt_int(row["seq"]), _opt_int(row["counter"]), _opt_int(row["uid"]),
            int(row["bytes"]), int(row["wire_bytes"]), row["path"], row["detail"]))
    return out


def iter_rows(records: Iterable[TraceRecord]):
    for r in records:
        yield astuple(r)
