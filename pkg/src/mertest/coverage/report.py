"""Log replay, coverage classification and report rendering."""
from __future__ import annotations

import enum
import html
from dataclasses import dataclass, field
from typing import Iterable

from .instrument import CounterMeta, MetaEntry


class UnknownLabelError(Exception):
    def __init__(self, label: int):
        self.label = label
        super().__init__(f"log refers to unknown label {label}")


class CoverageDegree(enum.Enum):
    COVERED = "covered"
    PARTIALLY_COVERED = "partially_covered"
    NOT_COVERED = "not_covered"


CSS_CLASS = {
    CoverageDegree.COVERED: "covered",
    CoverageDegree.PARTIALLY_COVERED: "partial",
    CoverageDegree.NOT_COVERED: "uncovered",
}


def degree(enter: int, exit_: int) -> CoverageDegree:
    if exit_ > 0:
        return CoverageDegree.COVERED
    if enter > 0:
        return CoverageDegree.PARTIALLY_COVERED
    return CoverageDegree.NOT_COVERED


@dataclass
class CoverageItem:
    entry: MetaEntry
    enter_count: int
    exit_count: int
    degree: CoverageDegree


@dataclass
class CoverageReport:
    items: list = field(default_factory=list)

    def by_kind(self, kind: str) -> list:
        return [i for i in self.items if i.entry.kind == kind]

    def summary(self) -> dict:
        out: dict = {}
        for item in self.items:
            per_kind = out.setdefault(item.entry.kind, {d: 0 for d in CoverageDegree})
            per_kind[item.degree] += 1
        return out


# -- log files ----------------------------------------------------------------

def format_event(event: tuple) -> str:
    tag, payload = event
    if tag == "L":
        return f"L {payload}\n"
    return "B " + ",".join(str(p) for p in payload) + "\n"


def parse_log(text: str) -> list:
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        tag, _, rest = line.partition(" ")
        try:
            if tag == "L":
                events.append(("L", int(rest)))
            elif tag == "B":
                events.append(("B", tuple(int(x) for x in rest.split(","))))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"log line {lineno}: malformed event {line!r}") from None
    return events


def replay_log(events: Iterable[tuple], meta: CounterMeta) -> dict:
    """Counter values after applying ``events``; every meta label starts at zero."""
    counts = {label: 0 for label in meta.labels()}
    for tag, payload in events:
        labels = (payload,) if tag == "L" else payload
        for label in labels:
            if label not in counts:
                raise UnknownLabelError(label)
            counts[label] += 1
    return counts


def classify(counts: dict, meta: CounterMeta) -> CoverageReport:
    items = []
    for entry in meta.entries:
        enter, exit_ = counts.get(entry.enter, 0), counts.get(entry.exit, 0)
        items.append(CoverageItem(entry, enter, exit_, degree(enter, exit_)))
    return CoverageReport(items)


# -- rendering -------------------------------------------------------------------

_STYLE = """\
body { font-family: sans-serif; }
pre { font-family: monospace; line-height: 1.35; }
.covered { background: #b6e8b0; }
.partial { background: #f5e79e; }
.uncovered { background: #f2a9a9; }
.legend span { padding: 0 0.5em; margin-right: 0.5em; }
"""


def _offsets(text: str) -> list:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def emit_html(report: CoverageReport, source_text: str, title: str = "Coverage") -> str:
    """Standalone HTML listing of ``source_text`` with goal spans coloured.

    Only atomic goal entries are rendered; where spans overlap the innermost
    one decides the colour.
    """
    starts = _offsets(source_text)
    classes: list = [None] * len(source_text)
    spans = []
    for item in report.by_kind("goal"):
        span = item.entry.span
        if not span or span[0] > len(starts) or span[2] > len(starts):
            continue
        lo = starts[span[0] - 1] + span[1] - 1
        hi = starts[span[2] - 1] + span[3] - 1
        if 0 <= lo < hi <= len(source_text):
            spans.append((lo, hi, CSS_CLASS[item.degree]))
    # widest first so that inner spans overwrite outer ones
    for lo, hi, css in sorted(spans, key=lambda s: s[0] - s[1]):
        for i in range(lo, hi):
            classes[i] = css
    parts = []
    i = 0
    while i < len(source_text):
        j = i
        while j < len(source_text) and classes[j] == classes[i]:
            j += 1
        chunk = html.escape(source_text[i:j])
        parts.append(f'<span class="{classes[i]}">{chunk}</span>' if classes[i] else chunk)
        i = j
    counts = {css: 0 for css in CSS_CLASS.values()}
    for item in report.by_kind("goal"):
        counts[CSS_CLASS[item.degree]] += 1
    legend = " ".join(f'<span class="{css}">{css}: {n}</span>' for css, n in counts.items())
    return (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{html.escape(title)}</title>\n<style>\n{_STYLE}</style>\n</head>\n<body>\n"
        f"<h1>{html.escape(title)}</h1>\n<p class=\"legend\">{legend}</p>\n"
        f"<pre>{''.join(parts)}</pre>\n</body>\n</html>\n"
    )


DETAIL_HEADER = "enter\texit\tkind\tprocedure\tspan\tenter_count\texit_count\tdegree\n"


def emit_detail_report(report: CoverageReport) -> str:
    """Every counter pair with its counts and degree, one line each."""
    lines = [DETAIL_HEADER]
    for item in report.items:
        e = item.entry
        span = f"{e.span[0]}:{e.span[1]}-{e.span[2]}:{e.span[3]}" if e.span else "-"
        cols = [str(e.enter), str(e.exit), e.kind, e.proc_name or "-", span,
                str(item.enter_count), str(item.exit_count), item.degree.value]
        if e.note:
            cols.append(e.note)
        lines.append("\t".join(cols) + "\n")
    return "".join(lines)
