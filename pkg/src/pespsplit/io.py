"""Activity files (``id; tail; head; lower; upper; weight``) and JSON helpers."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .inequalities import FlipCut
from .instance import Arc, InstanceError, Number, PespInstance

OFFSET_TAG = "# objective_offset:"


class ActivityParseError(InstanceError):
    def __init__(self, msg: str, line: int, column: int | None = None):
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{msg} at {where}")
        self.line = line
        self.column = column


def _int_field(text: str, line: int, col: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ActivityParseError(f"bad integer {text!r} for {what}", line, col) from None


def parse_activities_text(text: str, period: int, name: str = "") -> PespInstance:
    """Parse activity lines; '#' lines are comments and fields past the sixth are ignored."""
    if period < 2:
        raise InstanceError(f"period must be at least 2, got {period}")
    arcs: list[Arc] = []
    seen: set[int] = set()
    offset = Fraction(0)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(OFFSET_TAG):
                offset = Fraction(line[len(OFFSET_TAG):].strip())
            continue
        fields = [f.strip() for f in line.split(";")]
        if len(fields) < 6:
            raise ActivityParseError(f"expected 6 fields, found {len(fields)}", lineno)
        names = ("id", "tail", "head", "lower", "upper")
        vals = [_int_field(fields[k], lineno, k + 1, names[k]) for k in range(5)]
        try:
            weight = Fraction(fields[5])
        except (ValueError, ZeroDivisionError):
            raise ActivityParseError(f"bad weight {fields[5]!r}", lineno, 6) from None
        a_id, tail, head, lo, up = vals
        if a_id in seen:
            raise ActivityParseError(f"duplicate id {a_id}", lineno, 1)
        if tail <= 0 or head <= 0:
            raise ActivityParseError("node ids must be positive", lineno, 2 if tail <= 0 else 3)
        if up < lo:
            raise ActivityParseError("upper < lower", lineno)
        seen.add(a_id)
        arcs.append(Arc(a_id, tail, head, lo, up, weight))
    nodes = sorted({a.tail for a in arcs} | {a.head for a in arcs})
    return PespInstance(tuple(nodes), tuple(arcs), int(period), offset, name)


def parse_activities(path, period: int) -> PespInstance:
    path = Path(path)
    return parse_activities_text(path.read_text(), period, name=path.stem)


def format_activities(inst: PespInstance) -> str:
    lines = ["# id; tail; head; lower; upper; weight"]
    if inst.objective_offset:
        lines.append(f"{OFFSET_TAG} {inst.objective_offset}")
    for a in inst.arcs:
        lines.append(f"{a.id}; {a.tail}; {a.head}; {a.lower}; {a.upper}; {a.weight}")
    return "\n".join(lines) + "\n"


def write_activities(inst: PespInstance, path) -> None:
    Path(path).write_text(format_activities(inst))


def cuts_to_json(cuts: Iterable[FlipCut]) -> list[dict]:
    return [c.to_json() for c in cuts]


def load_cuts(path) -> list[FlipCut]:
    """Cuts from a list of cut objects or from a report with a "cuts" entry."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("cuts", [])
    return [FlipCut.from_json(d) for d in data]


def load_point(path) -> dict[int, Fraction]:
    """A tension as ``{"arc": value}`` or ``{"x": {...}}``; values may be numbers or fraction strings."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and "x" in data and isinstance(data["x"], (dict, list)):
        data = data["x"]
    if isinstance(data, list):
        data = {a: v for a, v in data}
    return {int(a): Fraction(str(v)) for a, v in data.items()}


def dump_point(x: Mapping[int, Number]) -> dict:
    return {str(a): (str(v) if isinstance(v, Fraction) else float(v)) for a, v in sorted(x.items())}
