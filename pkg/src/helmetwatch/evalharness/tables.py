"""CSV tables (ground truth, detections, regions) and small SVG plots."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .synthetic import TruthBox

TRUTH_FIELDS = ("frame_id", "x", "y", "w", "h", "worn", "color")
DETECTION_FIELDS = ("frame_id", "x", "y", "w", "h", "score")
VERDICT_FIELDS = ("worn", "color", "ratio", "s_threshold")
REGION_FIELDS = ("frame_id", "x", "y", "w", "h", "area")


class TableError(ValueError):
    """A CSV file is missing columns or holds unparsable values."""


@dataclass(frozen=True)
class DetectionRow:
    frame_id: int
    x: float
    y: float
    w: float
    h: float
    score: float
    worn: Optional[bool] = None
    color: str = ""
    ratio: Optional[float] = None
    s_threshold: Optional[int] = None

    @property
    def bbox(self):
        return (self.x, self.y, self.w, self.h)


def _read(path, required: Sequence[str]) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise TableError(f"{path}: missing columns {', '.join(missing)}")
        return list(reader)


def _flag(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"not a 0/1 flag: {raw!r}")


def read_truth(path) -> List[TruthBox]:
    out = []
    for n, row in enumerate(_read(path, TRUTH_FIELDS[:6]), start=2):
        try:
            out.append(TruthBox(int(row["frame_id"]), float(row["x"]), float(row["y"]),
                                float(row["w"]), float(row["h"]), _flag(row["worn"]),
                                (row.get("color") or "").strip()))
        except ValueError as exc:
            raise TableError(f"{path}:{n}: {exc}") from None
    return out


def write_truth(path, truth: Iterable[TruthBox]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRUTH_FIELDS)
        for t in truth:
            w.writerow([t.frame_id, _num(t.x), _num(t.y), _num(t.w), _num(t.h), int(t.worn), t.color])


def read_detections(path) -> List[DetectionRow]:
    out = []
    for n, row in enumerate(_read(path, DETECTION_FIELDS), start=2):
        try:
            has_verdict = row.get("worn") not in (None, "")
            out.append(DetectionRow(
                int(row["frame_id"]), float(row["x"]), float(row["y"]), float(row["w"]),
                float(row["h"]), float(row["score"]),
                worn=_flag(row["worn"]) if has_verdict else None,
                color=(row.get("color") or "").strip(),
                ratio=float(row["ratio"]) if row.get("ratio") not in (None, "") else None,
                s_threshold=int(row["s_threshold"]) if row.get("s_threshold") not in (None, "") else None,
            ))
        except ValueError as exc:
            raise TableError(f"{path}:{n}: {exc}") from None
    return out


def _num(v) -> str:
    """Shortest round-tripping text for a number."""
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def detection_writer(fh, with_verdicts: bool):
    w = csv.writer(fh)
    w.writerow(DETECTION_FIELDS + (VERDICT_FIELDS if with_verdicts else ()))

    def write(frame_id, det, verdict=None):
        row = [frame_id, _num(det.x), _num(det.y), _num(det.w), _num(det.h), repr(float(det.score))]
        if with_verdicts:
            row += [int(verdict.worn), verdict.color or "", repr(float(verdict.ratio)), verdict.s_threshold]
        w.writerow(row)

    return write


def region_writer(fh):
    w = csv.writer(fh)
    w.writerow(REGION_FIELDS)

    def write(frame_id, region):
        w.writerow([frame_id, region.x, region.y, region.w, region.h, region.area])

    return write


def write_points(path, header: Tuple[str, str], points: Iterable[Tuple[float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in points:
            w.writerow([repr(float(a)), repr(float(b))])


def write_svg_curve(path, points: Sequence[Tuple[float, float]], xlabel: str, ylabel: str,
                    title: str, diagonal: bool = False) -> None:
    """Minimal line plot on the unit square."""
    size, pad = 360, 48
    span = size - 2 * pad

    def sx(v):
        return pad + v * span

    def sy(v):
        return size - pad - v * span

    poly = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in points)
    ticks = []
    for k in range(6):
        v = k / 5
        ticks.append(f'<text x="{sx(v):.1f}" y="{size - pad + 16}" font-size="10" text-anchor="middle">{v:.1f}</text>')
        ticks.append(f'<text x="{pad - 6}" y="{sy(v) + 3:.1f}" font-size="10" text-anchor="end">{v:.1f}</text>')
    diag = (f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" stroke="#bbb" stroke-dasharray="4 3"/>'
            if diagonal else "")
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif">
<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#000"/>
{diag}
<polyline points="{poly}" fill="none" stroke="#1f5fbf" stroke-width="2"/>
{''.join(ticks)}
<text x="{size / 2}" y="{size - 10}" font-size="12" text-anchor="middle">{xlabel}</text>
<text x="14" y="{size / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {size / 2})">{ylabel}</text>
<text x="{size / 2}" y="{pad - 14}" font-size="13" text-anchor="middle">{title}</text>
</svg>
"""
    Path(path).write_text(svg, encoding="utf-8")
