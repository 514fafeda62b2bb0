"""Collection statistics at case, lesion, and frame granularity.

Percentages are computed exactly as decimal fractions and rounded half-up to
one decimal place, matching how clinical tables are conventionally reported
(binary floating point would misround ties like 0.05).

Frame-level tallies never materialize per-frame arrays: exclusion marks and
lesion visibility spans are merged and intersected as integer intervals, so a
million-frame collection aggregates in well under a second. Each usable frame
is attributed to exactly one bucket, classified by the most advanced lesion
visible on it (cancer outranks benign; stages progress Ta, CIS, T1, T2; high
grade outranks low). Background frames are usable frames showing no lesion,
so background + benign + cancer always equals the annotated total.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from io import StringIO
from typing import Iterable, Sequence

import numpy as np

from .annotations import AnnotationStore, LesionRecord
from .catalog import MediaKind
from .vocab import PathologyCategory, TumorGrade, TumorStage

__all__ = [
    "StatsLevel",
    "StatsReport",
    "aggregate_stats",
    "merge_spans",
    "percent",
    "subtract_spans",
]


class StatsLevel(str, Enum):
    CASE = "CASE"
    LESION = "LESION"
    FRAME = "FRAME"


def percent(part: int, whole: int) -> Decimal | None:
    """Exact percentage rounded half-up to one decimal; None when undefined."""
    if whole == 0:
        return None
    return (Decimal(part) * 100 / Decimal(whole)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP
    )


# -- integer interval algebra (inclusive endpoints) ---------------------------


def merge_spans(spans: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Union of inclusive integer intervals as a sorted disjoint list."""
    ordered = sorted(spans)
    merged: list[tuple[int, int]] = []
    for start, end in ordered:
        if merged and start <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def subtract_spans(
    spans: Sequence[tuple[int, int]], holes: Sequence[tuple[int, int]]
) -> list[tuple[int, int]]:
    """Remove ``holes`` from ``spans``; both inclusive, result disjoint."""
    result: list[tuple[int, int]] = []
    holes = merge_spans(holes)
    for start, end in merge_spans(spans):
        cursor = start
        for h0, h1 in holes:
            if h1 < cursor or h0 > end:
                continue
            if h0 > cursor:
                result.append((cursor, h0 - 1))
            cursor = max(cursor, h1 + 1)
            if cursor > end:
                break
        if cursor <= end:
            result.append((cursor, end))
    return result


def _span_total(spans: Iterable[tuple[int, int]]) -> int:
    return sum(e - s + 1 for s, e in spans)


# -- severity ordering --------------------------------------------------------

_STAGE_RANK = {
    TumorStage.TA: 1,
    TumorStage.CIS: 2,
    TumorStage.T1: 3,
    TumorStage.T2: 4,
}
_GRADE_RANK = {None: 0, TumorGrade.LG: 1, TumorGrade.HG: 2}


def _severity(lesion: LesionRecord) -> tuple[int, int, int]:
    p = lesion.pathology
    if p.category is PathologyCategory.BENIGN:
        return (0, 0, 0)
    return (1, _STAGE_RANK[p.stage], _GRADE_RANK[p.grade])


# -- report container ----------------------------------------------------------


@dataclass(frozen=True)
class StatsReport:
    level: StatsLevel
    columns: tuple[str, ...]
    rows: tuple[dict[str, str], ...]
    summary: dict

    def to_csv(self) -> str:
        buf = StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()


def _metric_rows(entries: list[tuple[str, int, Decimal | None]]) -> tuple[dict, ...]:
    return tuple(
        {
            "metric": name,
            "count": str(count),
            "percent": "" if pct is None else str(pct),
        }
        for name, count, pct in entries
    )


def _quartiles(values: Sequence[int]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return (
        float(np.percentile(arr, 25)),
        float(np.median(arr)),
        float(np.percentile(arr, 75)),
    )


# -- per-level builders ----------------------------------------------------------


def _case_scope(store: AnnotationStore, case_ids: Sequence[str] | None) -> list[str]:
    if case_ids is None:
        return sorted(store.catalog.cases)
    return [store.catalog.case(c).case_id for c in case_ids]


def _video_frame_breakdown(store: AnnotationStore, case_ids: Sequence[str]) -> dict:
    """Interval-arithmetic frame tallies over the selected cases' videos."""
    wanted = set(case_ids)
    totals = {
        "total": 0,
        "excluded": 0,
        "annotated": 0,
        "background": 0,
        "benign": 0,
        "cancer": 0,
        "stage": {s: 0 for s in TumorStage},
        "grade": {g: 0 for g in TumorGrade},
    }
    videos = [
        a
        for a in store.catalog.assets.values()
        if a.kind is MediaKind.VIDEO
        and not a.deleted
        and a.case_id in wanted
        and a.frame_count
    ]
    for asset in sorted(videos, key=lambda a: a.asset_id):
        fc = asset.frame_count
        totals["total"] += fc
        excluded = merge_spans(
            (max(m.span.start, 0), min(m.span.end, fc - 1))
            for m in store.asset_exclusions(asset.asset_id)
            if m.span.start <= fc - 1
        )
        n_excluded = _span_total(excluded)
        totals["excluded"] += n_excluded
        totals["annotated"] += fc - n_excluded

        # Visibility intervals per lesion, trimmed to the usable pool.
        by_lesion: dict[str, list[tuple[int, int]]] = {}
        for ann in store.classifications.values():
            if ann.asset_id != asset.asset_id:
                continue
            span = (ann.span.start, min(ann.span.end, fc - 1))
            by_lesion.setdefault(ann.lesion_id, []).append(span)
        visible = {
            lesion_id: subtract_spans(spans, excluded)
            for lesion_id, spans in by_lesion.items()
        }

        # Sweep elementary segments; each frame goes to its worst lesion.
        events: set[int] = set()
        for spans in visible.values():
            for s, e in spans:
                events.add(s)
                events.add(e + 1)
        boundaries = sorted(events)
        for left, right in zip(boundaries, boundaries[1:]):
            # Elementary segments never straddle a span edge, so membership
            # of the left endpoint decides the whole segment.
            active = [
                store.lesion(lesion_id)
                for lesion_id, spans in visible.items()
                if any(s <= left <= e for s, e in spans)
            ]
            if not active:
                continue
            worst = max(active, key=_severity)
            length = right - left
            p = worst.pathology
            if p.category is PathologyCategory.BENIGN:
                totals["benign"] += length
            else:
                totals["cancer"] += length
                totals["stage"][p.stage] += length
                if p.grade is not None:
                    totals["grade"][p.grade] += length
    totals["background"] = totals["annotated"] - totals["benign"] - totals["cancer"]
    return totals


def aggregate_stats(
    store: AnnotationStore,
    level: StatsLevel,
    case_ids: Sequence[str] | None = None,
) -> StatsReport:
    """Summarize the selected cases (default: all) at one granularity.

    CASE: one row per case plus patient/case/lesion counts and the quartiles
    of lesions per case. LESION: lesion counts by category, stage, and grade
    (stage and grade percentages are shares of the cancer count). FRAME:
    video-frame tallies where every usable frame lands in exactly one of
    background, benign, or cancer.
    """
    level = StatsLevel(level)
    scope = _case_scope(store, case_ids)

    if level is StatsLevel.CASE:
        rows = []
        lesions_per_case = []
        for case_id in scope:
            case = store.catalog.case(case_id)
            assets = store.catalog.case_assets(case_id)
            lesions = store.case_lesions(case_id)
            lesions_per_case.append(len(lesions))
            videos = [a for a in assets if a.kind is MediaKind.VIDEO]
            rows.append(
                {
                    "case_id": case_id,
                    "uid": case.uid,
                    "case_date": case.case_date.isoformat(),
                    "procedure": case.procedure.value,
                    "lesion_count": str(len(lesions)),
                    "image_count": str(
                        sum(1 for a in assets if a.kind is MediaKind.IMAGE)
                    ),
                    "video_count": str(len(videos)),
                    "total_frames": str(sum(a.frame_count or 0 for a in videos)),
                }
            )
        q1, med, q3 = _quartiles(lesions_per_case) if lesions_per_case else (0.0, 0.0, 0.0)
        summary = {
            "patient_count": len({store.catalog.case(c).uid for c in scope}),
            "case_count": len(scope),
            "lesion_count": sum(lesions_per_case),
            "lesions_per_case_median": med,
            "lesions_per_case_q1": q1,
            "lesions_per_case_q3": q3,
        }
        return StatsReport(
            level=level,
            columns=(
                "case_id",
                "uid",
                "case_date",
                "procedure",
                "lesion_count",
                "image_count",
                "video_count",
                "total_frames",
            ),
            rows=tuple(rows),
            summary=summary,
        )

    if level is StatsLevel.LESION:
        wanted = set(scope)
        lesions = [
            l
            for l in sorted(store.lesions.values(), key=lambda l: l.lesion_id)
            if l.case_id in wanted
        ]
        total = len(lesions)
        benign = sum(
            1 for l in lesions if l.pathology.category is PathologyCategory.BENIGN
        )
        cancer = total - benign
        stage_counts = {
            s: sum(1 for l in lesions if l.pathology.stage is s) for s in TumorStage
        }
        grade_counts = {
            g: sum(1 for l in lesions if l.pathology.grade is g) for g in TumorGrade
        }
        entries = [
            ("total_lesions", total, None),
            ("benign", benign, percent(benign, total)),
            ("cancer", cancer, percent(cancer, total)),
        ]
        entries.extend(
            (f"stage_{s.value}", stage_counts[s], percent(stage_counts[s], cancer))
            for s in TumorStage
        )
        entries.extend(
            (f"grade_{g.value}", grade_counts[g], percent(grade_counts[g], cancer))
            for g in TumorGrade
        )
        per_case = [len(store.case_lesions(c)) for c in scope]
        q1, med, q3 = _quartiles(per_case) if per_case else (0.0, 0.0, 0.0)
        summary = {
            "total_lesions": total,
            "benign": benign,
            "cancer": cancer,
            "stage_counts": {s.value: stage_counts[s] for s in TumorStage},
            "grade_counts": {g.value: grade_counts[g] for g in TumorGrade},
            "lesions_per_case_median": med,
            "lesions_per_case_q1": q1,
            "lesions_per_case_q3": q3,
        }
        return StatsReport(
            level=level,
            columns=("metric", "count", "percent"),
            rows=_metric_rows(entries),
            summary=summary,
        )

    # FRAME level
    t = _video_frame_breakdown(store, scope)
    entries = [
        ("total_frames", t["total"], None),
        ("annotated_frames", t["annotated"], percent(t["annotated"], t["total"])),
        ("excluded_frames", t["excluded"], percent(t["excluded"], t["total"])),
        ("background", t["background"], percent(t["background"], t["annotated"])),
        ("benign", t["benign"], percent(t["benign"], t["annotated"])),
        ("cancer", t["cancer"], percent(t["cancer"], t["annotated"])),
    ]
    entries.extend(
        (f"stage_{s.value}", t["stage"][s], percent(t["stage"][s], t["cancer"]))
        for s in TumorStage
    )
    entries.extend(
        (f"grade_{g.value}", t["grade"][g], percent(t["grade"][g], t["cancer"]))
        for g in TumorGrade
    )
    summary = {
        "total_frames": t["total"],
        "annotated_frames": t["annotated"],
        "excluded_frames": t["excluded"],
        "background": t["background"],
        "benign": t["benign"],
        "cancer": t["cancer"],
        "stage_counts": {s.value: t["stage"][s] for s in TumorStage},
        "grade_counts": {g.value: t["grade"][g] for g in TumorGrade},
    }
    return StatsReport(
        level=level,
        columns=("metric", "count", "percent"),
        rows=_metric_rows(entries),
        summary=summary,
    )
