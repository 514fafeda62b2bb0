"""Lesion records, frame-level annotations, exclusion marks, COCO interchange.

Videos are annotated against a usable frame pool: exclusion marks
retire spans of footage (resection work, scope outside the body, unusable
quality), and lesion annotations may only target frames that remain. Resection
footage is special: marking a span as TURBT while lesion annotations overlap
it is an integrity error, whereas a quality exclusion added after the fact may
retire frames that already carry annotations (the statistics layer then drops
those frames from the usable pool).

Segmentations are simple polygons in pixel coordinates, validated structurally
(vertex count, self-intersection, bounds, positive shoelace area) at insert
time so that everything in the store is exportable. Interchange uses the COCO
object-detection JSON layout with a fixed eight-name category set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import Catalog, MediaAsset, MediaKind, UnknownAsset
from .vocab import LocationCode, PathologyCategory, PathologyCode, TumorStage

__all__ = [
    "AnnotationStore",
    "Appearance",
    "COCO_CATEGORIES",
    "ClassificationAnnotation",
    "CocoDocument",
    "DegeneratePolygon",
    "ExclusionMark",
    "ExclusionReason",
    "FrameExcluded",
    "FrameSpan",
    "LesionRecord",
    "NothingToExport",
    "OutOfBounds",
    "OverlapWithAnnotation",
    "SchemaViolation",
    "SegmentationAnnotation",
    "SelfIntersection",
    "UnknownCategory",
    "UnknownLesion",
    "category_name_for",
    "export_coco",
    "import_coco",
    "shoelace_area",
]


class DegeneratePolygon(ValueError):
    """Fewer than three vertices, repeated consecutive vertices, or zero area."""


class SelfIntersection(ValueError):
    """Two non-adjacent polygon edges touch or cross."""


class OutOfBounds(ValueError):
    """A vertex or frame index falls outside the media extent."""


class FrameExcluded(ValueError):
    """The targeted frames overlap an exclusion mark."""


class OverlapWithAnnotation(ValueError):
    """A resection exclusion would swallow existing lesion annotations."""


class NothingToExport(ValueError):
    """The case has no segmentation annotations."""


class SchemaViolation(ValueError):
    """An interchange document breaks the required structure."""


class UnknownCategory(ValueError):
    """A pathology has no interchange category, or a document names one."""


class UnknownLesion(KeyError):
    pass


class Appearance(str, Enum):
    PAPILLARY = "PAPILLARY"
    SESSILE = "SESSILE"
    FLAT = "FLAT"


class ExclusionReason(str, Enum):
    TURBT = "TURBT"
    OUT_OF_BODY = "OUT_OF_BODY"
    POOR_QUALITY = "POOR_QUALITY"


# Interchange category names, fixed order, ids 1..8. Carcinoma in situ is a
# single category; every other cancer category carries its grade.
COCO_CATEGORIES = (
    "benign",
    "Ta-LG",
    "Ta-HG",
    "CIS",
    "T1-LG",
    "T1-HG",
    "T2-LG",
    "T2-HG",
)


def category_name_for(pathology: PathologyCode) -> str:
    """Map a pathology onto the fixed interchange category set."""
    if pathology.category is PathologyCategory.BENIGN:
        return "benign"
    if pathology.stage is TumorStage.CIS:
        return "CIS"
    if pathology.grade is None:
        raise UnknownCategory(
            f"{pathology.token}: graded stages need a grade for interchange"
        )
    return f"{pathology.stage.value}-{pathology.grade.value}"


@dataclass(frozen=True)
class FrameSpan:
    """Inclusive frame interval [start, end] within one video."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise OutOfBounds(f"need 0 <= start <= end, got [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "FrameSpan") -> bool:
        return self.start <= other.end and other.start <= self.end

    def contains(self, frame: int) -> bool:
        return self.start <= frame <= self.end


@dataclass(frozen=True)
class LesionRecord:
    """One distinct lesion found during a case."""

    lesion_id: str
    case_id: str
    location: LocationCode
    appearance: Appearance
    pathology: PathologyCode


@dataclass(frozen=True)
class ClassificationAnnotation:
    """Frames of one video (or a whole image) showing one lesion."""

    ann_id: str
    asset_id: str
    lesion_id: str
    span: FrameSpan


@dataclass(frozen=True)
class SegmentationAnnotation:
    """A simple polygon outlining a lesion on one frame."""

    ann_id: str
    asset_id: str
    lesion_id: str
    frame_index: int
    polygon: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class ExclusionMark:
    """A span of video retired from the usable pool."""

    mark_id: str
    asset_id: str
    reason: ExclusionReason
    span: FrameSpan


def shoelace_area(polygon: Sequence[tuple[float, float]]) -> float:
    """Unsigned polygon area by the shoelace formula."""
    n = len(polygon)
    acc = 0.0
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def validate_polygon(
    polygon: Sequence[tuple[float, float]], width: int, height: int
) -> float:
    """Check a segmentation polygon and return its shoelace area.

    Raises DegeneratePolygon, SelfIntersection, or OutOfBounds.
    """
    pts = [(float(x), float(y)) for x, y in polygon]
    n = len(pts)
    if n < 3:
        raise DegeneratePolygon(f"polygon needs at least 3 vertices, got {n}")
    for i in range(n):
        if pts[i] == pts[(i + 1) % n]:
            raise DegeneratePolygon(f"repeated consecutive vertex at index {i}")
    for x, y in pts:
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise OutOfBounds(
                f"vertex ({x}, {y}) outside {width}x{height} media extent"
            )
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex by construction
            if _segments_intersect(*edges[i], *edges[j]):
                raise SelfIntersection(f"edges {i} and {j} touch or cross")
    area = shoelace_area(pts)
    if area <= 0.0:
        raise DegeneratePolygon("polygon has zero area")
    return area


class AnnotationStore:
    """All lesions, annotations, and exclusion marks over one catalog."""

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self.lesions: dict[str, LesionRecord] = {}
        self.classifications: dict[str, ClassificationAnnotation] = {}
        self.segmentations: dict[str, SegmentationAnnotation] = {}
        self.exclusions: dict[str, ExclusionMark] = {}

    # -- lesions --------------------------------------------------------------

    def add_lesion(
        self,
        case_id: str,
        location: LocationCode,
        appearance: Appearance,
        pathology: PathologyCode,
    ) -> LesionRecord:
        self.catalog.case(case_id)
        lesion = LesionRecord(
            lesion_id=f"L{len(self.lesions) + 1:04d}",
            case_id=case_id,
            location=location,
            appearance=Appearance(appearance),
            pathology=pathology,
        )
        self.lesions[lesion.lesion_id] = lesion
        return lesion

    def lesion(self, lesion_id: str) -> LesionRecord:
        try:
            return self.lesions[lesion_id]
        except KeyError:
            raise UnknownLesion(lesion_id) from None

    def case_lesions(self, case_id: str) -> list[LesionRecord]:
        self.catalog.case(case_id)
        return sorted(
            (l for l in self.lesions.values() if l.case_id == case_id),
            key=lambda l: l.lesion_id,
        )

    # -- shared checks ---------------------------------------------------------

    def _asset_for_annotation(self, asset_id: str, lesion_id: str) -> MediaAsset:
        asset = self.catalog.asset(asset_id)
        lesion = self.lesion(lesion_id)
        if asset.case_id != lesion.case_id:
            raise ValueError(
                f"lesion {lesion_id} belongs to case {lesion.case_id}, "
                f"asset {asset_id} to case {asset.case_id}"
            )
        if asset.deleted:
            raise UnknownAsset(f"{asset_id} is deleted")
        return asset

    def _check_span(self, asset: MediaAsset, span: FrameSpan) -> None:
        if asset.kind is MediaKind.IMAGE:
            if span != FrameSpan(0, 0):
                raise OutOfBounds("images are single-frame; span must be [0, 0]")
            return
        if asset.frame_count is None:
            raise ValueError(f"{asset.asset_id}: frame count unknown; set media info first")
        if span.end >= asset.frame_count:
            raise OutOfBounds(
                f"span [{span.start}, {span.end}] exceeds {asset.frame_count} frames"
            )

    def asset_exclusions(self, asset_id: str) -> list[ExclusionMark]:
        return sorted(
            (m for m in self.exclusions.values() if m.asset_id == asset_id),
            key=lambda m: (m.span.start, m.mark_id),
        )

    def _lesion_spans(self, asset_id: str) -> list[FrameSpan]:
        spans = [
            a.span for a in self.classifications.values() if a.asset_id == asset_id
        ]
        spans.extend(
            FrameSpan(s.frame_index, s.frame_index)
            for s in self.segmentations.values()
            if s.asset_id == asset_id
        )
        return spans

    # -- annotations ------------------------------------------------------------

    def add_classification(
        self, asset_id: str, lesion_id: str, span: FrameSpan
    ) -> ClassificationAnnotation:
        """Record which frames show a lesion. Excluded frames are off-limits."""
        asset = self._asset_for_annotation(asset_id, lesion_id)
        self._check_span(asset, span)
        for mark in self.asset_exclusions(asset_id):
            if mark.span.overlaps(span):
                raise FrameExcluded(
                    f"span [{span.start}, {span.end}] overlaps {mark.reason.value} "
                    f"exclusion [{mark.span.start}, {mark.span.end}]"
                )
        ann = ClassificationAnnotation(
            ann_id=f"CL{len(self.classifications) + 1:06d}",
            asset_id=asset_id,
            lesion_id=lesion_id,
            span=span,
        )
        self.classifications[ann.ann_id] = ann
        return ann

    def add_segmentation(
        self,
        asset_id: str,
        lesion_id: str,
        frame_index: int,
        polygon: Sequence[tuple[float, float]],
    ) -> SegmentationAnnotation:
        """Outline a lesion on one frame with a validated simple polygon."""
        asset = self._asset_for_annotation(asset_id, lesion_id)
        self._check_span(asset, FrameSpan(frame_index, frame_index))
        for mark in self.asset_exclusions(asset_id):
            if mark.span.contains(frame_index):
                raise FrameExcluded(
                    f"frame {frame_index} lies in {mark.reason.value} exclusion "
                    f"[{mark.span.start}, {mark.span.end}]"
                )
        if asset.width is None or asset.height is None:
            raise ValueError(
                f"{asset.asset_id}: media dimensions unknown; set media info first"
            )
        validate_polygon(polygon, asset.width, asset.height)
        ann = SegmentationAnnotation(
            ann_id=f"SG{len(self.segmentations) + 1:06d}",
            asset_id=asset_id,
            lesion_id=lesion_id,
            frame_index=frame_index,
            polygon=tuple((float(x), float(y)) for x, y in polygon),
        )
        self.segmentations[ann.ann_id] = ann
        return ann

    def mark_excluded(
        self, asset_id: str, reason: ExclusionReason, span: FrameSpan
    ) -> ExclusionMark:
        """Retire a span of video. Resection spans must not cover annotations."""
        asset = self.catalog.asset(asset_id)
        if asset.kind is not MediaKind.VIDEO:
            raise ValueError("exclusion marks apply to videos only")
        self._check_span(asset, span)
        reason = ExclusionReason(reason)
        if reason is ExclusionReason.TURBT:
            for other in self._lesion_spans(asset_id):
                if span.overlaps(other):
                    raise OverlapWithAnnotation(
                        f"resection span [{span.start}, {span.end}] overlaps a "
                        f"lesion annotation [{other.start}, {other.end}]"
                    )
        mark = ExclusionMark(
            mark_id=f"EX{len(self.exclusions) + 1:06d}",
            asset_id=asset_id,
            reason=reason,
            span=span,
        )
        self.exclusions[mark.mark_id] = mark
        return mark

    # -- persistence --------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "lesions": [
                {
                    "lesion_id": l.lesion_id,
                    "case_id": l.case_id,
                    "location": l.location.code,
                    "appearance": l.appearance.value,
                    "pathology": l.pathology.token,
                }
                for l in sorted(self.lesions.values(), key=lambda l: l.lesion_id)
            ],
            "classifications": [
                {
                    "ann_id": a.ann_id,
                    "asset_id": a.asset_id,
                    "lesion_id": a.lesion_id,
                    "start": a.span.start,
                    "end": a.span.end,
                }
                for a in sorted(self.classifications.values(), key=lambda a: a.ann_id)
            ],
            "segmentations": [
                {
                    "ann_id": a.ann_id,
                    "asset_id": a.asset_id,
                    "lesion_id": a.lesion_id,
                    "frame_index": a.frame_index,
                    "polygon": [[x, y] for x, y in a.polygon],
                }
                for a in sorted(self.segmentations.values(), key=lambda a: a.ann_id)
            ],
            "exclusions": [
                {
                    "mark_id": m.mark_id,
                    "asset_id": m.asset_id,
                    "reason": m.reason.value,
                    "start": m.span.start,
                    "end": m.span.end,
                }
                for m in sorted(self.exclusions.values(), key=lambda m: m.mark_id)
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict, catalog: Catalog) -> "AnnotationStore":
        store = cls(catalog)
        for l in payload.get("lesions", []):
            store.lesions[l["lesion_id"]] = LesionRecord(
                lesion_id=l["lesion_id"],
                case_id=l["case_id"],
                location=catalog.vocab.location(l["location"]),
                appearance=Appearance(l["appearance"]),
                pathology=PathologyCode.from_token(l["pathology"]),
            )
        for a in payload.get("classifications", []):
            store.classifications[a["ann_id"]] = ClassificationAnnotation(
                ann_id=a["ann_id"],
                asset_id=a["asset_id"],
                lesion_id=a["lesion_id"],
                span=FrameSpan(a["start"], a["end"]),
            )
        for a in payload.get("segmentations", []):
            store.segmentations[a["ann_id"]] = SegmentationAnnotation(
                ann_id=a["ann_id"],
                asset_id=a["asset_id"],
                lesion_id=a["lesion_id"],
                frame_index=a["frame_index"],
                polygon=tuple((float(x), float(y)) for x, y in a["polygon"]),
            )
        for m in payload.get("exclusions", []):
            store.exclusions[m["mark_id"]] = ExclusionMark(
                mark_id=m["mark_id"],
                asset_id=m["asset_id"],
                reason=ExclusionReason(m["reason"]),
                span=FrameSpan(m["start"], m["end"]),
            )
        return store

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path, catalog: Catalog) -> "AnnotationStore":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(payload, catalog)


# -- COCO interchange -----------------------------------------------------------


@dataclass(frozen=True)
class CocoDocument:
    """A validated object-detection interchange document."""

    images: tuple[dict, ...]
    annotations: tuple[dict, ...]
    categories: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "images": [dict(i) for i in self.images],
            "annotations": [dict(a) for a in self.annotations],
            "categories": [dict(c) for c in self.categories],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _frame_file_name(asset: MediaAsset, frame_index: int) -> str:
    stem = asset.filename_stem or asset.asset_id
    if asset.kind is MediaKind.IMAGE:
        return f"{stem}.png"
    return f"{stem}_f{frame_index:06d}.png"


def export_coco(store: AnnotationStore, case_id: str) -> CocoDocument:
    """Export every segmentation of a case in interchange form.

    Each annotated frame becomes an image entry; polygons carry their
    shoelace area and axis-aligned bounding box. Raises NothingToExport when
    the case has no segmentations.
    """
    store.catalog.case(case_id)
    segs = [
        s
        for s in store.segmentations.values()
        if store.lesion(s.lesion_id).case_id == case_id
    ]
    if not segs:
        raise NothingToExport(f"case {case_id} has no segmentation annotations")
    segs.sort(key=lambda s: (s.asset_id, s.frame_index, s.ann_id))

    categories = tuple(
        {"id": i + 1, "name": name, "supercategory": "lesion"}
        for i, name in enumerate(COCO_CATEGORIES)
    )
    cat_ids = {c["name"]: c["id"] for c in categories}

    images: list[dict] = []
    image_ids: dict[tuple[str, int], int] = {}
    for s in segs:
        key = (s.asset_id, s.frame_index)
        if key in image_ids:
            continue
        asset = store.catalog.asset(s.asset_id)
        image_ids[key] = len(images) + 1
        images.append(
            {
                "id": len(images) + 1,
                "file_name": _frame_file_name(asset, s.frame_index),
                "width": asset.width,
                "height": asset.height,
            }
        )

    annotations: list[dict] = []
    for s in segs:
        lesion = store.lesion(s.lesion_id)
        xs = [p[0] for p in s.polygon]
        ys = [p[1] for p in s.polygon]
        flat = [coord for point in s.polygon for coord in point]
        annotations.append(
            {
                "id": len(annotations) + 1,
                "image_id": image_ids[(s.asset_id, s.frame_index)],
                "category_id": cat_ids[category_name_for(lesion.pathology)],
                "segmentation": [flat],
                "bbox": [min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)],
                "area": shoelace_area(s.polygon),
                "iscrowd": 0,
            }
        )
    return CocoDocument(tuple(images), tuple(annotations), tuple(categories))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SchemaViolation(message)


def import_coco(payload: dict | str) -> CocoDocument:
    """Validate an interchange document, raising on structural problems.

    SchemaViolation covers missing sections, bad field types, dangling
    references, duplicate ids, odd-length polygons, and nonzero iscrowd.
    UnknownCategory fires for category names outside the fixed set.
    """
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"not valid JSON: {exc}") from None
    _require(isinstance(payload, dict), "document must be a JSON object")
    for section in ("images", "annotations", "categories"):
        _require(section in payload, f"missing section: {section}")
        _require(isinstance(payload[section], list), f"{section} must be a list")

    cat_ids: set[int] = set()
    for c in payload["categories"]:
        _require(isinstance(c, dict), "category entries must be objects")
        _require(isinstance(c.get("id"), int), "category id must be an integer")
        _require(isinstance(c.get("name"), str), "category name must be a string")
        _require(c["id"] not in cat_ids, f"duplicate category id {c['id']}")
        cat_ids.add(c["id"])
        if c["name"] not in COCO_CATEGORIES:
            raise UnknownCategory(c["name"])

    image_ids: set[int] = set()
    for i in payload["images"]:
        _require(isinstance(i, dict), "image entries must be objects")
        _require(isinstance(i.get("id"), int), "image id must be an integer")
        _require(i["id"] not in image_ids, f"duplicate image id {i['id']}")
        image_ids.add(i["id"])
        _require(isinstance(i.get("file_name"), str), "image file_name must be a string")
        for dim in ("width", "height"):
            _require(
                isinstance(i.get(dim), int) and i[dim] > 0,
                f"image {dim} must be a positive integer",
            )

    ann_ids: set[int] = set()
    for a in payload["annotations"]:
        _require(isinstance(a, dict), "annotation entries must be objects")
        _require(isinstance(a.get("id"), int), "annotation id must be an integer")
        _require(a["id"] not in ann_ids, f"duplicate annotation id {a['id']}")
        ann_ids.add(a["id"])
        _require(
            a.get("image_id") in image_ids,
            f"annotation {a['id']} references missing image {a.get('image_id')}",
        )
        _require(
            a.get("category_id") in cat_ids,
            f"annotation {a['id']} references missing category {a.get('category_id')}",
        )
        seg = a.get("segmentation")
        _require(
            isinstance(seg, list) and len(seg) >= 1,
            f"annotation {a['id']}: segmentation must be a list of polygons",
        )
        for poly in seg:
            _require(
                isinstance(poly, list)
                and len(poly) >= 6
                and len(poly) % 2 == 0
                and all(isinstance(v, (int, float)) for v in poly),
                f"annotation {a['id']}: polygons are flat even-length number lists",
            )
        bbox = a.get("bbox")
        _require(
            isinstance(bbox, list)
            and len(bbox) == 4
            and all(isinstance(v, (int, float)) for v in bbox),
            f"annotation {a['id']}: bbox must be four numbers",
        )
        _require(
            isinstance(a.get("area"), (int, float)) and a["area"] >= 0,
            f"annotation {a['id']}: area must be a nonnegative number",
        )
        _require(a.get("iscrowd") == 0, f"annotation {a['id']}: iscrowd must be 0")

    return CocoDocument(
        tuple(payload["images"]),
        tuple(payload["annotations"]),
        tuple(payload["categories"]),
    )
