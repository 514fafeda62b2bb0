"""Patient, case, and media-asset catalog with a deterministic CSV index.

The catalog is the single source of truth for what media exists, who it
belongs to, and how far along the curation pipeline each asset is. Ingestion
enforces the naming grammar at the door: a screenshot whose filename parses
becomes LABELED immediately, a video starts as NEW, and anything that fails
to parse is rejected (or, when explicitly allowed, parked as NEW without a
label for later annotation through the labeling workflow).

The index is a flat CSV snapshot of every asset, tombstones included, sorted
by asset id. Rebuilding it from an unchanged catalog is byte-identical, which
makes the index diffable and safe to keep under version control.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from enum import Enum
from io import StringIO
from pathlib import Path
from typing import Callable, Iterable

import csv

from .vocab import (
    CompletionStatus,
    ImageLabel,
    NameGrammarError,
    PathologyCategory,
    VideoName,
    Vocabulary,
    default_vocabulary,
    format_image_label,
    format_video_name,
    parse_image_label,
    parse_uid,
    parse_video_name,
)

__all__ = [
    "Catalog",
    "CaseRecord",
    "DuplicateChecksum",
    "INDEX_COLUMNS",
    "IllegalTransition",
    "MediaAsset",
    "MediaKind",
    "ParseFailure",
    "PatientRecord",
    "Procedure",
    "SourceSite",
    "UidMismatch",
    "UnknownAsset",
    "UnknownCase",
    "UnknownPatient",
    "build_index",
    "query_index",
]


class ParseFailure(ValueError):
    """A filename does not conform to the naming grammar."""


class UidMismatch(ValueError):
    """A filename's UID disagrees with the case's patient."""


class IllegalTransition(ValueError):
    """A status change violates the forward-only completion machine."""


class DuplicateChecksum(UserWarning):
    """Ingested bytes already exist in the catalog (warning, not an error)."""


class UnknownPatient(KeyError):
    pass


class UnknownCase(KeyError):
    pass


class UnknownAsset(KeyError):
    pass


class SourceSite(str, Enum):
    SITE_A = "SITE_A"
    SITE_B = "SITE_B"


class Procedure(str, Enum):
    TURBT = "TURBT"
    CLINIC_CYSTO = "CLINIC_CYSTO"


class MediaKind(str, Enum):
    IMAGE = "IMAGE"
    VIDEO = "VIDEO"


IMAGE_EXTENSIONS = {"png", "jpg", "jpeg", "bmp", "tif", "tiff"}
VIDEO_EXTENSIONS = {"mp4", "avi", "mov", "mkv", "mpg", "mpeg"}

# Index schema; the header line never changes without a migration.
INDEX_COLUMNS = (
    "asset_id",
    "case_id",
    "uid",
    "kind",
    "case_date",
    "modality",
    "location",
    "pathology_category",
    "stage",
    "grade",
    "sequence",
    "byte_size",
    "checksum",
    "status",
    "created_at",
    "modified_at",
    "deleted",
)


def rfc3339(dt: datetime) -> str:
    """Second-resolution RFC 3339 UTC timestamp with a Z suffix."""
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_rfc3339(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class PatientRecord:
    uid: str
    enrollment_date: date
    source_site: SourceSite

    def __post_init__(self) -> None:
        parse_uid(self.uid)


@dataclass(frozen=True)
class CaseRecord:
    """One endoscopy encounter: a patient, a date, a procedure, its paperwork."""

    case_id: str
    uid: str
    case_date: date
    procedure: Procedure
    text_docs: tuple[str, ...] = ()


@dataclass(frozen=True)
class MediaAsset:
    """One ingested file and its pipeline position.

    ``label`` is an ImageLabel for labeled screenshots, a VideoName for
    videos, and None for images parked unlabeled. ``frame_count``, ``width``,
    and ``height`` are optional media properties needed before a video can be
    annotated. Deleted assets stay in the catalog as tombstones.
    """

    asset_id: str
    case_id: str
    uid: str
    kind: MediaKind
    label: ImageLabel | VideoName | None
    byte_size: int
    checksum: str
    status: CompletionStatus
    created_at: datetime
    modified_at: datetime
    deleted: bool = False
    path: str = ""
    frame_count: int | None = None
    width: int | None = None
    height: int | None = None

    @property
    def filename_stem(self) -> str:
        if isinstance(self.label, ImageLabel):
            return format_image_label(self.label)
        if isinstance(self.label, VideoName):
            return format_video_name(self.label)
        return ""


def media_kind_for(filename: str) -> MediaKind:
    ext = filename.rsplit(".", 1)[-1].lower() if "." in filename else ""
    if ext in IMAGE_EXTENSIONS:
        return MediaKind.IMAGE
    if ext in VIDEO_EXTENSIONS:
        return MediaKind.VIDEO
    raise ParseFailure(f"unrecognized media extension: {filename!r}")


class Catalog:
    """In-memory catalog with JSON persistence.

    ``clock`` is injectable so ingestion timestamps (and therefore the CSV
    index) can be made deterministic in tests and replays.
    """

    def __init__(
        self,
        vocab: Vocabulary | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.vocab = vocab or default_vocabulary()
        self._clock = clock or _utc_now
        self.patients: dict[str, PatientRecord] = {}
        self.cases: dict[str, CaseRecord] = {}
        self.assets: dict[str, MediaAsset] = {}

    def now(self) -> datetime:
        """Current time from the catalog's (injectable) clock."""
        return self._clock()

    # -- patients and cases -------------------------------------------------

    def register_patient(
        self,
        enrollment_date: date,
        source_site: SourceSite,
        uid: str | None = None,
    ) -> PatientRecord:
        """Enroll a patient; UIDs are assigned sequentially from UID0001.

        An explicit ``uid`` supports importing records that already carry
        identifiers; it must be well-formed and unused.
        """
        if uid is None:
            next_n = 1 + max(
                (parse_uid(u) for u in self.patients), default=0
            )
            uid = f"UID{next_n:04d}"
        else:
            parse_uid(uid)
            if uid in self.patients:
                raise ValueError(f"uid already registered: {uid}")
        record = PatientRecord(uid, enrollment_date, SourceSite(source_site))
        self.patients[uid] = record
        return record

    def create_case(
        self,
        uid: str,
        case_date: date,
        procedure: Procedure,
        text_docs: Iterable[str] = (),
        case_id: str | None = None,
    ) -> CaseRecord:
        if uid not in self.patients:
            raise UnknownPatient(uid)
        if case_id is None:
            case_id = f"C{len(self.cases) + 1:04d}"
        elif case_id in self.cases:
            raise ValueError(f"case id already exists: {case_id}")
        record = CaseRecord(
            case_id, uid, case_date, Procedure(procedure), tuple(text_docs)
        )
        self.cases[case_id] = record
        return record

    def case(self, case_id: str) -> CaseRecord:
        try:
            return self.cases[case_id]
        except KeyError:
            raise UnknownCase(case_id) from None

    def asset(self, asset_id: str) -> MediaAsset:
        try:
            return self.assets[asset_id]
        except KeyError:
            raise UnknownAsset(asset_id) from None

    def case_assets(self, case_id: str, include_deleted: bool = False) -> list[MediaAsset]:
        self.case(case_id)
        return [
            a
            for a in sorted(self.assets.values(), key=lambda a: a.asset_id)
            if a.case_id == case_id and (include_deleted or not a.deleted)
        ]

    # -- ingestion ----------------------------------------------------------

    def ingest_media(
        self,
        path: str | Path,
        case_id: str,
        *,
        allow_unlabeled: bool = False,
        frame_count: int | None = None,
        width: int | None = None,
        height: int | None = None,
    ) -> MediaAsset:
        """Register one media file under a case.

        The filename decides everything: extension selects the media kind,
        and the stem must parse under the naming grammar. Labeled images
        enter at LABELED, videos at NEW. With ``allow_unlabeled`` an image
        whose stem does not parse is accepted at NEW with no label, to be
        labeled later through the labeling workflow. A file whose bytes
        already exist in the catalog is still ingested but raises the
        DuplicateChecksum warning.
        """
        path = Path(path)
        case = self.case(case_id)
        kind = media_kind_for(path.name)
        data = path.read_bytes()
        checksum = hashlib.sha256(data).hexdigest()

        label: ImageLabel | VideoName | None
        if kind is MediaKind.IMAGE:
            try:
                label = parse_image_label(path.name, self.vocab)
                status = CompletionStatus.LABELED
            except NameGrammarError as exc:
                if not allow_unlabeled:
                    raise ParseFailure(f"{path.name}: {exc}") from exc
                label = None
                status = CompletionStatus.NEW
        else:
            try:
                label = parse_video_name(path.name)
            except NameGrammarError as exc:
                raise ParseFailure(f"{path.name}: {exc}") from exc
            status = CompletionStatus.NEW

        if label is not None and label.uid != case.uid:
            raise UidMismatch(
                f"{path.name}: file names patient {label.uid}, "
                f"case {case_id} belongs to {case.uid}"
            )

        if any(a.checksum == checksum and not a.deleted for a in self.assets.values()):
            warnings.warn(
                DuplicateChecksum(f"{path.name}: identical bytes already cataloged")
            )

        now = self._clock()
        asset = MediaAsset(
            asset_id=f"A{len(self.assets) + 1:06d}",
            case_id=case_id,
            uid=case.uid,
            kind=kind,
            label=label,
            byte_size=len(data),
            checksum=checksum,
            status=status,
            created_at=now,
            modified_at=now,
            path=str(path),
            frame_count=frame_count,
            width=width,
            height=height,
        )
        self.assets[asset.asset_id] = asset
        return asset

    def set_media_info(
        self,
        asset_id: str,
        *,
        frame_count: int | None = None,
        width: int | None = None,
        height: int | None = None,
    ) -> MediaAsset:
        """Attach decoded media properties needed before annotation."""
        asset = self.asset(asset_id)
        updated = replace(
            asset,
            frame_count=frame_count if frame_count is not None else asset.frame_count,
            width=width if width is not None else asset.width,
            height=height if height is not None else asset.height,
            modified_at=self._clock(),
        )
        self.assets[asset_id] = updated
        return updated

    def set_label(self, asset_id: str, label: ImageLabel) -> MediaAsset:
        """Label a parked image, advancing it NEW -> LABELED."""
        asset = self.asset(asset_id)
        if asset.kind is not MediaKind.IMAGE:
            raise ParseFailure("only images take image labels")
        if label.uid != asset.uid:
            raise UidMismatch(
                f"label names patient {label.uid}, asset belongs to {asset.uid}"
            )
        if asset.status is not CompletionStatus.NEW:
            raise IllegalTransition(
                f"{asset_id}: labels may only be set while NEW, status is "
                f"{asset.status.value}"
            )
        updated = replace(
            asset,
            label=label,
            status=CompletionStatus.LABELED,
            modified_at=self._clock(),
        )
        self.assets[asset_id] = updated
        return updated

    # -- lifecycle ----------------------------------------------------------

    def set_status(self, asset_id: str, new_status: CompletionStatus) -> MediaAsset:
        asset = self.asset(asset_id)
        new_status = CompletionStatus(new_status)
        if not asset.status.can_transition_to(new_status):
            raise IllegalTransition(
                f"{asset_id}: {asset.status.value} -> {new_status.value}"
            )
        updated = replace(asset, status=new_status, modified_at=self._clock())
        self.assets[asset_id] = updated
        return updated

    def delete_asset(self, asset_id: str) -> MediaAsset:
        """Soft-delete: the asset stays in the index as a tombstone."""
        asset = self.asset(asset_id)
        updated = replace(asset, deleted=True, modified_at=self._clock())
        self.assets[asset_id] = updated
        return updated

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        def asset_dict(a: MediaAsset) -> dict:
            return {
                "asset_id": a.asset_id,
                "case_id": a.case_id,
                "uid": a.uid,
                "kind": a.kind.value,
                "label_kind": (
                    "image"
                    if isinstance(a.label, ImageLabel)
                    else "video" if isinstance(a.label, VideoName) else ""
                ),
                "label": a.filename_stem,
                "byte_size": a.byte_size,
                "checksum": a.checksum,
                "status": a.status.value,
                "created_at": rfc3339(a.created_at),
                "modified_at": rfc3339(a.modified_at),
                "deleted": a.deleted,
                "path": a.path,
                "frame_count": a.frame_count,
                "width": a.width,
                "height": a.height,
            }

        return {
            "patients": [
                {
                    "uid": p.uid,
                    "enrollment_date": p.enrollment_date.isoformat(),
                    "source_site": p.source_site.value,
                }
                for p in sorted(self.patients.values(), key=lambda p: p.uid)
            ],
            "cases": [
                {
                    "case_id": c.case_id,
                    "uid": c.uid,
                    "case_date": c.case_date.isoformat(),
                    "procedure": c.procedure.value,
                    "text_docs": list(c.text_docs),
                }
                for c in sorted(self.cases.values(), key=lambda c: c.case_id)
            ],
            "assets": [
                asset_dict(a)
                for a in sorted(self.assets.values(), key=lambda a: a.asset_id)
            ],
        }

    @classmethod
    def from_dict(
        cls,
        payload: dict,
        vocab: Vocabulary | None = None,
        clock: Callable[[], datetime] | None = None,
    ) -> "Catalog":
        cat = cls(vocab=vocab, clock=clock)
        for p in payload.get("patients", []):
            cat.patients[p["uid"]] = PatientRecord(
                p["uid"],
                date.fromisoformat(p["enrollment_date"]),
                SourceSite(p["source_site"]),
            )
        for c in payload.get("cases", []):
            cat.cases[c["case_id"]] = CaseRecord(
                c["case_id"],
                c["uid"],
                date.fromisoformat(c["case_date"]),
                Procedure(c["procedure"]),
                tuple(c.get("text_docs", ())),
            )
        for a in payload.get("assets", []):
            label: ImageLabel | VideoName | None = None
            if a["label_kind"] == "image":
                label = parse_image_label(a["label"] + ".png", cat.vocab)
            elif a["label_kind"] == "video":
                label = parse_video_name(a["label"] + ".mp4")
            cat.assets[a["asset_id"]] = MediaAsset(
                asset_id=a["asset_id"],
                case_id=a["case_id"],
                uid=a["uid"],
                kind=MediaKind(a["kind"]),
                label=label,
                byte_size=a["byte_size"],
                checksum=a["checksum"],
                status=CompletionStatus(a["status"]),
                created_at=parse_rfc3339(a["created_at"]),
                modified_at=parse_rfc3339(a["modified_at"]),
                deleted=a["deleted"],
                path=a.get("path", ""),
                frame_count=a.get("frame_count"),
                width=a.get("width"),
                height=a.get("height"),
            )
        return cat

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(
        cls,
        path: str | Path,
        vocab: Vocabulary | None = None,
        clock: Callable[[], datetime] | None = None,
    ) -> "Catalog":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(payload, vocab=vocab, clock=clock)


# -- index ------------------------------------------------------------------


def _index_row(asset: MediaAsset) -> dict[str, str]:
    label = asset.label
    row = {col: "" for col in INDEX_COLUMNS}
    row.update(
        asset_id=asset.asset_id,
        case_id=asset.case_id,
        uid=asset.uid,
        kind=asset.kind.value,
        byte_size=str(asset.byte_size),
        checksum=asset.checksum,
        status=asset.status.value,
        created_at=rfc3339(asset.created_at),
        modified_at=rfc3339(asset.modified_at),
        deleted="true" if asset.deleted else "false",
    )
    if isinstance(label, ImageLabel):
        row["case_date"] = label.case_date.isoformat()
        row["modality"] = label.modality.value
        row["location"] = label.location.code
        row["pathology_category"] = label.pathology.category.value
        if label.pathology.stage:
            row["stage"] = label.pathology.stage.value
        if label.pathology.grade:
            row["grade"] = label.pathology.grade.value
        row["sequence"] = str(label.sequence)
    elif isinstance(label, VideoName):
        row["case_date"] = label.case_date.isoformat()
    return row


def build_index(catalog: Catalog) -> str:
    """Render the catalog as CSV text, tombstones included.

    Rows sort by asset id, cells derive only from stored fields, and line
    endings are fixed, so rebuilding from an unchanged catalog is
    byte-identical.
    """
    buf = StringIO()
    writer = csv.DictWriter(buf, fieldnames=INDEX_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for asset in sorted(catalog.assets.values(), key=lambda a: a.asset_id):
        writer.writerow(_index_row(asset))
    return buf.getvalue()


def _pathology_matches(row: dict[str, str], wanted: str) -> bool:
    """Match a category name, a stage token, or a full stage-grade token."""
    want = wanted.strip().upper()
    if want in ("BEN", "BENIGN"):
        return row["pathology_category"] == PathologyCategory.BENIGN.value
    if want == "CANCER":
        return row["pathology_category"] == PathologyCategory.CANCER.value
    stage_tok, _, grade_tok = want.partition("-")
    if row["stage"].upper() != stage_tok:
        return False
    return not grade_tok or row["grade"] == grade_tok


def query_index(
    catalog: Catalog,
    *,
    status: str | CompletionStatus | None = None,
    pathology: str | None = None,
    modality: str | None = None,
    location: str | None = None,
    uid: str | None = None,
    case_id: str | None = None,
    kind: str | MediaKind | None = None,
    free_text: str | None = None,
    include_deleted: bool = False,
) -> list[dict[str, str]]:
    """Filter index rows; every given criterion must hold (conjunction).

    ``free_text`` is a case-insensitive substring match over the serialized
    row, so it finds identifiers, tokens, and dates alike.
    """
    rows = []
    for asset in sorted(catalog.assets.values(), key=lambda a: a.asset_id):
        row = _index_row(asset)
        if not include_deleted and row["deleted"] == "true":
            continue
        if status is not None and row["status"] != CompletionStatus(status).value:
            continue
        if pathology is not None and not _pathology_matches(row, pathology):
            continue
        if modality is not None and row["modality"] != str(modality).upper():
            continue
        if location is not None and row["location"] != str(location).upper():
            continue
        if uid is not None and row["uid"] != uid:
            continue
        if case_id is not None and row["case_id"] != case_id:
            continue
        if kind is not None and row["kind"] != MediaKind(kind).value:
            continue
        if free_text is not None:
            haystack = ",".join(row[c] for c in INDEX_COLUMNS).lower()
            if free_text.lower() not in haystack:
                continue
        rows.append(row)
    return rows
