"""De-identified data products: pseudonyms, research bundles, atlas manifests.

Patient identifiers never leave the building. A salted keyed hash maps each
UID to a short stable pseudonym, and every acquisition date moves by a
per-patient constant offset so surveillance intervals survive while absolute
timing does not. The vault holding the mapping is the single most sensitive
object in the package; everything it guards flows outward only through the
bundle builders here, which finish with a byte-level scan proving no raw UID
slipped through.

Access levels order the data products: the vault is RESTRICTED, the
identified catalog CONFIDENTIAL, the internal atlas INTERNAL, and research
bundles PUBLIC.
"""

from __future__ import annotations

import csv
import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from enum import Enum, IntEnum
from io import StringIO
from pathlib import Path
from typing import Iterable, Mapping

from .annotations import (
    COCO_CATEGORIES,
    AnnotationStore,
    CocoDocument,
    NothingToExport,
    export_coco,
)
from .catalog import (
    INDEX_COLUMNS,
    Catalog,
    MediaAsset,
    MediaKind,
    _index_row,
    parse_rfc3339,
    rfc3339,
)
from .qc import ConsensusDecision, ConsensusOutcome, QcReport
from .vocab import CompletionStatus, ImageLabel, VideoName, parse_uid

__all__ = [
    "AccessLevel",
    "BundleManifest",
    "BundlePurpose",
    "CollisionExhausted",
    "DeidentificationLeak",
    "GateNotPassed",
    "IncompleteLabel",
    "PseudonymVault",
    "UnreviewedAnnotations",
    "atlas_eligible",
    "build_atlas_manifest",
    "build_research_bundle",
    "classify_access",
    "deidentified_index",
    "find_uid_leaks",
]

PSEUDONYM_LENGTH = 12
_MAX_REDRAWS = 16
_SHIFT_RANGE_DAYS = 180


class CollisionExhausted(RuntimeError):
    """Pseudonym collisions persisted through every re-draw; check the salt."""


class GateNotPassed(ValueError):
    """A case was offered for release without a passing three-layer QC report."""


class UnreviewedAnnotations(ValueError):
    """A case was offered for release without an approving panel decision."""


class IncompleteLabel(ValueError):
    """An atlas image lacks a full label or has not been released."""


class DeidentificationLeak(RuntimeError):
    """The post-build scan found a raw patient identifier inside a bundle."""


class AccessLevel(IntEnum):
    """Data sensitivity levels, totally ordered from open to locked down."""

    PUBLIC = 0
    INTERNAL = 1
    CONFIDENTIAL = 2
    RESTRICTED = 3


class BundlePurpose(str, Enum):
    RESEARCH = "RESEARCH"
    EDUCATION = "EDUCATION"


class PseudonymVault:
    """Keyed-hash pseudonym registry with per-patient date shifting.

    Pseudonyms are HMAC-SHA256(salt, uid) truncated to 12 hex characters, so
    the same vault (same salt) always produces the same token for a patient;
    re-identification requires the vault itself. In the astronomically rare
    event of a truncation collision the input is suffixed and re-hashed, up
    to 16 attempts.
    """

    def __init__(
        self,
        salt: bytes,
        created_at: datetime,
        mapping: dict[str, str] | None = None,
    ) -> None:
        if not salt:
            raise ValueError("vault salt must be non-empty")
        self.salt = salt
        self.created_at = created_at
        self.mapping: dict[str, str] = dict(mapping or {})

    @classmethod
    def create(cls, clock=None, salt: bytes | None = None) -> "PseudonymVault":
        now = clock() if clock else datetime.now().astimezone()
        return cls(salt=salt or secrets.token_bytes(32), created_at=now)

    def _digest(self, message: str) -> str:
        return hmac.new(self.salt, message.encode("utf-8"), hashlib.sha256).hexdigest()

    def pseudonym(self, uid: str) -> str:
        parse_uid(uid)
        if uid in self.mapping:
            return self.mapping[uid]
        taken = set(self.mapping.values())
        for attempt in range(_MAX_REDRAWS):
            message = uid if attempt == 0 else f"{uid}#{attempt}"
            token = self._digest(message)[:PSEUDONYM_LENGTH]
            if token not in taken:
                self.mapping[uid] = token
                return token
        raise CollisionExhausted(
            f"{_MAX_REDRAWS} pseudonym draws collided for one patient"
        )

    def pseudonymize(self, uids: Iterable[str]) -> dict[str, str]:
        """Assign pseudonyms to a set of patients, ordered for reproducibility."""
        return {uid: self.pseudonym(uid) for uid in sorted(set(uids))}

    def uid_for(self, pseudonym: str) -> str:
        """Reverse lookup; this is the operation the vault exists to restrict."""
        for uid, token in self.mapping.items():
            if token == pseudonym:
                return uid
        raise KeyError(pseudonym)

    def shift_days(self, uid: str) -> int:
        """Per-patient constant offset in [-180, +180] days."""
        parse_uid(uid)
        window = 2 * _SHIFT_RANGE_DAYS + 1
        draw = int(self._digest(f"{uid}/dateshift")[:8], 16)
        return draw % window - _SHIFT_RANGE_DAYS

    def shift_date(self, uid: str, when: date) -> date:
        return when + timedelta(days=self.shift_days(uid))

    def to_dict(self) -> dict:
        return {
            "salt": self.salt.hex(),
            "created_at": rfc3339(self.created_at),
            "mapping": dict(sorted(self.mapping.items())),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "PseudonymVault":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            salt=bytes.fromhex(payload["salt"]),
            created_at=parse_rfc3339(payload["created_at"]),
            mapping=dict(payload["mapping"]),
        )


def classify_access(item: object) -> AccessLevel:
    """Sensitivity level of a data product.

    The vault can re-identify patients, so it sits at the top; the identified
    catalog and its records are confidential; atlas manifests circulate
    internally; research bundles are built to leave the institution.
    """
    from .catalog import CaseRecord, PatientRecord

    if isinstance(item, PseudonymVault):
        return AccessLevel.RESTRICTED
    if isinstance(item, (Catalog, PatientRecord, CaseRecord, MediaAsset)):
        return AccessLevel.CONFIDENTIAL
    if isinstance(item, BundleManifest):
        if item.purpose is BundlePurpose.EDUCATION:
            return AccessLevel.INTERNAL
        return AccessLevel.PUBLIC
    raise TypeError(f"no access rule for {type(item).__name__}")


@dataclass(frozen=True)
class BundleManifest:
    """Metadata shipped with every outbound data product."""

    bundle_id: str
    purpose: BundlePurpose
    items: tuple[dict, ...]
    curation_date: datetime
    modification_date: datetime
    license: str
    provenance: str

    def __post_init__(self) -> None:
        if not self.license.strip():
            raise ValueError("bundles need a usage license")
        if not self.provenance.strip():
            raise ValueError("bundles need provenance text")

    def to_dict(self) -> dict:
        return {
            "bundle_id": self.bundle_id,
            "purpose": self.purpose.value,
            "items": [dict(item) for item in self.items],
            "curation_date": rfc3339(self.curation_date),
            "modification_date": rfc3339(self.modification_date),
            "license": self.license,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


# -- de-identified renderings ----------------------------------------------------


def _deidentified_stem(asset: MediaAsset, vault: PseudonymVault) -> str:
    """Filename stem with the UID replaced and the date shifted."""
    token = vault.pseudonym(asset.uid)
    label = asset.label
    if isinstance(label, ImageLabel):
        shifted = vault.shift_date(asset.uid, label.case_date)
        return "_".join(
            (
                token,
                f"{shifted:%Y%m%d}",
                label.modality.value,
                label.location.code,
                label.pathology.token,
                f"{label.sequence:02d}",
            )
        )
    if isinstance(label, VideoName):
        shifted = vault.shift_date(asset.uid, label.case_date)
        return f"{token}_{shifted:%Y%m%d}"
    return f"{token}_{asset.asset_id}"


def _deidentified_ref(asset: MediaAsset, vault: PseudonymVault) -> str:
    return _deidentified_stem(asset, vault) + Path(asset.path).suffix.lower()


DEID_INDEX_COLUMNS = tuple(
    "pseudonym" if col == "uid" else col for col in INDEX_COLUMNS
)


def deidentified_index(
    catalog: Catalog, case_ids: Iterable[str], vault: PseudonymVault
) -> str:
    """Index CSV for the given cases with pseudonyms and shifted dates.

    Same schema as the catalog index except the uid column becomes the
    pseudonym; tombstones stay inside the institution and are not exported.
    """
    buf = StringIO()
    writer = csv.DictWriter(buf, fieldnames=DEID_INDEX_COLUMNS, lineterminator="\n")
    writer.writeheader()
    assets = [
        asset
        for cid in sorted(set(case_ids))
        for asset in catalog.case_assets(cid)
    ]
    for asset in sorted(assets, key=lambda a: a.asset_id):
        row = _index_row(asset)
        row["pseudonym"] = vault.pseudonym(row.pop("uid"))
        if row["case_date"]:
            shifted = vault.shift_date(
                asset.uid, date.fromisoformat(row["case_date"])
            )
            row["case_date"] = shifted.isoformat()
        writer.writerow(row)
    return buf.getvalue()


def _empty_coco() -> CocoDocument:
    categories = tuple(
        {"id": i + 1, "name": name, "supercategory": "lesion"}
        for i, name in enumerate(COCO_CATEGORIES)
    )
    return CocoDocument((), (), categories)


def deidentified_coco(
    store: AnnotationStore, case_id: str, vault: PseudonymVault
) -> CocoDocument:
    """Per-case interchange document with de-identified image file names.

    A case without segmentations yields a valid document with empty image
    and annotation sections, so every bundled case ships exactly one file.
    """
    try:
        doc = export_coco(store, case_id)
    except NothingToExport:
        return _empty_coco()
    # Regenerate the exporter's (asset, frame) ordering to rename each entry.
    segs = sorted(
        (
            s
            for s in store.segmentations.values()
            if store.lesion(s.lesion_id).case_id == case_id
        ),
        key=lambda s: (s.asset_id, s.frame_index, s.ann_id),
    )
    keys: list[tuple[str, int]] = []
    for s in segs:
        if (s.asset_id, s.frame_index) not in keys:
            keys.append((s.asset_id, s.frame_index))
    images = []
    for entry, (asset_id, frame_index) in zip(doc.images, keys):
        asset = store.catalog.asset(asset_id)
        stem = _deidentified_stem(asset, vault)
        if asset.kind is MediaKind.IMAGE:
            name = f"{stem}.png"
        else:
            name = f"{stem}_f{frame_index:06d}.png"
        images.append({**entry, "file_name": name})
    return CocoDocument(tuple(images), doc.annotations, doc.categories)


def find_uid_leaks(
    root: Path, uids: Iterable[str]
) -> list[tuple[str, str]]:
    """Scan every file under a directory for raw patient identifiers.

    Returns (relative path, uid) pairs; an empty list is the proof of
    de-identification the bundle builders require before returning.
    """
    needles = [(uid, uid.encode("utf-8")) for uid in sorted(set(uids))]
    hits = []
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        data = path.read_bytes()
        for uid, needle in needles:
            if needle in data:
                hits.append((str(path.relative_to(root)), uid))
    return hits


# -- bundle builders ---------------------------------------------------------------


def _content_id(prefix: str, parts: Iterable[str]) -> str:
    digest = hashlib.sha256("\n".join(sorted(parts)).encode("utf-8")).hexdigest()
    return f"{prefix}-{digest[:12]}"


def build_research_bundle(
    store: AnnotationStore,
    case_ids: Iterable[str],
    vault: PseudonymVault,
    out_dir: str | Path,
    *,
    license_text: str,
    qc_reports: Mapping[str, QcReport],
    reviews: Mapping[str, ConsensusDecision],
    provenance: str = "",
) -> BundleManifest:
    """Assemble a public research bundle for fully released cases.

    Every case must hold a release-ready QC report (all three layers passed)
    and an approving panel decision. The output directory receives a
    manifest, a de-identified index CSV, and one interchange document per
    case; a final byte scan guarantees no raw UID appears anywhere.
    """
    catalog = store.catalog
    cases = sorted(set(case_ids))
    if not cases:
        raise ValueError("research bundles need at least one case")
    if not license_text.strip():
        raise ValueError("research bundles need a usage license")
    for cid in cases:
        catalog.case(cid)
        report = qc_reports.get(cid)
        if report is None or report.case_id != cid or not report.release_ready:
            raise GateNotPassed(f"case {cid} has not passed all three QC layers")
        decision = reviews.get(cid)
        if decision is None or decision.outcome is not ConsensusOutcome.APPROVED:
            raise UnreviewedAnnotations(
                f"case {cid} annotations lack an approving panel decision"
            )

    out = Path(out_dir)
    (out / "coco").mkdir(parents=True, exist_ok=True)

    items = []
    for cid in cases:
        case = catalog.case(cid)
        token = vault.pseudonym(case.uid)
        doc = deidentified_coco(store, cid, vault)
        (out / "coco" / f"{cid}.json").write_text(
            doc.to_json() + "\n", encoding="utf-8"
        )
        items.append(
            {
                "case_ref": cid,
                "pseudonym": token,
                "procedure": case.procedure.value,
                "case_date": vault.shift_date(case.uid, case.case_date).isoformat(),
                "coco_file": f"coco/{cid}.json",
                "assets": [
                    {
                        "ref": _deidentified_ref(a, vault),
                        "kind": a.kind.value,
                        "status": a.status.value,
                    }
                    for a in catalog.case_assets(cid)
                ],
                "lesions": [
                    {
                        "lesion_id": lesion.lesion_id,
                        "location": lesion.location.code,
                        "appearance": lesion.appearance.value,
                        "pathology": lesion.pathology.token,
                    }
                    for lesion in store.case_lesions(cid)
                ],
            }
        )

    (out / "index.csv").write_text(
        deidentified_index(catalog, cases, vault), encoding="utf-8"
    )
    now = catalog.now()
    manifest = BundleManifest(
        bundle_id=_content_id("research", cases),
        purpose=BundlePurpose.RESEARCH,
        items=tuple(items),
        curation_date=now,
        modification_date=now,
        license=license_text,
        provenance=provenance
        or f"assembled from {len(cases)} released cases after three-layer "
        "quality control and panel review",
    )
    manifest.save(out / "manifest.json")

    uids = {catalog.case(cid).uid for cid in cases}
    leaks = find_uid_leaks(out, uids)
    if leaks:
        raise DeidentificationLeak(f"raw identifiers found: {leaks[:5]}")
    return manifest


def atlas_eligible(asset: MediaAsset) -> bool:
    """True for assets the education atlas may include: released labeled stills."""
    return (
        asset.kind is MediaKind.IMAGE
        and isinstance(asset.label, ImageLabel)
        and asset.status is CompletionStatus.RELEASED
        and not asset.deleted
    )


def build_atlas_manifest(
    store: AnnotationStore,
    asset_ids: Iterable[str],
    vault: PseudonymVault,
    *,
    license_text: str,
    provenance: str = "",
    out_dir: str | Path | None = None,
) -> BundleManifest:
    """Educational atlas over released, fully labeled stills.

    One item per patient, patients ordered by their newest case first, and
    each patient's images ordered newest first as well. Date shifting keeps
    the ordering identical to the identified ordering.
    """
    catalog = store.catalog
    rows_by_uid: dict[str, list[tuple[date, dict]]] = {}
    for asset_id in sorted(set(asset_ids)):
        asset = catalog.asset(asset_id)
        label = asset.label
        if asset.kind is not MediaKind.IMAGE or not isinstance(label, ImageLabel):
            raise IncompleteLabel(f"{asset_id} is not a fully labeled still")
        if asset.deleted or asset.status is not CompletionStatus.RELEASED:
            raise IncompleteLabel(f"{asset_id} has not been released")
        row = {
            "pseudonym": vault.pseudonym(asset.uid),
            "case_date": vault.shift_date(asset.uid, label.case_date).isoformat(),
            "modality": label.modality.value,
            "location": label.location.code,
            "pathology": label.pathology.token,
            "ref": _deidentified_ref(asset, vault),
        }
        rows_by_uid.setdefault(asset.uid, []).append((label.case_date, row))

    # Newest case first, for the patient strip and across patients alike.
    items = []
    for uid, dated in rows_by_uid.items():
        dated.sort(key=lambda pair: (pair[0], pair[1]["ref"]), reverse=True)
        items.append(
            {
                "pseudonym": vault.pseudonym(uid),
                "newest": dated[0][0],
                "images": [row for _, row in dated],
            }
        )
    items.sort(key=lambda item: (item["newest"], item["pseudonym"]), reverse=True)
    for item in items:
        del item["newest"]

    now = catalog.now()
    manifest = BundleManifest(
        bundle_id=_content_id(
            "atlas", (r["ref"] for item in items for r in item["images"])
        ),
        purpose=BundlePurpose.EDUCATION,
        items=tuple(items),
        curation_date=now,
        modification_date=now,
        license=license_text,
        provenance=provenance
        or f"atlas of {sum(len(i['images']) for i in items)} released stills "
        f"from {len(items)} patients",
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest.save(out / "manifest.json")
    return manifest
