"""Layered quality control with overlapping re-verification, plus panel review.

Three machine-checkable QC layers guard each case, modeled on the
swiss-cheese principle: any one layer may miss a defect, so later layers
re-verify earlier ones rather than trusting them.

* Layer 1 checks each asset at the door: labels present and aligned with the
  case, required paperwork on file, media decodable and above the frame
  quality thresholds.
* Layer 2 checks cross-asset completeness (every lesion identifiable in
  video, pathology associations backed by labeled stills) and re-runs all of
  layer 1.
* Layer 3 audits a seeded random sample of assets in depth and re-runs
  layers 1 and 2.

A failed check is a finding inside the layer result, never an exception:
exceptions are reserved for running layers out of order or handing them
malformed inputs. Release is gated on all three layers passing.

Human review happens through votes: panel urologists approve or reject, and
the decision needs a strict majority of the panel plus one (3 of 4 for the
standard panel). Tied panels defer to the team leader's vote; without a
leader vote the item escalates to an external expert.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotations import AnnotationStore
from .catalog import Catalog, MediaKind, parse_rfc3339, rfc3339
from .metrics import (
    ImageTooSmall,
    QualityThresholds,
    blur_score,
    brisque_score,
    luminance_bt601,
)
from .vocab import CompletionStatus

__all__ = [
    "ConsensusDecision",
    "ConsensusOutcome",
    "DecisionPath",
    "DuplicateVote",
    "MissingPriorLayer",
    "MissingQc1",
    "QcFinding",
    "QcLayerResult",
    "QcReport",
    "ReviewRole",
    "ReviewVote",
    "RootCause",
    "Verdict",
    "consensus",
    "gate_release",
    "run_qc1",
    "run_qc2",
    "run_qc3",
    "sample_size",
]


class MissingQc1(ValueError):
    """Layer 2 was invoked without a layer 1 result for the same case."""


class MissingPriorLayer(ValueError):
    """Layer 3 was invoked without both prior layer results for the case."""


class DuplicateVote(ValueError):
    """The same reviewer voted twice on one item."""


class RootCause(str, Enum):
    """Failure taxonomy attached to findings and rejection votes."""

    MULTIFOCAL_OVERLOAD = "MULTIFOCAL_OVERLOAD"
    NO_PATHOLOGY_SAMPLE = "NO_PATHOLOGY_SAMPLE"
    LESION_NOT_IDENTIFIABLE_IN_VIDEO = "LESION_NOT_IDENTIFIABLE_IN_VIDEO"
    POOR_FRAME_QUALITY = "POOR_FRAME_QUALITY"
    PATHOLOGY_ASSOCIATION_FAILURE = "PATHOLOGY_ASSOCIATION_FAILURE"
    DATA_INCOMPLETENESS = "DATA_INCOMPLETENESS"
    RAPID_CAMERA_MOTION = "RAPID_CAMERA_MOTION"
    FLAT_BOUNDARY_AMBIGUITY = "FLAT_BOUNDARY_AMBIGUITY"
    LARGE_LESION = "LARGE_LESION"
    CAMERA_TOO_CLOSE = "CAMERA_TOO_CLOSE"
    CAMERA_TOO_FAR = "CAMERA_TOO_FAR"
    FREEFORM = "FREEFORM"


@dataclass(frozen=True)
class QcFinding:
    """One defect discovered by a QC check."""

    code: str
    detail: str
    asset_id: str = ""
    lesion_id: str = ""
    root_cause: RootCause | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.root_cause is RootCause.FREEFORM and not self.note.strip():
            raise ValueError("FREEFORM findings need an explanatory note")

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "detail": self.detail,
            "asset_id": self.asset_id,
            "lesion_id": self.lesion_id,
            "root_cause": self.root_cause.value if self.root_cause else None,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QcFinding":
        return cls(
            code=payload["code"],
            detail=payload["detail"],
            asset_id=payload.get("asset_id", ""),
            lesion_id=payload.get("lesion_id", ""),
            root_cause=(
                RootCause(payload["root_cause"])
                if payload.get("root_cause")
                else None
            ),
            note=payload.get("note", ""),
        )


@dataclass(frozen=True)
class QcLayerResult:
    """Outcome of one QC layer over one case."""

    layer: int
    case_id: str
    passed: bool
    findings: tuple[QcFinding, ...]
    reverified: tuple[int, ...]
    executed_at: datetime
    seed: int | None = None
    sampled_assets: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "case_id": self.case_id,
            "passed": self.passed,
            "findings": [f.to_dict() for f in self.findings],
            "reverified": list(self.reverified),
            "executed_at": rfc3339(self.executed_at),
            "seed": self.seed,
            "sampled_assets": list(self.sampled_assets),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QcLayerResult":
        return cls(
            layer=int(payload["layer"]),
            case_id=payload["case_id"],
            passed=bool(payload["passed"]),
            findings=tuple(
                QcFinding.from_dict(f) for f in payload.get("findings", [])
            ),
            reverified=tuple(int(n) for n in payload.get("reverified", [])),
            executed_at=parse_rfc3339(payload["executed_at"]),
            seed=payload.get("seed"),
            sampled_assets=tuple(payload.get("sampled_assets", [])),
        )


@dataclass(frozen=True)
class QcReport:
    """All layer results for one case, with the release decision."""

    case_id: str
    layers: tuple[QcLayerResult, ...]
    generated_at: datetime

    @property
    def release_ready(self) -> bool:
        present = {r.layer: r for r in self.layers}
        return all(
            layer in present and present[layer].passed for layer in (1, 2, 3)
        )

    def layer(self, n: int) -> QcLayerResult | None:
        for r in self.layers:
            if r.layer == n:
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "generated_at": rfc3339(self.generated_at),
            "release_ready": self.release_ready,
            "layers": [r.to_dict() for r in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, payload: dict) -> "QcReport":
        return cls(
            case_id=payload["case_id"],
            layers=tuple(
                QcLayerResult.from_dict(r) for r in payload.get("layers", [])
            ),
            generated_at=parse_rfc3339(payload["generated_at"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "QcReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- layer 1 ------------------------------------------------------------------


def _load_gray(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        return luminance_bt601(np.asarray(img.convert("RGB"), dtype=np.float64))


def _check_labels(catalog: Catalog, case_id: str) -> list[QcFinding]:
    findings = []
    case = catalog.case(case_id)
    for asset in catalog.case_assets(case_id):
        if asset.kind is MediaKind.IMAGE and asset.label is None:
            findings.append(
                QcFinding(
                    code="LABEL_MISSING",
                    detail="image was ingested without a parsed label",
                    asset_id=asset.asset_id,
                    root_cause=RootCause.DATA_INCOMPLETENESS,
                )
            )
        elif asset.label is not None and asset.label.case_date != case.case_date:
            findings.append(
                QcFinding(
                    code="LABEL_ALIGNMENT",
                    detail=(
                        f"filename date {asset.label.case_date.isoformat()} differs "
                        f"from case date {case.case_date.isoformat()}"
                    ),
                    asset_id=asset.asset_id,
                )
            )
    return findings


# Paperwork required per procedure, matched as case-insensitive substrings.
_REQUIRED_DOCS = {
    "TURBT": (
        ("pathology", RootCause.NO_PATHOLOGY_SAMPLE, "pathology report"),
        ("operative", RootCause.DATA_INCOMPLETENESS, "operative report"),
    ),
    "CLINIC_CYSTO": (),
}


def _check_docs(catalog: Catalog, case_id: str) -> list[QcFinding]:
    case = catalog.case(case_id)
    docs = [d.lower() for d in case.text_docs]
    findings = []
    for needle, cause, label in _REQUIRED_DOCS[case.procedure.value]:
        if not any(needle in d for d in docs):
            findings.append(
                QcFinding(
                    code="DOC_MISSING",
                    detail=f"{case.procedure.value} case lacks a {label}",
                    root_cause=cause,
                )
            )
    return findings


def _check_media(
    catalog: Catalog,
    case_id: str,
    thresholds: QualityThresholds,
    asset_ids: Sequence[str] | None = None,
) -> list[QcFinding]:
    findings = []
    for asset in catalog.case_assets(case_id):
        if asset_ids is not None and asset.asset_id not in asset_ids:
            continue
        if asset.kind is MediaKind.VIDEO:
            if not asset.frame_count:
                findings.append(
                    QcFinding(
                        code="MEDIA_INFO_MISSING",
                        detail="video has no frame count; decode it first",
                        asset_id=asset.asset_id,
                        root_cause=RootCause.DATA_INCOMPLETENESS,
                    )
                )
            continue
        try:
            gray = _load_gray(asset.path)
        except Exception as exc:
            findings.append(
                QcFinding(
                    code="MEDIA_UNREADABLE",
                    detail=f"cannot decode image: {exc}",
                    asset_id=asset.asset_id,
                    root_cause=RootCause.DATA_INCOMPLETENESS,
                )
            )
            continue
        try:
            blur = blur_score(gray)
            naturalness = brisque_score(gray)
        except ImageTooSmall as exc:
            findings.append(
                QcFinding(
                    code="MEDIA_QUALITY",
                    detail=f"image too small to score: {exc}",
                    asset_id=asset.asset_id,
                    root_cause=RootCause.POOR_FRAME_QUALITY,
                )
            )
            continue
        if not thresholds.frame_ok(blur, naturalness):
            findings.append(
                QcFinding(
                    code="MEDIA_QUALITY",
                    detail=(
                        f"focus {blur:.1f} (needs >= {thresholds.blur_threshold}) "
                        f"naturalness {naturalness:.1f} "
                        f"(needs <= {thresholds.brisque_threshold})"
                    ),
                    asset_id=asset.asset_id,
                    root_cause=RootCause.POOR_FRAME_QUALITY,
                )
            )
    return findings


def run_qc1(
    store: AnnotationStore,
    case_id: str,
    thresholds: QualityThresholds | None = None,
) -> QcLayerResult:
    """First-layer checks: labels, paperwork, decodable media above thresholds."""
    catalog = store.catalog
    thresholds = thresholds or QualityThresholds()
    findings = (
        _check_labels(catalog, case_id)
        + _check_docs(catalog, case_id)
        + _check_media(catalog, case_id, thresholds)
    )
    return QcLayerResult(
        layer=1,
        case_id=case_id,
        passed=not findings,
        findings=tuple(findings),
        reverified=(),
        executed_at=catalog.now(),
    )


# -- layer 2 ------------------------------------------------------------------


def _check_completeness(store: AnnotationStore, case_id: str) -> list[QcFinding]:
    catalog = store.catalog
    assets = catalog.case_assets(case_id)
    findings = []
    if not any(a.kind is MediaKind.VIDEO for a in assets):
        findings.append(
            QcFinding(
                code="COMPLETENESS",
                detail="case has no video",
                root_cause=RootCause.DATA_INCOMPLETENESS,
            )
        )
    if not any(a.kind is MediaKind.IMAGE for a in assets):
        findings.append(
            QcFinding(
                code="COMPLETENESS",
                detail="case has no still images",
                root_cause=RootCause.DATA_INCOMPLETENESS,
            )
        )
    case_asset_ids = {a.asset_id for a in assets}
    image_tokens = {
        a.label.pathology.token
        for a in assets
        if a.kind is MediaKind.IMAGE and a.label is not None
    }
    for lesion in store.case_lesions(case_id):
        linked = any(
            ann.lesion_id == lesion.lesion_id and ann.asset_id in case_asset_ids
            for ann in store.classifications.values()
        )
        if not linked:
            findings.append(
                QcFinding(
                    code="COMPLETENESS",
                    detail="lesion has no visibility span in any case video",
                    lesion_id=lesion.lesion_id,
                    root_cause=RootCause.LESION_NOT_IDENTIFIABLE_IN_VIDEO,
                )
            )
        if lesion.pathology.token not in image_tokens:
            findings.append(
                QcFinding(
                    code="ASSOCIATION",
                    detail=(
                        f"no labeled still carries pathology "
                        f"{lesion.pathology.token} for this lesion"
                    ),
                    lesion_id=lesion.lesion_id,
                    root_cause=RootCause.PATHOLOGY_ASSOCIATION_FAILURE,
                )
            )
    return findings


def run_qc2(
    store: AnnotationStore,
    case_id: str,
    qc1: QcLayerResult | None,
    thresholds: QualityThresholds | None = None,
) -> QcLayerResult:
    """Second-layer checks: completeness and association, re-verifying layer 1."""
    if qc1 is None or qc1.layer != 1 or qc1.case_id != case_id:
        raise MissingQc1(f"layer 2 for {case_id} needs that case's layer 1 result")
    catalog = store.catalog
    thresholds = thresholds or QualityThresholds()
    reverify = (
        _check_labels(catalog, case_id)
        + _check_docs(catalog, case_id)
        + _check_media(catalog, case_id, thresholds)
    )
    findings = reverify + _check_completeness(store, case_id)
    return QcLayerResult(
        layer=2,
        case_id=case_id,
        passed=not findings,
        findings=tuple(findings),
        reverified=(1,),
        executed_at=catalog.now(),
    )


# -- layer 3 ------------------------------------------------------------------


def sample_size(n: int, fraction: float) -> int:
    """Audit sample size: the given fraction, floored at 5, capped at n."""
    if n <= 0:
        return 0
    return min(max(math.ceil(fraction * n), 5), n)


def run_qc3(
    store: AnnotationStore,
    case_id: str,
    qc1: QcLayerResult | None,
    qc2: QcLayerResult | None,
    *,
    fraction: float = 0.1,
    seed: int = 0,
    thresholds: QualityThresholds | None = None,
) -> QcLayerResult:
    """Third-layer audit: deep checks on a seeded sample, re-verifying 1 and 2.

    The sampled asset list is a pure function of the catalog contents and the
    seed, so audits are reproducible.
    """
    if (
        qc1 is None
        or qc2 is None
        or qc1.layer != 1
        or qc2.layer != 2
        or qc1.case_id != case_id
        or qc2.case_id != case_id
    ):
        raise MissingPriorLayer(
            f"layer 3 for {case_id} needs that case's layer 1 and 2 results"
        )
    catalog = store.catalog
    thresholds = thresholds or QualityThresholds()
    population = sorted(a.asset_id for a in catalog.case_assets(case_id))
    k = sample_size(len(population), fraction)
    sampled = tuple(sorted(random.Random(seed).sample(population, k)))

    reverify = (
        _check_labels(catalog, case_id)
        + _check_docs(catalog, case_id)
        + _check_media(catalog, case_id, thresholds)
        + _check_completeness(store, case_id)
    )
    audit: list[QcFinding] = []
    for asset_id in sampled:
        asset = catalog.asset(asset_id)
        if asset.kind is MediaKind.IMAGE:
            audit.extend(
                _check_media(catalog, case_id, thresholds, asset_ids=[asset_id])
            )
        if asset.status is CompletionStatus.EXCLUDED:
            audit.append(
                QcFinding(
                    code="AUDIT",
                    detail="sampled asset is excluded but still attached to the case",
                    asset_id=asset_id,
                    root_cause=RootCause.DATA_INCOMPLETENESS,
                )
            )
    findings = reverify + audit

    return QcLayerResult(
        layer=3,
        case_id=case_id,
        passed=not findings,
        findings=tuple(findings),
        reverified=(1, 2),
        executed_at=catalog.now(),
        seed=seed,
        sampled_assets=sampled,
    )


def gate_release(
    qc1: QcLayerResult, qc2: QcLayerResult, qc3: QcLayerResult
) -> bool:
    """True only when all three layers for the same case passed."""
    for expected, result in ((1, qc1), (2, qc2), (3, qc3)):
        if result.layer != expected:
            raise ValueError(f"expected a layer {expected} result, got {result.layer}")
    if not (qc1.case_id == qc2.case_id == qc3.case_id):
        raise ValueError("release gate needs results for a single case")
    return qc1.passed and qc2.passed and qc3.passed


# -- panel review ----------------------------------------------------------------


class ReviewRole(str, Enum):
    UROLOGIST = "UROLOGIST"
    LEADER = "LEADER"
    COORDINATOR = "COORDINATOR"
    DATA_SCIENTIST = "DATA_SCIENTIST"
    PATHOLOGIST = "PATHOLOGIST"


class Verdict(str, Enum):
    APPROVE = "APPROVE"
    REJECT = "REJECT"


class ConsensusOutcome(str, Enum):
    APPROVED = "APPROVED"
    REJECTED = "REJECTED"
    ESCALATED = "ESCALATED"


class DecisionPath(str, Enum):
    MAJORITY = "MAJORITY"
    LEADER_TIEBREAK = "LEADER_TIEBREAK"
    EXTERNAL_EXPERT = "EXTERNAL_EXPERT"


@dataclass(frozen=True)
class ReviewVote:
    reviewer_id: str
    role: ReviewRole
    verdict: Verdict
    root_cause: RootCause | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.root_cause is RootCause.FREEFORM and not self.note.strip():
            raise ValueError("FREEFORM votes need an explanatory note")

    def to_dict(self) -> dict:
        return {
            "reviewer_id": self.reviewer_id,
            "role": self.role.value,
            "verdict": self.verdict.value,
            "root_cause": self.root_cause.value if self.root_cause else None,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReviewVote":
        return cls(
            reviewer_id=payload["reviewer_id"],
            role=ReviewRole(payload["role"]),
            verdict=Verdict(payload["verdict"]),
            root_cause=(
                RootCause(payload["root_cause"])
                if payload.get("root_cause")
                else None
            ),
            note=payload.get("note", ""),
        )


@dataclass(frozen=True)
class ConsensusDecision:
    outcome: ConsensusOutcome
    decided_by: DecisionPath
    approvals: int
    rejections: int
    threshold: int
    votes: tuple[ReviewVote, ...]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "decided_by": self.decided_by.value,
            "approvals": self.approvals,
            "rejections": self.rejections,
            "threshold": self.threshold,
            "votes": [v.to_dict() for v in self.votes],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ConsensusDecision":
        return cls(
            outcome=ConsensusOutcome(payload["outcome"]),
            decided_by=DecisionPath(payload["decided_by"]),
            approvals=int(payload["approvals"]),
            rejections=int(payload["rejections"]),
            threshold=int(payload["threshold"]),
            votes=tuple(ReviewVote.from_dict(v) for v in payload.get("votes", [])),
        )


def consensus(votes: Iterable[ReviewVote]) -> ConsensusDecision:
    """Resolve a panel review.

    Panel urologists are the voting members; the decision threshold is a
    strict majority of the panel plus one voice, ceil((p + 1) / 2), which for
    the standard four-member panel is 3 of 4. When neither side reaches it,
    the team leader's vote (if any) settles the item; otherwise it escalates
    to an external expert. Other roles' votes are recorded but not counted.
    """
    votes = tuple(votes)
    seen: set[str] = set()
    for v in votes:
        if v.reviewer_id in seen:
            raise DuplicateVote(f"reviewer {v.reviewer_id} voted twice")
        seen.add(v.reviewer_id)
    leaders = [v for v in votes if v.role is ReviewRole.LEADER]
    if len(leaders) > 1:
        raise ValueError("at most one leader vote is allowed")
    panel = [v for v in votes if v.role is ReviewRole.UROLOGIST]
    p = len(panel)
    threshold = math.ceil((p + 1) / 2)
    approvals = sum(1 for v in panel if v.verdict is Verdict.APPROVE)
    rejections = p - approvals

    if approvals >= threshold:
        outcome, path = ConsensusOutcome.APPROVED, DecisionPath.MAJORITY
    elif rejections >= threshold:
        outcome, path = ConsensusOutcome.REJECTED, DecisionPath.MAJORITY
    elif leaders:
        outcome = (
            ConsensusOutcome.APPROVED
            if leaders[0].verdict is Verdict.APPROVE
            else ConsensusOutcome.REJECTED
        )
        path = DecisionPath.LEADER_TIEBREAK
    else:
        outcome, path = ConsensusOutcome.ESCALATED, DecisionPath.EXTERNAL_EXPERT
    return ConsensusDecision(
        outcome=outcome,
        decided_by=path,
        approvals=approvals,
        rejections=rejections,
        threshold=threshold,
        votes=votes,
    )
