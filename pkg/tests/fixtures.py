"""Deterministic collection builders shared by unit and acceptance tests.

The two table fixtures reconstruct collections whose aggregate statistics
equal the published reference tables exactly; every count is laid out
explicitly so a failure points at arithmetic, not at fixture randomness.
"""

from __future__ import annotations

import math
import random
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from endocurator.annotations import (
    AnnotationStore,
    Appearance,
    ExclusionReason,
    FrameSpan,
)
from endocurator.catalog import Catalog, Procedure, SourceSite
from endocurator.vocab import (
    CompletionStatus,
    PathologyCategory,
    PathologyCode,
    TumorGrade,
    TumorStage,
    default_vocabulary,
)


class TickingClock:
    """Deterministic timestamp source: one second per call."""

    def __init__(self, start: datetime | None = None) -> None:
        self.now = start or datetime(2021, 1, 1, 9, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        self.now += timedelta(seconds=1)
        return self.now


# Lesions per case: 20 solitary, 28 double, 12 triple, and a multifocal tail.
# 68 cases and 163 lesions with median 2 and quartiles 1 and 3.
LESIONS_PER_CASE = [1] * 20 + [2] * 28 + [3] * 12 + [4, 4, 5, 6, 7, 8, 8, 9]

# Joint pathology distribution: margins give 49 benign / 114 cancer,
# stages 70/23/13/8, grades 54 low / 60 high.
LESION_PATHOLOGY_COUNTS = [
    (PathologyCode.benign(), 49),
    (PathologyCode.cancer(TumorStage.TA, TumorGrade.LG), 54),
    (PathologyCode.cancer(TumorStage.TA, TumorGrade.HG), 16),
    (PathologyCode.cancer(TumorStage.CIS, TumorGrade.HG), 23),
    (PathologyCode.cancer(TumorStage.T1, TumorGrade.HG), 13),
    (PathologyCode.cancer(TumorStage.T2, TumorGrade.HG), 8),
]

# Frame budget: 857,032 video frames, 503,351 excluded, and the annotated
# remainder split 263,897 background / 28,954 benign / 60,830 cancer, with
# cancer subdivided per category so stage and grade sums both close.
FRAME_CATEGORY_COUNTS = [
    (PathologyCode.benign(), 28_954),
    (PathologyCode.cancer(TumorStage.TA, TumorGrade.LG), 18_420),
    (PathologyCode.cancer(TumorStage.TA, TumorGrade.HG), 10_052),
    (PathologyCode.cancer(TumorStage.CIS, TumorGrade.HG), 14_457),
    (PathologyCode.cancer(TumorStage.T1, TumorGrade.HG), 14_348),
    (PathologyCode.cancer(TumorStage.T2, TumorGrade.HG), 3_553),
]
TOTAL_FRAMES = 857_032
EXCLUDED_FRAMES = 503_351


def build_table3_collection(media_dir: Path) -> tuple[Catalog, AnnotationStore]:
    """60 patients, 68 cases, 163 lesions matching the lesion-level table."""
    rng = random.Random(163)
    catalog = Catalog(clock=TickingClock())
    store = AnnotationStore(catalog)
    vocab = default_vocabulary()
    locations = sorted(vocab.locations)

    pathologies = [p for p, n in LESION_PATHOLOGY_COUNTS for _ in range(n)]
    rng.shuffle(pathologies)
    appearances = list(Appearance)

    # 60 patients; the first 8 contribute two cases each to reach 68.
    for i in range(60):
        catalog.register_patient(
            date(2019, 1, 1) + timedelta(days=i),
            SourceSite.SITE_A if i % 2 == 0 else SourceSite.SITE_B,
        )
    case_owners = [f"UID{i + 1:04d}" for i in range(60)] + [
        f"UID{i + 1:04d}" for i in range(8)
    ]
    assert len(case_owners) == len(LESIONS_PER_CASE)

    media_dir.mkdir(parents=True, exist_ok=True)
    for idx, (uid, n_lesions) in enumerate(zip(case_owners, LESIONS_PER_CASE)):
        case = catalog.create_case(
            uid,
            date(2020, 1, 6) + timedelta(days=idx),
            Procedure.TURBT if idx % 3 else Procedure.CLINIC_CYSTO,
            text_docs=("pathology_report.pdf", "operative_report.pdf"),
        )
        for k in range(n_lesions):
            store.add_lesion(
                case.case_id,
                vocab.location(locations[(idx + k) % len(locations)]),
                appearances[k % len(appearances)],
                pathologies.pop(),
            )
    assert not pathologies
    return catalog, store


def build_table4_collection(media_dir: Path) -> tuple[Catalog, AnnotationStore]:
    """One long case video whose frame tallies match the frame-level table.

    Layout: the first 503,351 frames are resection footage (excluded), then
    one contiguous visibility span per lesion category, and the tail of the
    clip is lesion-free background.
    """
    catalog = Catalog(clock=TickingClock())
    store = AnnotationStore(catalog)
    vocab = default_vocabulary()

    catalog.register_patient(date(2019, 5, 1), SourceSite.SITE_A)
    case = catalog.create_case(
        "UID0001",
        date(2020, 1, 17),
        Procedure.TURBT,
        text_docs=("pathology_report.pdf", "operative_report.pdf"),
    )
    media_dir.mkdir(parents=True, exist_ok=True)
    video_path = media_dir / "UID0001_20200117.mp4"
    video_path.write_bytes(b"stand-in video payload")
    asset = catalog.ingest_media(
        video_path,
        case.case_id,
        frame_count=TOTAL_FRAMES,
        width=1920,
        height=1080,
    )

    store.mark_excluded(
        asset.asset_id, ExclusionReason.TURBT, FrameSpan(0, EXCLUDED_FRAMES - 1)
    )
    cursor = EXCLUDED_FRAMES
    locations = sorted(vocab.locations)
    for i, (pathology, n_frames) in enumerate(FRAME_CATEGORY_COUNTS):
        lesion = store.add_lesion(
            case.case_id,
            vocab.location(locations[i % len(locations)]),
            Appearance.PAPILLARY,
            pathology,
        )
        store.add_classification(
            asset.asset_id, lesion.lesion_id, FrameSpan(cursor, cursor + n_frames - 1)
        )
        cursor += n_frames
    assert cursor < TOTAL_FRAMES  # the remainder is background
    return catalog, store


def make_passing_report(case_id: str, when: datetime) -> "QcReport":
    """A release-ready three-layer QC report built from plain data."""
    from endocurator.qc import QcLayerResult, QcReport

    layers = tuple(
        QcLayerResult(
            layer=n,
            case_id=case_id,
            passed=True,
            findings=(),
            reverified=tuple(range(1, n)),
            executed_at=when,
        )
        for n in (1, 2, 3)
    )
    return QcReport(case_id=case_id, layers=layers, generated_at=when)


def approving_panel() -> "ConsensusDecision":
    from endocurator.qc import ReviewRole, ReviewVote, Verdict, consensus

    return consensus(
        ReviewVote(f"uro{i}", ReviewRole.UROLOGIST, Verdict.APPROVE)
        for i in range(4)
    )


def build_release_collection(
    media_dir: Path,
    n_patients: int = 25,
    cases_per_patient: int = 2,
):
    """Fully released cases ready for bundling: stills, video, annotations.

    Media files are stub bytes (nothing decodes them on this path); every
    asset is advanced to RELEASED, and each case gets a passing QC report
    plus an approving panel decision. Case dates are staggered per patient
    so date-interval checks see distinct gaps.
    """
    clock = TickingClock()
    catalog = Catalog(clock=clock)
    store = AnnotationStore(catalog)
    locations = list(catalog.vocab.locations)
    ta_hg = PathologyCode(
        PathologyCategory.CANCER, TumorStage.TA, TumorGrade.HG
    )
    media_dir.mkdir(parents=True, exist_ok=True)

    case_ids = []
    qc_reports = {}
    reviews = {}
    for p in range(n_patients):
        site = SourceSite.SITE_A if p % 2 == 0 else SourceSite.SITE_B
        patient = catalog.register_patient(date(2019, 6, 1), site)
        for c in range(cases_per_patient):
            case_date = date(2020, 1, 6) + timedelta(days=11 * p + 45 * c)
            case = catalog.create_case(
                patient.uid,
                case_date,
                Procedure.TURBT,
                text_docs=("pathology_report.pdf", "operative_report.pdf"),
            )
            stamp = f"{case_date:%Y%m%d}"
            loc = locations[(p + c) % len(locations)]
            still_path = media_dir / f"{patient.uid}_{stamp}_WLC_{loc}_TA-HG_01.png"
            still_path.write_bytes(f"still {patient.uid} {stamp}".encode())
            still = catalog.ingest_media(still_path, case.case_id)
            video_path = media_dir / f"{patient.uid}_{stamp}.mp4"
            video_path.write_bytes(f"video {patient.uid} {stamp}".encode())
            video = catalog.ingest_media(
                video_path, case.case_id, frame_count=600, width=640, height=480
            )
            lesion = store.add_lesion(
                case.case_id, catalog.vocab.location(loc), Appearance.PAPILLARY, ta_hg
            )
            store.add_classification(
                video.asset_id, lesion.lesion_id, FrameSpan(0, 99)
            )
            store.add_segmentation(
                video.asset_id,
                lesion.lesion_id,
                10 + c,
                [(10.0, 10.0), (60.0, 10.0), (60.0, 60.0)],
            )
            for asset in (still, video):
                catalog.set_status(asset.asset_id, CompletionStatus.RELEASED)
            case_ids.append(case.case_id)
            qc_reports[case.case_id] = make_passing_report(case.case_id, clock())
            reviews[case.case_id] = approving_panel()
    return catalog, store, case_ids, qc_reports, reviews


def sharp_frame() -> np.ndarray:
    """A natural textured patch that clears both frame quality thresholds."""
    from skimage import data

    return np.asarray(data.camera(), dtype=np.float64)[300:400, 120:220]


def blurry_frame() -> np.ndarray:
    """A defocused patch that fails the sharpness threshold."""
    from scipy import ndimage
    from skimage import data

    crop = np.asarray(data.camera(), dtype=np.float64)[200:280, 200:280]
    return ndimage.gaussian_filter(crop, 4.0)


def write_png(path: Path, array: np.ndarray) -> Path:
    """Save a grayscale array as an 8-bit PNG."""
    from PIL import Image

    arr = np.clip(np.round(array), 0, 255).astype("uint8")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path)
    return path


def random_simple_polygon(
    rng: random.Random,
    width: int,
    height: int,
    n_vertices: int | None = None,
) -> list[tuple[float, float]]:
    """A star-shaped (hence simple) polygon inside the given extent."""
    n = n_vertices or rng.randint(3, 12)
    cx = rng.uniform(width * 0.3, width * 0.7)
    cy = rng.uniform(height * 0.3, height * 0.7)
    max_r = min(cx, cy, width - cx, height - cy) * 0.95
    # Jittered but strictly increasing angles with every gap below pi keep
    # each edge inside a convex wedge, so the polygon cannot self-intersect.
    angles = [2.0 * math.pi * (i + 0.9 * rng.random()) / n for i in range(n)]
    return [
        (cx + r * math.cos(t), cy + r * math.sin(t))
        for t, r in ((t, rng.uniform(max_r * 0.2, max_r)) for t in angles)
    ]
