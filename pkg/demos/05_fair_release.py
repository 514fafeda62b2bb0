"""The full release path: QC, panel approval, de-identification, audit.

A case earns its way into a research bundle. All three QC layers must
pass, a reviewer panel must approve the annotations, and every identifier
is swapped for a salted pseudonym with per-patient date shifting before a
byte-level scan confirms nothing leaked. The finished bundle is then
graded against fifteen stewardship principles; three rest on recorded
attestations, the other twelve are machine-checked.

Usage: python demos/05_fair_release.py
"""

from __future__ import annotations

import tempfile
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

from endocurator.annotations import AnnotationStore, Appearance, FrameSpan
from endocurator.catalog import Catalog, CompletionStatus, Procedure, SourceSite
from endocurator.export import PseudonymVault, build_research_bundle
from endocurator.fair import fair_audit
from endocurator.qc import (
    QcReport,
    ReviewRole,
    ReviewVote,
    Verdict,
    consensus,
    run_qc1,
    run_qc2,
    run_qc3,
)
from endocurator.vocab import PathologyCode, TumorGrade, TumorStage


def seed_released_case(media: Path) -> tuple[AnnotationStore, str]:
    catalog = Catalog()
    store = AnnotationStore(catalog)
    patient = catalog.register_patient(date(2019, 1, 7), SourceSite.SITE_A)
    case = catalog.create_case(
        patient.uid,
        date(2020, 1, 17),
        Procedure.TURBT,
        text_docs=("pathology_report.pdf", "operative_report.pdf"),
    )
    base = np.asarray(data.camera(), dtype=np.uint8)[300:400, 120:220]
    for i in range(3):
        path = media / f"UID0001_20200117_WLC_TRIG_TA-HG_{i + 1:02d}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.roll(base, i, axis=1)).save(path)
        catalog.ingest_media(path, case.case_id)
    video = media / "UID0001_20200117.mp4"
    video.write_bytes(b"demo clip bytes")
    clip = catalog.ingest_media(
        video, case.case_id, frame_count=600, width=1920, height=1080
    )
    lesion = store.add_lesion(
        case.case_id,
        catalog.vocab.location("TRIG"),
        Appearance.PAPILLARY,
        PathologyCode.cancer(TumorStage.TA, TumorGrade.HG),
    )
    store.add_classification(clip.asset_id, lesion.lesion_id, FrameSpan(0, 99))
    store.add_segmentation(
        clip.asset_id,
        lesion.lesion_id,
        10,
        [(100.0, 100.0), (300.0, 120.0), (210.0, 340.0)],
    )
    for asset in catalog.case_assets(case.case_id):
        catalog.set_status(asset.asset_id, CompletionStatus.RELEASED)
    return store, case.case_id


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        store, case_id = seed_released_case(Path(tmp) / "media")
        catalog = store.catalog

        qc1 = run_qc1(store, case_id)
        qc2 = run_qc2(store, case_id, qc1)
        qc3 = run_qc3(store, case_id, qc1, qc2, seed=7)
        report = QcReport(
            case_id=case_id,
            layers=(qc1, qc2, qc3),
            generated_at=datetime.now(timezone.utc),
        )
        print(f"{case_id} release ready: {report.release_ready}")

        decision = consensus(
            [
                ReviewVote("uro1", ReviewRole.UROLOGIST, Verdict.APPROVE),
                ReviewVote("uro2", ReviewRole.UROLOGIST, Verdict.APPROVE),
                ReviewVote("uro3", ReviewRole.UROLOGIST, Verdict.APPROVE),
            ]
        )
        print(f"panel decision: {decision.outcome.value}\n")

        vault = PseudonymVault(
            salt=b"demo-salt", created_at=datetime.now(timezone.utc)
        )
        bundle = Path(tmp) / "bundle"
        manifest = build_research_bundle(
            store,
            [case_id],
            vault,
            bundle,
            license_text="CC-BY-NC-4.0",
            qc_reports={case_id: report},
            reviews={case_id: decision},
        )
        print(f"bundle {manifest.bundle_id}: {len(manifest.items)} case item(s)")
        print(f"pseudonym for UID0001: {vault.pseudonym('UID0001')}")

        audit = fair_audit(catalog, [bundle])
        print("\nstewardship audit:")
        for e in audit.entries:
            print(f"  {e.principle:4s} {e.status.value:8s} {e.evidence}")
        counts = "  ".join(f"{k} {v}" for k, v in sorted(audit.counts().items()))
        print(f"\n{counts}")


if __name__ == "__main__":
    main()
