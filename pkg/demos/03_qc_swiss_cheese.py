"""Three stacked quality layers, each re-verifying the ones below.

Layer 1 checks labels, documents, and media quality. Layer 2 re-runs all
of layer 1 and adds completeness checks. Layer 3 requires both earlier
results, re-verifies them, and audits a seeded random sample of assets.
Release needs all three holes to line up: a single failed layer keeps the
case out of any bundle. A panel vote with a leader tiebreak closes the
loop on the annotations themselves.

Usage: python demos/03_qc_swiss_cheese.py
"""

from __future__ import annotations

import tempfile
from datetime import date
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

from endocurator.annotations import AnnotationStore
from endocurator.catalog import Catalog, Procedure, SourceSite
from endocurator.qc import (
    ReviewRole,
    ReviewVote,
    Verdict,
    consensus,
    gate_release,
    run_qc1,
    run_qc2,
    run_qc3,
)


def seed_case(media: Path, docs: tuple[str, ...]) -> tuple[AnnotationStore, str]:
    catalog = Catalog()
    store = AnnotationStore(catalog)
    patient = catalog.register_patient(date(2019, 1, 7), SourceSite.SITE_A)
    case = catalog.create_case(
        patient.uid, date(2020, 1, 17), Procedure.TURBT, text_docs=docs
    )
    base = np.asarray(data.camera(), dtype=np.uint8)[300:400, 120:220]
    for i in range(4):
        path = media / f"UID0001_20200117_WLC_TRIG_TA-HG_{i + 1:02d}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.roll(base, i, axis=1)).save(path)
        catalog.ingest_media(path, case.case_id)
    video = media / "UID0001_20200117.mp4"
    video.write_bytes(b"demo clip bytes")
    catalog.ingest_media(video, case.case_id, frame_count=600, width=1920, height=1080)
    return store, case.case_id


def show(result) -> None:
    verdict = "PASS" if result.passed else "FAIL"
    reverified = ",".join(str(n) for n in result.reverified) or "-"
    print(f"  layer {result.layer}: {verdict}  re-verified layers: {reverified}")
    for f in result.findings:
        where = f.asset_id or f.lesion_id or result.case_id
        print(f"    {f.code} {where}: {f.detail}")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        store, case_id = seed_case(
            Path(tmp) / "a", ("pathology_report.pdf", "operative_report.pdf")
        )
        qc1 = run_qc1(store, case_id)
        qc2 = run_qc2(store, case_id, qc1)
        qc3 = run_qc3(store, case_id, qc1, qc2, seed=7)
        print(f"clean case {case_id}:")
        show(qc1)
        show(qc2)
        show(qc3)
        print(f"  release gate open: {gate_release(qc1, qc2, qc3)}")

        # Drop the operative note: layer 1 fails and the gate stays shut.
        store2, case2 = seed_case(Path(tmp) / "b", ("pathology_report.pdf",))
        bad1 = run_qc1(store2, case2)
        bad2 = run_qc2(store2, case2, bad1)
        bad3 = run_qc3(store2, case2, bad1, bad2, seed=7)
        print(f"\nmissing operative note on {case2}:")
        show(bad1)
        print(f"  release gate open: {gate_release(bad1, bad2, bad3)}")

    # Annotation review: a 2-2 urologist split falls to the leader.
    votes = [
        ReviewVote("uro1", ReviewRole.UROLOGIST, Verdict.APPROVE),
        ReviewVote("uro2", ReviewRole.UROLOGIST, Verdict.APPROVE),
        ReviewVote("uro3", ReviewRole.UROLOGIST, Verdict.REJECT),
        ReviewVote("uro4", ReviewRole.UROLOGIST, Verdict.REJECT),
        ReviewVote("lead", ReviewRole.LEADER, Verdict.APPROVE),
    ]
    decision = consensus(votes)
    print(
        f"\nsplit panel: {decision.outcome.value}"
        f" (decided by {decision.decided_by.value})"
    )
    decision = consensus(votes[:4])
    print(
        f"no leader present: {decision.outcome.value}"
        f" (decided by {decision.decided_by.value})"
    )


if __name__ == "__main__":
    main()
