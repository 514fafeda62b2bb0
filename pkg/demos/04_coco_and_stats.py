"""From lesion annotations to interchange files and cohort tables.

Lesions carry a site, an appearance, and a pathology code. Frame-level
work hangs off them: classification spans over a clip and polygon
segmentations on single frames. The polygon layer exports to the COCO
interchange layout and reimports without loss, and the same store feeds
the cohort statistics tables used in reporting.

Usage: python demos/04_coco_and_stats.py
"""

from __future__ import annotations

import tempfile
from datetime import date
from pathlib import Path

from endocurator.annotations import (
    AnnotationStore,
    Appearance,
    FrameSpan,
    export_coco,
    import_coco,
)
from endocurator.catalog import Catalog, Procedure, SourceSite
from endocurator.stats import StatsLevel, aggregate_stats
from endocurator.vocab import PathologyCode, TumorGrade, TumorStage


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        catalog = Catalog()
        store = AnnotationStore(catalog)
        patient = catalog.register_patient(date(2019, 1, 7), SourceSite.SITE_A)
        case = catalog.create_case(patient.uid, date(2020, 1, 17), Procedure.TURBT)
        video = Path(tmp) / "UID0001_20200117.mp4"
        video.write_bytes(b"demo clip bytes")
        asset = catalog.ingest_media(
            video, case.case_id, frame_count=600, width=1920, height=1080
        )

        vocab = catalog.vocab
        codes = [
            PathologyCode.cancer(TumorStage.TA, TumorGrade.HG),
            PathologyCode.cancer(TumorStage.CIS),
            PathologyCode.benign(),
        ]
        sites = ("TRIG", "DOME", "LLAT")
        lesions = [
            store.add_lesion(case.case_id, vocab.location(s), Appearance.PAPILLARY, c)
            for s, c in zip(sites, codes)
        ]

        # One visibility span and one traced outline per lesion.
        shapes = [
            [(100.0, 100.0), (300.0, 120.0), (210.0, 340.0)],
            [(500.0, 500.0), (700.0, 520.0), (690.0, 700.0), (480.0, 660.0)],
            [(900.0, 200.0), (1100.0, 240.0), (1000.0, 420.0)],
        ]
        for i, (lesion, shape) in enumerate(zip(lesions, shapes)):
            store.add_classification(
                asset.asset_id, lesion.lesion_id, FrameSpan(i * 100, i * 100 + 99)
            )
            store.add_segmentation(asset.asset_id, lesion.lesion_id, i * 100 + 10, shape)

        doc = export_coco(store, case.case_id)
        print(
            f"exported {len(doc.annotations)} annotations over"
            f" {len(doc.images)} frames in {len(doc.categories)} categories"
        )
        ann = doc.annotations[0]
        print(f"  first record: category {ann['category_id']}, area {ann['area']:.0f}")
        assert import_coco(doc.to_json()) == doc
        print("  reimport matches the export exactly")

        print("\nlesion table:")
        report = aggregate_stats(store, StatsLevel.LESION)
        for line in report.to_csv().splitlines():
            print(f"  {line}")


if __name__ == "__main__":
    main()
