"""A first walk through the media catalog.

Enroll a patient, open a procedure case, and ingest named stills plus a
cystoscopy clip. Along the way the catalog does its bookkeeping: content
checksums flag byte-identical duplicates, each asset climbs a forward-only
completion ladder, and a flat CSV index falls straight out of the records.
The tour ends with a save/load round trip to show the whole catalog is one
JSON document.

Usage: python demos/01_catalog_tour.py
"""

from __future__ import annotations

import tempfile
import warnings
from datetime import date
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

from endocurator.catalog import (
    Catalog,
    CompletionStatus,
    IllegalTransition,
    Procedure,
    SourceSite,
    build_index,
)


def write_still(path: Path, row: int) -> None:
    frame = np.asarray(data.camera(), dtype=np.uint8)[row : row + 100, 120:220]
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(frame).save(path)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        media = Path(tmp) / "media"
        stills = [
            media / "UID0001_20200117_WLC_TRIG_TA-HG_01.png",
            media / "UID0001_20200117_BLC_DOME_BEN_02.png",
        ]
        write_still(stills[0], 300)
        write_still(stills[1], 150)
        video = media / "UID0001_20200117.mp4"
        video.write_bytes(b"demo clip bytes")

        catalog = Catalog()
        patient = catalog.register_patient(date(2019, 1, 7), SourceSite.SITE_A)
        case = catalog.create_case(
            patient.uid,
            date(2020, 1, 17),
            Procedure.TURBT,
            text_docs=("pathology_report.pdf", "operative_report.pdf"),
        )
        print(f"enrolled {patient.uid}, opened case {case.case_id}\n")

        for path in (*stills, video):
            asset = catalog.ingest_media(
                path,
                case.case_id,
                **({"frame_count": 600, "width": 1920, "height": 1080}
                   if path.suffix == ".mp4" else {}),
            )
            print(f"  {asset.asset_id}  {asset.status.value:8s}  {path.name}")

        # Same bytes under a new name: the checksum catches it.
        copy = media / "UID0001_20200117_WLC_TRIG_TA-HG_03.png"
        copy.write_bytes(stills[0].read_bytes())
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            catalog.ingest_media(copy, case.case_id)
        print(f"\nduplicate bytes warning: {caught[0].message}")

        # Statuses only move forward; a rollback is refused.
        first = catalog.case_assets(case.case_id)[0]
        catalog.set_status(first.asset_id, CompletionStatus.QC1_PASS)
        try:
            catalog.set_status(first.asset_id, CompletionStatus.NEW)
        except IllegalTransition as exc:
            print(f"rollback refused: {exc}")

        print("\nindex preview:")
        for line in build_index(catalog).splitlines()[:4]:
            print(f"  {line[:76]}")

        saved = Path(tmp) / "catalog.json"
        catalog.save(saved)
        reloaded = Catalog.load(saved)
        print(f"\nround trip: {len(reloaded.assets)} assets survive save/load")


if __name__ == "__main__":
    main()
