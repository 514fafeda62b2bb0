"""Annotation store: polygon gates, exclusion rules, COCO interchange."""

from __future__ import annotations

import json
import random
from datetime import date
from pathlib import Path

import pytest

import oracles
from endocurator.annotations import (
    COCO_CATEGORIES,
    AnnotationStore,
    Appearance,
    DegeneratePolygon,
    ExclusionReason,
    FrameExcluded,
    FrameSpan,
    NothingToExport,
    OutOfBounds,
    OverlapWithAnnotation,
    SchemaViolation,
    SelfIntersection,
    UnknownCategory,
    category_name_for,
    export_coco,
    import_coco,
    shoelace_area,
    validate_polygon,
)
from endocurator.catalog import Catalog, Procedure, SourceSite
from endocurator.vocab import (
    PathologyCode,
    TumorGrade,
    TumorStage,
    default_vocabulary,
)
from fixtures import TickingClock, random_simple_polygon

VOCAB = default_vocabulary()


@pytest.fixture
def rig(tmp_path: Path):
    """Catalog with one case, one image, one 1000-frame video, one lesion."""
    catalog = Catalog(clock=TickingClock())
    catalog.register_patient(date(2020, 1, 1), SourceSite.SITE_A)
    case = catalog.create_case(
        "UID0001", date(2020, 1, 17), Procedure.TURBT,
        text_docs=("pathology_report.pdf", "operative_report.pdf"),
    )
    img_path = tmp_path / "UID0001_20200117_WLC_TRIG_TA-HG_01.png"
    img_path.write_bytes(b"i")
    image = catalog.ingest_media(img_path, case.case_id, width=640, height=480)
    vid_path = tmp_path / "UID0001_20200117.mp4"
    vid_path.write_bytes(b"v")
    video = catalog.ingest_media(
        vid_path, case.case_id, frame_count=1000, width=640, height=480
    )
    store = AnnotationStore(catalog)
    lesion = store.add_lesion(
        case.case_id,
        VOCAB.location("TRIG"),
        Appearance.PAPILLARY,
        PathologyCode.cancer(TumorStage.TA, TumorGrade.HG),
    )
    return catalog, store, case, image, video, lesion


SQUARE = [(10.0, 10.0), (100.0, 10.0), (100.0, 100.0), (10.0, 100.0)]


class TestPolygonValidation:
    def test_valid_square(self) -> None:
        assert validate_polygon(SQUARE, 640, 480) == pytest.approx(8100.0)

    def test_too_few_vertices(self) -> None:
        with pytest.raises(DegeneratePolygon):
            validate_polygon([(0.0, 0.0), (10.0, 10.0)], 640, 480)

    def test_repeated_vertex(self) -> None:
        with pytest.raises(DegeneratePolygon):
            validate_polygon(
                [(0.0, 0.0), (10.0, 0.0), (10.0, 0.0), (5.0, 8.0)], 640, 480
            )

    def test_collinear_zero_area(self) -> None:
        with pytest.raises(DegeneratePolygon):
            validate_polygon([(0.0, 0.0), (5.0, 5.0), (10.0, 10.0)], 640, 480)

    def test_bowtie_self_intersection(self) -> None:
        bowtie = [(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)]
        with pytest.raises(SelfIntersection):
            validate_polygon(bowtie, 640, 480)

    def test_nonadjacent_touch_rejected(self) -> None:
        # Fourth vertex touches the first edge.
        touching = [(0.0, 0.0), (20.0, 0.0), (20.0, 20.0), (10.0, 0.0), (0.0, 20.0)]
        with pytest.raises(SelfIntersection):
            validate_polygon(touching, 640, 480)

    @pytest.mark.parametrize(
        "vertex", [(-0.1, 5.0), (641.0, 5.0), (5.0, -1.0), (5.0, 480.5)]
    )
    def test_out_of_bounds(self, vertex) -> None:
        poly = [(5.0, 5.0), (50.0, 5.0), *[vertex]]
        with pytest.raises(OutOfBounds):
            validate_polygon(poly, 640, 480)

    def test_boundary_vertices_allowed(self) -> None:
        poly = [(0.0, 0.0), (640.0, 0.0), (640.0, 480.0)]
        assert validate_polygon(poly, 640, 480) > 0

    def test_random_star_polygons_accepted(self) -> None:
        rng = random.Random(99)
        for _ in range(50):
            poly = random_simple_polygon(rng, 640, 480)
            area = validate_polygon(poly, 640, 480)
            assert area == pytest.approx(
                float(oracles.shoelace_area_exact(poly)), rel=1e-12
            )

    def test_shoelace_matches_exact_oracle(self) -> None:
        rng = random.Random(7)
        for _ in range(30):
            poly = random_simple_polygon(rng, 1920, 1080)
            assert shoelace_area(poly) == pytest.approx(
                float(oracles.shoelace_area_exact(poly)), rel=1e-12
            )


class TestSegmentation:
    def test_add_on_image_frame_zero(self, rig) -> None:
        _, store, _, image, _, lesion = rig
        ann = store.add_segmentation(image.asset_id, lesion.lesion_id, 0, SQUARE)
        assert ann.frame_index == 0
        assert ann.polygon[0] == (10.0, 10.0)

    def test_image_frame_must_be_zero(self, rig) -> None:
        _, store, _, image, _, lesion = rig
        with pytest.raises(OutOfBounds):
            store.add_segmentation(image.asset_id, lesion.lesion_id, 1, SQUARE)

    def test_video_frame_bounds(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.add_segmentation(video.asset_id, lesion.lesion_id, 999, SQUARE)
        with pytest.raises(OutOfBounds):
            store.add_segmentation(video.asset_id, lesion.lesion_id, 1000, SQUARE)

    def test_excluded_frame_rejected(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.mark_excluded(
            video.asset_id, ExclusionReason.OUT_OF_BODY, FrameSpan(100, 200)
        )
        with pytest.raises(FrameExcluded):
            store.add_segmentation(video.asset_id, lesion.lesion_id, 150, SQUARE)
        store.add_segmentation(video.asset_id, lesion.lesion_id, 201, SQUARE)

    def test_polygon_errors_propagate(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        with pytest.raises(SelfIntersection):
            store.add_segmentation(
                video.asset_id,
                lesion.lesion_id,
                0,
                [(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)],
            )

    def test_lesion_and_asset_must_share_case(self, rig, tmp_path) -> None:
        catalog, store, _, _, _, lesion = rig
        catalog.register_patient(date(2020, 2, 1), SourceSite.SITE_B)
        other = catalog.create_case("UID0002", date(2020, 3, 1), Procedure.CLINIC_CYSTO)
        p = tmp_path / "UID0002_20200301_WLC_DOME_BEN_01.png"
        p.write_bytes(b"z")
        foreign = catalog.ingest_media(p, other.case_id, width=640, height=480)
        with pytest.raises(ValueError):
            store.add_segmentation(foreign.asset_id, lesion.lesion_id, 0, SQUARE)


class TestClassificationAndExclusion:
    def test_classification_span_recorded(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        ann = store.add_classification(
            video.asset_id, lesion.lesion_id, FrameSpan(100, 300)
        )
        assert len(ann.span) == 201

    def test_span_beyond_clip_rejected(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        with pytest.raises(OutOfBounds):
            store.add_classification(
                video.asset_id, lesion.lesion_id, FrameSpan(900, 1000)
            )

    def test_negative_span_rejected(self) -> None:
        with pytest.raises(OutOfBounds):
            FrameSpan(-1, 5)
        with pytest.raises(OutOfBounds):
            FrameSpan(7, 4)

    def test_classification_on_excluded_frames_rejected(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.mark_excluded(
            video.asset_id, ExclusionReason.POOR_QUALITY, FrameSpan(0, 49)
        )
        with pytest.raises(FrameExcluded):
            store.add_classification(
                video.asset_id, lesion.lesion_id, FrameSpan(40, 60)
            )

    def test_resection_mark_never_overlaps_annotations(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.add_classification(video.asset_id, lesion.lesion_id, FrameSpan(100, 200))
        with pytest.raises(OverlapWithAnnotation):
            store.mark_excluded(
                video.asset_id, ExclusionReason.TURBT, FrameSpan(150, 400)
            )
        store.mark_excluded(video.asset_id, ExclusionReason.TURBT, FrameSpan(201, 400))

    def test_resection_mark_checks_segmentations_too(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.add_segmentation(video.asset_id, lesion.lesion_id, 500, SQUARE)
        with pytest.raises(OverlapWithAnnotation):
            store.mark_excluded(
                video.asset_id, ExclusionReason.TURBT, FrameSpan(450, 550)
            )

    def test_quality_mark_may_retire_annotated_footage(self, rig) -> None:
        _, store, _, _, video, lesion = rig
        store.add_classification(video.asset_id, lesion.lesion_id, FrameSpan(100, 200))
        mark = store.mark_excluded(
            video.asset_id, ExclusionReason.POOR_QUALITY, FrameSpan(150, 250)
        )
        assert mark.reason is ExclusionReason.POOR_QUALITY

    def test_exclusions_only_for_videos(self, rig) -> None:
        _, store, _, image, _, _ = rig
        with pytest.raises(ValueError):
            store.mark_excluded(
                image.asset_id, ExclusionReason.POOR_QUALITY, FrameSpan(0, 0)
            )


class TestCategoryMapping:
    @pytest.mark.parametrize(
        "pathology,name",
        [
            (PathologyCode.benign(), "benign"),
            (PathologyCode.cancer(TumorStage.TA, TumorGrade.LG), "Ta-LG"),
            (PathologyCode.cancer(TumorStage.TA, TumorGrade.HG), "Ta-HG"),
            (PathologyCode.cancer(TumorStage.CIS), "CIS"),
            (PathologyCode.cancer(TumorStage.CIS, TumorGrade.HG), "CIS"),
            (PathologyCode.cancer(TumorStage.T1, TumorGrade.LG), "T1-LG"),
            (PathologyCode.cancer(TumorStage.T2, TumorGrade.HG), "T2-HG"),
        ],
    )
    def test_mapping(self, pathology, name) -> None:
        assert category_name_for(pathology) == name
        assert name in COCO_CATEGORIES

    def test_ungraded_stage_has_no_category(self) -> None:
        with pytest.raises(UnknownCategory):
            category_name_for(PathologyCode.cancer(TumorStage.TA))


class TestCocoExport:
    def test_nothing_to_export(self, rig) -> None:
        _, store, case, _, _, _ = rig
        with pytest.raises(NothingToExport):
            export_coco(store, case.case_id)

    def test_document_structure(self, rig) -> None:
        _, store, case, image, video, lesion = rig
        store.add_segmentation(image.asset_id, lesion.lesion_id, 0, SQUARE)
        store.add_segmentation(video.asset_id, lesion.lesion_id, 42, SQUARE)
        doc = export_coco(store, case.case_id)
        assert [c["name"] for c in doc.categories] == list(COCO_CATEGORIES)
        assert [c["id"] for c in doc.categories] == list(range(1, 9))
        assert len(doc.images) == 2
        assert len(doc.annotations) == 2
        file_names = {i["file_name"] for i in doc.images}
        assert "UID0001_20200117_WLC_TRIG_TA-HG_01.png" in file_names
        assert "UID0001_20200117_f000042.png" in file_names
        for a in doc.annotations:
            assert a["iscrowd"] == 0
            assert a["category_id"] == 3  # Ta-HG
            assert a["area"] == pytest.approx(8100.0)
            assert a["bbox"] == [10.0, 10.0, 90.0, 90.0]
            assert a["segmentation"] == [
                [10.0, 10.0, 100.0, 10.0, 100.0, 100.0, 10.0, 100.0]
            ]

    def test_shared_frame_single_image_entry(self, rig) -> None:
        _, store, case, _, video, lesion = rig
        other = store.add_lesion(
            case.case_id,
            VOCAB.location("DOME"),
            Appearance.FLAT,
            PathologyCode.cancer(TumorStage.CIS),
        )
        far = [(200.0, 200.0), (300.0, 200.0), (300.0, 300.0)]
        store.add_segmentation(video.asset_id, lesion.lesion_id, 7, SQUARE)
        store.add_segmentation(video.asset_id, other.lesion_id, 7, far)
        doc = export_coco(store, case.case_id)
        assert len(doc.images) == 1
        assert len(doc.annotations) == 2
        assert {a["category_id"] for a in doc.annotations} == {3, 4}

    def test_area_matches_exact_oracle(self, rig) -> None:
        _, store, case, _, video, lesion = rig
        rng = random.Random(31)
        polys = [random_simple_polygon(rng, 640, 480) for _ in range(20)]
        for k, poly in enumerate(polys):
            store.add_segmentation(video.asset_id, lesion.lesion_id, k, poly)
        doc = export_coco(store, case.case_id)
        for ann, poly in zip(doc.annotations, polys):
            assert ann["area"] == pytest.approx(
                float(oracles.shoelace_area_exact(poly)), rel=1e-12
            )


class TestCocoImport:
    def _doc(self, rig):
        _, store, case, image, video, lesion = rig
        store.add_segmentation(image.asset_id, lesion.lesion_id, 0, SQUARE)
        store.add_segmentation(video.asset_id, lesion.lesion_id, 42, SQUARE)
        return export_coco(store, case.case_id)

    def test_round_trip_exact(self, rig) -> None:
        doc = self._doc(rig)
        again = import_coco(doc.to_json())
        assert again == doc
        assert again.to_json() == doc.to_json()

    def test_round_trip_through_file(self, rig, tmp_path) -> None:
        doc = self._doc(rig)
        p = tmp_path / "coco.json"
        p.write_text(doc.to_json(), encoding="utf-8")
        assert import_coco(p.read_text(encoding="utf-8")) == doc

    def test_unknown_category(self, rig) -> None:
        payload = self._doc(rig).to_dict()
        payload["categories"][0]["name"] = "polyp"
        with pytest.raises(UnknownCategory):
            import_coco(payload)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("images"),
            lambda d: d.pop("annotations"),
            lambda d: d.pop("categories"),
            lambda d: d["annotations"][0].update(image_id=999),
            lambda d: d["annotations"][0].update(category_id=999),
            lambda d: d["annotations"][0].update(iscrowd=1),
            lambda d: d["annotations"][0].update(segmentation=[[1.0, 2.0, 3.0]]),
            lambda d: d["annotations"][0].update(segmentation=[[1.0, 2.0, 3.0, 4.0]]),
            lambda d: d["annotations"][0].update(bbox=[1.0, 2.0, 3.0]),
            lambda d: d["annotations"][0].update(area=-5.0),
            lambda d: d["annotations"][1].update(id=d["annotations"][0]["id"]),
            lambda d: d["images"][1].update(id=d["images"][0]["id"]),
            lambda d: d["images"][0].update(width=0),
            lambda d: d["images"][0].pop("file_name"),
        ],
    )
    def test_schema_violations(self, rig, mutate) -> None:
        payload = self._doc(rig).to_dict()
        mutate(payload)
        with pytest.raises(SchemaViolation):
            import_coco(payload)

    def test_invalid_json_text(self) -> None:
        with pytest.raises(SchemaViolation):
            import_coco("{not json")


class TestPersistence:
    def test_round_trip(self, rig, tmp_path) -> None:
        catalog, store, case, image, video, lesion = rig
        store.add_classification(video.asset_id, lesion.lesion_id, FrameSpan(100, 200))
        store.add_segmentation(image.asset_id, lesion.lesion_id, 0, SQUARE)
        store.mark_excluded(video.asset_id, ExclusionReason.TURBT, FrameSpan(300, 400))
        path = tmp_path / "annotations.json"
        store.save(path)
        reloaded = AnnotationStore.load(path, catalog)
        assert reloaded.to_dict() == store.to_dict()
        assert reloaded.lesion(lesion.lesion_id).pathology == lesion.pathology

    def test_json_is_stable(self, rig, tmp_path) -> None:
        catalog, store, _, image, _, lesion = rig
        store.add_segmentation(image.asset_id, lesion.lesion_id, 0, SQUARE)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        store.save(p1)
        AnnotationStore.load(p1, catalog).save(p2)
        assert p1.read_bytes() == p2.read_bytes()
