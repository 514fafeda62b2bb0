"""Layered QC and panel consensus behavior.

Layer failures must surface as findings inside results, never as exceptions;
exceptions are reserved for protocol misuse (layers out of order, duplicate
votes). Consensus is checked exhaustively against a brute-force oracle.
"""

from __future__ import annotations

import itertools
import json
from datetime import date, datetime, timezone
from types import SimpleNamespace

import pytest

from endocurator.annotations import (
    AnnotationStore,
    Appearance,
    ExclusionReason,
    FrameSpan,
)
from endocurator.catalog import Catalog, Procedure, SourceSite
from endocurator.metrics import QualityThresholds
from endocurator.qc import (
    ConsensusOutcome,
    DecisionPath,
    DuplicateVote,
    MissingPriorLayer,
    MissingQc1,
    QcFinding,
    QcLayerResult,
    QcReport,
    ReviewRole,
    ReviewVote,
    RootCause,
    Verdict,
    consensus,
    gate_release,
    run_qc1,
    run_qc2,
    run_qc3,
    sample_size,
)
from endocurator.vocab import (
    CompletionStatus,
    PathologyCategory,
    PathologyCode,
    TumorGrade,
    TumorStage,
)

from fixtures import TickingClock, blurry_frame, sharp_frame, write_png
from oracles import consensus_brute_force

TA_HG = PathologyCode(PathologyCategory.CANCER, TumorStage.TA, TumorGrade.HG)
T1_HG = PathologyCode(PathologyCategory.CANCER, TumorStage.T1, TumorGrade.HG)


@pytest.fixture
def rig(tmp_path):
    """One complete TURBT case that passes every layer.

    Sharp labeled still, video with frame count, both required documents,
    one lesion with a visibility span and a matching labeled still.
    """
    catalog = Catalog(clock=TickingClock())
    store = AnnotationStore(catalog)
    catalog.register_patient(date(2020, 1, 10), SourceSite.SITE_A)
    case = catalog.create_case(
        "UID0001",
        date(2020, 1, 17),
        Procedure.TURBT,
        text_docs=("pathology_report.pdf", "operative_report.pdf"),
    )
    media = tmp_path / "media"
    image = catalog.ingest_media(
        write_png(media / "UID0001_20200117_WLC_TRIG_TA-HG_01.png", sharp_frame()),
        case.case_id,
    )
    video_path = media / "UID0001_20200117.mp4"
    video_path.write_bytes(b"stub video payload")
    video = catalog.ingest_media(
        video_path, case.case_id, frame_count=1000, width=640, height=480
    )
    lesion = store.add_lesion(
        case.case_id, catalog.vocab.location("TRIG"), Appearance.PAPILLARY, TA_HG
    )
    store.add_classification(video.asset_id, lesion.lesion_id, FrameSpan(0, 99))
    return SimpleNamespace(
        catalog=catalog,
        store=store,
        case=case,
        image=image,
        video=video,
        lesion=lesion,
        media=media,
    )


def codes(result: QcLayerResult) -> list[str]:
    return [f.code for f in result.findings]


# -- layer 1 -------------------------------------------------------------------


class TestQc1:
    def test_clean_case_passes(self, rig):
        result = run_qc1(rig.store, rig.case.case_id)
        assert result.passed
        assert result.layer == 1
        assert result.findings == ()
        assert result.reverified == ()
        assert result.sampled_assets == ()
        assert result.seed is None

    def test_blurry_still_fails_quality(self, rig):
        rig.catalog.ingest_media(
            write_png(
                rig.media / "UID0001_20200117_WLC_DOME_TA-HG_02.png", blurry_frame()
            ),
            rig.case.case_id,
        )
        result = run_qc1(rig.store, rig.case.case_id)
        assert not result.passed
        assert codes(result) == ["MEDIA_QUALITY"]
        finding = result.findings[0]
        assert finding.root_cause is RootCause.POOR_FRAME_QUALITY
        assert "focus" in finding.detail and "naturalness" in finding.detail

    def test_quality_thresholds_are_adjustable(self, rig):
        rig.catalog.ingest_media(
            write_png(
                rig.media / "UID0001_20200117_WLC_DOME_TA-HG_02.png", blurry_frame()
            ),
            rig.case.case_id,
        )
        lax = QualityThresholds(blur_threshold=0.0, brisque_threshold=100.0)
        assert run_qc1(rig.store, rig.case.case_id, thresholds=lax).passed

    def test_undecodable_image_is_a_finding(self, rig):
        bad = rig.media / "UID0001_20200117_BLC_DOME_TA-HG_03.png"
        bad.write_bytes(b"not a png at all")
        asset = rig.catalog.ingest_media(bad, rig.case.case_id)
        result = run_qc1(rig.store, rig.case.case_id)
        assert not result.passed
        assert codes(result) == ["MEDIA_UNREADABLE"]
        assert result.findings[0].asset_id == asset.asset_id

    def test_too_small_image_is_a_quality_finding(self, rig):
        import numpy as np

        tiny = write_png(
            rig.media / "UID0001_20200117_WLC_DOME_TA-HG_04.png",
            np.full((8, 8), 128.0),
        )
        rig.catalog.ingest_media(tiny, rig.case.case_id)
        result = run_qc1(rig.store, rig.case.case_id)
        assert not result.passed
        assert codes(result) == ["MEDIA_QUALITY"]
        assert result.findings[0].root_cause is RootCause.POOR_FRAME_QUALITY

    def test_missing_pathology_report(self, rig):
        case = rig.catalog.create_case(
            "UID0001",
            date(2020, 3, 1),
            Procedure.TURBT,
            text_docs=("operative_report.pdf",),
        )
        result = run_qc1(rig.store, case.case_id)
        assert not result.passed
        assert codes(result) == ["DOC_MISSING"]
        assert result.findings[0].root_cause is RootCause.NO_PATHOLOGY_SAMPLE

    def test_missing_both_documents(self, rig):
        case = rig.catalog.create_case("UID0001", date(2020, 3, 1), Procedure.TURBT)
        result = run_qc1(rig.store, case.case_id)
        roots = {f.root_cause for f in result.findings}
        assert codes(result) == ["DOC_MISSING", "DOC_MISSING"]
        assert roots == {RootCause.NO_PATHOLOGY_SAMPLE, RootCause.DATA_INCOMPLETENESS}

    def test_clinic_cysto_requires_no_documents(self, rig):
        case = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        assert run_qc1(rig.store, case.case_id).passed

    def test_document_matching_ignores_case_and_prefix(self, rig):
        case = rig.catalog.create_case(
            "UID0001",
            date(2020, 3, 1),
            Procedure.TURBT,
            text_docs=("Final_PATHOLOGY_2020.pdf", "scanned Operative note.pdf"),
        )
        assert run_qc1(rig.store, case.case_id).passed

    def test_unlabeled_image_is_a_finding(self, rig):
        frame = sharp_frame()
        frame[0, 0] = 17  # distinct bytes from the rig still
        loose = write_png(rig.media / "snapshot_17.png", frame)
        asset = rig.catalog.ingest_media(
            loose, rig.case.case_id, allow_unlabeled=True
        )
        result = run_qc1(rig.store, rig.case.case_id)
        assert not result.passed
        assert codes(result) == ["LABEL_MISSING"]
        assert result.findings[0].asset_id == asset.asset_id
        assert result.findings[0].root_cause is RootCause.DATA_INCOMPLETENESS

    def test_filename_date_must_match_case_date(self, rig):
        frame = sharp_frame()
        frame[0, 0] = 18  # distinct bytes from the rig still
        stray = write_png(rig.media / "UID0001_20200118_WLC_DOME_TA-HG_05.png", frame)
        rig.catalog.ingest_media(stray, rig.case.case_id)
        result = run_qc1(rig.store, rig.case.case_id)
        assert not result.passed
        assert codes(result) == ["LABEL_ALIGNMENT"]
        assert "2020-01-18" in result.findings[0].detail
        assert "2020-01-17" in result.findings[0].detail

    def test_video_without_frame_count_is_a_finding(self, rig):
        case = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        path = rig.media / "UID0001_20200301.mp4"
        path.write_bytes(b"other stub")
        asset = rig.catalog.ingest_media(path, case.case_id)
        result = run_qc1(rig.store, case.case_id)
        assert not result.passed
        assert codes(result) == ["MEDIA_INFO_MISSING"]
        assert result.findings[0].asset_id == asset.asset_id

    def test_failures_accumulate_without_raising(self, rig):
        rig.catalog.ingest_media(
            write_png(
                rig.media / "UID0001_20200117_WLC_DOME_TA-HG_02.png", blurry_frame()
            ),
            rig.case.case_id,
        )
        bad = rig.media / "UID0001_20200117_BLC_DOME_TA-HG_03.png"
        bad.write_bytes(b"garbage")
        rig.catalog.ingest_media(bad, rig.case.case_id)
        result = run_qc1(rig.store, rig.case.case_id)
        assert sorted(codes(result)) == ["MEDIA_QUALITY", "MEDIA_UNREADABLE"]


# -- layer 2 -------------------------------------------------------------------


class TestQc2:
    def test_clean_case_passes(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        assert qc2.passed
        assert qc2.layer == 2
        assert qc2.reverified == (1,)

    def test_requires_layer_one_result(self, rig):
        with pytest.raises(MissingQc1):
            run_qc2(rig.store, rig.case.case_id, None)

    def test_rejects_result_for_another_case(self, rig):
        other = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        foreign = run_qc1(rig.store, other.case_id)
        with pytest.raises(MissingQc1):
            run_qc2(rig.store, rig.case.case_id, foreign)

    def test_rejects_wrong_layer_result(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        with pytest.raises(MissingQc1):
            run_qc2(rig.store, rig.case.case_id, qc2)

    def test_reverifies_layer_one_rather_than_trusting_it(self, rig):
        """A defect introduced after layer 1 passed is still caught."""
        qc1 = run_qc1(rig.store, rig.case.case_id)
        assert qc1.passed
        rig.catalog.ingest_media(
            write_png(
                rig.media / "UID0001_20200117_WLC_DOME_TA-HG_02.png", blurry_frame()
            ),
            rig.case.case_id,
        )
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        assert not qc2.passed
        assert "MEDIA_QUALITY" in codes(qc2)

    def test_case_without_video_is_incomplete(self, rig, tmp_path):
        case = rig.catalog.create_case(
            "UID0001",
            date(2020, 3, 1),
            Procedure.CLINIC_CYSTO,
        )
        frame = sharp_frame()
        frame[0, 0] = 31  # distinct bytes from the rig still
        rig.catalog.ingest_media(
            write_png(rig.media / "UID0001_20200301_WLC_TRIG_TA-HG_01.png", frame),
            case.case_id,
        )
        qc1 = run_qc1(rig.store, case.case_id)
        qc2 = run_qc2(rig.store, case.case_id, qc1)
        assert not qc2.passed
        assert codes(qc2) == ["COMPLETENESS"]
        assert "no video" in qc2.findings[0].detail

    def test_case_without_stills_is_incomplete(self, rig):
        case = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        path = rig.media / "UID0001_20200301.mp4"
        path.write_bytes(b"clinic stub")
        rig.catalog.ingest_media(path, case.case_id, frame_count=500)
        qc1 = run_qc1(rig.store, case.case_id)
        qc2 = run_qc2(rig.store, case.case_id, qc1)
        assert not qc2.passed
        assert codes(qc2) == ["COMPLETENESS"]
        assert "still" in qc2.findings[0].detail

    def test_lesion_without_video_span(self, rig):
        lesion = rig.store.add_lesion(
            rig.case.case_id,
            rig.catalog.vocab.location("DOME"),
            Appearance.SESSILE,
            TA_HG,
        )
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        assert not qc2.passed
        assert codes(qc2) == ["COMPLETENESS"]
        assert qc2.findings[0].lesion_id == lesion.lesion_id
        assert (
            qc2.findings[0].root_cause is RootCause.LESION_NOT_IDENTIFIABLE_IN_VIDEO
        )

    def test_lesion_pathology_needs_a_matching_still(self, rig):
        lesion = rig.store.add_lesion(
            rig.case.case_id,
            rig.catalog.vocab.location("DOME"),
            Appearance.SESSILE,
            T1_HG,
        )
        rig.store.add_classification(
            rig.video.asset_id, lesion.lesion_id, FrameSpan(200, 300)
        )
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        assert not qc2.passed
        assert codes(qc2) == ["ASSOCIATION"]
        assert qc2.findings[0].lesion_id == lesion.lesion_id
        assert (
            qc2.findings[0].root_cause is RootCause.PATHOLOGY_ASSOCIATION_FAILURE
        )
        assert "T1-HG" in qc2.findings[0].detail


# -- layer 3 -------------------------------------------------------------------


class TestSampleSize:
    @pytest.mark.parametrize(
        "n,expected", [(1, 1), (4, 4), (40, 5), (400, 40)]
    )
    def test_tenth_fraction_with_floor_of_five(self, n, expected):
        assert sample_size(n, 0.1) == expected

    def test_empty_population(self):
        assert sample_size(0, 0.1) == 0

    def test_never_exceeds_population(self):
        for n in range(1, 60):
            assert 0 < sample_size(n, 0.1) <= n

    def test_fraction_rounds_up(self):
        assert sample_size(51, 0.1) == 6
        assert sample_size(1000, 0.25) == 250


class TestQc3:
    def run_layers(self, rig, **kwargs):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2, **kwargs)
        return qc1, qc2, qc3

    def test_clean_case_passes(self, rig):
        qc1, qc2, qc3 = self.run_layers(rig)
        assert qc3.passed
        assert qc3.layer == 3
        assert qc3.reverified == (1, 2)
        assert qc3.seed == 0

    def test_requires_both_prior_layers(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        with pytest.raises(MissingPriorLayer):
            run_qc3(rig.store, rig.case.case_id, None, qc2)
        with pytest.raises(MissingPriorLayer):
            run_qc3(rig.store, rig.case.case_id, qc1, None)
        with pytest.raises(MissingPriorLayer):
            run_qc3(rig.store, rig.case.case_id, qc2, qc1)

    def test_rejects_results_for_another_case(self, rig):
        other = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        foreign1 = run_qc1(rig.store, other.case_id)
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        with pytest.raises(MissingPriorLayer):
            run_qc3(rig.store, rig.case.case_id, foreign1, qc2)

    def test_small_case_audits_every_asset(self, rig):
        _, _, qc3 = self.run_layers(rig)
        expected = sorted(
            a.asset_id for a in rig.catalog.case_assets(rig.case.case_id)
        )
        assert list(qc3.sampled_assets) == expected

    def big_case(self, rig, stills: int) -> str:
        case = rig.catalog.create_case(
            "UID0001", date(2020, 3, 1), Procedure.CLINIC_CYSTO
        )
        for seq in range(1, stills + 1):
            png = sharp_frame()
            png[0, 0] = seq  # distinct bytes per still, else checksums collide
            rig.catalog.ingest_media(
                write_png(
                    rig.media / f"UID0001_20200301_WLC_TRIG_TA-HG_{seq:02d}.png", png
                ),
                case.case_id,
            )
        path = rig.media / "UID0001_20200301.mp4"
        path.write_bytes(b"long stub")
        video = rig.catalog.ingest_media(path, case.case_id, frame_count=400)
        lesion = rig.store.add_lesion(
            case.case_id, rig.catalog.vocab.location("TRIG"), Appearance.FLAT, TA_HG
        )
        rig.store.add_classification(video.asset_id, lesion.lesion_id, FrameSpan(0, 9))
        return case.case_id

    def test_sample_is_a_sorted_subset_of_the_case(self, rig):
        case_id = self.big_case(rig, stills=11)
        qc1 = run_qc1(rig.store, case_id)
        qc2 = run_qc2(rig.store, case_id, qc1)
        qc3 = run_qc3(rig.store, case_id, qc1, qc2, seed=7)
        population = {a.asset_id for a in rig.catalog.case_assets(case_id)}
        assert len(qc3.sampled_assets) == sample_size(12, 0.1) == 5
        assert set(qc3.sampled_assets) <= population
        assert list(qc3.sampled_assets) == sorted(qc3.sampled_assets)

    def test_fixed_seed_is_reproducible(self, rig):
        case_id = self.big_case(rig, stills=11)
        qc1 = run_qc1(rig.store, case_id)
        qc2 = run_qc2(rig.store, case_id, qc1)
        samples = {
            run_qc3(rig.store, case_id, qc1, qc2, seed=42).sampled_assets
            for _ in range(10)
        }
        assert len(samples) == 1

    def test_different_seeds_draw_different_samples(self, rig):
        case_id = self.big_case(rig, stills=11)
        qc1 = run_qc1(rig.store, case_id)
        qc2 = run_qc2(rig.store, case_id, qc1)
        a = run_qc3(rig.store, case_id, qc1, qc2, seed=0).sampled_assets
        b = run_qc3(rig.store, case_id, qc1, qc2, seed=1).sampled_assets
        assert a != b

    def test_sampled_excluded_asset_is_flagged(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        rig.catalog.set_status(rig.image.asset_id, CompletionStatus.EXCLUDED)
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2)
        assert not qc3.passed
        assert "AUDIT" in codes(qc3)
        audit = next(f for f in qc3.findings if f.code == "AUDIT")
        assert audit.asset_id == rig.image.asset_id

    def test_reverifies_both_earlier_layers(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        rig.store.add_lesion(
            rig.case.case_id,
            rig.catalog.vocab.location("DOME"),
            Appearance.SESSILE,
            TA_HG,
        )
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2)
        assert not qc3.passed
        assert "COMPLETENESS" in codes(qc3)


# -- release gate ----------------------------------------------------------------


def layer_result(layer: int, passed: bool, case_id: str = "C0001") -> QcLayerResult:
    return QcLayerResult(
        layer=layer,
        case_id=case_id,
        passed=passed,
        findings=(),
        reverified=(),
        executed_at=datetime(2021, 1, 1, tzinfo=timezone.utc),
    )


class TestGateRelease:
    @pytest.mark.parametrize(
        "bits", list(itertools.product([False, True], repeat=3))
    )
    def test_conjunction_of_all_layers(self, bits):
        results = [layer_result(n, ok) for n, ok in zip((1, 2, 3), bits)]
        assert gate_release(*results) is all(bits)

    def test_layers_must_arrive_in_order(self):
        one = layer_result(1, True)
        two = layer_result(2, True)
        three = layer_result(3, True)
        with pytest.raises(ValueError):
            gate_release(two, one, three)

    def test_layers_must_share_a_case(self):
        with pytest.raises(ValueError):
            gate_release(
                layer_result(1, True),
                layer_result(2, True, case_id="C0002"),
                layer_result(3, True),
            )

    def test_end_to_end_release(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2)
        assert gate_release(qc1, qc2, qc3)


class TestQcReport:
    def test_release_ready_requires_all_passing_layers(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2)
        now = rig.catalog.now()
        full = QcReport(rig.case.case_id, (qc1, qc2, qc3), now)
        assert full.release_ready
        assert QcReport(rig.case.case_id, (qc1, qc2), now).release_ready is False

    def test_layer_lookup(self, rig):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        report = QcReport(rig.case.case_id, (qc1,), rig.catalog.now())
        assert report.layer(1) is qc1
        assert report.layer(3) is None

    def test_json_round_trip(self, rig, tmp_path):
        qc1 = run_qc1(rig.store, rig.case.case_id)
        qc2 = run_qc2(rig.store, rig.case.case_id, qc1)
        qc3 = run_qc3(rig.store, rig.case.case_id, qc1, qc2)
        report = QcReport(rig.case.case_id, (qc1, qc2, qc3), rig.catalog.now())
        payload = json.loads(report.to_json())
        assert payload["case_id"] == rig.case.case_id
        assert payload["release_ready"] is True
        assert [layer["layer"] for layer in payload["layers"]] == [1, 2, 3]
        assert payload["layers"][2]["reverified"] == [1, 2]
        assert payload["layers"][2]["sampled_assets"] == list(qc3.sampled_assets)
        out = tmp_path / "qc.json"
        report.save(out)
        assert out.read_text(encoding="utf-8") == report.to_json() + "\n"


# -- findings --------------------------------------------------------------------


class TestQcFinding:
    def test_freeform_requires_note(self):
        with pytest.raises(ValueError):
            QcFinding(code="X", detail="d", root_cause=RootCause.FREEFORM)

    def test_freeform_with_note_is_fine(self):
        finding = QcFinding(
            code="X", detail="d", root_cause=RootCause.FREEFORM, note="lens smear"
        )
        assert finding.to_dict()["root_cause"] == "FREEFORM"

    def test_taxonomy_covers_known_failure_modes(self):
        expected = {
            "MULTIFOCAL_OVERLOAD",
            "NO_PATHOLOGY_SAMPLE",
            "LESION_NOT_IDENTIFIABLE_IN_VIDEO",
            "POOR_FRAME_QUALITY",
            "PATHOLOGY_ASSOCIATION_FAILURE",
            "DATA_INCOMPLETENESS",
            "RAPID_CAMERA_MOTION",
            "FLAT_BOUNDARY_AMBIGUITY",
            "LARGE_LESION",
            "CAMERA_TOO_CLOSE",
            "CAMERA_TOO_FAR",
            "FREEFORM",
        }
        assert {c.value for c in RootCause} == expected


# -- panel consensus ---------------------------------------------------------------


def urologist(i: int, approve: bool) -> ReviewVote:
    return ReviewVote(
        reviewer_id=f"uro{i}",
        role=ReviewRole.UROLOGIST,
        verdict=Verdict.APPROVE if approve else Verdict.REJECT,
    )


def leader(approve: bool) -> ReviewVote:
    return ReviewVote(
        reviewer_id="lead",
        role=ReviewRole.LEADER,
        verdict=Verdict.APPROVE if approve else Verdict.REJECT,
    )


class TestConsensus:
    def test_three_of_four_approves(self):
        votes = [urologist(i, True) for i in range(3)] + [urologist(3, False)]
        decision = consensus(votes)
        assert decision.outcome is ConsensusOutcome.APPROVED
        assert decision.decided_by is DecisionPath.MAJORITY
        assert (decision.approvals, decision.rejections) == (3, 1)
        assert decision.threshold == 3

    def test_two_of_four_is_not_enough(self):
        votes = [urologist(i, i < 2) for i in range(4)]
        decision = consensus(votes)
        assert decision.outcome is ConsensusOutcome.ESCALATED
        assert decision.decided_by is DecisionPath.EXTERNAL_EXPERT

    def test_leader_settles_a_tie(self):
        votes = [urologist(i, i < 2) for i in range(4)]
        approved = consensus(votes + [leader(True)])
        rejected = consensus(votes + [leader(False)])
        assert approved.outcome is ConsensusOutcome.APPROVED
        assert approved.decided_by is DecisionPath.LEADER_TIEBREAK
        assert rejected.outcome is ConsensusOutcome.REJECTED

    def test_leader_cannot_override_a_majority(self):
        votes = [urologist(i, False) for i in range(3)] + [urologist(3, True)]
        decision = consensus(votes + [leader(True)])
        assert decision.outcome is ConsensusOutcome.REJECTED
        assert decision.decided_by is DecisionPath.MAJORITY

    def test_non_urologists_are_recorded_not_counted(self):
        votes = [urologist(i, i < 2) for i in range(4)] + [
            ReviewVote("coord", ReviewRole.COORDINATOR, Verdict.APPROVE),
            ReviewVote("path", ReviewRole.PATHOLOGIST, Verdict.APPROVE),
            ReviewVote("ds", ReviewRole.DATA_SCIENTIST, Verdict.APPROVE),
        ]
        decision = consensus(votes)
        assert decision.outcome is ConsensusOutcome.ESCALATED
        assert (decision.approvals, decision.rejections) == (2, 2)
        assert len(decision.votes) == 7

    def test_duplicate_reviewer_rejected(self):
        with pytest.raises(DuplicateVote):
            consensus([urologist(1, True), urologist(1, False)])

    def test_at_most_one_leader(self):
        with pytest.raises(ValueError):
            consensus(
                [
                    ReviewVote("l1", ReviewRole.LEADER, Verdict.APPROVE),
                    ReviewVote("l2", ReviewRole.LEADER, Verdict.REJECT),
                ]
            )

    def test_freeform_rejection_requires_note(self):
        with pytest.raises(ValueError):
            ReviewVote(
                "uro1",
                ReviewRole.UROLOGIST,
                Verdict.REJECT,
                root_cause=RootCause.FREEFORM,
            )
        vote = ReviewVote(
            "uro1",
            ReviewRole.UROLOGIST,
            Verdict.REJECT,
            root_cause=RootCause.FREEFORM,
            note="stone shadow mimics lesion",
        )
        assert vote.note

    @pytest.mark.parametrize("panel_size", range(6))
    def test_exhaustive_against_brute_force(self, panel_size):
        """Every vote pattern and leader state matches the oracle."""
        for mask in itertools.product([False, True], repeat=panel_size):
            for lead in (None, True, False):
                votes = [urologist(i, v) for i, v in enumerate(mask)]
                if lead is not None:
                    votes.append(leader(lead))
                decision = consensus(votes)
                outcome, path = consensus_brute_force(list(mask), lead)
                assert decision.outcome.value == outcome, (mask, lead)
                assert decision.decided_by.value == path, (mask, lead)
                assert decision.threshold == (panel_size + 2) // 2
