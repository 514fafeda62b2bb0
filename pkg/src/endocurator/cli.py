"""Command line for the curation pipeline.

Every command works against a workspace directory (``--workspace``, default
./workspace) holding the catalog, annotations, QC reports, reviews, and the
provenance log. Mutating commands append to the provenance log, so the
command line and the HTTP service leave the same audit trail.

Exit codes: 0 on success, 1 on any domain error (unknown ids, vocabulary
violations, gate failures). ``fair audit`` also exits 1 when any principle
fails, so it can gate a release script directly.
"""

from __future__ import annotations

import csv
import functools
import warnings
from dataclasses import replace
from datetime import date
from io import StringIO
from pathlib import Path

import click
import numpy as np

from .annotations import UnknownLesion, export_coco
from .catalog import (
    IMAGE_EXTENSIONS,
    INDEX_COLUMNS,
    VIDEO_EXTENSIONS,
    Procedure,
    SourceSite,
    UnknownAsset,
    UnknownCase,
    UnknownPatient,
    build_index,
    query_index,
)
from .export import (
    CollisionExhausted,
    DeidentificationLeak,
    atlas_eligible,
    build_atlas_manifest,
    build_research_bundle,
)
from .fair import fair_audit
from .metrics import (
    QualityThresholds,
    ScoreModel,
    blur_score,
    brisque_score,
    default_score_model,
    luminance_bt601,
    video_quality,
)
from .qc import QcFinding, QcReport, run_qc1, run_qc2, run_qc3
from .service import BindFailure, ServiceConfig
from .service import serve as run_service
from .stats import StatsLevel, aggregate_stats
from .vocab import CompletionStatus, VocabDomain
from .workspace import Workspace

DEFAULT_RESEARCH_LICENSE = (
    "research use under data transfer agreement; no re-identification attempts"
)
DEFAULT_ATLAS_LICENSE = "internal education use only; no redistribution"

# Frame rate assumed when the source carries no timing metadata.
ASSUMED_FPS = 30.0

# Everything the pipeline refuses on purpose; grammar, vocabulary, transition,
# gate, and review errors are all ValueError subclasses, the id lookups are
# KeyError subclasses, and the leak scans are RuntimeError subclasses.
_DOMAIN_ERRORS = (
    ValueError,
    UnknownPatient,
    UnknownCase,
    UnknownAsset,
    UnknownLesion,
    CollisionExhausted,
    DeidentificationLeak,
    BindFailure,
)


def _excuse(exc: BaseException) -> str:
    if isinstance(exc, UnknownPatient):
        return f"unknown patient: {exc.args[0]}"
    if isinstance(exc, UnknownCase):
        return f"unknown case: {exc.args[0]}"
    if isinstance(exc, UnknownAsset):
        return f"unknown asset: {exc.args[0]}"
    if isinstance(exc, UnknownLesion):
        return f"unknown lesion: {exc.args[0]}"
    return str(exc)


def surface_errors(fn):
    """Turn domain errors into clean exit-1 messages instead of tracebacks."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except _DOMAIN_ERRORS as exc:
            raise click.ClickException(_excuse(exc)) from exc

    return wrapper


class DateType(click.ParamType):
    name = "date"

    def convert(self, value, param, ctx):
        if isinstance(value, date):
            return value
        try:
            return date.fromisoformat(value)
        except ValueError:
            self.fail(f"{value!r} is not a YYYY-MM-DD date", param, ctx)


DATE = DateType()

pass_workspace = click.make_pass_decorator(Workspace)


@click.group()
@click.version_option(package_name="endocurator")
@click.option(
    "--workspace",
    "-w",
    type=click.Path(path_type=Path),
    default=Path("workspace"),
    show_default=True,
    envvar="ENDOCURATOR_WORKSPACE",
    help="State directory holding the catalog and annotations.",
)
@click.pass_context
def main(ctx: click.Context, workspace: Path) -> None:
    """Curate endoscopic media: ingest, label, QC, review, and release."""
    ctx.obj = Workspace(workspace)


# -- catalog ------------------------------------------------------------------


@main.group()
def patient() -> None:
    """Patient enrollment."""


@patient.command("add")
@click.option("--enrolled", type=DATE, required=True, help="enrollment date")
@click.option(
    "--site",
    type=click.Choice([s.value for s in SourceSite]),
    required=True,
    help="acquiring site",
)
@click.option("--uid", default=None, help="explicit identifier (default: next free)")
@pass_workspace
@surface_errors
def patient_add(ws: Workspace, enrolled: date, site: str, uid: str | None) -> None:
    """Enroll one patient and print the assigned identifier."""
    catalog = ws.load_catalog()
    record = catalog.register_patient(enrolled, SourceSite(site), uid=uid)
    ws.save_catalog(catalog)
    ws.record("enroll", record.uid, site=site)
    click.echo(record.uid)


@main.group()
def case() -> None:
    """Procedure cases."""


@case.command("add")
@click.option("--uid", required=True, help="enrolled patient identifier")
@click.option("--date", "case_date", type=DATE, required=True, help="procedure date")
@click.option(
    "--procedure",
    type=click.Choice([p.value for p in Procedure]),
    required=True,
)
@click.option(
    "--doc",
    "docs",
    multiple=True,
    help="attached document reference (repeatable)",
)
@click.option("--id", "case_id", default=None, help="explicit case id (default: next free)")
@pass_workspace
@surface_errors
def case_add(
    ws: Workspace,
    uid: str,
    case_date: date,
    procedure: str,
    docs: tuple[str, ...],
    case_id: str | None,
) -> None:
    """Open one case under a patient and print the case id."""
    catalog = ws.load_catalog()
    record = catalog.create_case(
        uid, case_date, Procedure(procedure), text_docs=docs, case_id=case_id
    )
    ws.save_catalog(catalog)
    ws.record("case", record.case_id, uid=uid, procedure=procedure)
    click.echo(record.case_id)


@main.command()
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--case", "case_id", required=True, help="case receiving the media")
@click.option(
    "--allow-unlabeled",
    is_flag=True,
    help="accept stills whose names do not parse; they enter unlabeled",
)
@click.option("--frame-count", type=int, default=None, help="video frame count")
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@pass_workspace
@surface_errors
def ingest(
    ws: Workspace,
    path: Path,
    case_id: str,
    allow_unlabeled: bool,
    frame_count: int | None,
    width: int | None,
    height: int | None,
) -> None:
    """Register media under a case: one file, or every media file in a tree.

    Crawling a directory skips non-media extensions; a single named file
    must be media. Nothing is saved if any file fails, so a batch lands
    whole or not at all.
    """
    if path.is_dir():
        media = sorted(
            p
            for p in path.rglob("*")
            if p.is_file()
            and p.suffix.lstrip(".").lower() in IMAGE_EXTENSIONS | VIDEO_EXTENSIONS
        )
        if not media:
            raise click.ClickException(f"no media files under {path}")
    else:
        media = [path]

    catalog = ws.load_catalog()
    ingested = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for item in media:
            asset = catalog.ingest_media(
                item,
                case_id,
                allow_unlabeled=allow_unlabeled,
                frame_count=frame_count,
                width=width,
                height=height,
            )
            ingested.append((asset, item))
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)

    ws.save_catalog(catalog)
    for asset, item in ingested:
        ws.record(
            "ingest", asset.asset_id,
            file=item.name, status=asset.status.value, case=case_id,
        )
        click.echo(f"{asset.asset_id}  {asset.status.value}  {item.name}")
    click.echo(f"ingested {len(ingested)} asset(s) into {case_id}", err=True)


@main.command()
@click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=None,
    help="write the CSV here instead of stdout",
)
@pass_workspace
@surface_errors
def index(ws: Workspace, out: Path | None) -> None:
    """Emit the full catalog index as CSV."""
    catalog = ws.load_catalog()
    text = build_index(catalog)
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(catalog.assets)} row(s) to {out}", err=True)


@main.command()
@click.option("--status", default=None, help="completion state token")
@click.option("--pathology", default=None, help="pathology token, BEN, or CANCER")
@click.option("--text", default=None, help="free-text substring over index rows")
@click.option("--modality", default=None)
@click.option("--location", default=None)
@click.option("--case", "case_id", default=None)
@click.option("--uid", default=None)
@click.option("--kind", type=click.Choice(["IMAGE", "VIDEO"]), default=None)
@click.option("--deleted", is_flag=True, help="include tombstoned assets")
@pass_workspace
@surface_errors
def query(
    ws: Workspace,
    status: str | None,
    pathology: str | None,
    text: str | None,
    modality: str | None,
    location: str | None,
    case_id: str | None,
    uid: str | None,
    kind: str | None,
    deleted: bool,
) -> None:
    """Print index rows matching every given filter, as CSV."""
    if status is not None:
        try:
            CompletionStatus(status.strip().upper())
        except ValueError:
            raise click.ClickException(f"unknown status token: {status!r}") from None
    catalog = ws.load_catalog()
    if pathology is not None and not (
        catalog.vocab.validate_token(pathology, VocabDomain.PATHOLOGY)
        or pathology.strip().upper() in ("BEN", "BENIGN", "CANCER")
    ):
        raise click.ClickException(f"unknown pathology token: {pathology!r}")
    rows = query_index(
        catalog,
        status=status.strip().upper() if status else None,
        pathology=pathology,
        modality=modality,
        location=location,
        uid=uid,
        case_id=case_id,
        kind=kind,
        free_text=text,
        include_deleted=deleted,
    )
    buf = StringIO()
    writer = csv.DictWriter(buf, fieldnames=INDEX_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    click.echo(buf.getvalue(), nl=False)
    click.echo(f"{len(rows)} row(s)", err=True)


@main.command()
@click.argument("asset_id")
@click.argument("state")
@pass_workspace
@surface_errors
def status(ws: Workspace, asset_id: str, state: str) -> None:
    """Move one asset to a new completion state."""
    try:
        target = CompletionStatus(state.strip().upper())
    except ValueError:
        raise click.ClickException(f"unknown status token: {state!r}") from None
    catalog = ws.load_catalog()
    before = catalog.asset(asset_id).status
    catalog.set_status(asset_id, target)
    ws.save_catalog(catalog)
    ws.record("status", asset_id, **{"from": before.value, "to": target.value})
    click.echo(f"{asset_id}: {before.value} -> {target.value}")


# -- quality control -----------------------------------------------------------


def _gray_frame(img) -> np.ndarray:
    return luminance_bt601(np.asarray(img.convert("RGB"), dtype=np.float64))


def _load_gray(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        return _gray_frame(img)


def _video_frames(path: Path) -> tuple[list[np.ndarray], float]:
    """Grayscale frames plus the source frame rate.

    Accepts a directory of frame stills (sorted by name) or a multi-frame
    image file. Rate comes from frame-duration metadata when present,
    otherwise the assumed default.
    """
    from PIL import Image, ImageSequence, UnidentifiedImageError

    if path.is_dir():
        files = sorted(
            p
            for p in path.iterdir()
            if p.is_file() and p.suffix.lstrip(".").lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise click.ClickException(f"no frame images under {path}")
        return [_load_gray(p) for p in files], ASSUMED_FPS
    try:
        with Image.open(path) as img:
            duration_ms = float(img.info.get("duration", 0) or 0)
            frames = [_gray_frame(f) for f in ImageSequence.Iterator(img)]
    except (UnidentifiedImageError, OSError) as exc:
        raise click.ClickException(
            f"cannot decode {path.name}: {exc} "
            "(pass a directory of frame stills or a multi-frame image)"
        ) from exc
    fps = 1000.0 / duration_ms if duration_ms > 0 else ASSUMED_FPS
    return frames, fps


def _load_model(model_path: Path | None) -> ScoreModel:
    return ScoreModel.load(model_path) if model_path else default_score_model()


@main.group()
def qc() -> None:
    """Quality scoring and layered checks."""


@qc.command("score-image")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="score-model coefficients file",
)
@click.option("--blur-threshold", type=float, default=None, help="minimum sharpness")
@click.option(
    "--naturalness-threshold", type=float, default=None, help="maximum naturalness"
)
@surface_errors
def qc_score_image(
    path: Path,
    model_path: Path | None,
    blur_threshold: float | None,
    naturalness_threshold: float | None,
) -> None:
    """Score one still: sharpness, naturalness, and the pass verdict."""
    gray = _load_gray(path)
    model = _load_model(model_path)
    blur = blur_score(gray)
    naturalness = brisque_score(gray, model)
    thresholds = _thresholds(blur_threshold, naturalness_threshold)
    click.echo(f"sharpness {blur:.3f}")
    click.echo(f"naturalness {naturalness:.3f}")
    click.echo(f"verdict {'PASS' if thresholds.frame_ok(blur, naturalness) else 'FAIL'}")


def _thresholds(
    blur_threshold: float | None, naturalness_threshold: float | None
) -> QualityThresholds:
    kwargs = {}
    if blur_threshold is not None:
        kwargs["blur_threshold"] = blur_threshold
    if naturalness_threshold is not None:
        kwargs["brisque_threshold"] = naturalness_threshold
    return QualityThresholds(**kwargs)


@qc.command("score-video")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--fps-sample",
    type=float,
    required=True,
    help="frames per second to sample for scoring",
)
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option("--blur-threshold", type=float, default=None)
@click.option("--naturalness-threshold", type=float, default=None)
@surface_errors
def qc_score_video(
    path: Path,
    fps_sample: float,
    model_path: Path | None,
    blur_threshold: float | None,
    naturalness_threshold: float | None,
) -> None:
    """Score a clip from sampled frames, min-pooled over a sliding window.

    Sharpness is the weakest sampled frame. Naturalness is the temporal
    pool of per-frame scores, so brief bad stretches count against the
    clip the way a reviewer would weigh them.
    """
    if fps_sample <= 0:
        raise click.ClickException("--fps-sample must be positive")
    frames, src_fps = _video_frames(path)
    step = max(1, round(src_fps / fps_sample))
    sampled = frames[::step]
    model = _load_model(model_path)
    blurs = [blur_score(f) for f in sampled]
    naturals = [brisque_score(f, model) for f in sampled]
    pooled_quality = video_quality([100.0 - n for n in naturals])
    naturalness = 100.0 - pooled_quality
    sharpness = min(blurs)
    thresholds = _thresholds(blur_threshold, naturalness_threshold)
    click.echo(f"frames_total {len(frames)}")
    click.echo(f"frames_scored {len(sampled)}")
    click.echo(f"sharpness {sharpness:.3f}")
    click.echo(f"naturalness {naturalness:.3f}")
    click.echo(
        f"verdict {'PASS' if thresholds.frame_ok(sharpness, naturalness) else 'FAIL'}"
    )


def _finding_line(finding: QcFinding) -> str:
    where = finding.asset_id or finding.lesion_id or "-"
    line = f"  {finding.code} {where}: {finding.detail}"
    if finding.root_cause is not None:
        line += f" [{finding.root_cause.value}]"
    return line


@qc.command("run")
@click.option("--case", "case_id", required=True, help="case to check")
@click.option(
    "--layer",
    type=click.Choice(["1", "2", "3", "all"]),
    default="all",
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True, help="audit sample seed")
@click.option(
    "--fraction", type=float, default=0.1, show_default=True, help="audit sample share"
)
@pass_workspace
@surface_errors
def qc_run(
    ws: Workspace, case_id: str, layer: str, seed: int, fraction: float
) -> None:
    """Run QC layers over a case and store the combined report.

    A single layer reuses stored results for the layers below it; layer 2
    needs layer 1 on file, layer 3 needs both. Results replace the same
    layer in the stored report and leave the others in place.
    """
    catalog = ws.load_catalog()
    catalog.case(case_id)
    store = ws.load_annotations(catalog)
    prior = ws.load_qc_report(case_id)
    results = {r.layer: r for r in prior.layers} if prior else {}

    to_run = [1, 2, 3] if layer == "all" else [int(layer)]
    for n in to_run:
        if n == 1:
            results[1] = run_qc1(store, case_id)
        elif n == 2:
            results[2] = run_qc2(store, case_id, results.get(1))
        else:
            results[3] = run_qc3(
                store,
                case_id,
                results.get(1),
                results.get(2),
                seed=seed,
                fraction=fraction,
            )

    report = QcReport(
        case_id=case_id,
        layers=tuple(results[k] for k in sorted(results)),
        generated_at=catalog.now(),
    )
    path = ws.save_qc_report(report)
    ws.record(
        "qc-run", case_id,
        layers=to_run, release_ready=report.release_ready,
    )

    for n in sorted(results):
        result = results[n]
        ran = " (stored)" if n not in to_run else ""
        verdict = "PASS" if result.passed else f"FAIL ({len(result.findings)} findings)"
        click.echo(f"layer {n} {verdict}{ran}")
        for finding in result.findings:
            click.echo(_finding_line(finding))
    click.echo(f"release_ready {'true' if report.release_ready else 'false'}")
    click.echo(f"report {path}", err=True)


# -- annotations ---------------------------------------------------------------


@main.group()
def annot() -> None:
    """Annotation interchange and corpus statistics."""


@annot.command("export-coco")
@click.option("--case", "case_id", required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@pass_workspace
@surface_errors
def annot_export_coco(ws: Workspace, case_id: str, out: Path) -> None:
    """Write one case's annotations as an interchange document."""
    catalog = ws.load_catalog()
    store = ws.load_annotations(catalog)
    doc = export_coco(store, case_id)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(doc.to_json() + "\n", encoding="utf-8")
    click.echo(
        f"{out}: {len(doc.images)} image(s), {len(doc.annotations)} annotation(s)"
    )


@annot.command("stats")
@click.option(
    "--level",
    type=click.Choice(["case", "lesion", "frame"]),
    required=True,
)
@click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=None,
    help="write the CSV here instead of stdout",
)
@click.option("--case", "case_ids", multiple=True, help="restrict to these cases")
@pass_workspace
@surface_errors
def annot_stats(
    ws: Workspace, level: str, out: Path | None, case_ids: tuple[str, ...]
) -> None:
    """Summarize the corpus at case, lesion, or frame granularity."""
    catalog = ws.load_catalog()
    store = ws.load_annotations(catalog)
    report = aggregate_stats(store, StatsLevel(level.upper()), case_ids or None)
    text = report.to_csv()
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(report.rows)} row(s) to {out}", err=True)
    for key, value in report.summary.items():
        click.echo(f"{key} {value}", err=True)


# -- release -------------------------------------------------------------------


def _read_case_list(path: Path) -> list[str]:
    """Case ids from a text file: one per line, optional header, # comments."""
    ids: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        token = line.split(",")[0].strip()
        if not token or token.startswith("#"):
            continue
        if token.lower() in ("case_id", "case"):
            continue
        ids.append(token)
    if not ids:
        raise click.ClickException(f"no case ids in {path}")
    return ids


@main.group()
def export() -> None:
    """Outbound de-identified data products."""


@export.command("research")
@click.option(
    "--cases",
    "cases_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="text file of case ids, one per line",
)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--license", "license_text", default=DEFAULT_RESEARCH_LICENSE)
@pass_workspace
@surface_errors
def export_research(
    ws: Workspace, cases_file: Path, out: Path, license_text: str
) -> None:
    """Build a research bundle for cases that passed QC and panel review."""
    catalog = ws.load_catalog()
    store = ws.load_annotations(catalog)
    vault = ws.load_vault()
    case_ids = _read_case_list(cases_file)
    manifest = build_research_bundle(
        store,
        case_ids,
        vault,
        out,
        license_text=license_text,
        qc_reports=ws.all_qc_reports(),
        reviews=ws.case_decisions(catalog),
    )
    ws.record("export-research", str(out), cases=len(case_ids))
    click.echo(f"bundle {manifest.bundle_id} -> {out}")
    click.echo(f"cases {len(case_ids)}")
    click.echo(f"items {len(manifest.items)}")


@export.command("atlas")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--license", "license_text", default=DEFAULT_ATLAS_LICENSE)
@pass_workspace
@surface_errors
def export_atlas(ws: Workspace, out: Path, license_text: str) -> None:
    """Build the teaching atlas over all released labeled stills."""
    catalog = ws.load_catalog()
    store = ws.load_annotations(catalog)
    vault = ws.load_vault()
    eligible = sorted(
        a.asset_id for a in catalog.assets.values() if atlas_eligible(a)
    )
    if not eligible:
        raise click.ClickException("no released labeled stills to publish")
    manifest = build_atlas_manifest(
        store, eligible, vault, license_text=license_text, out_dir=out
    )
    ws.record("export-atlas", str(out), stills=len(eligible))
    click.echo(f"bundle {manifest.bundle_id} -> {out}")
    click.echo(f"stills {len(eligible)}")
    click.echo(f"patients {len(manifest.items)}")


@main.group()
def fair() -> None:
    """Stewardship audits."""


@fair.command("audit")
@click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=None,
    help="write the report JSON here",
)
@click.option(
    "--bundle",
    "bundles",
    multiple=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="outbound bundle directory to grade (repeatable)",
)
@click.option(
    "--attest",
    "attest_items",
    multiple=True,
    help="operator attestation, e.g. A2=identifiers resolve via the registry",
)
@pass_workspace
@click.pass_context
@surface_errors
def fair_audit_cmd(
    ctx: click.Context,
    ws: Workspace,
    out: Path | None,
    bundles: tuple[Path, ...],
    attest_items: tuple[str, ...],
) -> None:
    """Grade the catalog and bundles; exit 1 if any principle fails."""
    attestations = {}
    for item in attest_items:
        key, sep, text = item.partition("=")
        if not sep or not key.strip() or not text.strip():
            raise click.ClickException(
                f"attestation must look like KEY=statement: {item!r}"
            )
        attestations[key.strip()] = text.strip()

    catalog = ws.load_catalog()
    report = fair_audit(catalog, bundles, attestations=attestations or None)
    for entry in report.entries:
        click.echo(f"{entry.principle:4s} {entry.status.value:8s} {entry.evidence}")
    counts = report.counts()
    summary = "  ".join(f"{k} {v}" for k, v in sorted(counts.items()))
    click.echo(summary, err=True)
    if out is not None:
        report.save(out)
        click.echo(f"report {out}", err=True)
    if not report.clean:
        ctx.exit(1)


# -- service -------------------------------------------------------------------


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="service config JSON",
)
@click.option("--host", default=None, help="override the configured bind host")
@click.option("--port", type=int, default=None, help="override the configured port")
@surface_errors
def serve(config_path: Path, host: str | None, port: int | None) -> None:
    """Run the HTTP service until interrupted."""
    config = ServiceConfig.from_file(config_path)
    if host is not None or port is not None:
        config = replace(
            config, host=host or config.host, port=port or config.port
        )
    click.echo(f"listening on http://{config.host}:{config.port}", err=True)
    run_service(config)


if __name__ == "__main__":
    main()
