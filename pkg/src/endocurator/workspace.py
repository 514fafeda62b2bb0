"""On-disk workspace: one directory holding a curation effort's whole state.

The layout is flat and inspectable: a catalog JSON, an annotation store
JSON, the pseudonym vault, per-case QC reports under qc/, panel votes and
decisions in reviews.json, and an append-only provenance log. The command
line and the HTTP service read and write the same files, so an operator can
move between them freely.

Single-writer semantics: helpers here load and save whole files and are
meant for one operator at a time. Concurrent mutation goes through the
HTTP service, which serializes writes behind a lock.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .annotations import AnnotationStore
from .catalog import Catalog, UnknownAsset, rfc3339
from .export import PseudonymVault
from .qc import ConsensusDecision, ConsensusOutcome, QcReport, ReviewVote
from .vocab import CompletionStatus

__all__ = [
    "ANNOTATIONS_FILE",
    "CATALOG_FILE",
    "PROVENANCE_FILE",
    "QC_DIR",
    "REVIEWS_FILE",
    "VAULT_FILE",
    "Workspace",
    "WorkspaceError",
]

CATALOG_FILE = "catalog.json"
ANNOTATIONS_FILE = "annotations.json"
VAULT_FILE = "vault.json"
REVIEWS_FILE = "reviews.json"
PROVENANCE_FILE = "provenance.jsonl"
QC_DIR = "qc"


class WorkspaceError(ValueError):
    """The on-disk state is missing or damaged."""


class Workspace:
    """Filesystem layout for one curation effort."""

    def __init__(
        self,
        root: str | Path,
        clock: Callable[[], datetime] | None = None,
    ):
        self.root = Path(root)
        self._clock = clock

    def now(self) -> datetime:
        return self._clock() if self._clock else datetime.now(timezone.utc)

    # -- paths ----------------------------------------------------------------

    @property
    def catalog_path(self) -> Path:
        return self.root / CATALOG_FILE

    @property
    def annotations_path(self) -> Path:
        return self.root / ANNOTATIONS_FILE

    @property
    def vault_path(self) -> Path:
        return self.root / VAULT_FILE

    @property
    def reviews_path(self) -> Path:
        return self.root / REVIEWS_FILE

    @property
    def provenance_path(self) -> Path:
        return self.root / PROVENANCE_FILE

    @property
    def qc_dir(self) -> Path:
        return self.root / QC_DIR

    def ensure(self) -> "Workspace":
        """Create the directory skeleton if it is not there yet."""
        self.qc_dir.mkdir(parents=True, exist_ok=True)
        return self

    # -- catalog and annotations -----------------------------------------------

    def load_catalog(self) -> Catalog:
        """The stored catalog, or a fresh empty one before first ingest."""
        if self.catalog_path.exists():
            return Catalog.load(self.catalog_path, clock=self._clock)
        return Catalog(clock=self._clock)

    def save_catalog(self, catalog: Catalog) -> None:
        self.ensure()
        catalog.save(self.catalog_path)

    def load_annotations(self, catalog: Catalog) -> AnnotationStore:
        if self.annotations_path.exists():
            return AnnotationStore.load(self.annotations_path, catalog)
        return AnnotationStore(catalog)

    def save_annotations(self, store: AnnotationStore) -> None:
        self.ensure()
        store.save(self.annotations_path)

    def load_vault(self) -> PseudonymVault:
        """The pseudonym vault; created and persisted on first use."""
        if self.vault_path.exists():
            return PseudonymVault.load(self.vault_path)
        self.ensure()
        vault = PseudonymVault.create(clock=self._clock)
        vault.save(self.vault_path)
        return vault

    # -- QC reports -------------------------------------------------------------

    def qc_report_path(self, case_id: str) -> Path:
        return self.qc_dir / f"{case_id}.json"

    def save_qc_report(self, report: QcReport) -> Path:
        self.ensure()
        path = self.qc_report_path(report.case_id)
        report.save(path)
        return path

    def load_qc_report(self, case_id: str) -> QcReport | None:
        path = self.qc_report_path(case_id)
        if not path.exists():
            return None
        return self._read_report(path)

    def all_qc_reports(self) -> dict[str, QcReport]:
        """Every stored report, keyed by the case id the report names."""
        reports: dict[str, QcReport] = {}
        if self.qc_dir.is_dir():
            for path in sorted(self.qc_dir.glob("*.json")):
                report = self._read_report(path)
                reports[report.case_id] = report
        return reports

    def _read_report(self, path: Path) -> QcReport:
        try:
            return QcReport.load(path)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise WorkspaceError(f"unreadable QC report {path}: {exc}") from None

    # -- panel reviews ------------------------------------------------------------

    def save_reviews(
        self,
        votes: Mapping[str, Mapping[str, ReviewVote]],
        decisions: Mapping[str, dict],
    ) -> None:
        """Persist votes and decisions, both keyed by the reviewed asset id."""
        self.ensure()
        payload = {
            "votes": {
                item_id: [
                    v.to_dict()
                    for v in sorted(by_user.values(), key=lambda v: v.reviewer_id)
                ]
                for item_id, by_user in sorted(votes.items())
            },
            "decisions": dict(sorted(decisions.items())),
        }
        self.reviews_path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def load_reviews(self) -> tuple[dict[str, dict[str, ReviewVote]], dict[str, dict]]:
        if not self.reviews_path.exists():
            return {}, {}
        try:
            payload = json.loads(self.reviews_path.read_text(encoding="utf-8"))
            votes = {
                item_id: {
                    row["reviewer_id"]: ReviewVote.from_dict(row) for row in rows
                }
                for item_id, rows in payload.get("votes", {}).items()
            }
            decisions = dict(payload.get("decisions", {}))
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise WorkspaceError(
                f"unreadable reviews file {self.reviews_path}: {exc}"
            ) from None
        return votes, decisions

    def case_decisions(self, catalog: Catalog) -> dict[str, ConsensusDecision]:
        """Panel outcomes rolled up from reviewed items to whole cases.

        A case earns its decision only when every one of its decided assets
        was approved and nothing reviewable is still waiting (no undecided
        asset sitting at ANNOTATED). The earliest approved item's decision
        stands for the case. Cases with rejections, pending items, or no
        votes at all stay out of the mapping, which downstream release
        gates treat as unreviewed.
        """
        _, decisions = self.load_reviews()
        by_case: dict[str, list[tuple[str, dict]]] = {}
        for item_id, payload in decisions.items():
            try:
                asset = catalog.asset(item_id)
            except UnknownAsset:
                continue
            by_case.setdefault(asset.case_id, []).append((item_id, payload))

        rolled: dict[str, ConsensusDecision] = {}
        for case_id, pairs in by_case.items():
            pending = any(
                a.status is CompletionStatus.ANNOTATED and a.asset_id not in decisions
                for a in catalog.case_assets(case_id)
            )
            if pending:
                continue
            parsed = [
                ConsensusDecision.from_dict(payload) for _, payload in sorted(pairs)
            ]
            if all(d.outcome is ConsensusOutcome.APPROVED for d in parsed):
                rolled[case_id] = parsed[0]
        return rolled

    # -- provenance -----------------------------------------------------------------

    def append_provenance(self, entry: dict) -> None:
        self.ensure()
        with self.provenance_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def record(self, action: str, target: str, **extra: object) -> dict:
        """Log one command-line mutation; the service writes its own entries."""
        entry: dict = {
            "at": rfc3339(self.now()),
            "user": os.environ.get("USER", "operator"),
            "action": action,
            "target": target,
            "request_id": "",
        }
        entry.update(extra)
        self.append_provenance(entry)
        return entry
