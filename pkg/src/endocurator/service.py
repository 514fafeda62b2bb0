"""HTTP facade for browsing, labeling, reviewing, and atlas access.

The service is a thin boundary over the catalog, the annotation store, the
QC reports, and the atlas builder. It adds exactly three things: bearer-token
sessions with clearance levels, field-level redaction of patient identifiers,
and an append-only provenance log of every mutation. All domain rules stay in
the modules the endpoints call.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import socket
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Literal

import uvicorn
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from .annotations import AnnotationStore, Appearance, LesionRecord
from .catalog import (
    Catalog,
    CaseRecord,
    IllegalTransition,
    MediaAsset,
    MediaKind,
    ParseFailure,
    Procedure,
    UnknownAsset,
    UnknownCase,
    parse_rfc3339,
    query_index,
    rfc3339,
)
from .export import AccessLevel, PseudonymVault, atlas_eligible, build_atlas_manifest
from .qc import (
    ConsensusDecision,
    ReviewRole,
    ReviewVote,
    RootCause,
    Verdict,
    consensus,
)
from .vocab import (
    CompletionStatus,
    ImageLabel,
    Modality,
    PathologyCode,
    VideoName,
    VocabDomain,
    format_image_label,
)
from .workspace import Workspace, WorkspaceError

DEFAULT_PAGE_SIZE = 100
MAX_PAGE_SIZE = 1000
DEFAULT_ATLAS_LICENSE = "internal education use only; no redistribution"

ASSET_ID_PATTERN = re.compile(r"A\d{6}")

# Sessions without an explicit expiry never expire.
_FAR_FUTURE = datetime(9999, 12, 31, tzinfo=timezone.utc)


class BadConfig(ValueError):
    """The service configuration cannot produce a working instance."""


class BindFailure(OSError):
    """The configured host/port cannot be bound."""


class ApiError(Exception):
    """An error the service reports as JSON ``{code, detail}``."""

    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


def _forbidden(detail: str) -> ApiError:
    return ApiError(403, "FORBIDDEN", detail)


def _not_found(detail: str) -> ApiError:
    return ApiError(404, "NOT_FOUND", detail)


def _unknown_vocab(token: str, domain: str) -> ApiError:
    return ApiError(422, "UNKNOWN_VOCAB", f"unknown {domain} token: {token!r}")


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class ServiceUser:
    """One row of the static token table."""

    token: str
    user_id: str
    clearance: AccessLevel
    role: ReviewRole | None = None
    expires_at: datetime | None = None


@dataclass(frozen=True)
class SessionContext:
    """The authenticated caller of one request."""

    user_id: str
    clearance: AccessLevel
    expires_at: datetime
    role: ReviewRole | None = None


@dataclass(frozen=True)
class ServiceConfig:
    users: tuple[ServiceUser, ...]
    state_dir: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8421
    atlas_license: str = DEFAULT_ATLAS_LICENSE
    page_size: int = DEFAULT_PAGE_SIZE

    def __post_init__(self) -> None:
        if not self.users:
            raise BadConfig("config lists no users")
        tokens = [u.token for u in self.users]
        if len(set(tokens)) != len(tokens):
            raise BadConfig("duplicate bearer tokens in user table")
        leaders = [u for u in self.users if u.role is ReviewRole.LEADER]
        if len(leaders) > 1:
            raise BadConfig("at most one user may hold the LEADER role")
        if not (0 < self.port < 65536):
            raise BadConfig(f"port out of range: {self.port}")
        if not self.atlas_license.strip():
            raise BadConfig("atlas license text must not be blank")
        if self.page_size < 1:
            raise BadConfig(f"page size must be positive: {self.page_size}")

    @property
    def panel_size(self) -> int:
        """Urologists registered in the table form the review panel."""
        return sum(1 for u in self.users if u.role is ReviewRole.UROLOGIST)

    @property
    def has_leader(self) -> bool:
        return any(u.role is ReviewRole.LEADER for u in self.users)

    def user_for(self, token: str) -> ServiceUser | None:
        for user in self.users:
            if user.token == token:
                return user
        return None

    @classmethod
    def from_dict(cls, payload: dict, base_dir: str | Path | None = None) -> "ServiceConfig":
        """Parse a plain config mapping, failing loudly on any bad field."""
        if not isinstance(payload, dict):
            raise BadConfig("config must be a JSON object")
        users = []
        for i, row in enumerate(payload.get("users", [])):
            if not isinstance(row, dict):
                raise BadConfig(f"users[{i}] must be an object")
            try:
                token = str(row["token"])
                user_id = str(row["user_id"])
                clearance_name = str(row["clearance"])
            except KeyError as exc:
                raise BadConfig(f"users[{i}] is missing {exc.args[0]!r}") from None
            if clearance_name not in AccessLevel.__members__:
                raise BadConfig(f"users[{i}]: unknown clearance {clearance_name!r}")
            role_name = row.get("role")
            if role_name is not None and role_name not in ReviewRole.__members__:
                raise BadConfig(f"users[{i}]: unknown role {role_name!r}")
            expires_raw = row.get("expires_at")
            expires_at = None
            if expires_raw is not None:
                try:
                    expires_at = parse_rfc3339(str(expires_raw))
                except ValueError:
                    raise BadConfig(
                        f"users[{i}]: bad expires_at {expires_raw!r}"
                    ) from None
            users.append(
                ServiceUser(
                    token=token,
                    user_id=user_id,
                    clearance=AccessLevel[clearance_name],
                    role=ReviewRole[role_name] if role_name else None,
                    expires_at=expires_at,
                )
            )
        state_dir = payload.get("state_dir")
        if state_dir is not None:
            state_dir = Path(state_dir)
            if base_dir is not None and not state_dir.is_absolute():
                state_dir = Path(base_dir) / state_dir
        port = payload.get("port", cls.port)
        if not isinstance(port, int) or isinstance(port, bool):
            raise BadConfig(f"port must be an integer: {port!r}")
        return cls(
            users=tuple(users),
            state_dir=state_dir,
            host=str(payload.get("host", cls.host)),
            port=port,
            atlas_license=str(payload.get("atlas_license", cls.atlas_license)),
            page_size=int(payload.get("page_size", cls.page_size)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(payload, base_dir=path.parent)


# -- runtime state ----------------------------------------------------------


class AppState:
    """Everything one running instance reads and mutates, plus its lock.

    ``state_dir`` is optional: with it, mutations persist (catalog, reviews,
    provenance); without it, the instance is purely in-memory, which is what
    tests use.
    """

    def __init__(
        self,
        catalog: Catalog,
        store: AnnotationStore,
        config: ServiceConfig,
        vault: PseudonymVault | None = None,
        qc_reports: dict[str, dict] | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.catalog = catalog
        self.store = store
        self.config = config
        self.vault = vault or PseudonymVault.create()
        self.qc_reports: dict[str, dict] = dict(qc_reports or {})
        self.votes: dict[str, dict[str, ReviewVote]] = {}
        self.decisions: dict[str, dict] = {}
        self.provenance: list[dict] = []
        self.replays: dict[tuple[str, str], dict] = {}
        self.lock = threading.Lock()
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    def now(self) -> datetime:
        return self._clock()

    # -- persistence (no-ops without a state directory) ---------------------

    def record(
        self, session: SessionContext, action: str, target: str,
        request_id: str | None, **extra: Any,
    ) -> None:
        """Append one provenance entry for a mutation."""
        entry = {
            "at": rfc3339(self.now()),
            "user": session.user_id,
            "action": action,
            "target": target,
            "request_id": request_id or "",
        }
        entry.update(extra)
        self.provenance.append(entry)
        if self.config.state_dir is not None:
            Workspace(self.config.state_dir).append_provenance(entry)

    def persist_catalog(self) -> None:
        if self.config.state_dir is not None:
            Workspace(self.config.state_dir).save_catalog(self.catalog)

    def persist_reviews(self) -> None:
        if self.config.state_dir is not None:
            Workspace(self.config.state_dir).save_reviews(self.votes, self.decisions)


# -- serialization with clearance-graded fields ------------------------------


def _view_level(clearance: AccessLevel) -> AccessLevel:
    """The grade of the catalog view a session receives.

    Patient-record content is CONFIDENTIAL; below that clearance the served
    view drops every identifying field and is graded INTERNAL.
    """
    return min(clearance, AccessLevel.CONFIDENTIAL)


def _label_payload(label: ImageLabel | VideoName | None, clearance: AccessLevel) -> dict | None:
    if label is None:
        return None
    body: dict[str, Any] = {"case_date": label.case_date.isoformat()}
    if isinstance(label, ImageLabel):
        body.update(
            modality=label.modality.value,
            location=label.location.code,
            pathology=label.pathology.token,
            sequence=label.sequence,
        )
    if clearance >= AccessLevel.CONFIDENTIAL:
        body["uid"] = label.uid
    return body


def _asset_payload(asset: MediaAsset, clearance: AccessLevel) -> dict:
    body: dict[str, Any] = {
        "asset_id": asset.asset_id,
        "case_id": asset.case_id,
        "kind": asset.kind.value,
        "status": asset.status.value,
        "byte_size": asset.byte_size,
        "checksum": asset.checksum,
        "created_at": rfc3339(asset.created_at),
        "modified_at": rfc3339(asset.modified_at),
        "deleted": asset.deleted,
        "label": _label_payload(asset.label, clearance),
        "access": _view_level(clearance).name,
    }
    for key in ("frame_count", "width", "height"):
        value = getattr(asset, key)
        if value is not None:
            body[key] = value
    if clearance >= AccessLevel.CONFIDENTIAL:
        # The stored path embeds the raw patient identifier in its filename.
        body["uid"] = asset.uid
        body["path"] = asset.path
    return body


def _lesion_payload(lesion: LesionRecord) -> dict:
    return {
        "lesion_id": lesion.lesion_id,
        "location": lesion.location.code,
        "appearance": lesion.appearance.value,
        "pathology": lesion.pathology.token,
    }


def _case_payload(
    case: CaseRecord, state: AppState, clearance: AccessLevel, expand: bool = False
) -> dict:
    assets = state.catalog.case_assets(case.case_id)
    lesions = state.store.case_lesions(case.case_id)
    body: dict[str, Any] = {
        "case_id": case.case_id,
        "case_date": case.case_date.isoformat(),
        "procedure": case.procedure.value,
        "text_docs": list(case.text_docs),
        "asset_count": len(assets),
        "lesion_count": len(lesions),
        "access": _view_level(clearance).name,
    }
    if clearance >= AccessLevel.CONFIDENTIAL:
        body["uid"] = case.uid
    if expand:
        body["lesions"] = [_lesion_payload(l) for l in lesions]
        body["assets"] = [_asset_payload(a, clearance) for a in assets]
    return body


def _page(items: list[dict], key: str, cursor: str | None, limit: int) -> dict:
    """Cursor pagination over id-sorted payloads: the cursor is the last id."""
    if cursor:
        items = [item for item in items if item[key] > cursor]
    page = items[:limit]
    next_cursor = page[-1][key] if len(items) > limit else None
    return {"items": page, "next_cursor": next_cursor}


# -- request bodies ----------------------------------------------------------


class LabelSubmission(BaseModel):
    asset_id: str
    modality: str
    location: str
    pathology: str
    sequence: int = Field(default=1, ge=1, le=99)
    request_id: str | None = Field(default=None, max_length=200)


class VoteSubmission(BaseModel):
    item_id: str
    verdict: Literal["APPROVE", "REJECT"]
    root_cause: str | None = None
    note: str = ""
    request_id: str | None = Field(default=None, max_length=200)


# -- the application ---------------------------------------------------------


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(
        title="endocurator service",
        docs_url=None,
        redoc_url=None,
        openapi_url=None,
    )
    vocab = state.catalog.vocab

    # -- error shape: every failure is JSON {code, detail} -------------------

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "detail": exc.detail}
        )

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
        parts = []
        for err in exc.errors():
            where = ".".join(str(p) for p in err.get("loc", ()) if p != "body")
            parts.append(f"{where}: {err.get('msg', 'invalid')}")
        return JSONResponse(
            status_code=422, content={"code": "VALIDATION", "detail": "; ".join(parts)}
        )

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        code = {404: "NOT_FOUND", 405: "METHOD_NOT_ALLOWED"}.get(
            exc.status_code, f"HTTP_{exc.status_code}"
        )
        return JSONResponse(
            status_code=exc.status_code, content={"code": code, "detail": str(exc.detail)}
        )

    # -- sessions -------------------------------------------------------------

    def session_for(request: Request) -> SessionContext:
        header = request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token.strip():
            raise ApiError(401, "UNAUTHENTICATED", "missing bearer token")
        user = state.config.user_for(token.strip())
        if user is None:
            raise ApiError(401, "UNKNOWN_TOKEN", "bearer token not recognized")
        expires_at = user.expires_at or _FAR_FUTURE
        if state.now() >= expires_at:
            raise ApiError(401, "TOKEN_EXPIRED", f"token expired at {rfc3339(expires_at)}")
        return SessionContext(
            user_id=user.user_id,
            clearance=user.clearance,
            expires_at=expires_at,
            role=user.role,
        )

    def require(session: SessionContext, floor: AccessLevel) -> None:
        if session.clearance < floor:
            raise _forbidden(
                f"clearance {session.clearance.name} is below {floor.name}"
            )

    def effective_limit(limit: int | None) -> int:
        return min(limit or state.config.page_size, MAX_PAGE_SIZE)

    def get_case(case_id: str) -> CaseRecord:
        try:
            return state.catalog.case(case_id)
        except UnknownCase:
            raise _not_found(f"unknown case: {case_id}") from None

    def get_asset(asset_id: str) -> MediaAsset:
        try:
            return state.catalog.asset(asset_id)
        except UnknownAsset:
            raise _not_found(f"unknown asset: {asset_id}") from None

    def check_status_token(token: str) -> None:
        if not vocab.validate_token(token, VocabDomain.STATUS):
            raise _unknown_vocab(token, "status")

    def replay_key(session: SessionContext, request_id: str | None) -> tuple[str, str] | None:
        return (session.user_id, request_id) if request_id else None

    def stored_reply(key: tuple[str, str] | None) -> dict | None:
        return state.replays.get(key) if key else None

    def store_reply(key: tuple[str, str] | None, body: dict) -> dict:
        if key:
            # Copy so later catalog changes cannot alter the stored reply.
            state.replays[key] = json.loads(json.dumps(body))
        return body

    # -- vocabulary ------------------------------------------------------------

    @app.get("/vocab")
    def get_vocab(request: Request) -> dict:
        session_for(request)
        return {
            "access": AccessLevel.PUBLIC.name,
            "vocabulary": {
                "modality": vocab.tokens(VocabDomain.MODALITY),
                "location": vocab.tokens(VocabDomain.LOCATION),
                "pathology": vocab.tokens(VocabDomain.PATHOLOGY),
                "status": vocab.tokens(VocabDomain.STATUS),
                "procedure": [p.value for p in Procedure],
                "appearance": [a.value for a in Appearance],
                "verdict": [v.value for v in Verdict],
                "root_cause": [r.value for r in RootCause],
            },
        }

    # -- browsing ---------------------------------------------------------------

    @app.get("/cases")
    def list_cases(
        request: Request,
        cursor: str | None = None,
        limit: int | None = Query(default=None, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        payloads = [
            _case_payload(case, state, session.clearance)
            for _, case in sorted(state.catalog.cases.items())
        ]
        body = _page(payloads, "case_id", cursor, effective_limit(limit))
        body["access"] = _view_level(session.clearance).name
        return body

    @app.get("/cases/{case_id}")
    def show_case(case_id: str, request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        case = get_case(case_id)
        return {
            "access": _view_level(session.clearance).name,
            "case": _case_payload(case, state, session.clearance, expand=True),
        }

    @app.get("/images")
    def list_images(
        request: Request,
        status: str | None = None,
        pathology: str | None = None,
        text: str | None = None,
        cursor: str | None = None,
        limit: int | None = Query(default=None, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        if status is not None:
            check_status_token(status)
        if pathology is not None:
            known = vocab.validate_token(pathology, VocabDomain.PATHOLOGY)
            if not known and pathology.strip().upper() not in ("BEN", "CANCER"):
                raise _unknown_vocab(pathology, "pathology")
        rows = query_index(
            state.catalog,
            status=status,
            pathology=pathology,
            free_text=text,
            kind=MediaKind.IMAGE,
        )
        payloads = [
            _asset_payload(state.catalog.asset(row["asset_id"]), session.clearance)
            for row in rows
        ]
        body = _page(payloads, "asset_id", cursor, effective_limit(limit))
        body["access"] = _view_level(session.clearance).name
        return body

    @app.get("/assets/{asset_id}")
    def show_asset(asset_id: str, request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        asset = get_asset(asset_id)
        return {
            "access": _view_level(session.clearance).name,
            "asset": _asset_payload(asset, session.clearance),
        }

    @app.get("/search")
    def search(
        request: Request,
        q: str = "",
        cursor: str | None = None,
        limit: int | None = Query(default=None, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        if not q.strip():
            raise ApiError(422, "VALIDATION", "q must not be blank")
        rows = query_index(state.catalog, free_text=q)
        payloads = [
            _asset_payload(state.catalog.asset(row["asset_id"]), session.clearance)
            for row in rows
        ]
        body = _page(payloads, "asset_id", cursor, effective_limit(limit))
        body["access"] = _view_level(session.clearance).name
        return body

    # -- labeling -----------------------------------------------------------------

    @app.post("/labels")
    def submit_label(body: LabelSubmission, request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.CONFIDENTIAL)
        key = replay_key(session, body.request_id)
        if (replay := stored_reply(key)) is not None:
            return replay
        with state.lock:
            asset = get_asset(body.asset_id)
            if asset.deleted:
                raise ApiError(
                    409, "ILLEGAL_TRANSITION", f"{body.asset_id} is a deleted tombstone"
                )
            if asset.kind is not MediaKind.IMAGE:
                raise ApiError(422, "VALIDATION", "only images take image labels")
            if not vocab.validate_token(body.modality, VocabDomain.MODALITY):
                raise _unknown_vocab(body.modality, "modality")
            if not vocab.validate_token(body.location, VocabDomain.LOCATION):
                raise _unknown_vocab(body.location, "location")
            if not vocab.validate_token(body.pathology, VocabDomain.PATHOLOGY):
                raise _unknown_vocab(body.pathology, "pathology")
            case = state.catalog.case(asset.case_id)
            label = ImageLabel(
                uid=asset.uid,
                case_date=case.case_date,
                modality=Modality[body.modality],
                location=vocab.location(body.location),
                pathology=PathologyCode.from_token(body.pathology),
                sequence=body.sequence,
            )
            if asset.status is CompletionStatus.LABELED and asset.label == label:
                # Retrying an already applied submission succeeds unchanged.
                updated = asset
            else:
                try:
                    updated = state.catalog.set_label(asset.asset_id, label)
                except IllegalTransition as exc:
                    raise ApiError(409, "ILLEGAL_TRANSITION", str(exc)) from None
                except ParseFailure as exc:
                    raise ApiError(422, "VALIDATION", str(exc)) from None
                state.persist_catalog()
                state.record(
                    session,
                    "label",
                    asset.asset_id,
                    body.request_id,
                    stem=format_image_label(label),
                )
        reply = {
            "access": _view_level(session.clearance).name,
            "asset": _asset_payload(updated, session.clearance),
        }
        return store_reply(key, reply)

    # -- review -------------------------------------------------------------------

    def queue_item(asset: MediaAsset, clearance: AccessLevel) -> dict:
        cast = state.votes.get(asset.asset_id, {})
        return {
            "asset": _asset_payload(asset, clearance),
            "votes": [v.to_dict() for _, v in sorted(cast.items())],
            "decision": state.decisions.get(asset.asset_id),
        }

    @app.get("/review-queue")
    def review_queue(
        request: Request,
        status: str = CompletionStatus.ANNOTATED.value,
        cursor: str | None = None,
        limit: int | None = Query(default=None, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        check_status_token(status)
        wanted = CompletionStatus(status)
        items = [
            queue_item(asset, session.clearance)
            for _, asset in sorted(state.catalog.assets.items())
            if asset.status is wanted
            and not asset.deleted
            and asset.asset_id not in state.decisions
        ]
        for item in items:
            item["asset_id"] = item["asset"]["asset_id"]
        body = _page(items, "asset_id", cursor, effective_limit(limit))
        body["access"] = _view_level(session.clearance).name
        return body

    def evaluate_panel(asset_id: str) -> ConsensusDecision | None:
        """Resolve the vote once the registered panel's outcome is fixed.

        Decided means a side already holds the majority threshold of the
        registered panel, or every panelist voted and the tie-breaking state
        (leader vote, or no leader to wait for) is final.
        """
        cast = list(state.votes[asset_id].values())
        panel = [v for v in cast if v.role is ReviewRole.UROLOGIST]
        approvals = sum(1 for v in panel if v.verdict is Verdict.APPROVE)
        rejections = len(panel) - approvals
        size = state.config.panel_size
        threshold = math.ceil((size + 1) / 2)
        decided = approvals >= threshold or rejections >= threshold
        if not decided and len(panel) == size:
            leader_voted = any(v.role is ReviewRole.LEADER for v in cast)
            decided = leader_voted or not state.config.has_leader
        return consensus(cast) if decided else None

    @app.post("/votes")
    def cast_vote(body: VoteSubmission, request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        if session.role is None:
            raise _forbidden(f"{session.user_id} holds no review role")
        key = replay_key(session, body.request_id)
        if (replay := stored_reply(key)) is not None:
            return replay
        root_cause = None
        if body.root_cause is not None:
            try:
                root_cause = RootCause(body.root_cause)
            except ValueError:
                raise _unknown_vocab(body.root_cause, "root cause") from None
        with state.lock:
            asset = get_asset(body.item_id)
            if asset.deleted or asset.status is not CompletionStatus.ANNOTATED:
                raise ApiError(
                    409,
                    "ILLEGAL_TRANSITION",
                    f"{body.item_id} is not awaiting review (status {asset.status.value})",
                )
            if body.item_id in state.decisions:
                raise ApiError(
                    409, "ILLEGAL_TRANSITION", f"{body.item_id} is already decided"
                )
            cast = state.votes.setdefault(body.item_id, {})
            if session.user_id in cast:
                raise ApiError(
                    409, "DUPLICATE_VOTE", f"reviewer {session.user_id} voted twice"
                )
            try:
                vote = ReviewVote(
                    reviewer_id=session.user_id,
                    role=session.role,
                    verdict=Verdict(body.verdict),
                    root_cause=root_cause,
                    note=body.note,
                )
            except ValueError as exc:
                raise ApiError(422, "VALIDATION", str(exc)) from None
            cast[session.user_id] = vote
            state.record(
                session, "vote", body.item_id, body.request_id, verdict=body.verdict
            )
            decision = evaluate_panel(body.item_id)
            if decision is not None:
                # Completion states track the data pipeline; the review
                # outcome lives beside them and gates release downstream.
                state.decisions[body.item_id] = decision.to_dict()
                state.record(
                    session,
                    "decision",
                    body.item_id,
                    body.request_id,
                    outcome=decision.outcome.value,
                    decided_by=decision.decided_by.value,
                )
            state.persist_reviews()
        reply = {
            "access": _view_level(session.clearance).name,
            "item_id": body.item_id,
            "pending": decision is None,
            "votes_cast": len(cast),
            "decision": state.decisions.get(body.item_id),
        }
        return store_reply(key, reply)

    # -- atlas ---------------------------------------------------------------------

    def atlas_body(asset_ids: list[str]) -> dict:
        manifest = build_atlas_manifest(
            state.store,
            asset_ids,
            state.vault,
            license_text=state.config.atlas_license,
        )
        return {"access": AccessLevel.INTERNAL.name, "manifest": manifest.to_dict()}

    @app.get("/atlas")
    def atlas(request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        eligible = sorted(
            a.asset_id for a in state.catalog.assets.values() if atlas_eligible(a)
        )
        return atlas_body(eligible)

    @app.api_route("/atlas/filter", methods=["GET", "POST"])
    async def atlas_filter(request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        raw = await request.body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ApiError(422, "CSV_PARSE", "body is not UTF-8 text") from None
        ids, bad = _parse_asset_csv(text)
        if bad:
            shown = "; ".join(f"row {n}: {cell!r} is not an asset id" for n, cell in bad[:5])
            if len(bad) > 5:
                shown += f"; and {len(bad) - 5} more"
            raise ApiError(422, "CSV_PARSE", shown)
        if not ids:
            raise ApiError(422, "CSV_PARSE", "no asset ids in uploaded CSV")
        chosen, skipped = [], []
        for asset_id in ids:
            try:
                asset = state.catalog.asset(asset_id)
            except UnknownAsset:
                skipped.append({"asset_id": asset_id, "reason": "unknown asset"})
                continue
            if atlas_eligible(asset):
                chosen.append(asset_id)
            else:
                skipped.append(
                    {"asset_id": asset_id, "reason": "not a released labeled still"}
                )
        body = atlas_body(chosen)
        body["requested"] = len(ids)
        body["skipped"] = skipped
        return body

    # -- QC --------------------------------------------------------------------------

    @app.get("/qc/{case_id}")
    def qc_report(case_id: str, request: Request) -> dict:
        session = session_for(request)
        require(session, AccessLevel.INTERNAL)
        get_case(case_id)
        report = state.qc_reports.get(case_id)
        if report is None:
            raise _not_found(f"no QC report for {case_id}")
        return {"access": AccessLevel.INTERNAL.name, "report": report}

    return app


def _parse_asset_csv(text: str) -> tuple[list[str], list[tuple[int, str]]]:
    """Asset ids from an uploaded CSV: one id per line, header optional.

    Returns (unique ids in first-seen order, [(line number, bad cell), ...]).
    """
    ids: list[str] = []
    seen: set[str] = set()
    bad: list[tuple[int, str]] = []
    first_data_line = True
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row if c.strip()]
        if not cells:
            continue
        cell = cells[0]
        if first_data_line and cell.lower() in ("asset_id", "assetid", "id"):
            first_data_line = False
            continue
        first_data_line = False
        if not ASSET_ID_PATTERN.fullmatch(cell):
            bad.append((line_no, cell))
        elif cell not in seen:
            seen.add(cell)
            ids.append(cell)
    return ids, bad


# -- process entry -----------------------------------------------------------


def load_state(config: ServiceConfig, clock: Callable[[], datetime] | None = None) -> AppState:
    """Build runtime state from the config's state directory."""
    if config.state_dir is None:
        raise BadConfig("config names no state directory")
    ws = Workspace(config.state_dir, clock=clock)
    if not ws.root.is_dir():
        raise BadConfig(f"catalog directory does not exist: {ws.root}")

    try:
        catalog = ws.load_catalog()
        store = ws.load_annotations(catalog)
        vault = ws.load_vault()
        reports = ws.all_qc_reports()
        votes, decisions = ws.load_reviews()
    except WorkspaceError as exc:
        raise BadConfig(str(exc)) from None

    state = AppState(
        catalog,
        store,
        config,
        vault=vault,
        qc_reports={cid: report.to_dict() for cid, report in reports.items()},
        clock=clock,
    )
    state.votes.update(votes)
    state.decisions.update(decisions)
    return state


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted.

    The socket is bound before uvicorn starts so an occupied port fails fast
    with BindFailure instead of dying inside the server loop.
    """
    state = load_state(config)
    app = create_app(state)
    try:
        sock = socket.create_server((config.host, config.port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {config.host}:{config.port}: {exc}") from None
    server = uvicorn.Server(
        uvicorn.Config(app, log_level="warning", access_log=False)
    )
    try:
        server.run(sockets=[sock])
    finally:
        sock.close()
