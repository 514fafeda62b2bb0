"""Controlled vocabularies and the asset naming grammar.

Every media file entering the catalog is named by a fixed underscore-delimited
grammar built from closed vocabularies, so that a filename alone identifies the
patient, acquisition date, imaging modality, lesion location, and pathology.
The codec is bijective: parsing a well-formed stem and re-formatting it yields
the identical string, and formatting any valid label parses back to itself.

Grammar (BNF, stems only; the extension is stripped before parsing)::

    image-stem ::= uid "_" date "_" modality "_" location "_" pathology "_" seq
    video-stem ::= uid "_" date
    uid        ::= "UID" digits4plus          ; zero-padded to 4, no leading-zero growth
    date       ::= YYYYMMDD                   ; must be a real calendar date
    modality   ::= "WLC" | "BLC"
    location   ::= registered location token  ; e.g. "TRIG", "DOME"
    pathology  ::= "BEN" | cancer-base [ "-" grade ]
    cancer-base::= "TA" | "CIS" | "T1" | "T2"
    grade      ::= "LG" | "HG"
    seq        ::= digits2plus                ; zero-padded to 2, no leading-zero growth

Emitted names use only ``[A-Z0-9_-]`` plus the extension, keeping them
readable and sortable in any file browser.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path

__all__ = [
    "BadDate",
    "CompletionStatus",
    "ImageLabel",
    "LocationCode",
    "MalformedName",
    "Modality",
    "NameGrammarError",
    "PathologyCategory",
    "PathologyCode",
    "TumorGrade",
    "TumorStage",
    "UnknownVocab",
    "VideoName",
    "VocabDomain",
    "Vocabulary",
    "default_vocabulary",
]


class NameGrammarError(ValueError):
    """Base class for filename grammar violations."""


class MalformedName(NameGrammarError):
    """Wrong field count, order, or field syntax."""


class UnknownVocab(NameGrammarError):
    """A token is not registered in the relevant vocabulary."""

    def __init__(self, token: str, domain: str = ""):
        self.token = token
        self.domain = domain
        super().__init__(f"unknown {domain or 'vocabulary'} token: {token!r}")


class BadDate(NameGrammarError):
    """An 8-digit date field does not name a real calendar date."""


class Modality(str, Enum):
    WLC = "WLC"
    BLC = "BLC"


class PathologyCategory(str, Enum):
    BENIGN = "BENIGN"
    CANCER = "CANCER"


class TumorStage(str, Enum):
    TA = "Ta"
    CIS = "CIS"
    T1 = "T1"
    T2 = "T2"


class TumorGrade(str, Enum):
    LG = "LG"
    HG = "HG"


class CompletionStatus(str, Enum):
    """Data-completion states, ordered; EXCLUDED is reachable from anywhere."""

    NEW = "NEW"
    LABELED = "LABELED"
    QC1_PASS = "QC1_PASS"
    QC2_PASS = "QC2_PASS"
    ANNOTATED = "ANNOTATED"
    QC3_PASS = "QC3_PASS"
    RELEASED = "RELEASED"
    EXCLUDED = "EXCLUDED"

    @property
    def rank(self) -> int:
        return _STATUS_ORDER[self]

    def can_transition_to(self, new: "CompletionStatus") -> bool:
        """Forward moves along the declared order, plus any state to EXCLUDED."""
        if new is CompletionStatus.EXCLUDED:
            return self is not CompletionStatus.EXCLUDED
        if self is CompletionStatus.EXCLUDED:
            return False
        return _STATUS_ORDER[new] > _STATUS_ORDER[self]


_STATUS_ORDER = {s: i for i, s in enumerate(CompletionStatus)}


class VocabDomain(str, Enum):
    MODALITY = "MODALITY"
    LOCATION = "LOCATION"
    PATHOLOGY = "PATHOLOGY"
    STATUS = "STATUS"


@dataclass(frozen=True)
class LocationCode:
    """A bladder-map location token with its display name."""

    code: str
    display_name: str

    def __post_init__(self) -> None:
        if not re.fullmatch(r"[A-Z][A-Z0-9]*", self.code):
            raise UnknownVocab(self.code, "LOCATION")
        if not self.display_name:
            raise ValueError("location display_name must be non-empty")


# Standard bladder mapping; extensible through a vocabulary file.
_DEFAULT_LOCATIONS = (
    ("DOME", "dome"),
    ("TRIG", "trigone"),
    ("NECK", "bladder neck"),
    ("LLAT", "left lateral wall"),
    ("RLAT", "right lateral wall"),
    ("ANT", "anterior wall"),
    ("POST", "posterior wall"),
    ("LUO", "left ureteral orifice"),
    ("RUO", "right ureteral orifice"),
    ("URETHRA", "urethra"),
)

_BENIGN_TOKEN = "BEN"
_STAGE_BY_TOKEN = {s.value.upper(): s for s in TumorStage}
_GRADE_BY_TOKEN = {g.value: g for g in TumorGrade}


@dataclass(frozen=True)
class PathologyCode:
    """Pathology stratum: benign, or cancer with optional stage and grade."""

    category: PathologyCategory
    stage: TumorStage | None = None
    grade: TumorGrade | None = None

    def __post_init__(self) -> None:
        if self.category is PathologyCategory.BENIGN and (self.stage or self.grade):
            raise ValueError("stage/grade are only valid for CANCER pathology")
        if self.category is PathologyCategory.CANCER and self.stage is None:
            raise ValueError("CANCER pathology requires a stage")

    @property
    def token(self) -> str:
        """Filename token, e.g. ``BEN``, ``TA-HG``, ``CIS``."""
        if self.category is PathologyCategory.BENIGN:
            return _BENIGN_TOKEN
        base = self.stage.value.upper()  # type: ignore[union-attr]
        return f"{base}-{self.grade.value}" if self.grade else base

    @classmethod
    def benign(cls) -> "PathologyCode":
        return cls(PathologyCategory.BENIGN)

    @classmethod
    def cancer(cls, stage: TumorStage, grade: TumorGrade | None = None) -> "PathologyCode":
        return cls(PathologyCategory.CANCER, stage, grade)

    @classmethod
    def from_token(cls, token: str) -> "PathologyCode":
        base, sep, suffix = token.partition("-")
        if base == _BENIGN_TOKEN:
            if sep:
                raise MalformedName(f"benign pathology takes no grade suffix: {token!r}")
            return cls.benign()
        stage = _STAGE_BY_TOKEN.get(base)
        if stage is None:
            raise UnknownVocab(base, "PATHOLOGY")
        if not sep:
            return cls.cancer(stage)
        grade = _GRADE_BY_TOKEN.get(suffix)
        if grade is None:
            raise UnknownVocab(suffix, "PATHOLOGY")
        return cls.cancer(stage, grade)


class Vocabulary:
    """Registry of all closed token sets used by the grammar.

    Modalities, pathology tokens, and completion states are fixed enums;
    locations default to the standard bladder map and can be extended or
    replaced from a vocabulary file (one ``TOKEN display name`` per line).
    """

    def __init__(self, locations: dict[str, LocationCode] | None = None):
        if locations is None:
            locations = {
                code: LocationCode(code, name) for code, name in _DEFAULT_LOCATIONS
            }
        self._locations = dict(locations)

    @property
    def locations(self) -> dict[str, LocationCode]:
        return dict(self._locations)

    def location(self, code: str) -> LocationCode:
        try:
            return self._locations[code]
        except KeyError:
            raise UnknownVocab(code, "LOCATION") from None

    def register_location(self, code: str, display_name: str) -> LocationCode:
        if code in self._locations:
            raise ValueError(f"location token already registered: {code!r}")
        loc = LocationCode(code, display_name)
        self._locations[code] = loc
        return loc

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocabulary":
        """Load the location vocabulary from a UTF-8 token-per-line file."""
        locations: dict[str, LocationCode] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            token, _, display = line.partition(" ")
            display = display.strip()
            if not display:
                raise ValueError(f"vocabulary line needs a display name: {raw!r}")
            if token in locations:
                raise ValueError(f"duplicate vocabulary token: {token!r}")
            locations[token] = LocationCode(token, display)
        return cls(locations)

    def tokens(self, domain: VocabDomain) -> list[str]:
        """All registered tokens of a domain, in stable order."""
        if domain is VocabDomain.MODALITY:
            return [m.value for m in Modality]
        if domain is VocabDomain.LOCATION:
            return sorted(self._locations)
        if domain is VocabDomain.PATHOLOGY:
            out = [_BENIGN_TOKEN]
            for stage in TumorStage:
                out.append(stage.value.upper())
                out.extend(f"{stage.value.upper()}-{g.value}" for g in TumorGrade)
            return out
        if domain is VocabDomain.STATUS:
            return [s.value for s in CompletionStatus]
        raise ValueError(f"unknown domain: {domain!r}")

    def validate_token(self, token: str, domain: VocabDomain) -> bool:
        """True iff ``token`` is registered in the named vocabulary."""
        if not token:
            return False
        if domain is VocabDomain.MODALITY:
            return token in Modality.__members__
        if domain is VocabDomain.LOCATION:
            return token in self._locations
        if domain is VocabDomain.PATHOLOGY:
            try:
                PathologyCode.from_token(token)
                return True
            except NameGrammarError:
                return False
        if domain is VocabDomain.STATUS:
            return token in CompletionStatus.__members__
        raise ValueError(f"unknown domain: {domain!r}")


_DEFAULT_VOCAB = Vocabulary()


def default_vocabulary() -> Vocabulary:
    """The process-wide default vocabulary (standard bladder map)."""
    return _DEFAULT_VOCAB


_UID_RE = re.compile(r"UID(\d{4}|[1-9]\d{4,})")
_SEQ_RE = re.compile(r"\d{2}|[1-9]\d{2,}")
_DATE_RE = re.compile(r"\d{8}")


def format_uid(number: int) -> str:
    if number < 0:
        raise ValueError("uid number must be nonnegative")
    return f"UID{number:04d}"


def parse_uid(token: str) -> int:
    """UID token to its integer, rejecting non-canonical padding."""
    m = _UID_RE.fullmatch(token)
    if not m:
        raise MalformedName(f"not a UID token: {token!r}")
    return int(m.group(1))


def _parse_date(token: str) -> date:
    if not _DATE_RE.fullmatch(token):
        raise MalformedName(f"date field must be 8 digits: {token!r}")
    try:
        return datetime.strptime(token, "%Y%m%d").date()
    except ValueError:
        raise BadDate(f"not a calendar date: {token!r}") from None


def _split_stem(filename: str) -> str:
    if "/" in filename or "\\" in filename:
        raise MalformedName(f"expected a single path component: {filename!r}")
    stem, dot, ext = filename.rpartition(".")
    if not dot or not stem or not ext:
        raise MalformedName(f"filename needs an extension: {filename!r}")
    return stem


@dataclass(frozen=True)
class ImageLabel:
    """The full parsed label of a screenshot filename."""

    uid: str
    case_date: date
    modality: Modality
    location: LocationCode
    pathology: PathologyCode
    sequence: int

    def __post_init__(self) -> None:
        parse_uid(self.uid)
        if self.sequence < 0:
            raise ValueError("sequence must be nonnegative")


@dataclass(frozen=True)
class VideoName:
    """The parsed stem of a video filename: patient UID and acquisition date."""

    uid: str
    case_date: date

    def __post_init__(self) -> None:
        parse_uid(self.uid)


def parse_image_label(filename: str, vocab: Vocabulary | None = None) -> ImageLabel:
    """Parse a screenshot filename into its label.

    Raises MalformedName for field count/order/syntax violations, UnknownVocab
    for unregistered tokens, and BadDate for impossible calendar dates.
    """
    vocab = vocab or _DEFAULT_VOCAB
    stem = _split_stem(filename)
    fields = stem.split("_")
    if len(fields) != 6:
        raise MalformedName(
            f"image stem needs 6 underscore-delimited fields, got {len(fields)}: {stem!r}"
        )
    uid_tok, date_tok, mod_tok, loc_tok, path_tok, seq_tok = fields
    if not _UID_RE.fullmatch(uid_tok):
        raise MalformedName(f"first field must be a UID token: {uid_tok!r}")
    case_date = _parse_date(date_tok)
    if mod_tok not in Modality.__members__:
        raise UnknownVocab(mod_tok, "MODALITY")
    location = vocab.location(loc_tok)
    pathology = PathologyCode.from_token(path_tok)
    if not _SEQ_RE.fullmatch(seq_tok):
        raise MalformedName(f"sequence field must be 2+ digits: {seq_tok!r}")
    return ImageLabel(
        uid=uid_tok,
        case_date=case_date,
        modality=Modality[mod_tok],
        location=location,
        pathology=pathology,
        sequence=int(seq_tok),
    )


def format_image_label(label: ImageLabel) -> str:
    """Inverse of :func:`parse_image_label`; returns the canonical stem."""
    return "_".join(
        (
            label.uid,
            label.case_date.strftime("%Y%m%d"),
            label.modality.value,
            label.location.code,
            label.pathology.token,
            f"{label.sequence:02d}",
        )
    )


def parse_video_name(filename: str) -> VideoName:
    """Parse a video filename stem into UID and acquisition date."""
    stem = _split_stem(filename)
    fields = stem.split("_")
    if len(fields) != 2:
        raise MalformedName(
            f"video stem needs 2 underscore-delimited fields, got {len(fields)}: {stem!r}"
        )
    uid_tok, date_tok = fields
    if not _UID_RE.fullmatch(uid_tok):
        raise MalformedName(f"first field must be a UID token: {uid_tok!r}")
    return VideoName(uid=uid_tok, case_date=_parse_date(date_tok))


def format_video_name(name: VideoName) -> str:
    """Inverse of :func:`parse_video_name`; returns the canonical stem."""
    return f"{name.uid}_{name.case_date.strftime('%Y%m%d')}"


def validate_token(token: str, domain: VocabDomain, vocab: Vocabulary | None = None) -> bool:
    """Module-level convenience over the default vocabulary."""
    return (vocab or _DEFAULT_VOCAB).validate_token(token, domain)
