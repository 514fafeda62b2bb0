"""endocurator: a curation engine for endoscopic media collections.

The package covers the full life of a clinical media collection: controlled
naming vocabularies, a content-addressed catalog, no-reference image and video
quality metrics, a layered quality-control pipeline with panel consensus,
polygon annotation storage with COCO interchange, and de-identified,
FAIR-audited release bundles, all reachable through a CLI and an HTTP service.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .vocab import (
    BadDate,
    CompletionStatus,
    ImageLabel,
    LocationCode,
    MalformedName,
    Modality,
    PathologyCategory,
    PathologyCode,
    TumorGrade,
    TumorStage,
    UnknownVocab,
    VideoName,
    VocabDomain,
    Vocabulary,
    default_vocabulary,
    format_image_label,
    format_video_name,
    parse_image_label,
    parse_video_name,
    validate_token,
)

__all__ = [
    "BadDate",
    "CompletionStatus",
    "ImageLabel",
    "LocationCode",
    "MalformedName",
    "Modality",
    "PathologyCategory",
    "PathologyCode",
    "TumorGrade",
    "TumorStage",
    "UnknownVocab",
    "VideoName",
    "VocabDomain",
    "Vocabulary",
    "__version__",
    "default_vocabulary",
    "format_image_label",
    "format_video_name",
    "parse_image_label",
    "parse_video_name",
    "validate_token",
]
