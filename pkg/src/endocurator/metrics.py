"""No-reference image and video quality metrics.

Two per-frame scores drive media QC:

* ``blur_score``: variance of the 3x3 Laplacian response over the valid image
  interior. Sharp frames produce high variance; defocused or motion-smeared
  frames produce low variance. Higher is better.
* ``brisque_score``: a spatial naturalness score built from 36 statistical
  features of the mean-subtracted contrast-normalized (MSCN) field at two
  scales, mapped through a linear score model loaded from a plain-text file.
  Scores are clamped to [0, 100]; lower is better.

Per-video quality is the mean of sliding-window minima of per-frame scores,
which penalizes sustained bad stretches but forgives isolated bad frames.

Color frames are reduced to luminance with ITU-R BT.601 weights before any
spatial statistics are computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib.resources import files as _pkg_files
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq
from scipy.special import gamma as _gamma

__all__ = [
    "DEFAULT_BLUR_THRESHOLD",
    "DEFAULT_BRISQUE_THRESHOLD",
    "EmptyInput",
    "ImageTooSmall",
    "QualityThresholds",
    "ScoreModel",
    "ScoreModelError",
    "blur_score",
    "brisque_features",
    "brisque_score",
    "default_score_model",
    "fit_aggd",
    "fit_ggd",
    "frame_ok",
    "luminance_bt601",
    "mscn",
    "paired_products",
    "video_quality",
]


class ImageTooSmall(ValueError):
    """Input has too few rows or columns for the requested statistic."""


class EmptyInput(ValueError):
    """A pooling operation received no scores."""


class ScoreModelError(ValueError):
    """A score-model file is missing required keys or has bad values."""


# Policy defaults for frame acceptance; callers may override per collection.
DEFAULT_BLUR_THRESHOLD = 100.0
DEFAULT_BRISQUE_THRESHOLD = 80.0

_LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

# MSCN stabilization constant and window geometry.
_MSCN_C = 1.0
_WINDOW_HALF = 3
_WINDOW_SIGMA = 7.0 / 6.0

# Shape-parameter search interval shared by the GGD and AGGD fits.
_ALPHA_LO = 0.2
_ALPHA_HI = 10.0

# Fields whose RMS falls below this are pure roundoff residue of a flat patch
# (MSCN of a constant image cancels only to ~1e-14); fits fall back to the
# documented degenerate form instead of chasing noise.
_DEGENERATE_RMS = 1e-12


def _as_float_2d(image: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale array, got shape {arr.shape}")
    return arr


def luminance_bt601(rgb: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) RGB array to BT.601 luma; pass 2-D through."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] >= 3:
        return (
            0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
        )
    raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {arr.shape}")


def blur_score(image: np.ndarray | Sequence[Sequence[float]]) -> float:
    """Variance of the 3x3 Laplacian over interior pixels. Higher is sharper.

    Raises ImageTooSmall when either dimension is below 3 (no valid interior).
    """
    arr = _as_float_2d(image)
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise ImageTooSmall(
            f"blur_score needs at least 3x3 pixels, got {arr.shape[0]}x{arr.shape[1]}"
        )
    response = ndimage.correlate(arr, _LAPLACIAN, mode="constant")[1:-1, 1:-1]
    return float(np.var(response))


def _gaussian_window() -> np.ndarray:
    coords = np.arange(-_WINDOW_HALF, _WINDOW_HALF + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * _WINDOW_SIGMA**2))
    win = np.outer(g, g)
    return win / win.sum()


_GAUSS_WIN = _gaussian_window()


def mscn(image: np.ndarray | Sequence[Sequence[float]], c: float = _MSCN_C) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients of a grayscale image.

    Local mean and deviation come from a 7x7 Gaussian window (sigma 7/6) with
    nearest-edge padding; the constant ``c`` keeps flat regions finite. For a
    constant input the result vanishes up to floating-point roundoff.

    Raises ImageTooSmall when either dimension is below the 7-pixel window.
    """
    arr = _as_float_2d(image)
    if arr.shape[0] < 7 or arr.shape[1] < 7:
        raise ImageTooSmall(
            f"mscn needs at least 7x7 pixels, got {arr.shape[0]}x{arr.shape[1]}"
        )
    mu = ndimage.correlate(arr, _GAUSS_WIN, mode="nearest")
    mu_sq = ndimage.correlate(arr * arr, _GAUSS_WIN, mode="nearest")
    sigma = np.sqrt(np.maximum(mu_sq - mu * mu, 0.0))
    return (arr - mu) / (sigma + c)


def paired_products(field: np.ndarray) -> dict[str, np.ndarray]:
    """Products of each coefficient with its H, V, D1, D2 neighbor."""
    f = np.asarray(field, dtype=np.float64)
    return {
        "H": (f[:, :-1] * f[:, 1:]).ravel(),
        "V": (f[:-1, :] * f[1:, :]).ravel(),
        "D1": (f[:-1, :-1] * f[1:, 1:]).ravel(),
        "D2": (f[:-1, 1:] * f[1:, :-1]).ravel(),
    }


def _ggd_rho(alpha: float) -> float:
    return float(
        _gamma(1.0 / alpha) * _gamma(3.0 / alpha) / _gamma(2.0 / alpha) ** 2
    )


def fit_ggd(values: np.ndarray) -> tuple[float, float]:
    """Moment-matched generalized Gaussian fit: returns (alpha, sigma_sq).

    The shape parameter solves gamma(1/a)gamma(3/a)/gamma(2/a)^2 = E[x^2] /
    E[|x|]^2 on [0.2, 10], clamped at the interval ends. A degenerate field
    (all zeros) yields the documented fallback (2.0, 0.0).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    sigma_sq = float(np.mean(v * v))
    e_abs = float(np.mean(np.abs(v)))
    if sigma_sq <= _DEGENERATE_RMS**2 or e_abs == 0.0:
        return 2.0, sigma_sq
    target = sigma_sq / (e_abs * e_abs)
    if target >= _ggd_rho(_ALPHA_LO):
        return _ALPHA_LO, sigma_sq
    if target <= _ggd_rho(_ALPHA_HI):
        return _ALPHA_HI, sigma_sq
    alpha = float(
        brentq(lambda a: _ggd_rho(a) - target, _ALPHA_LO, _ALPHA_HI, xtol=1e-12)
    )
    return alpha, sigma_sq


def _aggd_r(alpha: float) -> float:
    return float(
        _gamma(2.0 / alpha) ** 2 / (_gamma(1.0 / alpha) * _gamma(3.0 / alpha))
    )


def fit_aggd(values: np.ndarray) -> tuple[float, float, float, float]:
    """Asymmetric generalized Gaussian fit: (alpha, eta, sigma_l_sq, sigma_r_sq).

    Negative samples feed the left lobe, nonnegative samples the right. When
    either lobe is empty or the field is all zeros the shape parameter falls
    back to 2.0 and the affected variances are 0, so constant inputs produce
    finite, documented output rather than an error.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    neg = v[v < 0.0]
    pos = v[v >= 0.0]
    sigma_l_sq = float(np.mean(neg * neg)) if neg.size else 0.0
    sigma_r_sq = float(np.mean(pos * pos)) if pos.size else 0.0
    sigma_l = math.sqrt(sigma_l_sq)
    sigma_r = math.sqrt(sigma_r_sq)
    e_sq = float(np.mean(v * v))
    if sigma_l == 0.0 or sigma_r == 0.0 or e_sq <= _DEGENERATE_RMS**2:
        alpha = 2.0
    else:
        e_abs = float(np.mean(np.abs(v)))
        gamma_hat = sigma_l / sigma_r
        r_hat = (e_abs * e_abs) / e_sq
        r_hat_adj = (
            r_hat
            * (gamma_hat**3 + 1.0)
            * (gamma_hat + 1.0)
            / (gamma_hat**2 + 1.0) ** 2
        )
        if r_hat_adj <= _aggd_r(_ALPHA_LO):
            alpha = _ALPHA_LO
        elif r_hat_adj >= _aggd_r(_ALPHA_HI):
            alpha = _ALPHA_HI
        else:
            alpha = float(
                brentq(
                    lambda a: _aggd_r(a) - r_hat_adj,
                    _ALPHA_LO,
                    _ALPHA_HI,
                    xtol=1e-12,
                )
            )
    g1 = float(_gamma(1.0 / alpha))
    g2 = float(_gamma(2.0 / alpha))
    g3 = float(_gamma(3.0 / alpha))
    eta = (sigma_r - sigma_l) * (g2 / math.sqrt(g1 * g3))
    return alpha, eta, sigma_l_sq, sigma_r_sq


def _downsample_2x2(arr: np.ndarray) -> np.ndarray:
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    cropped = arr[: 2 * h2, : 2 * w2]
    return cropped.reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def brisque_features(image: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    """36 spatial naturalness features of a grayscale image.

    Per scale (full resolution, then 2x local-mean downsample): the GGD fit of
    the MSCN field (2 values) plus AGGD fits of the four directional
    neighboring products (4 values each), 18 per scale. Constant images are
    degenerate but well-defined: every distribution fit falls back to its
    documented zero-variance form, so the call never raises on flat input.

    Raises ImageTooSmall below 14x14 (the half scale needs a full window).
    """
    arr = _as_float_2d(image)
    if arr.shape[0] < 14 or arr.shape[1] < 14:
        raise ImageTooSmall(
            f"brisque_features needs at least 14x14 pixels, got "
            f"{arr.shape[0]}x{arr.shape[1]}"
        )
    feats: list[float] = []
    scaled = arr
    for scale in range(2):
        if scale == 1:
            scaled = _downsample_2x2(scaled)
        field = mscn(scaled)
        alpha, sigma_sq = fit_ggd(field)
        feats.extend([alpha, sigma_sq])
        for key in ("H", "V", "D1", "D2"):
            feats.extend(fit_aggd(paired_products(field)[key]))
    return np.array(feats, dtype=np.float64)


@dataclass(frozen=True)
class ScoreModel:
    """Linear score model over min-max scaled naturalness features.

    Each feature is scaled to [-1, 1] by its training range; the score is the
    intercept plus the weighted sum, clamped to [0, 100]. Lower means closer
    to natural image statistics.
    """

    mins: np.ndarray
    maxs: np.ndarray
    weights: np.ndarray
    intercept: float

    def __post_init__(self) -> None:
        n = len(self.mins)
        if not (len(self.maxs) == len(self.weights) == n):
            raise ScoreModelError("model vectors must share one length")

    def score(self, features: np.ndarray) -> float:
        f = np.asarray(features, dtype=np.float64).ravel()
        if f.shape[0] != self.mins.shape[0]:
            raise ScoreModelError(
                f"model expects {self.mins.shape[0]} features, got {f.shape[0]}"
            )
        span = self.maxs - self.mins
        scaled = np.where(span > 0, -1.0 + 2.0 * (f - self.mins) / np.where(span > 0, span, 1.0), 0.0)
        raw = float(self.intercept + np.dot(self.weights, scaled))
        return min(max(raw, 0.0), 100.0)

    def save(self, path: str | Path) -> None:
        lines = [
            f"feature_count={self.mins.shape[0]}",
            f"intercept={float(self.intercept)!r}",
        ]
        for i in range(self.mins.shape[0]):
            lines.append(f"min_{i}={float(self.mins[i])!r}")
            lines.append(f"max_{i}={float(self.maxs[i])!r}")
            lines.append(f"weight_{i}={float(self.weights[i])!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ScoreModel":
        """Parse a plain-text key=value model file."""
        entries: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ScoreModelError(f"expected key=value, got {raw!r}")
            entries[key.strip()] = value.strip()
        try:
            n = int(entries["feature_count"])
            intercept = float(entries["intercept"])
            mins = np.array([float(entries[f"min_{i}"]) for i in range(n)])
            maxs = np.array([float(entries[f"max_{i}"]) for i in range(n)])
            weights = np.array([float(entries[f"weight_{i}"]) for i in range(n)])
        except KeyError as exc:
            raise ScoreModelError(f"model file missing key: {exc}") from None
        except ValueError as exc:
            raise ScoreModelError(f"model file has a non-numeric value: {exc}") from None
        return cls(mins=mins, maxs=maxs, weights=weights, intercept=intercept)


_DEFAULT_MODEL: ScoreModel | None = None


def default_score_model() -> ScoreModel:
    """The score model shipped with the package."""
    global _DEFAULT_MODEL
    if _DEFAULT_MODEL is None:
        path = _pkg_files("endocurator").joinpath("data/brisque_default.txt")
        _DEFAULT_MODEL = ScoreModel.load(str(path))
    return _DEFAULT_MODEL


def brisque_score(
    image: np.ndarray | Sequence[Sequence[float]],
    model: ScoreModel | None = None,
) -> float:
    """Naturalness score in [0, 100] (lower is better) under a score model."""
    return (model or default_score_model()).score(brisque_features(image))


def video_quality(frame_scores: Sequence[float], window: int = 30) -> float:
    """Pool per-frame scores: mean of minima over a sliding window.

    The window is clamped to the clip length, so short clips degrade to the
    plain minimum when a single window covers everything. Raises EmptyInput
    for an empty score sequence.
    """
    scores = np.asarray(list(frame_scores), dtype=np.float64)
    if scores.size == 0:
        raise EmptyInput("cannot pool an empty score sequence")
    k = min(window, scores.size)
    if k < 1:
        raise ValueError("window must be positive")
    windows = np.lib.stride_tricks.sliding_window_view(scores, k)
    return float(windows.min(axis=1).mean())


@dataclass(frozen=True)
class QualityThresholds:
    """Acceptance policy for single frames."""

    blur_threshold: float = DEFAULT_BLUR_THRESHOLD
    brisque_threshold: float = DEFAULT_BRISQUE_THRESHOLD

    def frame_ok(self, blur: float, brisque: float) -> bool:
        return blur >= self.blur_threshold and brisque <= self.brisque_threshold


def frame_ok(
    blur: float,
    brisque: float,
    thresholds: QualityThresholds | None = None,
) -> bool:
    """Frame acceptance under the default or a custom threshold policy."""
    return (thresholds or QualityThresholds()).frame_ok(blur, brisque)
