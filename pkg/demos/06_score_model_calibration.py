"""How the shipped naturalness score model was produced.

A linear model is fit over min-max scaled spatial features computed from a
small ladder of synthetic distortions (Gaussian blur and additive noise) of
stock photographs. Target scores grow with distortion severity, so pristine
frames land near the bottom of the [0, 100] range and heavily degraded frames
near the top. Running this script regenerates the packaged model file
byte-for-byte (the fit is deterministic; the RNG is seeded).

Usage: python demos/06_score_model_calibration.py [out_path]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage import data
from skimage.color import rgb2gray

from endocurator.metrics import ScoreModel, brisque_features


def source_images() -> list[np.ndarray]:
    imgs = [
        data.camera(),
        data.coins(),
        data.moon(),
        (rgb2gray(data.astronaut()) * 255.0),
        data.text(),
    ]
    return [np.asarray(im, dtype=np.float64) for im in imgs]


def distortion_ladder(img: np.ndarray, rng: np.random.Generator):
    """Yield (distorted_image, target_score) pairs for one source image."""
    # Defocus ladder: wider blur kernels push the score up.
    for sigma, target in [(0.0, 8.0), (1.0, 35.0), (2.0, 60.0), (4.0, 88.0)]:
        out = ndimage.gaussian_filter(img, sigma) if sigma else img
        yield out, target
    # Sensor-noise ladder.
    for sigma, target in [(5.0, 30.0), (15.0, 55.0), (35.0, 85.0)]:
        yield img + rng.normal(0.0, sigma, img.shape), target


def calibrate() -> ScoreModel:
    rng = np.random.default_rng(20200117)
    rows: list[np.ndarray] = []
    targets: list[float] = []
    for img in source_images():
        for distorted, target in distortion_ladder(img, rng):
            rows.append(brisque_features(distorted))
            targets.append(target)
    x = np.vstack(rows)
    y = np.asarray(targets)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    span = np.where(maxs - mins > 0, maxs - mins, 1.0)
    scaled = -1.0 + 2.0 * (x - mins) / span
    # Ridge regression with an unpenalized intercept column.
    design = np.hstack([scaled, np.ones((scaled.shape[0], 1))])
    lam = 1.0
    penalty = lam * np.eye(design.shape[1])
    penalty[-1, -1] = 0.0
    beta = np.linalg.solve(design.T @ design + penalty, design.T @ y)
    return ScoreModel(
        mins=mins, maxs=maxs, weights=beta[:-1], intercept=float(beta[-1])
    )


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(
        "src/endocurator/data/brisque_default.txt"
    )
    model = calibrate()
    model.save(out)
    print(f"wrote {out}")
    # Show the model separating sharp from degraded frames.
    cam = np.asarray(data.camera(), dtype=np.float64)
    for label, img in [
        ("pristine", cam),
        ("blur sigma=2", ndimage.gaussian_filter(cam, 2.0)),
        ("blur sigma=4", ndimage.gaussian_filter(cam, 4.0)),
    ]:
        print(f"  {label:14s} score={model.score(brisque_features(img)):6.2f}")


if __name__ == "__main__":
    main()
