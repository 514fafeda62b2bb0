"""Frame quality from two angles: focus and naturalness.

The focus score is the variance of a Laplacian response over the frame
interior; defocus flattens edges, so the score collapses as blur grows.
The naturalness score regresses 36 scene statistics (fitted shape
parameters of normalized luminance and its neighbor products, at two
scales) onto a 0-100 distortion scale. A clip is pooled to its worst
sliding window so one bad stretch cannot hide behind a good average.

Usage: python demos/02_quality_metrics.py
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage import data

from endocurator.metrics import (
    QualityThresholds,
    blur_score,
    brisque_score,
    frame_ok,
    video_quality,
)


def main() -> None:
    frame = np.asarray(data.camera(), dtype=np.float64)
    thresholds = QualityThresholds()

    print("defocus ladder:")
    print(f"  {'distortion':14s} {'focus':>10s} {'natural':>8s}  verdict")
    for sigma in (0.0, 1.0, 2.0, 4.0):
        blurred = ndimage.gaussian_filter(frame, sigma) if sigma else frame
        sharp = blur_score(blurred)
        natural = brisque_score(blurred)
        ok = frame_ok(sharp, natural, thresholds)
        label = f"blur sigma={sigma:.0f}" if sigma else "pristine"
        verdict = "PASS" if ok else "FAIL"
        print(f"  {label:14s} {sharp:10.1f} {natural:8.1f}  {verdict}")

    # A clip that drifts out of focus for one second mid-sequence.
    steady = [blur_score(frame)] * 90
    dip = [blur_score(ndimage.gaussian_filter(frame, 3.0))] * 30
    scores = steady[:45] + dip + steady[45:]
    print(f"\nclip mean focus     {np.mean(scores):8.1f}")
    print(f"clip pooled focus   {video_quality(scores):8.1f}")
    print("pooling keeps the out-of-focus second from hiding in the mean")


if __name__ == "__main__":
    main()
