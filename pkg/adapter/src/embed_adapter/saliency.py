"""Cheap per-image saliency stand-ins computed from pixel statistics.

These are not gaze predictions. They exist so the saliency-weighted
pathway of the downstream evaluator stays exercisable when no trained
predictor is available, and they are only emitted behind an explicit
flag.
"""

import numpy as np


def contrast_entropy(image) -> float:
    """Mean of normalized grayscale contrast and histogram entropy.

    Contrast is the grayscale standard deviation over its half-range
    (127.5); entropy is the 256-bin histogram entropy over its maximum
    (8 bits). Both land in [0, 1], so the result does too. A solid
    color scores exactly 0.
    """
    gray = np.asarray(image.convert("L"), dtype=np.float64)
    contrast = float(gray.std()) / 127.5
    hist, _ = np.histogram(gray, bins=256, range=(0.0, 255.0))
    probs = hist[hist > 0] / gray.size
    entropy = float(-(probs * np.log2(probs)).sum()) / 8.0
    return 0.5 * (contrast + entropy)
