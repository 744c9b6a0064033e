"""Video-level evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def video_auc(scored: list[tuple[float, int]]) -> float:
    """Probability a random fake outranks a random real; ties count half.

    ``scored`` holds (video_score, true_label) with label 1 = fake.
    """
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    labels = np.asarray([int(l) for _, l in scored])
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError(
            f"video_auc needs both classes: got {n_pos} fake and {n_neg} real videos"
        )
    ranks = rankdata(scores)  # average ranks resolve ties as 1/2
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy(scored: list[tuple[float, int]], threshold: float = 0.5) -> float:
    """Fraction of videos whose thresholded score matches the label (fake iff > threshold)."""
    if not scored:
        raise ValueError("accuracy of an empty score list is undefined")
    hits = sum(1 for s, l in scored if (1 if s > threshold else 0) == int(l))
    return hits / len(scored)
