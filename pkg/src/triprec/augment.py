"""Trip augmentation strategies for contrastive trip learning.

An embedded trip is an N x d numpy matrix of POI embedding rows. Four
strategies produce perturbed views: row masking (shortens the sequence),
order shuffle, feature-column cutoff, and inverted dropout. ``two_views``
draws two distinct strategies and applies them independently.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ValidationError


class AugmentationKind(enum.Enum):
    POI_MASK = "poi_mask"
    SHUFFLE = "shuffle"
    FEATURE_CUTOFF = "feature_cutoff"
    DROPOUT = "dropout"


def _check_matrix(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] < 1:
        raise ValidationError(f"embedded trip must be an N x d matrix, got shape {t.shape}")
    return t


def poi_mask(t: np.ndarray, rng: np.random.Generator, ratio: float = 0.2) -> np.ndarray:
    """Remove floor(ratio * N) uniformly chosen rows, keeping at least 2
    (or 1 when the input has a single row)."""
    t = _check_matrix(t)
    n = t.shape[0]
    floor = 2 if n >= 2 else 1
    k = min(math.floor(ratio * n), n - floor)
    if k <= 0:
        return t.copy()
    drop = set(rng.choice(n, size=k, replace=False).tolist())
    keep = [i for i in range(n) if i not in drop]
    return t[keep].copy()


def shuffle(t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random reordering of the rows."""
    t = _check_matrix(t)
    return t[rng.permutation(t.shape[0])].copy()


def feature_cutoff(t: np.ndarray, rng: np.random.Generator, ratio: float = 0.2) -> np.ndarray:
    """Zero floor(ratio * d) feature columns, the same columns in every row."""
    t = _check_matrix(t)
    d = t.shape[1]
    k = math.floor(ratio * d)
    out = t.copy()
    if k > 0:
        cols = rng.choice(d, size=min(k, d), replace=False)
        out[:, cols] = 0.0
    return out


def dropout_aug(t: np.ndarray, rng: np.random.Generator, rate: float = 0.5) -> np.ndarray:
    """Zero each entry independently with probability ``rate``; survivors are
    scaled by 1/(1-rate) so the expectation is unchanged."""
    t = _check_matrix(t)
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return t.copy()
    mask = rng.random(t.shape) >= rate
    return t * mask / (1.0 - rate)


def apply_augmentation(kind: AugmentationKind, t: np.ndarray, rng: np.random.Generator,
                       mask_ratio: float = 0.2, cutoff_ratio: float = 0.2,
                       dropout_rate: float = 0.5) -> np.ndarray:
    if kind is AugmentationKind.POI_MASK:
        return poi_mask(t, rng, mask_ratio)
    if kind is AugmentationKind.SHUFFLE:
        return shuffle(t, rng)
    if kind is AugmentationKind.FEATURE_CUTOFF:
        return feature_cutoff(t, rng, cutoff_ratio)
    return dropout_aug(t, rng, dropout_rate)


def two_views(t: np.ndarray, rng: np.random.Generator,
              mask_ratio: float = 0.2, cutoff_ratio: float = 0.2,
              dropout_rate: float = 0.5,
              allow_identical: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Two augmented views of one trip.

    The strategies are drawn from the four kinds without replacement by
    default; ``allow_identical`` permits same-strategy pairs (the
    augmentation-grid variant).
    """
    t = _check_matrix(t)
    if t.shape[0] < 2:
        raise ValidationError("two_views needs a trip of at least 2 POIs")
    kinds = list(AugmentationKind)
    picked = rng.choice(len(kinds), size=2, replace=allow_identical)
    first = apply_augmentation(kinds[picked[0]], t, rng, mask_ratio, cutoff_ratio, dropout_rate)
    second = apply_augmentation(kinds[picked[1]], t, rng, mask_ratio, cutoff_ratio, dropout_rate)
    return first, second
