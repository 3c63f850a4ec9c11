"""Nearest-neighbour gaze regression on rendered images: a label-consistency check."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import stats as sps

from ..errors import TooFewImages

FEATURE_SIZE = (15, 10)  # width, height
MIN_IMAGES = 50


@dataclass(frozen=True)
class KnnResult:
    mean_error: float  # degrees
    baseline_error: float  # predicting the mean training gaze
    errors: np.ndarray
    baseline_errors: np.ndarray
    n_train: int
    n_test: int


def image_features(path) -> np.ndarray:
    """Grayscale pixels box-downsampled to 15x10, standardised per image."""
    img = PILImage.open(path).convert("L").resize(FEATURE_SIZE, PILImage.Resampling.BOX)
    f = np.asarray(img, dtype=np.float64).ravel()
    f = f - f.mean()
    n = np.linalg.norm(f)
    return f / n if n > 0 else f


def _angles(pred: np.ndarray, true: np.ndarray) -> np.ndarray:
    pred = pred / np.linalg.norm(pred, axis=1, keepdims=True)
    return np.degrees(np.arccos(np.clip(np.sum(pred * true, axis=1), -1.0, 1.0)))


def load_dataset(manifest: dict, root=None):
    root = Path(root or manifest.get("_root", "."))
    entries = sorted(manifest["entries"], key=lambda e: (e["seed"], e["index"]))
    feats, gaze = [], []
    for e in entries:
        feats.append(image_features(root / e["image"]))
        rec = json.loads((root / e["label"]).read_text())
        gaze.append(rec["gaze"]["vector_camera"])
    return np.array(feats), np.array(gaze, dtype=np.float64)


def knn_predict(train_x, train_y, test_x, k: int) -> np.ndarray:
    d2 = (test_x**2).sum(1)[:, None] - 2 * test_x @ train_x.T + (train_x**2).sum(1)[None, :]
    # stable sort so ties resolve by training order
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
    pred = train_y[nn].mean(axis=1)
    return pred / np.linalg.norm(pred, axis=1, keepdims=True)


def eval_knn(
    manifest: dict,
    train_fraction: float = 0.8,
    k: int = 3,
    root=None,
    shuffle_labels: bool = False,
    shuffle_seed: int = 0,
    test_on_train: bool = False,
    data=None,
) -> KnnResult:
    """Mean angular error of k-NN gaze prediction on a seed-ordered split."""
    x, y = data if data is not None else load_dataset(manifest, root)
    n = len(x)
    if n < MIN_IMAGES:
        raise TooFewImages(f"need at least {MIN_IMAGES} images, have {n}")
    n_train = min(n - 1, max(1, int(round(train_fraction * n))))
    tr_x, tr_y = x[:n_train], y[:n_train]
    te_x, te_y = (tr_x, tr_y) if test_on_train else (x[n_train:], y[n_train:])
    if shuffle_labels:
        tr_y = tr_y[np.random.default_rng(shuffle_seed).permutation(len(tr_y))]
    pred = knn_predict(tr_x, tr_y, te_x, k)
    err = _angles(pred, te_y)
    mean_g = tr_y.mean(axis=0)
    base = _angles(np.broadcast_to(mean_g, te_y.shape).copy(), te_y)
    return KnnResult(float(err.mean()), float(base.mean()), err, base, n_train, len(te_x))


def compare_to_shuffled(manifest: dict, k: int = 3, train_fraction: float = 0.8, root=None, n_shuffles: int = 20):
    """Real-label errors against shuffled-label errors on the same test set.

    Returns (real result, list of shuffled results, one-sided paired p-value that
    real errors are smaller than the averaged shuffled errors).
    """
    data = load_dataset(manifest, root)
    real = eval_knn(manifest, train_fraction, k, data=data)
    shuffled = [eval_knn(manifest, train_fraction, k, shuffle_labels=True, shuffle_seed=s, data=data) for s in range(n_shuffles)]
    avg_shuffled = np.mean([s.errors for s in shuffled], axis=0)
    p = sps.wilcoxon(real.errors, avg_shuffled, alternative="less").pvalue
    return real, shuffled, float(p)
