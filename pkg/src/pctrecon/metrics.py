"""Reconstruction quality measures: relative error, multilevel Otsu
segmentation and the misclassified-pixel fraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_N_BINS = 256


@dataclass(frozen=True)
class MetricReport:
    relative_error: float
    segmentation_error: float
    thresholds: tuple[float, ...]
    class_counts: tuple[int, ...]


def relative_error(u: np.ndarray, u_star: np.ndarray) -> float:
    """Relative 2-norm error ||u - u*|| / ||u*|| over flattened grids."""
    u = np.asarray(u, dtype=float)
    u_star = np.asarray(u_star, dtype=float)
    if u.shape != u_star.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {u_star.shape}")
    denom = np.linalg.norm(u_star.ravel())
    if denom == 0:
        raise ValueError("ground truth has zero norm")
    return float(np.linalg.norm((u - u_star).ravel()) / denom)


def otsu_multilevel(u: np.ndarray, n_classes: int) -> tuple[float, ...]:
    """Exhaustive multilevel Otsu thresholds on a 256-bin histogram.

    Maximizes the between-class variance over all (n_classes - 1)-tuples of
    bin edges; ties resolve to the lexicographically smallest tuple. Returned
    thresholds are strictly increasing values; pixels with value <= t belong
    below the threshold.
    """
    if n_classes not in (2, 3, 4):
        raise ValueError("n_classes must be 2, 3 or 4")
    u = np.asarray(u, dtype=float)
    lo = float(u.min())
    hi = float(u.max())
    if hi <= lo:
        raise ValueError("constant image has no valid threshold")
    if np.unique(u).size < n_classes:
        raise ValueError(f"need at least {n_classes} distinct values")

    counts, edges = np.histogram(u.ravel(), bins=_N_BINS, range=(lo, hi))
    p = counts / counts.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    cp = np.cumsum(p)                      # P(0..i)
    cs = np.cumsum(p * centers)            # sum p*x over 0..i

    def class_term(p_lo, p_hi, s_lo, s_hi):
        # contribution S^2 / P of the class covering bins (lo, hi]
        pk = p_hi - p_lo
        sk = s_hi - s_lo
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(pk > 0, sk**2 / np.where(pk > 0, pk, 1.0), -np.inf)

    k = n_classes - 1
    best_val = -np.inf
    best = None
    idx = np.arange(_N_BINS - 1)  # candidate edges after bin i

    if k == 1:
        vals = class_term(0.0, cp[idx], 0.0, cs[idx]) + class_term(
            cp[idx], 1.0, cs[idx], cs[-1]
        )
        j = int(np.argmax(vals))
        best_val = vals[j]
        best = (j,)
    elif k == 2:
        for i in idx:
            j = np.arange(i + 1, _N_BINS - 1)
            if j.size == 0:
                continue
            vals = (
                class_term(0.0, cp[i], 0.0, cs[i])
                + class_term(cp[i], cp[j], cs[i], cs[j])
                + class_term(cp[j], 1.0, cs[j], cs[-1])
            )
            jj = int(np.argmax(vals))
            if vals[jj] > best_val:
                best_val = vals[jj]
                best = (int(i), int(j[jj]))
    else:
        for i in idx:
            for j2 in range(i + 1, _N_BINS - 1):
                j3 = np.arange(j2 + 1, _N_BINS - 1)
                if j3.size == 0:
                    continue
                vals = (
                    class_term(0.0, cp[i], 0.0, cs[i])
                    + class_term(cp[i], cp[j2], cs[i], cs[j2])
                    + class_term(cp[j2], cp[j3], cs[j2], cs[j3])
                    + class_term(cp[j3], 1.0, cs[j3], cs[-1])
                )
                jj = int(np.argmax(vals))
                if vals[jj] > best_val:
                    best_val = vals[jj]
                    best = (int(i), int(j2), int(j3[jj]))

    if best is None or not np.isfinite(best_val):
        raise ValueError("histogram cannot be split into the requested classes")
    return tuple(float(edges[i + 1]) for i in best)


def classify(u: np.ndarray, thresholds) -> np.ndarray:
    """Class index per pixel: the number of thresholds strictly below u."""
    t = np.asarray(thresholds, dtype=float)
    return np.searchsorted(t, np.asarray(u, dtype=float), side="left")


def segmentation_error(u: np.ndarray, labels_true: np.ndarray,
                       n_classes: int) -> float:
    """Misclassified-pixel fraction of the Otsu segmentation of u.

    Segmented classes (ordered by value) are matched to the true labels
    ordered by their mean of u, i.e. by increasing true material value for
    any reasonable reconstruction.
    """
    u = np.asarray(u, dtype=float)
    labels_true = np.asarray(labels_true)
    if u.shape != labels_true.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {labels_true.shape}")
    uniq = np.unique(labels_true)
    if uniq.size != n_classes:
        raise ValueError(
            f"ground truth has {uniq.size} classes, expected {n_classes}"
        )
    seg = classify(u, otsu_multilevel(u, n_classes))
    means = np.array([u[labels_true == lab].mean() for lab in uniq])
    ordered = uniq[np.argsort(means, kind="stable")]
    mapped = ordered[seg]
    return float(np.mean(mapped != labels_true))


def metric_report(u: np.ndarray, beta_true: np.ndarray,
                  labels_true: np.ndarray, n_classes: int = 3) -> MetricReport:
    """Bundle both quality measures against a ground-truth phantom."""
    thresholds = otsu_multilevel(u, n_classes)
    seg = classify(u, thresholds)
    counts = tuple(int(c) for c in np.bincount(seg.ravel(), minlength=n_classes))
    return MetricReport(
        relative_error=relative_error(u, beta_true),
        segmentation_error=segmentation_error(u, labels_true, n_classes),
        thresholds=thresholds,
        class_counts=counts,
    )
