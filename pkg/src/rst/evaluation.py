"""Metrics and analysis harnesses: drift curves, sensitivity sweeps, convergence traces.

Zero-division convention: precision or recall with an empty denominator is
0, and so is the F1 of a class that appears in neither predictions nor
gold.  This matters at desk scale where a tiny test set can miss a class
entirely.

Curves are plain tabular data (:class:`CurvePoint` rows, CSV on disk);
plotting is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data import Document
from .errors import ValidationError
from .selftrain import RunConfig, run_rst

__all__ = [
    "ConfusionMatrix",
    "CurvePoint",
    "confusion",
    "metrics",
    "evaluate_classifier",
    "drift_curve",
    "sweep",
    "convergence_trace",
    "write_curve_csv",
    "CURVE_CSV_HEADER",
]

METRIC_MODES = ("accuracy", "macro_f1", "f1_positive")

CURVE_CSV_HEADER = "variant,param,value,seed,metric,score"

#: seed value marking aggregate (mean over seeds) rows
MEAN_SEED = -1


@dataclass
class ConfusionMatrix:
    """Count matrix with gold labels on rows and predictions on columns."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def precision(self, c: int) -> float:
        denom = self.counts[:, c].sum()
        return float(self.counts[c, c] / denom) if denom else 0.0

    def recall(self, c: int) -> float:
        denom = self.counts[c, :].sum()
        return float(self.counts[c, c] / denom) if denom else 0.0

    def f1(self, c: int) -> float:
        p, r = self.precision(c), self.recall(c)
        return 2.0 * p * r / (p + r) if (p + r) else 0.0

    def per_class_f1(self) -> list[float]:
        return [self.f1(c) for c in range(self.n_classes)]

    def macro_f1(self) -> float:
        return float(np.mean(self.per_class_f1()))


def confusion(predictions, gold, n_classes: int | None = None) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if predictions.shape != gold.shape or predictions.ndim != 1:
        raise ValidationError(
            f"predictions and gold must be equal-length 1-D, got {predictions.shape} vs {gold.shape}"
        )
    if n_classes is None:
        n_classes = int(max(predictions.max(initial=0), gold.max(initial=0))) + 1
    if predictions.size and (
        predictions.min() < 0 or gold.min() < 0
        or predictions.max() >= n_classes or gold.max() >= n_classes
    ):
        raise ValidationError(f"labels out of range [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (gold, predictions), 1)
    return ConfusionMatrix(counts)


def metrics(predictions, gold, mode: str, n_classes: int | None = None
            ) -> tuple[float, ConfusionMatrix]:
    """Score predictions against gold labels; returns (scalar, confusion matrix).

    ``f1_positive`` is the F1 of class 1, the minority/positive class by
    convention on imbalanced binary tasks.
    """
    if mode not in METRIC_MODES:
        raise ValidationError(f"unknown metric mode {mode!r}; choose from {METRIC_MODES}")
    cm = confusion(predictions, gold, n_classes)
    if mode == "accuracy":
        return cm.accuracy(), cm
    if mode == "macro_f1":
        return cm.macro_f1(), cm
    if cm.n_classes < 2:
        raise ValidationError("f1_positive needs at least 2 classes")
    return cm.f1(1), cm


def evaluate_classifier(classifier, test: Sequence[Document], mode: str,
                        n_classes: int | None = None) -> float:
    X = np.stack([d.features for d in test])
    gold = np.array([d.gold_label for d in test], dtype=np.int64)
    value, _ = metrics(classifier.predict(X), gold, mode, n_classes)
    return value


@dataclass
class CurvePoint:
    """One measurement: metric value ``y`` at abscissa ``x`` for a (variant, seed) cell."""

    x: float
    y: float
    seed: int
    variant: str
    param: str = ""
    metric: str = ""


# ---------------------------------------------------------------------------
# harnesses
# ---------------------------------------------------------------------------

def drift_curve(variant: str, L: Sequence[Document], U: Sequence[Document],
                test: Sequence[Document], checkpoints: Sequence[int], config: RunConfig,
                seeds: Sequence[int], mode: str = "accuracy",
                n_classes: int | None = None) -> list[CurvePoint]:
    """Final-classifier metric at growing unlabeled-pool sizes.

    For each checkpoint c the variant runs from scratch on ``U[:c]``;
    checkpoint 0 is the supervised-only point.  Emits one curve per seed
    plus a mean curve under seed ``MEAN_SEED``.
    """
    from . import baselines  # runtime import; baselines builds on this module

    checkpoints = [int(c) for c in checkpoints]
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValidationError("checkpoints must be ascending")
    if checkpoints and checkpoints[-1] > len(U):
        raise ValidationError(f"checkpoint {checkpoints[-1]} exceeds |U| = {len(U)}")
    points = []
    for seed in seeds:
        for c in checkpoints:
            result = baselines.run_variant(
                variant, L, U[:c], replace(config, seed=seed), n_classes=n_classes
            )
            y = evaluate_classifier(result.classifier, test, mode, n_classes)
            points.append(CurvePoint(float(c), y, int(seed), variant, "n_unlabeled", mode))
    for c in checkpoints:
        ys = [p.y for p in points if p.x == float(c) and p.seed != MEAN_SEED]
        points.append(CurvePoint(float(c), float(np.mean(ys)), MEAN_SEED, variant,
                                 "n_unlabeled", mode))
    return points


_SWEEP_FIELDS = {"lambda": "lam", "sample_ratio": "R", "m": "m"}


def sweep(param: str, values: Sequence, L: Sequence[Document], U: Sequence[Document],
          test: Sequence[Document], config: RunConfig, seeds: Sequence[int],
          mode: str = "accuracy", n_classes: int | None = None
          ) -> tuple[list[CurvePoint], list[tuple[float, float, float]]]:
    """Full-algorithm sensitivity sweep over one hyperparameter.

    Returns one point per (value, seed) cell plus ``(value, mean, stdev)``
    summary rows; the mean is the plain arithmetic mean over seeds.
    """
    if param not in _SWEEP_FIELDS:
        raise ValidationError(f"unknown sweep parameter {param!r}; choose from {sorted(_SWEEP_FIELDS)}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    field_name = _SWEEP_FIELDS[param]
    points = []
    for value in values:
        for seed in seeds:
            cfg = replace(config, seed=int(seed), **{field_name: value})
            result = run_rst(L, U, cfg, n_classes=n_classes)
            y = evaluate_classifier(result.classifier, test, mode, n_classes)
            points.append(CurvePoint(float(value), y, int(seed), "rst_full", param, mode))
    summary = []
    for value in values:
        ys = [p.y for p in points if p.x == float(value)]
        summary.append((float(value), float(np.mean(ys)), float(np.std(ys))))
    return points, summary


def convergence_trace(variant: str, L: Sequence[Document], U: Sequence[Document],
                      test: Sequence[Document], config: RunConfig, mode: str = "accuracy",
                      n_classes: int | None = None) -> list[CurvePoint]:
    """Per-epoch test metric during the final classifier's finetune phase."""
    from . import baselines

    if variant not in ("rst_full", "rst_plain_ce"):
        raise ValidationError("convergence_trace supports rst_full and rst_plain_ce")
    points = []

    def hook(net, epoch):
        y = evaluate_classifier(net, test, mode, n_classes)
        points.append(CurvePoint(float(epoch + 1), y, config.seed, variant, "epoch", mode))

    baselines.run_variant(variant, L, U, config, n_classes=n_classes, finetune_hook=hook)
    return points


def write_curve_csv(path, points: Sequence[CurvePoint], meta: dict | None = None) -> None:
    """Write points in the stable column order, after one ``#`` meta line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta:
            pairs = " ".join(f"{k}={meta[k]}" for k in sorted(meta))
            fh.write(f"# {pairs}\n")
        fh.write(CURVE_CSV_HEADER + "\n")
        for p in points:
            fh.write(f"{p.variant},{p.param},{p.x!r},{p.seed},{p.metric},{p.y!r}\n")
