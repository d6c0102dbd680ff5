"""Reference methods and single-mechanism ablations of the full algorithm.

Every variant runs through the same engine as the full algorithm, with
exactly one mechanism swapped out, so splits, seeds, architecture,
throttling, and the linear-growth rule stay identical across a comparison:

====================  =========================================================
self_train            one classifier, plain confidence ranking, pseudo-labels
                      augmented into the training pool with hard labels
weighted_aug          full selection pipeline, but pseudo-labels join the
                      labeled pool at a reduced per-example loss weight
tri_entropy           three classifiers on bootstrap resamples, agreement plus
                      lowest-mean-entropy ranking, majority-vote prediction
rst_no_subsample      one classifier on the full sets, max-softmax ranking
rst_no_pretrain       selection pipeline intact, but adopted pseudo-labels are
                      plain hard-label augmentation (no distillation, no
                      snapshot loss)
rst_plain_ce          full pipeline with the mixed loss replaced by plain
                      cross entropy (lam = 0, no snapshot capture)
rst_full              the unmodified algorithm
====================  =========================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import Document
from .errors import ValidationError
from .evaluation import evaluate_classifier
from .selftrain import RunConfig, RunResult, _run_engine, _seed_int, run_rst

__all__ = [
    "VARIANTS",
    "VariantSpec",
    "run_self_train",
    "run_weighted_aug",
    "run_tri_entropy",
    "run_ablation",
    "run_variant",
]

VARIANTS = (
    "self_train",
    "weighted_aug",
    "tri_entropy",
    "rst_no_subsample",
    "rst_no_pretrain",
    "rst_plain_ce",
    "rst_full",
)

# grid of pseudo-pool budgets validated for plain self-training, as fractions of |U|
SELF_TRAIN_CAP_GRID = (0.10, 0.25, 0.50, 1.00)

_P_VALSPLIT = 7  # seed purpose for carving the validation holdout


@dataclass
class VariantSpec:
    """A variant plus the knobs that only some variants consume."""

    variant: str
    config: RunConfig = field(default_factory=RunConfig)
    weight_pseudo: float = 0.5          # weighted_aug only
    validation_fraction: float = 0.0    # self_train only; 0 disables the cap search
    validation_metric: str = "macro_f1"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "weighted_aug" and not 0.0 < self.weight_pseudo <= 1.0:
            raise ValidationError(f"weight_pseudo must be in (0, 1], got {self.weight_pseudo}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValidationError("validation_fraction must be in [0, 1)")


def _holdout_stratified(L: Sequence[Document], fraction: float, seed: int
                        ) -> tuple[list[Document], list[Document]]:
    """Split L into (train, holdout) preserving class counts to the nearest integer."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_P_VALSPLIT,)))
    by_class: dict[int, list[Document]] = {}
    for doc in L:
        by_class.setdefault(doc.gold_label, []).append(doc)
    train, holdout = [], []
    for c in sorted(by_class):
        docs = by_class[c]
        k = int(round(fraction * len(docs)))
        order = rng.permutation(len(docs))
        holdout.extend(docs[i] for i in order[:k])
        train.extend(docs[i] for i in order[k:])
    train.sort(key=lambda d: d.id)
    holdout.sort(key=lambda d: d.id)
    return train, holdout


def run_self_train(L: Sequence[Document], U: Sequence[Document], config: RunConfig,
                   n_classes: int | None = None, validation_fraction: float = 0.0,
                   validation_metric: str = "macro_f1") -> RunResult:
    """Plain neural self-training: confidence selection, hard-label augmentation.

    With ``validation_fraction > 0`` a holdout is carved from L and the
    pseudo-label budget is validated over ``SELF_TRAIN_CAP_GRID`` (fractions
    of U); the best-scoring run wins, ties going to the smaller budget.
    Without a holdout the entire unlabeled set is consumed.
    """
    def engine(l_docs, u_docs):
        return _run_engine(
            l_docs, u_docs, config, variant="self_train", style="augment_hard",
            ranking="confidence", m=1, sample_ratio=100.0, n_classes=n_classes,
        )

    if validation_fraction <= 0.0:
        return engine(list(L), list(U))
    train, holdout = _holdout_stratified(L, validation_fraction, config.seed)
    if not holdout or not train:
        return engine(list(L), list(U))
    budgets: list[int] = []
    for frac in SELF_TRAIN_CAP_GRID:
        k = int(round(frac * len(U)))
        if k not in budgets:
            budgets.append(k)
    best = None
    for k in budgets:
        result = engine(train, list(U[:k]))
        value = evaluate_classifier(result.classifier, holdout, validation_metric, n_classes)
        if best is None or value > best[0]:
            best = (value, k, result)
    result = best[2]
    result.notes["validated_pseudo_budget"] = best[1]
    result.notes["validation_score"] = best[0]
    return result


def run_weighted_aug(L: Sequence[Document], U: Sequence[Document], config: RunConfig,
                     weight: float = 0.5, n_classes: int | None = None) -> RunResult:
    """Full selection pipeline, but pseudo-labels are augmented at loss weight ``weight``."""
    if not 0.0 < weight <= 1.0:
        raise ValidationError(f"weight must be in (0, 1], got {weight}")
    result = _run_engine(
        L, U, config, variant="weighted_aug", style="augment_hard", ranking="score",
        pseudo_weight=weight, n_classes=n_classes,
    )
    result.notes["weight_pseudo"] = weight
    return result


def run_tri_entropy(L: Sequence[Document], U: Sequence[Document], config: RunConfig,
                    n_classes: int | None = None) -> RunResult:
    """Tri-training with entropy selection and majority-vote prediction.

    Three classifiers train on bootstrap resamples of L plus the shared
    pseudo-label pool; unanimous candidates are ranked by ascending mean
    output entropy.
    """
    return _run_engine(
        L, U, config, variant="tri_entropy", style="augment_hard", ranking="entropy",
        m=3, sampling="bootstrap", n_classes=n_classes, final_vote=True,
    )


def run_ablation(spec: VariantSpec, L: Sequence[Document], U: Sequence[Document],
                 n_classes: int | None = None,
                 finetune_hook: Callable | None = None) -> RunResult:
    """Dispatch a variant run; ``rst_full`` routes straight to the plain algorithm."""
    config = spec.config
    if spec.variant == "rst_full":
        return run_rst(L, U, config, n_classes=n_classes, finetune_hook=finetune_hook)
    if spec.variant == "self_train":
        return run_self_train(L, U, config, n_classes=n_classes,
                              validation_fraction=spec.validation_fraction,
                              validation_metric=spec.validation_metric)
    if spec.variant == "weighted_aug":
        return run_weighted_aug(L, U, config, weight=spec.weight_pseudo, n_classes=n_classes)
    if spec.variant == "tri_entropy":
        return run_tri_entropy(L, U, config, n_classes=n_classes)
    if spec.variant == "rst_no_subsample":
        return _run_engine(
            L, U, config, variant="rst_no_subsample", style="rst", ranking="confidence",
            m=1, sample_ratio=100.0, n_classes=n_classes, finetune_hook=finetune_hook,
        )
    if spec.variant == "rst_no_pretrain":
        return _run_engine(
            L, U, config, variant="rst_no_pretrain", style="augment_hard", ranking="score",
            pseudo_weight=1.0, n_classes=n_classes,
        )
    if spec.variant == "rst_plain_ce":
        return _run_engine(
            L, U, config, variant="rst_plain_ce", style="rst", ranking="score",
            use_snapshot=False, lam=0.0, n_classes=n_classes, finetune_hook=finetune_hook,
        )
    raise ValidationError(f"unknown variant {spec.variant!r}")


def run_variant(variant: str, L: Sequence[Document], U: Sequence[Document],
                config: RunConfig, n_classes: int | None = None,
                finetune_hook: Callable | None = None, **spec_kwargs) -> RunResult:
    """Convenience dispatcher by variant name."""
    spec = VariantSpec(variant=variant, config=config, **spec_kwargs)
    return run_ablation(spec, L, U, n_classes=n_classes, finetune_hook=finetune_hook)
