"""The robust self-training orchestrator.

One bootstrapping iteration trains ``m`` fresh classifiers, each on its own
random subsample of the pseudo-label pool (distilled in curriculum order)
and of the labeled set (finetuned with the snapshot-anchored mixed loss).
The classifiers then jointly label the unlabeled pool; documents whose
predicted labels agree everywhere are scored with the entropy/diversity
selection score, throttled at a confidence cutoff, and the best ``step``
of them move into the pseudo-label pool tagged with the iteration number.
When the unlabeled pool is exhausted, a final classifier is pretrained on
the whole ordered pool and finetuned on the whole labeled set.

Determinism: every random choice draws from a generator derived from
``(config.seed, iteration, classifier index, purpose)`` via
``numpy.random.SeedSequence`` spawn keys.  No stream is shared between
classifiers, so training the classifiers of one iteration sequentially or
in parallel produces bit-identical results.

The private :func:`_run_engine` carries the ablation knobs (training style,
ranking criterion, sampling mode) that :mod:`rst.baselines` uses to swap
out exactly one mechanism at a time; the public :func:`run_rst` is the
plain full algorithm.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import infometrics
from .classifier import SoftmaxNet, TrainParams, VoteEnsemble, softmax_rows
from .data import Document
from .errors import ContractViolation, ValidationError

__all__ = [
    "RunConfig",
    "PseudoLabel",
    "Candidate",
    "IterationRecord",
    "RunResult",
    "order_curriculum",
    "label_and_score",
    "select_top",
    "growth_step",
    "rst_iteration",
    "run_rst",
    "config_fingerprint",
    "data_fingerprint",
]

# purposes for seed derivation; values are part of the reproducibility contract
_P_INIT = 1
_P_S_SAMPLE = 2
_P_L_SAMPLE = 3
_P_CURRICULUM = 4
_P_FINAL_INIT = 5
_P_FINAL_CURRICULUM = 6


@dataclass
class RunConfig:
    """Hyperparameters of one self-training run."""

    K: int = 100                        # per-iteration intake ceiling
    R: float = 70.0                     # subsample ratio, percent
    lam: float = 0.3                    # weight of the anti-drift loss term
    temperature: float = 2.0            # distillation temperature
    alpha: float = 1e-4                 # selection-score smoothing
    m: int = 2                          # number of classifiers
    confidence_threshold: float = 0.9   # throttling cutoff on mean confidence
    growth_cap_fraction: float = 0.10   # linear-growth cap on intake
    mix_fraction: float = 0.20          # cross-iteration mixing in the curriculum
    hidden_width: int = 0               # classifier hidden width (0 = linear)
    seed: int = 0
    parallel: bool = False
    train: TrainParams = field(default_factory=TrainParams)

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError(f"K must be >= 1, got {self.K}")
        if not 0.0 < self.R <= 100.0:
            raise ValidationError(f"R must be in (0, 100], got {self.R}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lam must be in [0, 1], got {self.lam}")
        if self.temperature < 1.0:
            raise ValidationError(f"temperature must be >= 1, got {self.temperature}")
        if self.alpha <= 0.0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if self.m < 2:
            raise ValidationError(f"m must be >= 2, got {self.m}")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValidationError("confidence_threshold must be in (0, 1]")
        if not 0.0 <= self.growth_cap_fraction <= 1.0:
            raise ValidationError("growth_cap_fraction must be in [0, 1]")
        if not 0.0 <= self.mix_fraction <= 1.0:
            raise ValidationError("mix_fraction must be in [0, 1]")
        if self.hidden_width < 0:
            raise ValidationError("hidden_width must be >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass
class PseudoLabel:
    """A document adopted from the unlabeled pool, with its stored teacher signal."""

    doc_id: str
    mean_logits: np.ndarray
    soft_label: np.ndarray
    hard_label: int
    iteration: int

    @classmethod
    def from_mean_logits(cls, doc_id: str, mean_logits, iteration: int) -> "PseudoLabel":
        mean_logits = np.asarray(mean_logits, dtype=np.float64)
        soft = softmax_rows(mean_logits[None, :], 1.0)[0]
        return cls(doc_id, mean_logits, soft, int(np.argmax(soft)), int(iteration))


@dataclass
class Candidate:
    """A ranked unlabeled document.

    ``score`` is the ranking value, higher is better: the selection score
    under ``"score"`` ranking, the mean confidence under ``"confidence"``,
    or minus the mean output entropy under ``"entropy"``.
    """

    doc_id: str
    hard_label: int
    mean_logits: np.ndarray
    score: float
    confidence: float
    passed_throttle: bool


@dataclass
class IterationRecord:
    iteration: int
    step: int
    n_agree: int
    n_throttled: int
    selected_ids: list[str]
    min_score: float
    max_score: float
    n_labeled: int
    n_pseudo: int
    n_unlabeled: int
    snapshot_checksums: list[list[str]]  # [before, after] finetuning, per classifier
    fallback_used: bool

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "step": self.step,
            "n_agree": self.n_agree,
            "n_throttled": self.n_throttled,
            "selected_ids": list(self.selected_ids),
            "min_score": self.min_score,
            "max_score": self.max_score,
            "n_labeled": self.n_labeled,
            "n_pseudo": self.n_pseudo,
            "n_unlabeled": self.n_unlabeled,
            "snapshot_checksums": [list(pair) for pair in self.snapshot_checksums],
            "fallback_used": self.fallback_used,
        }


@dataclass
class RunResult:
    classifier: object  # SoftmaxNet, or VoteEnsemble for voting variants
    records: list[IterationRecord]
    pseudo_labels: list[PseudoLabel]
    config: RunConfig
    variant: str
    data_fingerprint: str
    final_snapshot_checksums: list[str] | None = None
    notes: dict = field(default_factory=dict)

    def config_fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def report_lines(self, extra: Mapping | None = None) -> list[str]:
        lines = []
        for rec in self.records:
            row = rec.to_dict()
            row["variant"] = self.variant
            row["config_fingerprint"] = self.config_fingerprint()
            row["data_fingerprint"] = self.data_fingerprint
            if extra:
                row.update(extra)
            lines.append(json.dumps(row, sort_keys=True))
        return lines

    def write_report(self, path, extra: Mapping | None = None) -> None:
        """One json record per iteration, line-delimited."""
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.report_lines(extra):
                fh.write(line + "\n")


def config_fingerprint(config: RunConfig) -> str:
    """Stable digest of every hyperparameter, including optimizer settings."""
    payload = {
        "K": config.K, "R": config.R, "lam": config.lam,
        "temperature": config.temperature, "alpha": config.alpha, "m": config.m,
        "confidence_threshold": config.confidence_threshold,
        "growth_cap_fraction": config.growth_cap_fraction,
        "mix_fraction": config.mix_fraction, "hidden_width": config.hidden_width,
        "seed": config.seed,
        "train": {
            "learning_rate": config.train.learning_rate,
            "batch_size": config.train.batch_size,
            "epochs": config.train.epochs,
            "temperature": config.train.temperature,
            "lam": config.train.lam,
            "optimizer": config.train.optimizer,
            "linear_decay": config.train.linear_decay,
        },
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def data_fingerprint(labeled: Sequence[Document], unlabeled: Sequence[Document]) -> str:
    """Digest of the split: ids, labels, and feature bytes of L and U."""
    digest = hashlib.sha256()
    for tag, docs in (("L", labeled), ("U", unlabeled)):
        digest.update(tag.encode())
        for doc in docs:
            digest.update(doc.id.encode("utf-8"))
            digest.update(str(doc.gold_label).encode())
            digest.update(np.ascontiguousarray(doc.features, dtype=np.float64).tobytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# seeded stream derivation
# ---------------------------------------------------------------------------

def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _seed_int(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def _subsample(items: list, ratio_percent: float, rng: np.random.Generator) -> list:
    """Without-replacement sample of ceil(ratio% * len) items, original order kept."""
    if not items:
        return []
    k = min(len(items), math.ceil(ratio_percent / 100.0 * len(items)))
    idx = rng.choice(len(items), size=k, replace=False)
    idx.sort()
    return [items[i] for i in idx]


def _bootstrap(items: list, rng: np.random.Generator) -> list:
    """With-replacement sample of len(items) items."""
    if not items:
        return []
    idx = rng.integers(0, len(items), size=len(items))
    return [items[i] for i in idx]


# ---------------------------------------------------------------------------
# curriculum ordering
# ---------------------------------------------------------------------------

def order_curriculum(pseudo_labels: Sequence[PseudoLabel], mix_fraction: float,
                     seed: int) -> list[PseudoLabel]:
    """Order pseudo-labels newest-iteration-first for distillation.

    The primary order is by descending iteration tag, so the noisiest labels
    are seen first and the most trusted (earliest) ones last, where they
    overwrite best.  Members are shuffled within their block, and a seeded
    ``mix_fraction`` of all items is pulled out and re-inserted at uniform
    positions, which mixes iterations within batches without losing or
    duplicating any element.
    """
    if not 0.0 <= mix_fraction <= 1.0:
        raise ValidationError(f"mix_fraction must be in [0, 1], got {mix_fraction}")
    items = list(pseudo_labels)
    if not items:
        return []
    rng = np.random.default_rng(seed)
    tags = sorted({p.iteration for p in items}, reverse=True)
    ordered: list[PseudoLabel] = []
    for tag in tags:
        block = [p for p in items if p.iteration == tag]
        ordered.extend(block[i] for i in rng.permutation(len(block)))
    n_float = int(round(mix_fraction * len(items)))
    if len(tags) < 2 or n_float == 0:
        return ordered
    float_at = set(rng.choice(len(ordered), size=n_float, replace=False).tolist())
    floaters = [p for i, p in enumerate(ordered) if i in float_at]
    spine = [p for i, p in enumerate(ordered) if i not in float_at]
    for p in floaters:
        spine.insert(int(rng.integers(0, len(spine) + 1)), p)
    return spine


# ---------------------------------------------------------------------------
# labeling, scoring, selection
# ---------------------------------------------------------------------------

def label_and_score(classifiers: Sequence[SoftmaxNet], docs: Sequence[Document],
                    config: RunConfig, ranking: str = "score") -> tuple[list[Candidate], int, int]:
    """Label every document with the classifier committee and rank the candidates.

    Documents whose predicted labels disagree across classifiers are treated
    as noise and dropped.  Survivors get a ranking value per ``ranking``
    (see :class:`Candidate`); the throttle flag marks candidates whose mean
    confidence reaches ``config.confidence_threshold``.

    If no document survives the agreement filter (only plausible while the
    classifiers are still near-random), all documents are kept and labeled
    by the averaged logits so the surrounding loop can make progress.

    Returns ``(candidates, n_agree, n_throttled)``.
    """
    if ranking not in ("score", "confidence", "entropy"):
        raise ValidationError(f"unknown ranking {ranking!r}")
    if not docs:
        return [], 0, 0
    X = np.stack([d.features for d in docs])
    logit_stack = np.stack([c.logits(X) for c in classifiers])  # (m, N, n)
    prob_stack = softmax_rows(logit_stack, 1.0)
    votes = prob_stack.argmax(axis=2)
    agree = np.all(votes == votes[0], axis=0)
    n_agree = int(agree.sum())
    mean_logits = logit_stack.mean(axis=0)
    mean_probs = prob_stack.mean(axis=0)
    confidence = mean_probs.max(axis=1)
    keep = np.flatnonzero(agree) if n_agree > 0 else np.arange(len(docs))
    hard = mean_logits[keep].argmax(axis=1)
    kept_stack = prob_stack[:, keep, :]
    if ranking == "score":
        values = infometrics.score_rows(kept_stack, config.alpha)
    elif ranking == "confidence":
        values = confidence[keep]
    else:
        m, n_keep, n = kept_stack.shape
        member_h = infometrics.entropy_rows(kept_stack.reshape(m * n_keep, n))
        values = -member_h.reshape(m, n_keep).mean(axis=0)
    candidates = [
        Candidate(
            doc_id=docs[i].id,
            hard_label=int(hard[k]),
            mean_logits=mean_logits[i],
            score=float(values[k]),
            confidence=float(confidence[i]),
            passed_throttle=bool(confidence[i] >= config.confidence_threshold),
        )
        for k, i in enumerate(keep)
    ]
    n_throttled = sum(1 for c in candidates if not c.passed_throttle)
    return candidates, n_agree, n_throttled


def growth_step(K: int, growth_cap_fraction: float, n_labeled: int, n_pseudo: int) -> int:
    """Per-iteration intake: min(K, ceil(cap * training-pool size)), at least 1."""
    return max(1, min(K, math.ceil(growth_cap_fraction * (n_labeled + n_pseudo))))


def select_top(candidates: Sequence[Candidate], K: int, n_labeled: int, n_pseudo: int,
               config: RunConfig) -> list[Candidate]:
    """Pick the highest-ranked candidates, at most the linear-growth step.

    Candidates that cleared the throttle are preferred; if none did, the
    throttle is waived over the agreement-filtered pool so the loop always
    progresses.  Ties break toward the lexicographically smaller id.
    """
    if not candidates:
        return []
    step = growth_step(K, config.growth_cap_fraction, n_labeled, n_pseudo)
    pool = [c for c in candidates if c.passed_throttle] or list(candidates)
    pool.sort(key=lambda c: (-c.score, c.doc_id))
    return pool[:step]


# ---------------------------------------------------------------------------
# iteration body
# ---------------------------------------------------------------------------

def _fit_distill_finetune(net: SoftmaxNet, s_ordered: Sequence[PseudoLabel],
                          l_docs: Sequence[Document], doc_lookup, config: RunConfig,
                          lam: float, use_snapshot: bool,
                          epoch_hook=None) -> list[str] | None:
    """Distill the ordered pool into ``net``, then finetune on labeled docs.

    Returns the snapshot checksum [before, after] finetuning, or None when
    the snapshot is skipped (plain-CE training, which requires lam == 0).
    """
    if s_ordered:
        Xs = np.stack([doc_lookup[p.doc_id].features for p in s_ordered])
        targets = softmax_rows(np.stack([p.mean_logits for p in s_ordered]), config.temperature)
        net.train_soft(Xs, targets, config.temperature, config.train)
    ids = [d.id for d in l_docs]
    Xl = np.stack([d.features for d in l_docs])
    yl = np.array([d.gold_label for d in l_docs], dtype=np.int64)
    if not use_snapshot:
        if lam != 0.0:
            raise ContractViolation("skipping the snapshot requires lam == 0")
        net.train_finetune(Xl, yl, ids, None, 0.0, config.temperature, config.train,
                           epoch_hook=epoch_hook)
        return None
    snap = net.capture_snapshot(ids, Xl, config.temperature)
    before = snap.checksum()
    net.train_finetune(Xl, yl, ids, snap, lam, config.temperature, config.train,
                       epoch_hook=epoch_hook)
    return [before, snap.checksum()]


def _fit_augment_hard(net: SoftmaxNet, s_pool: Sequence[PseudoLabel],
                      l_docs: Sequence[Document], doc_lookup, config: RunConfig,
                      pseudo_weight: float) -> None:
    """Train ``net`` with plain cross entropy on labeled docs plus hard pseudo-labels."""
    X_rows = [d.features for d in l_docs]
    y_rows = [d.gold_label for d in l_docs]
    weights = [1.0] * len(l_docs)
    for p in s_pool:
        X_rows.append(doc_lookup[p.doc_id].features)
        y_rows.append(p.hard_label)
        weights.append(pseudo_weight)
    X = np.stack(X_rows)
    y = np.array(y_rows, dtype=np.int64)
    w = np.array(weights, dtype=np.float64)
    if np.all(w == 1.0):
        w = None
    net.train_hard(X, y, config.train, sample_weight=w, shuffle=True)


def _engine_iteration(L, U, S, config: RunConfig, iteration: int, doc_lookup, n_classes: int,
                      *, style: str, ranking: str, pseudo_weight: float, m: int,
                      sample_ratio: float, sampling: str, use_snapshot: bool, lam: float):
    """One generalized bootstrapping iteration; returns (S', U', record, nets)."""
    if not U:
        raise ValidationError("the unlabeled pool must be nonempty")
    dim = L[0].features.shape[0]

    def train_one(ci: int) -> tuple[SoftmaxNet, list[str] | None]:
        net = SoftmaxNet(dim, n_classes, hidden_width=config.hidden_width,
                         seed=_seed_int(config.seed, iteration, ci, _P_INIT))
        if sampling == "bootstrap":
            l_sub = _bootstrap(L, _stream(config.seed, iteration, ci, _P_L_SAMPLE))
            s_sub = list(S)
        else:
            l_sub = _subsample(L, sample_ratio, _stream(config.seed, iteration, ci, _P_L_SAMPLE))
            s_sub = _subsample(S, sample_ratio, _stream(config.seed, iteration, ci, _P_S_SAMPLE))
        if style == "rst":
            ordered = order_curriculum(
                s_sub, config.mix_fraction, _seed_int(config.seed, iteration, ci, _P_CURRICULUM)
            )
            checksums = _fit_distill_finetune(net, ordered, l_sub, doc_lookup, config,
                                              lam, use_snapshot)
            return net, checksums
        _fit_augment_hard(net, s_sub, l_sub, doc_lookup, config, pseudo_weight)
        return net, None

    if config.parallel and m > 1:
        with ThreadPoolExecutor(max_workers=m) as pool:
            outcomes = list(pool.map(train_one, range(m)))
    else:
        outcomes = [train_one(ci) for ci in range(m)]
    nets = [net for net, _ in outcomes]
    checksum_pairs = [pair for _, pair in outcomes if pair is not None]

    candidates, n_agree, n_throttled = label_and_score(nets, U, config, ranking=ranking)
    selected = select_top(candidates, config.K, len(L), len(S), config)
    fallback = n_agree == 0 or all(not c.passed_throttle for c in candidates)
    selected_ids = [c.doc_id for c in selected]
    id_set = set(selected_ids)
    S_new = list(S) + [
        PseudoLabel.from_mean_logits(c.doc_id, c.mean_logits, iteration) for c in selected
    ]
    U_new = [d for d in U if d.id not in id_set]
    record = IterationRecord(
        iteration=iteration,
        step=len(selected),
        n_agree=n_agree,
        n_throttled=n_throttled,
        selected_ids=selected_ids,
        min_score=float(min(c.score for c in selected)) if selected else float("nan"),
        max_score=float(max(c.score for c in selected)) if selected else float("nan"),
        n_labeled=len(L),
        n_pseudo=len(S_new),
        n_unlabeled=len(U_new),
        snapshot_checksums=checksum_pairs,
        fallback_used=bool(fallback),
    )
    return S_new, U_new, record, nets


def rst_iteration(L: Sequence[Document], U: Sequence[Document], S: Sequence[PseudoLabel],
                  config: RunConfig, iteration: int | None = None,
                  doc_lookup: Mapping[str, Document] | None = None,
                  n_classes: int | None = None):
    """One full-algorithm iteration; returns ``(S', U', record)``.

    ``doc_lookup`` must cover every document referenced by ``S``; it defaults
    to the documents of L and U, which suffices whenever S is empty.  The
    labeled set is read, never modified.
    """
    L, U, S = list(L), list(U), list(S)
    if iteration is None:
        iteration = max((p.iteration for p in S), default=0) + 1
    if doc_lookup is None:
        doc_lookup = {d.id: d for d in L} | {d.id: d for d in U}
    if n_classes is None:
        n_classes = max(d.gold_label for d in L) + 1
    S_new, U_new, record, _ = _engine_iteration(
        L, U, S, config, iteration, doc_lookup, n_classes,
        style="rst", ranking="score", pseudo_weight=1.0, m=config.m,
        sample_ratio=config.R, sampling="ratio", use_snapshot=True, lam=config.lam,
    )
    return S_new, U_new, record


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

def _check_inputs(L, U, n_classes):
    if not L:
        raise ValidationError("the labeled set must be nonempty")
    if any(d.gold_label is None for d in L):
        raise ValidationError("labeled documents must carry gold labels")
    dims = {d.features.shape[0] for d in L} | {d.features.shape[0] for d in U}
    if len(dims) != 1:
        raise ValidationError(f"inconsistent feature dims: {sorted(dims)}")
    ids = [d.id for d in L] + [d.id for d in U]
    if len(set(ids)) != len(ids):
        raise ValidationError("document ids must be unique across L and U")
    if n_classes is None:
        n_classes = max(d.gold_label for d in L) + 1
    return n_classes


def _run_engine(L: Sequence[Document], U: Sequence[Document], config: RunConfig, *,
                variant: str, style: str, ranking: str, pseudo_weight: float = 1.0,
                m: int | None = None, sample_ratio: float | None = None,
                sampling: str = "ratio", use_snapshot: bool = True, lam: float | None = None,
                n_classes: int | None = None, final_vote: bool = False,
                finetune_hook: Callable | None = None) -> RunResult:
    """Run a self-training variant to exhaustion of U, then fit the final classifier."""
    L, U = list(L), list(U)
    n_classes = _check_inputs(L, U, n_classes)
    m = config.m if m is None else m
    sample_ratio = config.R if sample_ratio is None else sample_ratio
    lam = config.lam if lam is None else lam
    dim = L[0].features.shape[0]
    doc_lookup = {d.id: d for d in L} | {d.id: d for d in U}
    fingerprint = data_fingerprint(L, U)

    S: list[PseudoLabel] = []
    records: list[IterationRecord] = []
    U_cur = list(U)
    iteration = 0
    while U_cur:
        iteration += 1
        S, U_cur, record, _ = _engine_iteration(
            L, U_cur, S, config, iteration, doc_lookup, n_classes,
            style=style, ranking=ranking, pseudo_weight=pseudo_weight, m=m,
            sample_ratio=sample_ratio, sampling=sampling,
            use_snapshot=use_snapshot, lam=lam,
        )
        records.append(record)

    def fit_final(ci: int):
        net = SoftmaxNet(dim, n_classes, hidden_width=config.hidden_width,
                         seed=_seed_int(config.seed, 0, ci, _P_FINAL_INIT))
        if style == "rst":
            ordered = order_curriculum(
                S, config.mix_fraction, _seed_int(config.seed, 0, ci, _P_FINAL_CURRICULUM)
            )
            checksums = _fit_distill_finetune(net, ordered, L, doc_lookup, config,
                                              lam, use_snapshot, epoch_hook=finetune_hook)
            return net, checksums
        l_docs = _bootstrap(L, _stream(config.seed, 0, ci, _P_L_SAMPLE)) \
            if sampling == "bootstrap" else L
        _fit_augment_hard(net, S, l_docs, doc_lookup, config, pseudo_weight)
        return net, None

    if final_vote:
        finals = [fit_final(ci) for ci in range(m)]
        classifier = VoteEnsemble([net for net, _ in finals])
        final_checksums = None
    else:
        classifier, final_checksums = fit_final(0)

    return RunResult(
        classifier=classifier,
        records=records,
        pseudo_labels=S,
        config=config,
        variant=variant,
        data_fingerprint=fingerprint,
        final_snapshot_checksums=final_checksums,
    )


def run_rst(L: Sequence[Document], U: Sequence[Document], config: RunConfig,
            n_classes: int | None = None,
            finetune_hook: Callable | None = None) -> RunResult:
    """Run the full robust self-training algorithm.

    Iterates until U is empty (guaranteed: each iteration adopts at least
    one document), then pretrains the final classifier on the whole ordered
    pseudo-label pool and finetunes it on the whole labeled set with the
    mixed objective.  With an empty U the loop degenerates to a supervised
    classifier finetuned against its own fresh snapshot.

    ``finetune_hook(net, epoch)`` fires after every epoch of the final
    finetune, for convergence tracing.
    """
    return _run_engine(
        L, U, config, variant="rst_full", style="rst", ranking="score",
        n_classes=n_classes, finetune_hook=finetune_hook,
    )
