"""Corpus ingestion, feature extraction, synthetic benchmarks, splits, and noise.

Everything here is a pure function of its arguments and a seed, so corpora,
splits, and noise injections reproduce bit-for-bit across runs and
platforms.  Text featurization uses signed feature hashing with FNV-1a 64
(a fixed, published hash) rather than anything locale- or
interpreter-dependent.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "Document",
    "Corpus",
    "Split",
    "SynthSpec",
    "fnv1a_64",
    "featurize_hashed_bow",
    "load_jsonl",
    "synth",
    "stratified_split",
    "inject_label_noise",
    "inject_distractors",
]

DEFAULT_HASH_DIM = 2**14
DEFAULT_TOKEN_PATTERN = r"[a-z0-9]+"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass
class Document:
    """One classification unit: an id, a feature vector, and an optional gold label."""

    id: str
    features: np.ndarray
    gold_label: int | None = None


@dataclass
class Corpus:
    documents: list[Document]
    n_classes: int
    feature_dim: int
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.documents)


@dataclass
class Split:
    """Disjoint labeled/unlabeled/test partitions of a corpus.

    Unlabeled documents carry ``gold_label=None``; their true labels are
    kept aside in ``hidden_labels`` strictly for oracle-style diagnostics.
    """

    labeled: list[Document]
    unlabeled: list[Document]
    test: list[Document]
    hidden_labels: dict[str, int]


# ---------------------------------------------------------------------------
# feature hashing
# ---------------------------------------------------------------------------

def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash; fixed constants, identical on every platform."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def featurize_hashed_bow(
    texts: Sequence[str],
    dim: int = DEFAULT_HASH_DIM,
    lowercase: bool = True,
    token_pattern: str = DEFAULT_TOKEN_PATTERN,
) -> np.ndarray:
    """Signed hashed bag-of-words vectors, one L2-normalized row per text.

    A token lands in bucket ``hash & (dim - 1)`` with sign taken from bit 63
    of the same hash, a bit the bucket index never touches.  ``dim`` must be
    a power of two.  Empty texts map to the zero vector.
    """
    if dim < 2 or dim & (dim - 1):
        raise ValidationError(f"dim must be a power of two >= 2, got {dim}")
    if dim > 2**32:
        raise ValidationError("dim above 2**32 would overlap the sign bit")
    pattern = re.compile(token_pattern)
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for row, text in enumerate(texts):
        if lowercase:
            text = text.lower()
        for token in pattern.findall(text):
            h = fnv1a_64(token.encode("utf-8"))
            sign = -1.0 if (h >> 63) & 1 else 1.0
            out[row, h & (dim - 1)] += sign
        norm = np.linalg.norm(out[row])
        if norm > 0.0:
            out[row] /= norm
    return out


# ---------------------------------------------------------------------------
# jsonl corpora
# ---------------------------------------------------------------------------

def load_jsonl(
    path,
    dim: int = DEFAULT_HASH_DIM,
    n_classes: int | None = None,
    lowercase: bool = True,
    token_pattern: str = DEFAULT_TOKEN_PATTERN,
) -> Corpus:
    """Load a text corpus from a jsonl file of ``{"id", "text", "label"?}`` records.

    Malformed lines are reported with their line number; duplicate ids and
    out-of-range labels are errors.  ``n_classes`` defaults to
    ``max(label) + 1`` over the file.
    """
    records = []
    seen = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read corpus file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid json ({exc.msg})") from exc
        if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
            raise ValidationError(f"{path}:{lineno}: record needs 'id' and 'text' fields")
        doc_id = str(rec["id"])
        if doc_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate id {doc_id!r}")
        seen.add(doc_id)
        label = rec.get("label")
        if label is not None:
            if not isinstance(label, int) or isinstance(label, bool):
                raise ValidationError(f"{path}:{lineno}: label must be an integer")
            if label < 0:
                raise ValidationError(f"{path}:{lineno}: label {label} is negative")
        records.append((doc_id, str(rec["text"]), label))
    labels = [lab for _, _, lab in records if lab is not None]
    inferred = (max(labels) + 1) if labels else 0
    if n_classes is None:
        n_classes = inferred
    elif labels and inferred > n_classes:
        raise ValidationError(f"label {max(labels)} out of range for n_classes={n_classes}")
    feats = featurize_hashed_bow([t for _, t, _ in records], dim, lowercase, token_pattern)
    docs = [
        Document(doc_id, feats[i], label) for i, (doc_id, _, label) in enumerate(records)
    ]
    return Corpus(docs, n_classes=n_classes, feature_dim=dim, provenance={"kind": "file", "path": str(path)})


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

@dataclass
class SynthSpec:
    """Recipe for a seeded synthetic corpus.

    ``gaussian_blobs`` puts class means on distinct coordinate axes so that
    every pair of means sits exactly ``class_separation`` apart, then adds
    isotropic noise of scale ``overlap_noise_sigma``.  ``two_rings`` is a
    binary task with concentric rings of radius ``class_separation`` and
    ``2 * class_separation``.  Class sizes come from ``n_per_class`` or from
    ``class_weights`` applied to ``n_total`` with largest-remainder rounding
    (exact counts, no sampling jitter).
    """

    generator: str = "gaussian_blobs"
    n_classes: int = 2
    dim: int = 2
    n_per_class: int | None = None
    n_total: int | None = None
    class_weights: Sequence[float] | None = None
    class_separation: float = 3.0
    overlap_noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.generator not in ("gaussian_blobs", "two_rings"):
            raise ValidationError(f"unknown generator {self.generator!r}")
        if self.n_classes < 2:
            raise ValidationError("n_classes must be >= 2")
        if self.class_separation <= 0:
            raise ValidationError("class_separation must be > 0")
        if self.overlap_noise_sigma < 0:
            raise ValidationError("overlap_noise_sigma must be >= 0")
        if self.n_per_class is None and (self.n_total is None or self.class_weights is None):
            raise ValidationError("need n_per_class, or n_total with class_weights")
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=np.float64)
            if w.shape != (self.n_classes,) or np.any(w < 0):
                raise ValidationError("class_weights must be n_classes non-negative values")
            if abs(float(w.sum()) - 1.0) > 1e-9:
                raise ValidationError(f"class_weights sum to {float(w.sum())}, expected 1")
        if self.generator == "two_rings" and self.n_classes != 2:
            raise ValidationError("two_rings is a binary generator")
        if self.generator == "gaussian_blobs" and self.dim < self.n_classes:
            raise ValidationError("gaussian_blobs needs dim >= n_classes")
        if self.generator == "two_rings" and self.dim < 2:
            raise ValidationError("two_rings needs dim >= 2")


def largest_remainder_counts(total: int, weights: Sequence[float]) -> list[int]:
    """Integer allocation of ``total`` proportional to ``weights``, summing exactly."""
    weights = np.asarray(weights, dtype=np.float64)
    raw = total * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    remainder = total - int(counts.sum())
    # distribute leftovers to the largest fractional parts, index order on ties
    order = np.argsort(-(raw - counts), kind="stable")
    for i in range(remainder):
        counts[order[i]] += 1
    return [int(c) for c in counts]


def _class_counts(spec: SynthSpec) -> list[int]:
    if spec.n_per_class is not None:
        return [spec.n_per_class] * spec.n_classes
    return largest_remainder_counts(spec.n_total, spec.class_weights)


def synth(spec: SynthSpec) -> Corpus:
    """Generate a labeled synthetic corpus; identical output for identical specs."""
    rng = np.random.default_rng(spec.seed)
    counts = _class_counts(spec)
    total = sum(counts)
    X = np.empty((total, spec.dim), dtype=np.float64)
    y = np.empty(total, dtype=np.int64)
    cursor = 0
    if spec.generator == "gaussian_blobs":
        # means at (sep/sqrt(2)) * e_c: every pair exactly class_separation apart
        scale = spec.class_separation / math.sqrt(2.0)
        for c, count in enumerate(counts):
            mean = np.zeros(spec.dim)
            mean[c] = scale
            X[cursor : cursor + count] = mean + spec.overlap_noise_sigma * rng.standard_normal(
                (count, spec.dim)
            )
            y[cursor : cursor + count] = c
            cursor += count
    else:  # two_rings
        radii = (spec.class_separation, 2.0 * spec.class_separation)
        for c, count in enumerate(counts):
            theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
            r = radii[c] + spec.overlap_noise_sigma * rng.standard_normal(count)
            X[cursor : cursor + count, 0] = r * np.cos(theta)
            X[cursor : cursor + count, 1] = r * np.sin(theta)
            if spec.dim > 2:
                X[cursor : cursor + count, 2:] = spec.overlap_noise_sigma * rng.standard_normal(
                    (count, spec.dim - 2)
                )
            y[cursor : cursor + count] = c
            cursor += count
    width = max(6, len(str(total)))
    docs = [
        Document(f"syn{idx:0{width}d}", X[idx], int(y[idx])) for idx in range(total)
    ]
    provenance = {
        "kind": "synthetic",
        "generator": spec.generator,
        "seed": spec.seed,
        "counts": counts,
    }
    return Corpus(docs, n_classes=spec.n_classes, feature_dim=spec.dim, provenance=provenance)


# ---------------------------------------------------------------------------
# splitting and noise
# ---------------------------------------------------------------------------

def stratified_split(
    corpus: Corpus, n_labeled: int, n_unlabeled: int, n_test: int, seed: int
) -> Split:
    """Stratified disjoint split of a fully labeled corpus.

    Each partition preserves the corpus class proportions to the nearest
    integer (largest remainder).  Unlabeled documents are emitted with
    their gold label stripped; the true values go to ``hidden_labels``.
    """
    for name, size in (("n_labeled", n_labeled), ("n_unlabeled", n_unlabeled), ("n_test", n_test)):
        if size < 0:
            raise ValidationError(f"{name} must be >= 0, got {size}")
    if any(d.gold_label is None for d in corpus.documents):
        raise ValidationError("stratified_split requires a fully labeled corpus")
    by_class: dict[int, list[Document]] = {c: [] for c in range(corpus.n_classes)}
    for doc in corpus.documents:
        if not 0 <= doc.gold_label < corpus.n_classes:
            raise ValidationError(f"document {doc.id!r} has out-of-range label {doc.gold_label}")
        by_class[doc.gold_label].append(doc)
    proportions = [len(by_class[c]) / len(corpus.documents) for c in range(corpus.n_classes)]
    alloc = {
        part: largest_remainder_counts(size, proportions)
        for part, size in (("labeled", n_labeled), ("unlabeled", n_unlabeled), ("test", n_test))
    }
    rng = np.random.default_rng(seed)
    labeled: list[Document] = []
    unlabeled: list[Document] = []
    test: list[Document] = []
    hidden: dict[str, int] = {}
    for c in range(corpus.n_classes):
        pool = list(by_class[c])
        need = alloc["labeled"][c] + alloc["unlabeled"][c] + alloc["test"][c]
        if need > len(pool):
            raise ValidationError(
                f"class {c} needs {need} documents but the corpus only has {len(pool)}"
            )
        order = rng.permutation(len(pool))
        take = [pool[i] for i in order[:need]]
        k_l, k_u = alloc["labeled"][c], alloc["unlabeled"][c]
        labeled.extend(take[:k_l])
        for doc in take[k_l : k_l + k_u]:
            hidden[doc.id] = doc.gold_label
            unlabeled.append(Document(doc.id, doc.features, None))
        test.extend(take[k_l + k_u :])
    labeled.sort(key=lambda d: d.id)
    unlabeled.sort(key=lambda d: d.id)
    test.sort(key=lambda d: d.id)
    return Split(labeled, unlabeled, test, hidden)


def inject_label_noise(docs: Sequence[Document], flip_rate: float, seed: int,
                       n_classes: int | None = None) -> list[Document]:
    """Flip exactly ``round(flip_rate * len(docs))`` labels to a random other class."""
    if not 0.0 <= flip_rate <= 1.0:
        raise ValidationError(f"flip_rate must be in [0, 1], got {flip_rate}")
    docs = list(docs)
    if n_classes is None:
        n_classes = max(d.gold_label for d in docs) + 1 if docs else 0
    n_flip = int(round(flip_rate * len(docs)))
    rng = np.random.default_rng(seed)
    flip_at = set(rng.choice(len(docs), size=n_flip, replace=False).tolist()) if n_flip else set()
    out = []
    for i, doc in enumerate(docs):
        if i in flip_at:
            offset = int(rng.integers(0, n_classes - 1))
            new_label = offset if offset < doc.gold_label else offset + 1
            out.append(Document(doc.id, doc.features, new_label))
        else:
            out.append(doc)
    return out


def inject_distractors(docs: Sequence[Document], fraction: float, center: np.ndarray,
                       sigma: float, seed: int) -> list[Document]:
    """Replace a random ``fraction`` of documents with off-distribution points.

    The replacements keep their ids (bookkeeping stays intact) but get fresh
    features drawn from an isotropic cloud at ``center``; gold labels are
    dropped.  Used to stress self-training against drift-inducing unlabeled
    data.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {fraction}")
    docs = list(docs)
    center = np.asarray(center, dtype=np.float64)
    n_swap = int(round(fraction * len(docs)))
    rng = np.random.default_rng(seed)
    swap_at = set(rng.choice(len(docs), size=n_swap, replace=False).tolist()) if n_swap else set()
    out = []
    for i, doc in enumerate(docs):
        if i in swap_at:
            feats = center + sigma * rng.standard_normal(center.shape[0])
            out.append(Document(doc.id, feats, None))
        else:
            out.append(doc)
    return out
