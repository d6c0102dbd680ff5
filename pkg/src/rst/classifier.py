"""A small differentiable softmax classifier trained with plain, soft, or mixed objectives.

The network is a one-hidden-layer tanh feed-forward scorer; ``hidden_width=0``
degenerates to multinomial logistic regression.  It is deliberately desk
scale: every algorithmic property of the surrounding self-training loop
(distillation pretraining, snapshot-anchored finetuning, uncertainty
scoring) is exercised against it without any pretrained-model dependency.

Three training modes share one Adam/SGD step loop:

* ``train_hard``     - cross entropy against hard labels, optional per-example
  weights (used by the augmentation baselines);
* ``train_soft``     - cross entropy between temperature-T outputs and stored
  soft targets, in the exact sequence order given (the curriculum);
* ``train_finetune`` - the mixed objective
  ``(1-lam) * CE(y, a) + lam * CE(q, a_T)`` where ``a`` is the T=1 output,
  ``a_T`` the temperature-T output, and ``q`` the frozen temperature-T
  output captured right before finetuning began.  The second term penalizes
  drift away from what the network absorbed from the pseudo-labels.

For two classes the multinomial cross entropy coincides with the binomial
form, so a single implementation covers every class count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractViolation, ValidationError

__all__ = [
    "TrainParams",
    "SnapshotOutputs",
    "SoftmaxNet",
    "VoteEnsemble",
    "softmax_rows",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


def softmax_rows(logits, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``logits / temperature``, numerically stable."""
    if temperature <= 0.0:
        raise ValidationError(f"temperature must be > 0, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax_rows(logits, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValidationError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels out of range [0, {n_classes})")
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass
class TrainParams:
    """Optimizer settings for one training phase."""

    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 20
    temperature: float = 2.0
    lam: float = 0.3
    optimizer: str = "adam"  # "adam" or "sgd"
    linear_decay: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.temperature < 1.0:
            raise ValidationError(f"temperature must be >= 1, got {self.temperature}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lam must be in [0, 1], got {self.lam}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")


class SnapshotOutputs:
    """Frozen temperature-T outputs per document id, captured once.

    The arrays are marked read-only; the checksum lets callers assert the
    snapshot survived finetuning bit-for-bit.
    """

    def __init__(self, ids: Sequence[str], probs: np.ndarray, temperature: float):
        probs = np.array(probs, dtype=np.float64)  # private copy
        probs.setflags(write=False)
        self.ids = tuple(ids)
        self.probs = probs
        self.temperature = float(temperature)
        self._index = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise ValidationError("snapshot ids must be unique")
        if probs.shape[0] != len(self.ids):
            raise ValidationError("one probability row per id required")

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def get(self, doc_id: str) -> np.ndarray:
        try:
            return self.probs[self._index[doc_id]]
        except KeyError:
            raise ContractViolation(f"no snapshot entry for document {doc_id!r}") from None

    def rows_for(self, ids: Sequence[str]) -> np.ndarray:
        missing = [i for i in ids if i not in self._index]
        if missing:
            raise ContractViolation(f"no snapshot entry for documents {missing[:5]!r}")
        return self.probs[[self._index[i] for i in ids]]

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update("\x1f".join(self.ids).encode("utf-8"))
        digest.update(np.ascontiguousarray(self.probs).tobytes())
        digest.update(repr(self.temperature).encode("ascii"))
        return digest.hexdigest()


class _Optimizer:
    def __init__(self, params: dict, tp: TrainParams, total_steps: int):
        self.params = params
        self.lr = tp.learning_rate
        self.linear_decay = tp.linear_decay
        self.total_steps = max(1, total_steps)
        self.adam = tp.optimizer == "adam"
        self.t = 0
        if self.adam:
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        lr = self.lr
        if self.linear_decay:
            lr = self.lr * (1.0 - self.t / self.total_steps)
        self.t += 1
        if not self.adam:
            for k, g in grads.items():
                self.params[k] -= lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            m_hat = self.m[k] / (1.0 - b1**self.t)
            v_hat = self.v[k] / (1.0 - b2**self.t)
            self.params[k] -= lr * m_hat / (np.sqrt(v_hat) + eps)


class SoftmaxNet:
    """Feed-forward softmax classifier over fixed-length feature vectors.

    Parameters are drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    with a seeded generator, so construction is bit-reproducible.
    """

    def __init__(self, dim: int, n_classes: int, hidden_width: int = 0, seed: int = 0):
        if dim < 1:
            raise ValidationError(f"dim must be >= 1, got {dim}")
        if n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {n_classes}")
        if hidden_width < 0:
            raise ValidationError(f"hidden_width must be >= 0, got {hidden_width}")
        self.dim = int(dim)
        self.n_classes = int(n_classes)
        self.hidden_width = int(hidden_width)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        if hidden_width:
            s1 = 1.0 / np.sqrt(dim)
            s2 = 1.0 / np.sqrt(hidden_width)
            self.params = {
                "w1": rng.uniform(-s1, s1, size=(dim, hidden_width)),
                "b1": rng.uniform(-s1, s1, size=hidden_width),
                "w2": rng.uniform(-s2, s2, size=(hidden_width, n_classes)),
                "b2": rng.uniform(-s2, s2, size=n_classes),
            }
        else:
            s = 1.0 / np.sqrt(dim)
            self.params = {
                "w": rng.uniform(-s, s, size=(dim, n_classes)),
                "b": rng.uniform(-s, s, size=n_classes),
            }
        self._shuffle_rng = np.random.default_rng(int(rng.integers(2**63)))

    # ------------------------------------------------------------------
    # inference
    # ------------------------------------------------------------------

    @property
    def n_parameters(self) -> int:
        return sum(int(v.size) for v in self.params.values())

    def _check_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValidationError(f"features must have dim {self.dim}, got shape {X.shape}")
        return X

    def logits(self, X) -> np.ndarray:
        X = self._check_features(X)
        if self.hidden_width:
            h = np.tanh(X @ self.params["w1"] + self.params["b1"])
            return h @ self.params["w2"] + self.params["b2"]
        return X @ self.params["w"] + self.params["b"]

    def predict_proba(self, X, temperature: float = 1.0) -> np.ndarray:
        return softmax_rows(self.logits(X), temperature)

    def forward(self, features, temperature: float = 1.0) -> np.ndarray:
        """Output distribution for a single feature vector."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 1:
            raise ValidationError(f"forward expects a single vector, got shape {features.shape}")
        return self.predict_proba(features[None, :], temperature)[0]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    # ------------------------------------------------------------------
    # objective and gradients
    # ------------------------------------------------------------------

    def loss_eq1(self, X, labels, snapshot: SnapshotOutputs, ids: Sequence[str],
                 lam: float, temperature: float) -> float:
        """Mean mixed loss over the batch: (1-lam)*CE(y, a) + lam*CE(q, a_T)."""
        X = self._check_features(X)
        Y = _one_hot(labels, self.n_classes)
        z = self.logits(X)
        hard = -np.mean(np.sum(Y * _log_softmax_rows(z, 1.0), axis=1))
        if lam == 0.0:
            return float(hard)
        Q = snapshot.rows_for(ids)
        soft = -np.mean(np.sum(Q * _log_softmax_rows(z, temperature), axis=1))
        return float((1.0 - lam) * hard + lam * soft)

    def grad_loss_eq1(self, X, labels, snapshot: SnapshotOutputs, ids: Sequence[str],
                      lam: float, temperature: float) -> dict:
        """Analytic gradient of ``loss_eq1`` with respect to every parameter."""
        X = self._check_features(X)
        Y = _one_hot(labels, self.n_classes)
        z = self.logits(X)
        N = X.shape[0]
        dz = (1.0 - lam) * (softmax_rows(z, 1.0) - Y) / N
        if lam != 0.0:
            Q = snapshot.rows_for(ids)
            dz = dz + lam * (softmax_rows(z, temperature) - Q) / (N * temperature)
        return self._backward(X, dz)

    def _backward(self, X, dz) -> dict:
        if self.hidden_width:
            h = np.tanh(X @ self.params["w1"] + self.params["b1"])
            dh = (dz @ self.params["w2"].T) * (1.0 - h * h)
            return {
                "w2": h.T @ dz,
                "b2": dz.sum(axis=0),
                "w1": X.T @ dh,
                "b1": dh.sum(axis=0),
            }
        return {"w": X.T @ dz, "b": dz.sum(axis=0)}

    # ------------------------------------------------------------------
    # training phases
    # ------------------------------------------------------------------

    def _batches(self, N: int, batch_size: int):
        for start in range(0, N, batch_size):
            yield np.arange(start, min(start + batch_size, N))

    def train_soft(self, X, targets, temperature: float, params: TrainParams) -> "SoftmaxNet":
        """Distill ``targets`` (temperature-T teacher rows) into the network.

        The sequence order is significant and preserved: batches walk the
        input front to back in every epoch, so curriculum ordering done by
        the caller survives.  An empty input is a no-op.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            return self
        X = self._check_features(X)
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != (X.shape[0], self.n_classes):
            raise ValidationError(f"targets shape {targets.shape} does not match batch")
        n_batches = -(-X.shape[0] // params.batch_size)
        opt = _Optimizer(self.params, params, total_steps=params.epochs * n_batches)
        for _ in range(params.epochs):
            for idx in self._batches(X.shape[0], params.batch_size):
                xb, tb = X[idx], targets[idx]
                a_t = softmax_rows(self.logits(xb), temperature)
                dz = (a_t - tb) / (idx.shape[0] * temperature)
                opt.step(self._backward(xb, dz))
        return self

    def train_hard(self, X, labels, params: TrainParams, sample_weight=None,
                   shuffle: bool = True) -> "SoftmaxNet":
        """Plain cross-entropy training on hard labels, optionally weighted."""
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            return self
        X = self._check_features(X)
        Y = _one_hot(labels, self.n_classes)
        w = None
        if sample_weight is not None:
            w = np.asarray(sample_weight, dtype=np.float64)
            if w.shape != (X.shape[0],):
                raise ValidationError("sample_weight must have one entry per example")
        n_batches = -(-X.shape[0] // params.batch_size)
        opt = _Optimizer(self.params, params, total_steps=params.epochs * n_batches)
        for _ in range(params.epochs):
            order = self._shuffle_rng.permutation(X.shape[0]) if shuffle else np.arange(X.shape[0])
            for idx in self._batches(X.shape[0], params.batch_size):
                rows = order[idx]
                xb, yb = X[rows], Y[rows]
                dz = (softmax_rows(self.logits(xb), 1.0) - yb) / rows.shape[0]
                if w is not None:
                    dz = dz * w[rows][:, None]
                opt.step(self._backward(xb, dz))
        return self

    def train_finetune(self, X, labels, ids: Sequence[str], snapshot: SnapshotOutputs | None,
                       lam: float, temperature: float, params: TrainParams,
                       epoch_hook: Callable[["SoftmaxNet", int], None] | None = None,
                       ) -> "SoftmaxNet":
        """Mini-batch descent on the mixed objective; the snapshot stays frozen.

        ``snapshot`` must cover every id unless ``lam == 0``, in which case
        the phase reduces to plain supervised training and no snapshot is
        consulted.  ``epoch_hook(net, epoch)`` runs after each epoch.
        """
        if not 0.0 <= lam <= 1.0:
            raise ValidationError(f"lam must be in [0, 1], got {lam}")
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            return self
        X = self._check_features(X)
        Y = _one_hot(labels, self.n_classes)
        ids = list(ids)
        if len(ids) != X.shape[0]:
            raise ValidationError("one id per example required")
        if lam == 0.0:
            Q = None
        else:
            if snapshot is None:
                raise ContractViolation("finetuning with lam > 0 requires a captured snapshot")
            Q = snapshot.rows_for(ids)
        n_batches = -(-X.shape[0] // params.batch_size)
        opt = _Optimizer(self.params, params, total_steps=params.epochs * n_batches)
        for epoch in range(params.epochs):
            order = self._shuffle_rng.permutation(X.shape[0])
            for idx in self._batches(X.shape[0], params.batch_size):
                rows = order[idx]
                xb = X[rows]
                z = self.logits(xb)
                dz = (1.0 - lam) * (softmax_rows(z, 1.0) - Y[rows]) / rows.shape[0]
                if Q is not None:
                    dz = dz + lam * (softmax_rows(z, temperature) - Q[rows]) / (
                        rows.shape[0] * temperature
                    )
                opt.step(self._backward(xb, dz))
            if epoch_hook is not None:
                epoch_hook(self, epoch)
        return self

    def capture_snapshot(self, ids: Sequence[str], X, temperature: float) -> SnapshotOutputs:
        """Record the temperature-T outputs for ``ids`` as an immutable snapshot."""
        X = self._check_features(np.asarray(X, dtype=np.float64))
        if X.shape[0] != len(ids):
            raise ValidationError("one feature row per id required")
        return SnapshotOutputs(ids, self.predict_proba(X, temperature), temperature)

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def fingerprint(self) -> str:
        """Stable digest of the architecture header and all parameters."""
        digest = hashlib.sha256()
        digest.update(
            f"v{CHECKPOINT_VERSION}:{self.dim}:{self.hidden_width}:{self.n_classes}:{self.seed}".encode()
        )
        for key in sorted(self.params):
            digest.update(key.encode("ascii"))
            digest.update(np.ascontiguousarray(self.params[key]).tobytes())
        return digest.hexdigest()


class VoteEnsemble:
    """Majority vote over member classifiers; ties go to the smallest class index."""

    def __init__(self, members: Sequence[SoftmaxNet]):
        if not members:
            raise ValidationError("an ensemble needs at least one member")
        self.members = list(members)
        self.n_classes = self.members[0].n_classes

    def predict(self, X) -> np.ndarray:
        votes = np.stack([m.predict(X) for m in self.members])
        out = np.empty(votes.shape[1], dtype=np.int64)
        for i in range(votes.shape[1]):
            out[i] = np.bincount(votes[:, i], minlength=self.n_classes).argmax()
        return out

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for member in self.members:
            digest.update(member.fingerprint().encode("ascii"))
        return digest.hexdigest()


def save_checkpoint(net: SoftmaxNet, path) -> None:
    """Write a versioned npz checkpoint: header + one array per parameter."""
    header = np.array(
        [CHECKPOINT_VERSION, net.dim, net.hidden_width, net.n_classes, net.seed],
        dtype=np.int64,
    )
    np.savez(path, __header__=header, **net.params)


def load_checkpoint(path) -> SoftmaxNet:
    with np.load(path) as blob:
        if "__header__" not in blob:
            raise ValidationError(f"{path} is not a classifier checkpoint")
        version, dim, hidden, n_classes, seed = (int(x) for x in blob["__header__"])
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version}")
        net = SoftmaxNet(dim, n_classes, hidden_width=hidden, seed=seed)
        for key in net.params:
            if key not in blob:
                raise ValidationError(f"checkpoint missing parameter {key!r}")
            net.params[key] = blob[key].astype(np.float64)
    return net
