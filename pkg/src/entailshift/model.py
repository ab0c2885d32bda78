"""Deterministic trainable text classifier on hashed n-gram features.

Stands in for a pretrained transformer at desk scale: texts map to sparse
L2-normalized count vectors over a power-of-two hash space (word 1-2 grams,
character trigrams, and prompt-token x content-token cross features), and a
logistic or softmax head trains by mini-batch gradient descent. Everything
is bit-deterministic given the seed, gradients are verifiable by central
finite differences, and models round-trip through a versioned .npz blob.

Hashing uses BLAKE2b (64-bit digests) with the salt mixed in as the keyed
hash key, reduced modulo the table size. Cross features exist because a
purely additive linear model scores candidate prompts independently of the
text they are paired with; the conjunction features are what let the binary
head read prompts in context.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SEPARATOR = " [SEP] "
MODEL_FORMAT_VERSION = "entailshift-model-v1"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class FeaturizerConfig:
    """Hash dimension, enabled feature families, and the hash salt."""

    dim: int = 2**18
    word_ngrams: tuple[int, ...] = (1, 2)
    char_ngrams: tuple[int, ...] = (3,)
    cross_features: bool = True
    hash_salt: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "word_ngrams", tuple(self.word_ngrams))
        object.__setattr__(self, "char_ngrams", tuple(self.char_ngrams))
        if self.dim < 2 or self.dim & (self.dim - 1):
            raise ValueError(f"dim must be a power of two, got {self.dim}")
        if not (self.word_ngrams or self.char_ngrams or self.cross_features):
            raise ValueError("at least one feature family must be enabled")
        if any(n < 1 for n in self.word_ngrams + self.char_ngrams):
            raise ValueError("n-gram orders must be positive")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Sparse unit-norm vector: sorted unique indices with their values."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values must be parallel arrays")

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def hash_feature(key: str, salt: int, dim: int) -> int:
    """BLAKE2b-64 of the feature key, salt-mixed, modulo the table size."""
    digest = hashlib.blake2b(
        key.encode("utf-8"),
        digest_size=8,
        key=(salt % 2**64).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(digest, "little") % dim


def tokenize(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs; punctuation acts as whitespace."""
    return _TOKEN_RE.findall(text.lower())


def _segments(text: str) -> tuple[str | None, list[str]]:
    """Split on the separator into (prompt, content segments).

    One segment means no prompt. Two reads as (prompt, content): that is the
    prompt-first single-segment layout, and it also gives a plain
    "text_a [SEP] text_b" pair useful first-segment x second-segment
    conjunctions. Three or more reads as content [SEP] prompt [SEP] content.
    """
    parts = text.split(SEPARATOR)
    if len(parts) == 1:
        return None, parts
    if len(parts) == 2:
        return parts[0], parts[1:]
    return parts[1], [parts[0], *parts[2:]]


def feature_keys(text: str, config: FeaturizerConfig) -> list[str]:
    """The raw (pre-hash) feature key multiset for a text.

    Key formats: word n-grams "w:tok1 tok2", char n-grams "c:xyz",
    prompt-content crosses "ptok⊗ctok". Word n-grams never span segment
    boundaries.
    """
    prompt, contents = _segments(text)
    keys: list[str] = []
    all_parts = ([prompt] if prompt is not None else []) + contents
    for part in all_parts:
        tokens = tokenize(part)
        for n in config.word_ngrams:
            for i in range(len(tokens) - n + 1):
                keys.append("w:" + " ".join(tokens[i : i + n]))
        for n in config.char_ngrams:
            for tok in tokens:
                for i in range(len(tok) - n + 1):
                    keys.append("c:" + tok[i : i + n])
    if config.cross_features and prompt is not None:
        prompt_tokens = tokenize(prompt)
        content_tokens = [tok for part in contents for tok in tokenize(part)]
        for p in prompt_tokens:
            for c in content_tokens:
                keys.append(f"{p}⊗{c}")
    return keys


def featurize(text: str, config: FeaturizerConfig) -> FeatureVector:
    """Hash the key multiset and L2-normalize the counts; empty -> zero vector."""
    counts: dict[int, float] = {}
    for key in feature_keys(text, config):
        idx = hash_feature(key, config.hash_salt, config.dim)
        counts[idx] = counts.get(idx, 0.0) + 1.0
    if not counts:
        return FeatureVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dim=config.dim,
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return FeatureVector(indices=indices, values=values, dim=config.dim)


# ---------------------------------------------------------------------------
# Packed sample matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Packed:
    """CSR-style concatenation of sparse rows."""

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def n_rows(self) -> int:
        return int(self.indptr.size - 1)


def _pack(features: Sequence[FeatureVector]) -> _Packed:
    if not features:
        raise ValueError("no samples to train on")
    dim = features[0].dim
    for fv in features:
        if fv.dim != dim:
            raise ValueError("all feature vectors must share one hash dimension")
    lengths = np.array([fv.nnz for fv in features], dtype=np.int64)
    indptr = np.zeros(len(features) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    indices = (
        np.concatenate([fv.indices for fv in features])
        if indptr[-1]
        else np.empty(0, dtype=np.int64)
    )
    values = (
        np.concatenate([fv.values for fv in features])
        if indptr[-1]
        else np.empty(0, dtype=np.float64)
    )
    return _Packed(indptr=indptr, indices=indices, values=values, dim=dim)


def _gather(packed: _Packed, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat (sample_pos, indices, values) arrays for a row subset, in order."""
    starts = packed.indptr[rows]
    lengths = packed.indptr[rows + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )
    ends = np.cumsum(lengths)
    flat = np.arange(total, dtype=np.int64) - np.repeat(ends - lengths, lengths)
    positions = np.repeat(starts, lengths) + flat
    sample_pos = np.repeat(np.arange(rows.size, dtype=np.int64), lengths)
    return sample_pos, packed.indices[positions], packed.values[positions]


# ---------------------------------------------------------------------------
# Heads and configs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Optimization knobs for one training run."""

    epochs: int = 30
    learning_rate: float = 0.2
    batch_size: int = 16
    seed: int = 0
    l2_penalty: float = 1e-6
    warm_start: "Model | None" = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be nonnegative, got {self.l2_penalty}")


@dataclass(frozen=True, eq=False)
class Model:
    """Linear head over hashed features: logistic (binary) or softmax (K-class)."""

    head: str                         # "binary" | "multiclass"
    weights: np.ndarray               # (dim,) binary, (K, dim) multiclass
    bias: np.ndarray                  # (1,) binary, (K,) multiclass
    featurizer: FeaturizerConfig
    train_log: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.head not in ("binary", "multiclass"):
            raise ValueError(f"unknown head {self.head!r}")
        expected_ndim = 1 if self.head == "binary" else 2
        if self.weights.ndim != expected_ndim:
            raise ValueError(
                f"{self.head} head expects {expected_ndim}-D weights, got {self.weights.ndim}-D"
            )
        if self.weights.shape[-1] != self.featurizer.dim:
            raise ValueError("weight width must equal the featurizer dimension")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    @property
    def n_classes(self) -> int:
        return 2 if self.head == "binary" else int(self.weights.shape[0])


def zero_model(featurizer: FeaturizerConfig, head: str, n_classes: int | None = None) -> Model:
    """Freshly initialized parameters (all zeros)."""
    if head == "binary":
        return Model(
            head=head,
            weights=np.zeros(featurizer.dim),
            bias=np.zeros(1),
            featurizer=featurizer,
        )
    if n_classes is None or n_classes < 2:
        raise ValueError("multiclass head needs n_classes >= 2")
    return Model(
        head=head,
        weights=np.zeros((n_classes, featurizer.dim)),
        bias=np.zeros(n_classes),
        featurizer=featurizer,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def _binary_logits(weights: np.ndarray, bias: float, packed: _Packed, rows: np.ndarray) -> np.ndarray:
    sample_pos, idx, vals = _gather(packed, rows)
    prods = vals * weights[idx]
    return np.bincount(sample_pos, weights=prods, minlength=rows.size) + bias


def _multiclass_logits(weights: np.ndarray, bias: np.ndarray, packed: _Packed, rows: np.ndarray) -> np.ndarray:
    sample_pos, idx, vals = _gather(packed, rows)
    logits = np.empty((rows.size, weights.shape[0]))
    for k in range(weights.shape[0]):
        prods = vals * weights[k, idx]
        logits[:, k] = np.bincount(sample_pos, weights=prods, minlength=rows.size)
    return logits + bias


def _binary_data_loss(weights: np.ndarray, bias: float, packed: _Packed, y: np.ndarray) -> float:
    rows = np.arange(packed.n_rows, dtype=np.int64)
    z = _binary_logits(weights, bias, packed, rows)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _multiclass_data_loss(
    weights: np.ndarray, bias: np.ndarray, packed: _Packed, targets: Sequence[np.ndarray]
) -> float:
    """Mean summed cross-entropy against one or more target columns."""
    rows = np.arange(packed.n_rows, dtype=np.int64)
    z = _multiclass_logits(weights, bias, packed, rows)
    zmax = z.max(axis=1)
    lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    total = 0.0
    for y in targets:
        total += float(np.mean(lse - z[np.arange(z.shape[0]), y]))
    return total


def _validate_labels(labels: np.ndarray, arity: int, what: str) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= arity):
        bad = labels[(labels < 0) | (labels >= arity)][0]
        raise ValueError(f"{what} label {int(bad)} outside head arity {arity}")


def _init_params(
    featurizer: FeaturizerConfig,
    head: str,
    n_classes: int,
    warm_start: Model | None,
) -> tuple[np.ndarray, np.ndarray]:
    if warm_start is None:
        fresh = zero_model(featurizer, head, n_classes if head == "multiclass" else None)
        return fresh.weights.copy(), fresh.bias.copy()
    if warm_start.head != head:
        raise ValueError(f"warm start head {warm_start.head!r} does not match {head!r}")
    if warm_start.featurizer != featurizer:
        raise ValueError("warm start featurizer config does not match")
    if head == "multiclass" and warm_start.weights.shape[0] != n_classes:
        raise ValueError(
            f"warm start has {warm_start.weights.shape[0]} classes, need {n_classes}"
        )
    return warm_start.weights.copy(), warm_start.bias.astype(np.float64).copy().reshape(-1)


def _run_epochs(
    packed: _Packed,
    config: TrainConfig,
    weights: np.ndarray,
    bias: np.ndarray,
    grad_fn,
    loss_fn,
) -> tuple[np.ndarray, np.ndarray, tuple[float, ...]]:
    """Shared mini-batch loop; grad_fn produces per-sample dL/dlogits rows."""
    rng = np.random.default_rng(config.seed)
    n = packed.n_rows
    decay = 1.0 - config.learning_rate * config.l2_penalty
    log: list[float] = []
    multiclass = weights.ndim == 2
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            sample_pos, idx, vals = _gather(packed, rows)
            if multiclass:
                logits = np.empty((rows.size, weights.shape[0]))
                for k in range(weights.shape[0]):
                    logits[:, k] = np.bincount(
                        sample_pos, weights=vals * weights[k, idx], minlength=rows.size
                    )
                logits += bias
            else:
                logits = (
                    np.bincount(sample_pos, weights=vals * weights[idx], minlength=rows.size)
                    + bias[0]
                )
            g = grad_fn(logits, rows) / rows.size   # per-sample dL/dz, batch-mean scaled
            if config.l2_penalty:
                weights *= decay
            if multiclass:
                for k in range(weights.shape[0]):
                    np.subtract.at(
                        weights[k], idx, config.learning_rate * g[sample_pos, k] * vals
                    )
                bias -= config.learning_rate * g.sum(axis=0)
            else:
                np.subtract.at(weights, idx, config.learning_rate * g[sample_pos] * vals)
                bias[0] -= config.learning_rate * g.sum()
        log.append(loss_fn(weights, bias))
    return weights, bias, tuple(log)


def train(
    features: Sequence[FeatureVector],
    labels: Sequence[int],
    config: TrainConfig,
    head: str = "binary",
    n_classes: int | None = None,
    featurizer: FeaturizerConfig | None = None,
) -> Model:
    """Mini-batch gradient descent on mean cross-entropy plus L2.

    The L2 penalty enters as per-batch multiplicative weight decay, which is
    exactly gradient descent on meanCE + (l2/2)*||w||^2; the bias is not
    decayed. ``train_log`` records the full-dataset mean cross-entropy after
    each epoch. ``config.warm_start`` initializes from a prior model of the
    same head and featurizer (fine-tuning); otherwise parameters start at
    zero.
    """
    if head not in ("binary", "multiclass"):
        raise ValueError(f"unknown head {head!r}")
    if featurizer is None:
        featurizer = (
            config.warm_start.featurizer
            if config.warm_start is not None
            else FeaturizerConfig(dim=features[0].dim if features else 2**18)
        )
    packed = _pack(features)
    if packed.dim != featurizer.dim:
        raise ValueError("feature vectors do not match the featurizer dimension")
    y = np.asarray(labels, dtype=np.int64)
    if y.size != packed.n_rows:
        raise ValueError(f"{packed.n_rows} samples but {y.size} labels")

    if head == "binary":
        _validate_labels(y, 2, "binary")
        weights, bias = _init_params(featurizer, head, 2, config.warm_start)
        yf = y.astype(np.float64)

        def grad(logits: np.ndarray, rows: np.ndarray) -> np.ndarray:
            return _sigmoid(logits) - yf[rows]

        def loss(w: np.ndarray, b: np.ndarray) -> float:
            return _binary_data_loss(w, b[0], packed, yf)

    else:
        if n_classes is None:
            raise ValueError("multiclass training requires explicit n_classes")
        _validate_labels(y, n_classes, "multiclass")
        weights, bias = _init_params(featurizer, head, n_classes, config.warm_start)

        def grad(logits: np.ndarray, rows: np.ndarray) -> np.ndarray:
            p = _softmax(logits)
            p[np.arange(rows.size), y[rows]] -= 1.0
            return p

        def loss(w: np.ndarray, b: np.ndarray) -> float:
            return _multiclass_data_loss(w, b, packed, [y])

    weights, bias, log = _run_epochs(packed, config, weights, bias, grad, loss)
    return Model(head=head, weights=weights, bias=bias, featurizer=featurizer, train_log=log)


def train_joint(
    features: Sequence[FeatureVector],
    pre_labels: Sequence[int],
    post_labels: Sequence[int],
    config: TrainConfig,
    n_classes: int,
    featurizer: FeaturizerConfig | None = None,
) -> Model:
    """Minimize CE(prediction, pre label) + CE(prediction, post label).

    One shared softmax head serves both terms, so the per-logit gradient is
    2*softmax - onehot(pre) - onehot(post). ``train_log`` records the summed
    two-term mean cross-entropy per epoch.
    """
    if featurizer is None:
        featurizer = (
            config.warm_start.featurizer
            if config.warm_start is not None
            else FeaturizerConfig(dim=features[0].dim if features else 2**18)
        )
    packed = _pack(features)
    y1 = np.asarray(pre_labels, dtype=np.int64)
    y2 = np.asarray(post_labels, dtype=np.int64)
    if y1.size != packed.n_rows or y2.size != packed.n_rows:
        raise ValueError("pre/post label columns must match the sample count")
    _validate_labels(y1, n_classes, "pre-shift")
    _validate_labels(y2, n_classes, "post-shift")
    weights, bias = _init_params(featurizer, "multiclass", n_classes, config.warm_start)

    def grad(logits: np.ndarray, rows: np.ndarray) -> np.ndarray:
        p = 2.0 * _softmax(logits)
        r = np.arange(rows.size)
        p[r, y1[rows]] -= 1.0
        p[r, y2[rows]] -= 1.0
        return p

    def loss(w: np.ndarray, b: np.ndarray) -> float:
        return _multiclass_data_loss(w, b, packed, [y1, y2])

    weights, bias, log = _run_epochs(packed, config, weights, bias, grad, loss)
    return Model(
        head="multiclass", weights=weights, bias=bias, featurizer=featurizer, train_log=log
    )


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def score(model: Model, fv: FeatureVector):
    """Probability (binary) or probability vector summing to 1 (multiclass)."""
    if fv.dim != model.featurizer.dim:
        raise ValueError("feature vector does not match the model's featurizer")
    if model.head == "binary":
        z = float(np.dot(model.weights[fv.indices], fv.values)) + float(model.bias[0])
        return float(_sigmoid(np.array([z]))[0])
    logits = model.weights[:, fv.indices] @ fv.values + model.bias
    return _softmax(logits)


def score_text(model: Model, text: str):
    """Featurize with the model's own config, then score."""
    return score(model, featurize(text, model.featurizer))


def make_binary_scorer(model: Model):
    """Adapt a binary model to the text -> probability scorer interface."""
    if model.head != "binary":
        raise ValueError("scorer adapter requires a binary head")

    def scorer(text: str) -> float:
        return score_text(model, text)

    return scorer


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def _loss_and_grad(
    model: Model,
    features: Sequence[FeatureVector],
    labels: Sequence[Sequence[int]],
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-objective value and analytic gradient for any head.

    ``labels`` is one column for plain heads and two for the joint loss.
    The objective is the mean data loss plus (l2/2)*||w||^2.
    """
    packed = _pack(features)
    rows = np.arange(packed.n_rows, dtype=np.int64)
    cols = [np.asarray(c, dtype=np.int64) for c in labels]
    sample_pos, idx, vals = _gather(packed, rows)
    if model.head == "binary":
        yf = cols[0].astype(np.float64)
        z = _binary_logits(model.weights, float(model.bias[0]), packed, rows)
        data_loss = float(np.mean(np.logaddexp(0.0, z) - yf * z))
        g = (_sigmoid(z) - yf) / packed.n_rows
        grad_w = np.zeros_like(model.weights)
        np.add.at(grad_w, idx, g[sample_pos] * vals)
        grad_b = np.array([g.sum()])
    else:
        z = _multiclass_logits(model.weights, model.bias, packed, rows)
        p = _softmax(z)
        zmax = z.max(axis=1)
        lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
        data_loss = 0.0
        g = len(cols) * p
        r = np.arange(packed.n_rows)
        for y in cols:
            data_loss += float(np.mean(lse - z[r, y]))
            g[r, y] -= 1.0
        g /= packed.n_rows
        grad_w = np.zeros_like(model.weights)
        for k in range(model.weights.shape[0]):
            np.add.at(grad_w[k], idx, g[sample_pos, k] * vals)
        grad_b = g.sum(axis=0)
    loss = data_loss + 0.5 * l2 * float(np.sum(model.weights**2))
    grad_w += l2 * model.weights
    return loss, grad_w, grad_b


def grad_check(
    model: Model,
    features: Sequence[FeatureVector],
    labels: Sequence[Sequence[int]],
    epsilon: float = 1e-5,
    n_coords: int = 20,
    l2: float = 0.0,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates are sampled from the feature support of the given samples
    plus the bias entries, so every checked coordinate carries signal.
    """
    if not 0 < epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in (0, 1e-3], got {epsilon}")
    _, grad_w, grad_b = _loss_and_grad(model, features, labels, l2)

    support = sorted({int(i) for fv in features for i in fv.indices})
    rng = np.random.default_rng(seed)
    coords: list[tuple[str, tuple[int, ...]]] = []
    n_rows = 1 if model.head == "binary" else model.weights.shape[0]
    if support:
        picks = rng.integers(0, len(support), size=max(n_coords, 1))
        for pick in picks:
            col = support[int(pick)]
            row = int(rng.integers(0, n_rows))
            coords.append(("w", (row, col) if model.head == "multiclass" else (col,)))
    for b in range(model.bias.size):
        coords.append(("b", (b,)))

    max_rel = 0.0
    for kind, where in coords:
        array = model.weights if kind == "w" else model.bias
        analytic = grad_w[where] if kind == "w" else grad_b[where]
        original = array[where]
        array[where] = original + epsilon
        up, _, _ = _loss_and_grad(model, features, labels, l2)
        array[where] = original - epsilon
        down, _, _ = _loss_and_grad(model, features, labels, l2)
        array[where] = original
        fd = (up - down) / (2.0 * epsilon)
        rel = abs(analytic - fd) / max(abs(analytic) + abs(fd), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_model(model: Model, path: str | Path) -> None:
    np.savez_compressed(
        path,
        format_version=np.array(MODEL_FORMAT_VERSION),
        head=np.array(model.head),
        weights=model.weights,
        bias=model.bias,
        train_log=np.array(model.train_log, dtype=np.float64),
        dim=np.array(model.featurizer.dim),
        word_ngrams=np.array(model.featurizer.word_ngrams, dtype=np.int64),
        char_ngrams=np.array(model.featurizer.char_ngrams, dtype=np.int64),
        cross_features=np.array(model.featurizer.cross_features),
        hash_salt=np.array(model.featurizer.hash_salt),
    )


def load_model(path: str | Path) -> Model:
    with np.load(path, allow_pickle=False) as blob:
        version = str(blob["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"cannot load model format {version!r}; this build reads {MODEL_FORMAT_VERSION!r}"
            )
        featurizer = FeaturizerConfig(
            dim=int(blob["dim"]),
            word_ngrams=tuple(int(n) for n in blob["word_ngrams"]),
            char_ngrams=tuple(int(n) for n in blob["char_ngrams"]),
            cross_features=bool(blob["cross_features"]),
            hash_salt=int(blob["hash_salt"]),
        )
        return Model(
            head=str(blob["head"]),
            weights=blob["weights"].astype(np.float64),
            bias=blob["bias"].astype(np.float64),
            featurizer=featurizer,
            train_log=tuple(float(x) for x in blob["train_log"]),
        )
