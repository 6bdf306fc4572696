"""Feature-based linear-chain CRF: maximum-likelihood training with L2,
exact inference, single-task NER or joint POS+NER via product labels.

Joint operation folds the POS tag into the label, restricting the label
set to (NER, POS) pairs observed in training; predictions project back
to the NER component.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from seqtag import chain
from seqtag.corpus import NER_LABELS, POS_TAGS
from seqtag.features import sentence_features

TASKS = ("single", "joint")

_POS_ORDER = {p: i for i, p in enumerate(POS_TAGS)}
_NER_ORDER = {l: i for i, l in enumerate(NER_LABELS)}


@dataclass
class FeatureConfig:
    use_embeddings: bool = False


@dataclass
class CrfTrainConfig:
    l2: float = 0.1
    learning_rate: float = 0.05
    epochs: int = 50
    patience: int = 5
    batch_size: int = 8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class CrfModel:
    """Sparse per-label feature weights plus a dense transition matrix.

    labels are NerLabel values (single task) or (NerLabel, pos) pairs
    (joint task). state_weights row f aligns with feature_index;
    unseen features score zero.
    """

    labels: list
    task: str
    feature_index: dict[str, int]
    state_weights: np.ndarray   # (F, L)
    transitions: np.ndarray     # (L, L)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    trained_on: dict = field(default_factory=dict)

    def __post_init__(self):
        self._label_index = {label: i for i, label in enumerate(self.labels)}

    @property
    def n_labels(self):
        return len(self.labels)

    def label_id(self, label):
        idx = self._label_index.get(label)
        if idx is None:
            raise KeyError(f"label {label!r} outside the model's label set")
        return idx

    def state_weight(self, feature, label):
        row = self.feature_index.get(feature)
        if row is None:
            return 0.0
        return float(self.state_weights[row, self.label_id(label)])


def single_task_labels():
    return list(NER_LABELS)


def joint_task_labels(corpus):
    """(NER, POS) pairs observed in the corpus, in canonical order."""
    observed = {
        (token.ner, token.pos) for sentence in corpus for token in sentence
    }
    return sorted(observed, key=lambda p: (_NER_ORDER[p[0]], _POS_ORDER[p[1]]))


def gold_label(token, task):
    return token.ner if task == "single" else (token.ner, token.pos)


def project_ner(label, task):
    return label if task == "single" else label[0]


def emissions(model, sentence, features):
    """Score matrix (T, L): entry (t, y) sums weight * value over the
    features present at t."""
    if len(features) != len(sentence):
        raise ValueError("need one feature map per token")
    scores = np.zeros((len(sentence), model.n_labels))
    weights = model.state_weights
    index = model.feature_index
    for t, feats in enumerate(features):
        rows, values = [], []
        for key, value in feats.items():
            row = index.get(key)
            if row is not None:
                rows.append(row)
                values.append(value)
        if rows:
            scores[t] = np.asarray(values) @ weights[rows]
    return scores


def _gold_indices(model, sentence, gold):
    if len(gold) != len(sentence):
        raise ValueError("gold length does not match sentence length")
    return [model.label_id(label) for label in gold]


def nll_and_gradient(model, sentence, gold, l2=0.0, features=None, embeddings=None):
    """Negative log-likelihood of the gold path and its exact gradient.

    The gradient is (feature-keyed sparse map of per-label vectors,
    dense L x L transition gradient): expected counts under the model
    minus empirical counts, plus the l2 penalty term at the given
    strength. Trainers pass l2=0 here and apply the batch-scaled
    penalty themselves.
    """
    if features is None:
        features = sentence_features(
            sentence, model.feature_config.use_embeddings, embeddings
        )
    gold_ids = _gold_indices(model, sentence, gold)
    scores = emissions(model, sentence, features)
    log_z = chain.log_partition(scores, model.transitions)
    gold_score = chain.path_score(scores, model.transitions, gold_ids)
    node, edge = chain.marginals(scores, model.transitions)

    n_labels = model.n_labels
    grad_map = {}
    for t, feats in enumerate(features):
        delta = node[t].copy()
        delta[gold_ids[t]] -= 1.0
        for key, value in feats.items():
            existing = grad_map.get(key)
            if existing is None:
                grad_map[key] = value * delta
            else:
                existing += value * delta
    grad_trans = edge.sum(axis=0) if edge.shape[0] else np.zeros((n_labels, n_labels))
    for t in range(1, len(gold_ids)):
        grad_trans[gold_ids[t - 1], gold_ids[t]] -= 1.0

    nll = log_z - gold_score
    if l2 > 0.0:
        nll += 0.5 * l2 * (
            float((model.state_weights**2).sum()) + float((model.transitions**2).sum())
        )
        for key, row in model.feature_index.items():
            weight_row = model.state_weights[row]
            if key in grad_map:
                grad_map[key] += l2 * weight_row
            elif np.any(weight_row):
                grad_map[key] = l2 * weight_row.copy()
        grad_trans += l2 * model.transitions
    return nll, (grad_map, grad_trans)


class _TrainState:
    """Growable feature-indexed weight matrix used during training."""

    def __init__(self, n_labels):
        self.n_labels = n_labels
        self.feature_index = {}
        self.matrix = np.zeros((256, n_labels))
        self.transitions = np.zeros((n_labels, n_labels))

    @property
    def n_features(self):
        return len(self.feature_index)

    def row(self, key):
        idx = self.feature_index.get(key)
        if idx is None:
            idx = len(self.feature_index)
            self.feature_index[key] = idx
            if idx >= self.matrix.shape[0]:
                grown = np.zeros((self.matrix.shape[0] * 2, self.n_labels))
                grown[: self.matrix.shape[0]] = self.matrix
                self.matrix = grown
        return idx

    def snapshot(self):
        return self.matrix[: self.n_features].copy(), self.transitions.copy()


def _index_features(state, features):
    """Pre-resolve feature keys to rows (registering new ones)."""
    return [
        ([state.row(k) for k in feats], np.fromiter(feats.values(), dtype=float))
        for feats in features
    ]


def _sentence_nll_and_sparse_grad(state, indexed, gold_ids):
    n_labels = state.n_labels
    scores = np.zeros((len(indexed), n_labels))
    weights = state.matrix
    for t, (rows, values) in enumerate(indexed):
        if rows:
            scores[t] = values @ weights[rows]
    log_z = chain.log_partition(scores, state.transitions)
    gold_score = chain.path_score(scores, state.transitions, gold_ids)
    node, edge = chain.marginals(scores, state.transitions)

    grad_rows = {}
    for t, (rows, values) in enumerate(indexed):
        delta = node[t].copy()
        delta[gold_ids[t]] -= 1.0
        for row, value in zip(rows, values):
            existing = grad_rows.get(row)
            if existing is None:
                grad_rows[row] = value * delta
            else:
                existing += value * delta
    grad_trans = edge.sum(axis=0) if edge.shape[0] else np.zeros((n_labels, n_labels))
    for t in range(1, len(gold_ids)):
        grad_trans[gold_ids[t - 1], gold_ids[t]] -= 1.0
    return log_z - gold_score, grad_rows, grad_trans


def _sentence_nll(state, indexed, gold_ids):
    scores = np.zeros((len(indexed), state.n_labels))
    for t, (rows, values) in enumerate(indexed):
        if rows:
            scores[t] = values @ state.matrix[rows]
    return chain.log_partition(scores, state.transitions) - chain.path_score(
        scores, state.transitions, gold_ids
    )


def train_crf(corpus, valid, config, task="single", embeddings=None, log=None):
    """Mini-batch gradient descent on the regularized NLL.

    Stops at config.epochs or when validation NLL has not improved for
    config.patience epochs; the returned model carries the parameters of
    the best validation epoch. Validation sentences with labels outside
    the training label set (possible for joint product labels) are left
    out of the validation score.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    use_emb = embeddings is not None

    labels = single_task_labels() if task == "single" else joint_task_labels(corpus)
    label_index = {label: i for i, label in enumerate(labels)}
    state = _TrainState(len(labels))

    def prepare(data, register):
        items = []
        for sentence in data:
            feats = sentence_features(sentence, use_emb, embeddings)
            gold = [label_index.get(gold_label(t, task)) for t in sentence]
            if any(g is None for g in gold):
                items.append(None)
                continue
            if register:
                indexed = _index_features(state, feats)
            else:
                indexed = [
                    (
                        [state.feature_index[k] for k in f if k in state.feature_index],
                        np.fromiter(
                            (v for k, v in f.items() if k in state.feature_index),
                            dtype=float,
                        ),
                    )
                    for f in feats
                ]
            items.append((indexed, gold))
        return items

    train_items = prepare(corpus, register=True)
    if any(item is None for item in train_items):
        raise ValueError("training sentence with label outside the label set")
    valid_items = [item for item in prepare(valid, register=False) if item is not None]

    rng = np.random.default_rng(config.seed)
    n = len(train_items)
    order = np.arange(n)
    decay = config.l2 / n if n else 0.0

    best_valid = np.inf
    best_params = state.snapshot()
    best_features = dict(state.feature_index)
    epochs_since_best = 0

    for epoch in range(config.epochs):
        started = time.perf_counter()
        if config.shuffle:
            rng.shuffle(order)
        epoch_nll = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_rows = {}
            grad_trans = np.zeros((state.n_labels, state.n_labels))
            for idx in batch:
                indexed, gold_ids = train_items[idx]
                nll, rows, trans = _sentence_nll_and_sparse_grad(state, indexed, gold_ids)
                epoch_nll += nll
                grad_trans += trans
                for row, vec in rows.items():
                    existing = grad_rows.get(row)
                    if existing is None:
                        grad_rows[row] = vec.copy()
                    else:
                        existing += vec
            scale = config.learning_rate / len(batch)
            if decay:
                factor = 1.0 - config.learning_rate * decay
                state.matrix[: state.n_features] *= factor
                state.transitions *= factor
            for row, vec in grad_rows.items():
                state.matrix[row] -= scale * vec
            state.transitions -= scale * grad_trans

        if valid_items:
            valid_nll = sum(
                _sentence_nll(state, indexed, gold) for indexed, gold in valid_items
            ) / len(valid_items)
        else:
            valid_nll = epoch_nll / n
        if log is not None:
            log.append(
                {
                    "epoch": epoch + 1,
                    "train_nll": epoch_nll / n,
                    "valid_nll": valid_nll,
                    "seconds": time.perf_counter() - started,
                }
            )
        if valid_nll < best_valid:
            best_valid = valid_nll
            best_params = state.snapshot()
            best_features = dict(state.feature_index)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break

    weights, transitions = best_params
    return CrfModel(
        labels=labels,
        task=task,
        feature_index=best_features,
        state_weights=weights,
        transitions=transitions,
        feature_config=FeatureConfig(use_embeddings=use_emb),
        trained_on={
            "sentences": len(corpus),
            "task": task,
            "seed": config.seed,
            "best_valid_nll": float(best_valid),
        },
    )


def tag_crf(model, sentence, embeddings=None):
    """Viterbi-decode one sentence; joint models project labels to NER."""
    if model.feature_config.use_embeddings and embeddings is None:
        raise ValueError("this model was trained with embedding features")
    features = sentence_features(
        sentence, model.feature_config.use_embeddings, embeddings
    )
    scores = emissions(model, sentence, features)
    path, _ = chain.viterbi(scores, model.transitions)
    return [project_ner(model.labels[i], model.task) for i in path]


def tag_crf_full(model, sentence, embeddings=None):
    """Like tag_crf but keeps the full labels (for joint POS output)."""
    if model.feature_config.use_embeddings and embeddings is None:
        raise ValueError("this model was trained with embedding features")
    features = sentence_features(
        sentence, model.feature_config.use_embeddings, embeddings
    )
    scores = emissions(model, sentence, features)
    path, _ = chain.viterbi(scores, model.transitions)
    return [model.labels[i] for i in path]
