"""Pluggable feature backbone: identity, linear, or one-hidden-layer MLP.

The backbone is trainable only during the first task; afterwards it is
frozen and every later task sees the exact same feature space. That
stability is what keeps stored class statistics valid across tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf_mod
from .errors import InvalidArgumentError, InvalidStateError
from .losses import _log_softmax

KINDS = ("identity", "linear", "mlp1")
INIT_STD = 0.01


@dataclass
class ExtractorSpec:
    kind: str
    input_dim: int
    feature_dim: int
    hidden_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown extractor kind {self.kind!r}")
        if self.input_dim < 1 or self.feature_dim < 1:
            raise InvalidArgumentError("extractor dims must be >= 1")
        if self.kind == "identity" and self.input_dim != self.feature_dim:
            raise InvalidArgumentError("identity extractor requires input_dim == feature_dim")
        if self.kind == "mlp1" and self.hidden_dim < 1:
            raise InvalidArgumentError("mlp1 requires hidden_dim >= 1")


@dataclass
class Extractor:
    spec: ExtractorSpec
    params: dict[str, np.ndarray] = field(default_factory=dict)
    frozen: bool = False

    def embed(self, x) -> np.ndarray:
        """Map one input vector to feature space."""
        return self.embed_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def embed_batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise InvalidArgumentError(
                f"input must be (N, {self.spec.input_dim}), got {x.shape}")
        if self.spec.kind == "identity":
            return x.copy()
        if self.spec.kind == "linear":
            return x @ self.params["W"].T + self.params["b"]
        h = np.maximum(x @ self.params["W1"].T + self.params["b1"], 0.0)
        return h @ self.params["W2"].T + self.params["b2"]

    def freeze(self) -> "Extractor":
        self.frozen = True
        return self

    def snapshot(self) -> bytes:
        """Bitwise-comparable serialization of all parameters."""
        parts = []
        for name in sorted(self.params):
            parts.append(name.encode())
            parts.append(self.params[name].tobytes())
        return b"|".join(parts)


def init(spec: ExtractorSpec) -> Extractor:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2]))
    params: dict[str, np.ndarray] = {}
    if spec.kind == "linear":
        params["W"] = rng.normal(0.0, INIT_STD, size=(spec.feature_dim, spec.input_dim))
        params["b"] = np.zeros(spec.feature_dim)
    elif spec.kind == "mlp1":
        params["W1"] = rng.normal(0.0, INIT_STD, size=(spec.hidden_dim, spec.input_dim))
        params["b1"] = np.zeros(spec.hidden_dim)
        params["W2"] = rng.normal(0.0, INIT_STD, size=(spec.feature_dim, spec.hidden_dim))
        params["b2"] = np.zeros(spec.feature_dim)
    return Extractor(spec, params)


def _ce_forward_backward(ext: Extractor, head: clf_mod.IncrementalClassifier,
                         x: np.ndarray, y: np.ndarray):
    """Joint cross-entropy value plus gradients for head and extractor params."""
    n = x.shape[0]
    kind = ext.spec.kind
    if kind == "identity":
        feats, cache = x, None
    elif kind == "linear":
        feats, cache = x @ ext.params["W"].T + ext.params["b"], None
    else:
        pre = x @ ext.params["W1"].T + ext.params["b1"]
        h = np.maximum(pre, 0.0)
        feats = h @ ext.params["W2"].T + ext.params["b2"]
        cache = (pre, h)

    logp = _log_softmax(feats @ head.W.T + head.b)
    value = float(-logp[np.arange(n), y].mean())
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    d /= n

    head_grads = {"W": d.T @ feats, "b": d.sum(axis=0)}
    ext_grads: dict[str, np.ndarray] = {}
    if kind != "identity":
        dfeat = d @ head.W
        if kind == "linear":
            ext_grads["W"] = dfeat.T @ x
            ext_grads["b"] = dfeat.sum(axis=0)
        else:
            pre, h = cache
            ext_grads["W2"] = dfeat.T @ h
            ext_grads["b2"] = dfeat.sum(axis=0)
            dh = (dfeat @ ext.params["W2"]) * (pre > 0)
            ext_grads["W1"] = dh.T @ x
            ext_grads["b1"] = dh.sum(axis=0)
    return value, head_grads, ext_grads


def train_task0(ext: Extractor, data, head: clf_mod.IncrementalClassifier, cfg):
    """Jointly train backbone and head with plain cross-entropy via Adam.

    `data` is a TaskDataset whose train labels must already be row indices
    of `head`. Mini-batch order is reseeded per epoch from the config seed.
    """
    from .dataio import batches  # local import to avoid a module cycle

    if ext.frozen:
        raise InvalidStateError("extractor is frozen; task-0 training is not allowed")
    x_all = np.asarray(data.train_features, dtype=np.float64)
    y_all = np.asarray(data.train_labels, dtype=np.int64)
    if y_all.max() >= head.n_classes:
        raise InvalidStateError("task-0 labels exceed the classifier's class count")

    head_state = clf_mod.new_adam_state(head, lr=cfg.lr)
    ext_m = {k: np.zeros_like(v) for k, v in ext.params.items()}
    ext_v = {k: np.zeros_like(v) for k, v in ext.params.items()}
    t = 0
    for epoch in range(cfg.epochs_task0):
        for idx in batches(data, cfg.batch_size, cfg.seed, epoch):
            x, y = x_all[idx], y_all[idx]
            _, head_grads, ext_grads = _ce_forward_backward(ext, head, x, y)
            t += 1
            clf_mod.adam_update(head.W, head_grads["W"], head_state.m_W, head_state.v_W,
                                t, cfg.lr, head_state.beta1, head_state.beta2, head_state.eps)
            clf_mod.adam_update(head.b, head_grads["b"], head_state.m_b, head_state.v_b,
                                t, cfg.lr, head_state.beta1, head_state.beta2, head_state.eps)
            for name, g in ext_grads.items():
                clf_mod.adam_update(ext.params[name], g, ext_m[name], ext_v[name],
                                    t, cfg.lr, 0.9, 0.999, 1e-8)
    return ext, head
