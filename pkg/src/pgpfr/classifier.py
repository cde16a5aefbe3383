"""Growing linear classification head and the Adam optimizer that trains it.

The head holds one weight row and bias per class. Classes arrive in
contiguous task ranges; `expand` appends rows without touching existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

INIT_STD = 0.01


@dataclass
class IncrementalClassifier:
    W: np.ndarray                      # (C, D), row k is the weight of class k
    b: np.ndarray                      # (C,)
    task_ranges: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "IncrementalClassifier":
        return IncrementalClassifier(self.W.copy(), self.b.copy(), list(self.task_ranges))


def new_classifier(dim: int, k: int, seed: int) -> IncrementalClassifier:
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    if k < 1:
        raise InvalidArgumentError(f"class count must be >= 1, got {k}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    w = rng.normal(0.0, INIT_STD, size=(k, dim))
    return IncrementalClassifier(w, np.zeros(k), [(0, k)])


def expand(clf: IncrementalClassifier, d: int, seed: int) -> IncrementalClassifier:
    """Append d freshly initialized class rows as a new task range."""
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    task_idx = len(clf.task_ranges)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, task_idx]))
    new_w = rng.normal(0.0, INIT_STD, size=(d, clf.dim))
    lo = clf.n_classes
    return IncrementalClassifier(
        np.vstack([clf.W, new_w]),
        np.concatenate([clf.b, np.zeros(d)]),
        clf.task_ranges + [(lo, lo + d)],
    )


def logits(clf: IncrementalClassifier, features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != clf.dim:
        raise InvalidArgumentError(
            f"features must be (N, {clf.dim}), got {features.shape}")
    return features @ clf.W.T + clf.b


def predict(clf: IncrementalClassifier, features) -> np.ndarray:
    """Argmax class per row; ties resolve to the smallest class id."""
    return np.argmax(logits(clf, features), axis=1)


@dataclass
class AdamState:
    m_W: np.ndarray
    v_W: np.ndarray
    m_b: np.ndarray
    v_b: np.ndarray
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def new_adam_state(clf: IncrementalClassifier, lr: float = 0.001) -> AdamState:
    if lr <= 0:
        raise InvalidArgumentError(f"lr must be positive, got {lr}")
    return AdamState(
        m_W=np.zeros_like(clf.W), v_W=np.zeros_like(clf.W),
        m_b=np.zeros_like(clf.b), v_b=np.zeros_like(clf.b), lr=lr)


def adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
                t: int, lr: float, beta1: float, beta2: float, eps: float) -> None:
    """One in-place Adam step with bias correction (t is the 1-based step)."""
    m *= beta1
    m += (1 - beta1) * grad
    v *= beta2
    v += (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def adam_step(clf: IncrementalClassifier, grads, state: AdamState):
    """Apply one Adam update to (W, b) from a LossValueGrad-like object."""
    grad_w = np.asarray(grads.grad_W, dtype=np.float64)
    grad_b = np.asarray(grads.grad_b, dtype=np.float64)
    if grad_w.shape != clf.W.shape or grad_b.shape != clf.b.shape:
        raise InvalidArgumentError(
            f"gradient shapes {grad_w.shape}/{grad_b.shape} do not match "
            f"classifier {clf.W.shape}/{clf.b.shape}")
    state.step_count += 1
    t = state.step_count
    adam_update(clf.W, grad_w, state.m_W, state.v_W, t,
                state.lr, state.beta1, state.beta2, state.eps)
    adam_update(clf.b, grad_b, state.m_b, state.v_b, t,
                state.lr, state.beta1, state.beta2, state.eps)
    return clf, state
