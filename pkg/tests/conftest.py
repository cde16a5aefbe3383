"""Shared test helpers: finite-difference gradients and scalar reference
implementations of the losses, kept independent of the library's vectorized
code paths."""

import math

import numpy as np
import pytest

from pgpfr.classifier import IncrementalClassifier
from pgpfr.losses import LossValueGrad
from pgpfr.prototypes import ClassStatistics, PrototypeStore


def fd_gradients(loss_fn, clf: IncrementalClassifier, h: float = 1e-5):
    """Central finite differences of loss_fn(clf).value over W and b."""
    gw = np.zeros_like(clf.W)
    gb = np.zeros_like(clf.b)
    for i in range(clf.W.shape[0]):
        for j in range(clf.W.shape[1]):
            orig = clf.W[i, j]
            clf.W[i, j] = orig + h
            up = loss_fn(clf).value
            clf.W[i, j] = orig - h
            down = loss_fn(clf).value
            clf.W[i, j] = orig
            gw[i, j] = (up - down) / (2 * h)
    for i in range(clf.b.shape[0]):
        orig = clf.b[i]
        clf.b[i] = orig + h
        up = loss_fn(clf).value
        clf.b[i] = orig - h
        down = loss_fn(clf).value
        clf.b[i] = orig
        gb[i] = (up - down) / (2 * h)
    return gw, gb


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def max_rel_error(analytic: LossValueGrad, fd_w: np.ndarray, fd_b: np.ndarray) -> float:
    # Infinity-norm relative error with a single scale shared by W and b.
    # Per-entry (or per-block) denominators would flag finite-difference
    # cancellation noise on gradient components that are genuinely near zero
    # while the rest of the gradient is large.
    pairs = ((analytic.grad_W, fd_w), (analytic.grad_b, fd_b))
    scale = max(max(float(np.abs(a).max()), float(np.abs(f).max()))
                for a, f in pairs)
    scale = max(scale, 1e-6)
    return max(float(np.abs(a - f).max()) for a, f in pairs) / scale


def scalar_softmax_ce(logit_row, label) -> float:
    """-log softmax(logits)[label], evaluated with plain python floats."""
    m = max(logit_row)
    exps = [math.exp(v - m) for v in logit_row]
    return -math.log(exps[label] / sum(exps))


def scalar_replay_ce(batch, w, b, n_old, temp) -> float:
    """Row-by-row reference of the merged-batch cross-entropy."""
    total = 0.0
    for row, label, is_pseudo in zip(batch.features, batch.labels, batch.pseudo_mask):
        if is_pseudo:
            logits = [(sum(w[c][j] * row[j] for j in range(len(row))) + b[c]) / temp
                      for c in range(n_old)]
        else:
            logits = [sum(w[c][j] * row[j] for j in range(len(row))) + b[c]
                      for c in range(len(w))]
        total += scalar_softmax_ce(logits, int(label))
    return total / len(batch.labels)


def scalar_vpr(store: PrototypeStore, w, b, gamma) -> float:
    """Reference of the (variational) prototype replay loss; gamma=0 gives
    the plain prototype replay value."""
    ids = store.class_ids
    total = 0.0
    for k_pos, k in enumerate(ids):
        mu = store.get(k).prototype
        cov = store.get(k).covariance
        terms = []
        for c_pos, c in enumerate(ids):
            lin = sum(w[c][j] * mu[j] for j in range(len(mu))) + b[c]
            if c_pos == k_pos:
                terms.append(lin)
            else:
                diff = [w[c][j] - w[k][j] for j in range(len(mu))]
                q = sum(diff[i] * cov[i][j] * diff[j]
                        for i in range(len(mu)) for j in range(len(mu)))
                terms.append(lin + gamma * q)
        m = max(terms)
        total += -(terms[k_pos] - m) + math.log(sum(math.exp(t - m) for t in terms))
    return total / len(ids)


def random_store(rng, n_old: int, dim: int, zero_cov: bool = False) -> PrototypeStore:
    stats = {}
    for k in range(n_old):
        if zero_cov:
            cov = np.zeros((dim, dim))
        else:
            a = rng.normal(size=(dim + 2, dim))
            cov = np.cov(a, rowvar=False)
            cov = (cov + cov.T) / 2
        stats[k] = ClassStatistics(prototype=rng.normal(size=dim),
                                   covariance=cov, count=dim + 2)
    return PrototypeStore(stats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
