"""Pseudo-feature generation with batch prototypes.

Old-class pseudo features are built per batch by translating each new-class
group so that its (batch) prototype lands on the most similar old-class
prototype. Pseudo batches live for one optimizer step only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .numerics import cosine_sim
from .prototypes import PrototypeStore, batch_class_prototypes


@dataclass
class PseudoBatch:
    features: np.ndarray   # (B, D) translated features
    labels: np.ndarray     # (B,) old-class ids

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


@dataclass
class MergedBatch:
    features: np.ndarray       # pseudo rows first, then real rows
    labels: np.ndarray
    pseudo_mask: np.ndarray    # bool, True exactly on pseudo rows

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


def assign_pseudo_label(batch_proto, store: PrototypeStore) -> int:
    """Old class whose prototype is most cosine-similar; ties -> smallest id."""
    if len(store) == 0:
        raise InvalidStateError("prototype store is empty")
    best_id, best_sim = -1, -np.inf
    for cid in store.class_ids:
        s = cosine_sim(batch_proto, store.get(cid).prototype)
        if s > best_sim or (s == best_sim and cid < best_id):
            best_id, best_sim = cid, s
    return best_id


def generate_pseudo_batch(features, labels, store: PrototypeStore,
                          group_prototypes: dict[int, np.ndarray] | None = None) -> PseudoBatch:
    """Translate each label group onto its assigned old-class prototype.

    Every row f of group n becomes f + mu_p - mu_hat_n with pseudo label p,
    where mu_hat_n is the group's (batch) prototype and p the most similar
    old class. `group_prototypes` overrides the batch prototypes, which
    realizes the ablation that uses whole-task class prototypes instead.
    """
    if len(store) == 0:
        raise InvalidStateError("prototype store is empty")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidArgumentError("generate_pseudo_batch requires a non-empty batch")
    protos = batch_class_prototypes(features, labels) if group_prototypes is None \
        else group_prototypes

    pseudo = np.empty_like(features)
    pseudo_labels = np.empty(features.shape[0], dtype=np.int64)
    for cid, proto in protos.items():
        mask = labels == cid
        if not mask.any():
            continue
        p = assign_pseudo_label(proto, store)
        pseudo[mask] = features[mask] + (store.get(p).prototype - proto)
        pseudo_labels[mask] = p
    return PseudoBatch(pseudo, pseudo_labels)


def merge(pseudo: PseudoBatch | None, real_features, real_labels) -> MergedBatch:
    """Concatenate pseudo rows (first) with real rows; mask marks the pseudo ones."""
    real_features = np.asarray(real_features, dtype=np.float64)
    real_labels = np.asarray(real_labels, dtype=np.int64)
    if pseudo is None or pseudo.n_rows == 0:
        return MergedBatch(real_features.copy(), real_labels.copy(),
                           np.zeros(real_features.shape[0], dtype=bool))
    if pseudo.features.shape[1] != real_features.shape[1]:
        raise InvalidArgumentError(
            f"feature dim mismatch: pseudo {pseudo.features.shape[1]}, "
            f"real {real_features.shape[1]}")
    n_pseudo = pseudo.n_rows
    n_real = real_features.shape[0]
    mask = np.concatenate([np.ones(n_pseudo, dtype=bool), np.zeros(n_real, dtype=bool)])
    return MergedBatch(
        np.vstack([pseudo.features, real_features]),
        np.concatenate([pseudo.labels, real_labels]),
        mask,
    )
