"""Per-class feature statistics: prototypes (class means) and covariances.

Statistics are computed once per task over frozen-backbone features and
accumulate in a PrototypeStore that only ever grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .numerics import covariance, mean_rows


@dataclass
class ClassStatistics:
    prototype: np.ndarray      # (D,) class mean
    covariance: np.ndarray     # (D, D) unbiased sample covariance, zero when count < 2
    count: int


@dataclass
class PrototypeStore:
    stats: dict[int, ClassStatistics] = field(default_factory=dict)

    @property
    def class_ids(self) -> list[int]:
        return list(self.stats.keys())  # dicts preserve insertion order

    def __len__(self) -> int:
        return len(self.stats)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self.stats

    def get(self, class_id: int) -> ClassStatistics:
        return self.stats[class_id]

    def prototype_matrix(self) -> np.ndarray:
        """Prototypes stacked in insertion order, shape (n_old, D)."""
        return np.stack([s.prototype for s in self.stats.values()])


def fit_class_statistics(features, labels) -> dict[int, ClassStatistics]:
    """Prototype, covariance, and count per distinct label."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidArgumentError("fit_class_statistics requires a non-empty feature matrix")
    if labels.shape[0] != features.shape[0]:
        raise InvalidArgumentError("labels must align with feature rows")
    out: dict[int, ClassStatistics] = {}
    for cid in np.unique(labels):
        rows = features[labels == cid]
        out[int(cid)] = ClassStatistics(
            prototype=mean_rows(rows),
            covariance=covariance(rows),
            count=rows.shape[0],
        )
    return out


def batch_class_prototypes(features, labels) -> dict[int, np.ndarray]:
    """Mean feature per distinct label present in one mini-batch."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidArgumentError("batch_class_prototypes requires a non-empty batch")
    if labels.shape[0] != features.shape[0]:
        raise InvalidArgumentError("labels must align with feature rows")
    return {int(cid): mean_rows(features[labels == cid]) for cid in np.unique(labels)}


def register(store: PrototypeStore, new_stats: dict[int, ClassStatistics]) -> PrototypeStore:
    """Add statistics for previously unseen classes. Duplicates are an error."""
    for cid in new_stats:
        if cid in store.stats:
            raise InvalidStateError(f"class {cid} already registered")
    merged = dict(store.stats)
    for cid, st in new_stats.items():
        merged[int(cid)] = st
    return PrototypeStore(merged)
