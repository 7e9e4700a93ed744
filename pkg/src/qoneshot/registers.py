"""Labeled register layouts.

A layout is an ordered tuple of (label, dimension) pairs. Operators and state
vectors are stored against the tensor order of their layout, so every
permutation or embedding is a reshape/transpose driven by the layout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadParam, BadPartition, LabelCollision, UnknownLabel
from .linalg import check_dim


@dataclass(frozen=True)
class RegisterLayout:
    labels: tuple
    dims: tuple

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        if len(labels) != len(dims):
            raise BadParam(f"{len(labels)} labels vs {len(dims)} dims")
        if len(set(labels)) != len(labels):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            raise LabelCollision(f"duplicate register labels {dupes}")
        for lab, d in zip(labels, dims):
            if d < 1:
                raise BadParam(f"register {lab!r} has dimension {d} < 1")

    @staticmethod
    def of(*pairs):
        return RegisterLayout(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def total_dim(self):
        return int(np.prod(self.dims, dtype=object)) if self.dims else 1

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in layout {list(self.labels)}") from None

    def dim_of(self, label):
        return self.dims[self.index(label)]

    def indices_of(self, labels):
        labs = list(labels)
        if len(set(labs)) != len(labs):
            raise LabelCollision(f"repeated labels in selection {labs}")
        return [self.index(x) for x in labs]

    def restrict(self, labels):
        """Sub-layout of `labels` in this layout's original order."""
        keep = set(labels)
        missing = keep - set(self.labels)
        if missing:
            raise UnknownLabel(f"labels {sorted(missing)} not in layout")
        pairs = [(l, d) for l, d in zip(self.labels, self.dims) if l in keep]
        return RegisterLayout(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def concat(self, other):
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelCollision(f"labels {sorted(clash)} present on both sides")
        return RegisterLayout(self.labels + other.labels, self.dims + other.dims)

    def complement(self, labels):
        keep = set(labels)
        missing = keep - set(self.labels)
        if missing:
            raise UnknownLabel(f"labels {sorted(missing)} not in layout")
        return tuple(l for l in self.labels if l not in keep)

    def split(self, left_labels):
        """Validate a bipartition; returns (left_tuple, right_tuple)."""
        left = list(left_labels)
        if len(set(left)) != len(left):
            raise BadPartition(f"repeated labels in partition {left}")
        left_set = set(left)
        missing = left_set - set(self.labels)
        if missing:
            raise UnknownLabel(f"labels {sorted(missing)} not in layout")
        if not left_set or left_set == set(self.labels):
            raise BadPartition("partition must be proper and nonempty on both sides")
        right = tuple(l for l in self.labels if l not in left_set)
        return tuple(left), right

    def relabeled(self, mapping):
        new = tuple(mapping.get(l, l) for l in self.labels)
        return RegisterLayout(new, self.dims)

    def guard(self, what="operator"):
        check_dim(self.total_dim, what=what)
        return self

    def to_json(self):
        return [{"label": l, "dim": d} for l, d in zip(self.labels, self.dims)]

    @staticmethod
    def from_json(data):
        if not isinstance(data, list) or not data:
            raise BadParam("layout must be a nonempty list of {label, dim}")
        labels, dims = [], []
        for item in data:
            if not isinstance(item, dict) or "label" not in item or "dim" not in item:
                raise BadParam(f"bad layout entry {item!r}")
            labels.append(item["label"])
            dims.append(item["dim"])
        return RegisterLayout(tuple(labels), tuple(dims))


def permutation_to(layout, new_order):
    """Axis permutation taking `layout` order to `new_order` (a label list)."""
    if sorted(new_order) != sorted(layout.labels):
        raise BadPartition(f"{list(new_order)} is not a permutation of {list(layout.labels)}")
    return [layout.index(l) for l in new_order]
