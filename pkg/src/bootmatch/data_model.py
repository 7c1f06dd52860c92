"""Panel dataset: covariates, group indicator and a balanced response panel."""

import hashlib

import numpy as np

from .errors import (
    DegeneratePeriods,
    IndexOutOfBounds,
    NonFiniteValue,
    RowCountMismatch,
    SingleArmOnly,
    ValidationError,
)


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class PanelDataset:
    """Subjects x (features, group, responses) with a single pre/post split.

    Parameters
    ----------
    features : array_like, shape (n_subjects, k)
    group : array_like of {0, 1}, shape (n_subjects,)
        1 marks a treated subject.
    responses : array_like, shape (n_subjects, T)
    pre_period_len : int
        Number of leading response columns observed before treatment.
    subject_ids : sequence of str, optional

    Arrays are copied and made read-only; instances never change after
    construction. Call :func:`validate` to check the invariants.
    """

    __slots__ = ("features", "group", "responses", "pre_period_len", "subject_ids")

    def __init__(self, features, group, responses, pre_period_len, subject_ids=None):
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        responses = np.asarray(responses, dtype=float)
        if responses.ndim == 1:
            responses = responses[:, None]
        object.__setattr__(self, "features", _frozen(features, float))
        g = np.asarray(group, dtype=float)
        # non-binary values are kept as floats so validate() can report them
        g_dtype = np.int8 if np.isin(g, (0.0, 1.0)).all() else float
        object.__setattr__(self, "group", _frozen(g, g_dtype))
        object.__setattr__(self, "responses", _frozen(responses, float))
        object.__setattr__(self, "pre_period_len", int(pre_period_len))
        ids = None if subject_ids is None else tuple(str(s) for s in subject_ids)
        object.__setattr__(self, "subject_ids", ids)

    def __setattr__(self, name, value):
        raise AttributeError("PanelDataset is immutable")

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.pre_period_len == other.pre_period_len
            and self.subject_ids == other.subject_ids
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.group, other.group)
            and np.array_equal(self.responses, other.responses)
        )

    __hash__ = None

    def __len__(self):
        return self.group.shape[0]

    def __repr__(self):
        return (
            f"PanelDataset(subjects={len(self)}, treated={self.n_treated}, "
            f"k={self.n_features}, t={self.pre_period_len}, T={self.n_periods})"
        )

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_periods(self):
        return self.responses.shape[1]

    @property
    def n_treated(self):
        return int(np.count_nonzero(self.group == 1))

    @property
    def n_control(self):
        return int(np.count_nonzero(self.group == 0))

    def fingerprint(self):
        """SHA-256 content digest over every field."""
        h = hashlib.sha256()
        for arr in (self.features, self.group, self.responses):
            h.update(repr(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(self.pre_period_len).encode())
        if self.subject_ids is not None:
            h.update("\x1f".join(self.subject_ids).encode())
        return h.hexdigest()


def validate(dataset):
    """Raise the first violated invariant as a ValidationError subclass."""
    n = dataset.group.shape[0]
    if dataset.group.ndim != 1:
        raise RowCountMismatch("group must be one-dimensional")
    for name, arr in (("features", dataset.features), ("responses", dataset.responses)):
        if arr.ndim != 2 or arr.shape[0] != n:
            raise RowCountMismatch(f"{name} has {arr.shape[0]} rows, group has {n}")
    if dataset.subject_ids is not None and len(dataset.subject_ids) != n:
        raise RowCountMismatch(f"subject_ids has {len(dataset.subject_ids)} rows, group has {n}")
    if dataset.n_features < 1:
        raise ValidationError("at least one feature column is required")
    t, T = dataset.pre_period_len, dataset.n_periods
    if not 1 <= t < T:
        raise DegeneratePeriods(f"need 1 <= pre_period_len < T, got t={t}, T={T}")
    bad = ~np.isin(dataset.group, (0, 1))
    if bad.any():
        raise ValidationError(f"group indicator must be 0 or 1 (row {int(np.argmax(bad))})")
    for name, arr in (("features", dataset.features), ("responses", dataset.responses)):
        finite = np.isfinite(arr)
        if not finite.all():
            row, col = np.argwhere(~finite)[0]
            raise NonFiniteValue(
                f"non-finite value in {name} at row {row}, column {col}", row=int(row), col=int(col)
            )
    n_treated = dataset.n_treated
    if n_treated == 0 or n_treated == n:
        raise SingleArmOnly(f"need both arms, got {n_treated} treated of {n}")


def subset(dataset, indices):
    """Rows ``indices`` of ``dataset``, in that order; duplicates allowed."""
    idx = np.asarray(indices, dtype=np.intp)
    n = len(dataset)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfBounds(f"index out of range for dataset of {n} subjects")
    ids = None
    if dataset.subject_ids is not None:
        src = dataset.subject_ids
        ids = [src[i] for i in idx.tolist()]
    return PanelDataset(
        dataset.features[idx],
        dataset.group[idx],
        dataset.responses[idx],
        dataset.pre_period_len,
        ids,
    )


def _check_row(dataset, row):
    if not -len(dataset) <= row < len(dataset):
        raise IndexOutOfBounds(f"row {row} out of range")


def pre_period_mean(dataset, row):
    _check_row(dataset, row)
    return float(dataset.responses[row, :dataset.pre_period_len].mean())


def post_period_mean(dataset, row):
    _check_row(dataset, row)
    return float(dataset.responses[row, dataset.pre_period_len:].mean())


def pre_period_means(dataset, rows=None):
    """Vectorised :func:`pre_period_mean` over ``rows`` (all rows by default)."""
    y = dataset.responses if rows is None else dataset.responses[np.asarray(rows, dtype=np.intp)]
    return y[:, :dataset.pre_period_len].mean(axis=1)


def post_period_means(dataset, rows=None):
    y = dataset.responses if rows is None else dataset.responses[np.asarray(rows, dtype=np.intp)]
    return y[:, dataset.pre_period_len:].mean(axis=1)
