"""CSV ingestion, standardization, PCA and stratified splitting."""

from dataclasses import dataclass, field
import csv
import logging
import math
from pathlib import Path
import warnings

import numpy as np

from ..errors import DimensionError, IngestionError, PreprocessingError, SplitError
from .. import rng as rngs

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list
    # original row index, so test samples keep a stable id across runs
    row_ids: np.ndarray = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.labels))
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise IngestionError("features and labels disagree on sample count")
        if not np.isin(self.labels, (0, 1)).all():
            raise IngestionError("labels must be 0 or 1")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.labels[idx], list(self.feature_names), self.row_ids[idx])


def _parse(value, row, column):
    try:
        out = float(value)
    except ValueError:
        raise IngestionError(f"row {row}, column {column!r}: cannot parse {value!r} as a number") from None
    if not math.isfinite(out):
        raise IngestionError(f"row {row}, column {column!r}: non-finite value {value!r}")
    return out


def load_csv(
    path,
    label_column: str,
    *,
    delimiter: str = ",",
    binarize_median: bool = False,
    positive_label: str | None = None,
    drop_columns=(),
) -> Dataset:
    """Read a headed CSV into a :class:`Dataset`.

    Rows are numbered from 1 for the first data row in error messages.
    Labels must be 0/1 unless ``positive_label`` is given (string match
    selects class 1) or ``binarize_median`` is set, in which case values
    strictly above the column median become 1 and ties go to 0.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            rows = list(reader)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise IngestionError(f"{path} has a header but no data rows")
    if label_column not in header:
        raise IngestionError(f"label column {label_column!r} not found in {path}; columns are {header}")
    for name in drop_columns:
        if name not in header:
            raise IngestionError(f"column {name!r} listed for dropping is not in {path}")
    li = header.index(label_column)
    keep = [i for i, h in enumerate(header) if i != li and h not in drop_columns]
    feats = np.empty((len(body), len(keep)))
    raw_labels = []
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise IngestionError(f"row {r}: expected {len(header)} cells, found {len(row)}")
        for j, i in enumerate(keep):
            feats[r - 1, j] = _parse(row[i].strip(), r, header[i])
        raw_labels.append(row[li].strip())

    if positive_label is not None:
        labels = np.array([lab == positive_label for lab in raw_labels], dtype=int)
    else:
        values = np.array([_parse(v, r, label_column) for r, v in enumerate(raw_labels, start=1)])
        if binarize_median:
            labels = (values > np.median(values)).astype(int)
        else:
            bad = [r for r, v in enumerate(values, start=1) if v not in (0.0, 1.0)]
            if bad:
                raise IngestionError(
                    f"row {bad[0]}, column {label_column!r}: label {raw_labels[bad[0] - 1]!r} is not 0/1 "
                    "(use binarize_median or positive_label)"
                )
            labels = values.astype(int)
    return Dataset(feats, labels, [header[i] for i in keep])


def stratified_split(dataset: Dataset, test_fraction: float = 0.3, seed: int = 0, *, stream: str = "split"):
    """Per-class random split returning ``(train, test)`` datasets.

    The test set holds ``round(test_fraction * n)`` samples. Each class first
    receives ``floor(test_fraction * n_class)``; leftover slots go to the
    larger classes (ties to the lower label).
    """
    labels = dataset.labels
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise SplitError("stratified split needs both classes present")
    if counts.min() < 2:
        raise SplitError(f"class {classes[counts.argmin()]} has fewer than 2 samples")
    n_test = math.floor(test_fraction * len(labels) + 0.5)
    per_class = {c: math.floor(test_fraction * k) for c, k in zip(classes, counts)}
    order = sorted(zip(classes, counts), key=lambda ck: (-ck[1], ck[0]))
    remaining = n_test - sum(per_class.values())
    while remaining > 0:
        for c, k in order:
            if remaining == 0:
                break
            if per_class[c] < k - 1:
                per_class[c] += 1
                remaining -= 1
    gen = rngs.stream(seed, stream)
    test_idx = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        test_idx.extend(gen.permutation(members)[: per_class[c]])
    test_idx = np.sort(np.array(test_idx, dtype=int))
    train_idx = np.setdiff1d(np.arange(len(labels)), test_idx)
    return dataset.subset(train_idx), dataset.subset(test_idx)


@dataclass
class PreprocessPipeline:
    """Standardizer plus PCA projection, fitted on a training split."""

    kept_columns: np.ndarray
    means: np.ndarray
    stddevs: np.ndarray
    pca_components: np.ndarray = field(default=None)
    explained_variance: np.ndarray = field(default=None)

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        return (X[:, self.kept_columns] - self.means) / self.stddevs

    def transform(self, X):
        Z = self.standardize(X)
        if self.pca_components is None:
            return Z
        return Z @ self.pca_components.T


def fit_standardizer(X) -> PreprocessPipeline:
    """Population mean/stddev per column; constant columns are dropped with a warning."""
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    keep = np.flatnonzero(sd > 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0)))
    if keep.size == 0:
        raise PreprocessingError("every feature is constant on the training split")
    if keep.size < X.shape[1]:
        dropped = sorted(set(range(X.shape[1])) - set(keep.tolist()))
        warnings.warn(f"dropping constant feature columns {dropped}", UserWarning, stacklevel=2)
    return PreprocessPipeline(keep, X[:, keep].mean(axis=0), sd[keep])


def standardize(train, test):
    """Fit on ``train`` and apply to both. Returns ``(train_z, test_z, pipeline)``."""
    pipe = fit_standardizer(train)
    return pipe.standardize(train), pipe.standardize(test), pipe


def fit_pca(Z, k: int):
    """Top-``k`` principal axes of the population covariance of ``Z``.

    Rows of the returned component matrix are orthonormal. Each row's
    largest-magnitude loading is made positive so projections are
    reproducible across platforms.
    """
    Z = np.asarray(Z, dtype=float)
    n, p = Z.shape
    if k < 1 or k > min(p, n):
        raise DimensionError(f"cannot keep {k} components from {n} samples x {p} features")
    centered = Z - Z.mean(axis=0)
    cov = centered.T @ centered / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    comps = evecs[:, order].T
    pivot = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(k), pivot])[:, None]
    return comps, evals[order]


def pca_reduce(train, test, k: int):
    """Project both splits onto the top-``k`` training axes (data already centered or not)."""
    comps, var = fit_pca(train, k)
    return np.asarray(train) @ comps.T, np.asarray(test) @ comps.T, comps, var


def fit_preprocess(X_train, k: int) -> PreprocessPipeline:
    pipe = fit_standardizer(X_train)
    comps, var = fit_pca(pipe.standardize(X_train), k)
    pipe.pca_components = comps
    pipe.explained_variance = var
    return pipe
