"""Loading, encoding and partitioning of the benchmark datasets.

Each dataset is described by a declarative schema (a small YAML file, see
``fairtrees/schemas/``) naming the feature columns, the target column and the
protected column.  ``load_dataset`` reads the raw CSV, ``preprocess`` imputes
and encodes it into numeric arrays, and ``split`` produces the seeded
learn (56.25%) / validation (18.75%) / test (25%) partitions.

Binary mappings accept either a literal value (``positive_label: ">50K"``)
or a threshold rule written as a string ``">= <number>"`` (used e.g. for the
German age >= 25 privileged group and the Ricci combined score target).
"""

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .errors import DataError, DatasetTooSmallError, SchemaError
from .util import round_half_up

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

#: proportions from the experimental protocol: learn 56.25%, validation
#: 18.75% (together the 75% training block), test the remaining 25%
LEARN_FRACTION = 0.5625
TRAIN_FRACTION = 0.75

BUNDLED_SCHEMAS = {
    "adult": "adult.yml",
    "german": "german.yml",
    "propublica": "propublica.yml",
    "propublica-violent": "propublica-violent.yml",
    "ricci": "ricci.yml",
}


@dataclass(frozen=True)
class DatasetSchema:
    """Declarative description of one benchmark CSV."""

    name: str
    feature_columns: tuple
    categorical_columns: tuple
    target_column: str
    positive_label: object
    protected_column: str
    privileged_value: object
    drop_columns: tuple = ()
    missing_values: tuple = ()
    score_column: str = None  # external risk-score column (COMPAS baseline)

    def __post_init__(self):
        feats = set(self.feature_columns)
        if len(feats) != len(self.feature_columns):
            raise SchemaError(f"{self.name}: duplicate feature columns")
        if self.target_column in feats:
            raise SchemaError(f"{self.name}: target column {self.target_column!r} listed as feature")
        if self.protected_column in feats:
            raise SchemaError(f"{self.name}: protected column {self.protected_column!r} listed as feature")
        stray = set(self.categorical_columns) - feats
        if stray:
            raise SchemaError(f"{self.name}: categorical columns not among features: {sorted(stray)}")

    @property
    def columns(self):
        """All raw columns the loader needs to find in the CSV."""
        cols = list(self.feature_columns) + [self.target_column, self.protected_column]
        if self.score_column and self.score_column not in cols:
            cols.append(self.score_column)
        return cols


def schema_from_dict(d: dict) -> DatasetSchema:
    try:
        return DatasetSchema(
            name=d["name"],
            feature_columns=tuple(d["feature_columns"]),
            categorical_columns=tuple(d.get("categorical_columns", ())),
            target_column=d["target_column"],
            positive_label=d["positive_label"],
            protected_column=d["protected_column"],
            privileged_value=d["privileged_value"],
            drop_columns=tuple(d.get("drop_columns", ())),
            missing_values=tuple(d.get("missing_values", ())),
            score_column=d.get("score_column"),
        )
    except KeyError as exc:
        raise SchemaError(f"schema is missing required key {exc}") from exc


def load_schema(source) -> DatasetSchema:
    """Load a schema from a bundled name (e.g. ``"german"``) or a YAML path."""
    if isinstance(source, str) and source in BUNDLED_SCHEMAS:
        text = resources.files("fairtrees.schemas").joinpath(BUNDLED_SCHEMAS[source]).read_text()
    else:
        text = Path(source).read_text()
    return schema_from_dict(yaml.safe_load(text))


def _binary_rule(spec):
    """Turn a literal or a ``">= x"`` string into a vectorized 0/1 mapping."""
    if isinstance(spec, str) and spec.lstrip().startswith(">="):
        threshold = float(spec.lstrip()[2:])
        return lambda col: (pd.to_numeric(col, errors="coerce") >= threshold).to_numpy(dtype=np.int8)
    return lambda col: (col == spec).to_numpy(dtype=np.int8)


@dataclass
class RawDataset:
    """CSV rows exactly as read, restricted to the schema columns."""

    frame: pd.DataFrame
    schema: DatasetSchema

    @property
    def n_rows(self):
        return len(self.frame)


@dataclass
class EncodedDataset:
    """Fully numeric dataset: imputed features plus binary y and z."""

    features: np.ndarray          # (n, m) float64; categoricals as integer codes
    y: np.ndarray                 # (n,) int8, 1 = positive outcome
    z: np.ndarray                 # (n,) int8, 1 = privileged group
    feature_names: tuple
    feature_kinds: tuple          # per column: NUMERIC or CATEGORICAL
    code_books: dict              # categorical column -> list of raw values in code order
    row_indices: np.ndarray = None  # positions in the source dataset (set by split)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def take(self, indices) -> "EncodedDataset":
        indices = np.asarray(indices)
        parent = self.row_indices if self.row_indices is not None else np.arange(self.n)
        return EncodedDataset(
            features=self.features[indices],
            y=self.y[indices],
            z=self.z[indices],
            feature_names=self.feature_names,
            feature_kinds=self.feature_kinds,
            code_books=self.code_books,
            row_indices=parent[indices],
        )

    def validate(self):
        if self.n == 0:
            raise DataError("dataset has no rows")
        if not np.isfinite(self.features).all():
            raise DataError("non-finite feature values after preprocessing")
        for j, (name, kind) in enumerate(zip(self.feature_names, self.feature_kinds)):
            if kind == CATEGORICAL:
                codes = self.features[:, j]
                if (codes < 0).any() or (codes >= len(self.code_books[name])).any():
                    raise DataError(f"column {name!r} has codes outside its code book")
        if not (set(np.unique(self.y)) <= {0, 1} and set(np.unique(self.z)) <= {0, 1}):
            raise DataError("y and z must be binary")
        if 0 not in self.y or 1 not in self.y:
            raise DataError("target has a single class after preprocessing")


@dataclass
class SplitBundle:
    """Row-disjoint learn/validation/test partitions of one dataset."""

    learn: EncodedDataset
    validation: EncodedDataset
    test: EncodedDataset
    seed: int

    def parts(self):
        return {"learn": self.learn, "validation": self.validation, "test": self.test}


def load_dataset(path, schema: DatasetSchema) -> RawDataset:
    """Read a CSV and keep the schema columns, raw cells untouched."""
    frame = pd.read_csv(path, na_values=list(schema.missing_values) or None,
                        skipinitialspace=True)
    missing = [c for c in schema.columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{schema.name}: columns missing from {path}: {missing}")
    overlap = [c for c in schema.drop_columns if c in schema.columns]
    if overlap:
        raise SchemaError(f"{schema.name}: drop_columns overlap schema columns: {overlap}")
    return RawDataset(frame=frame[schema.columns].copy(), schema=schema)


def preprocess(raw: RawDataset, schema: DatasetSchema = None) -> EncodedDataset:
    """Impute (median/mode), encode categoricals by first appearance, binarize y/z."""
    schema = schema or raw.schema
    frame = raw.frame
    if len(frame) == 0:
        raise DataError(f"{schema.name}: cannot preprocess an empty dataset")

    n = len(frame)
    m = len(schema.feature_columns)
    features = np.empty((n, m), dtype=np.float64)
    kinds = []
    code_books = {}
    for j, col in enumerate(schema.feature_columns):
        series = frame[col]
        if col in schema.categorical_columns:
            kinds.append(CATEGORICAL)
            filled = _impute_mode(series, col, schema.name)
            book, codes = _first_appearance_codes(filled)
            code_books[col] = book
            features[:, j] = codes
        else:
            kinds.append(NUMERIC)
            features[:, j] = _impute_median(series, col, schema.name)

    y = _binary_rule(schema.positive_label)(frame[schema.target_column])
    z = _binary_rule(schema.privileged_value)(frame[schema.protected_column])

    encoded = EncodedDataset(
        features=features,
        y=y,
        z=z,
        feature_names=tuple(schema.feature_columns),
        feature_kinds=tuple(kinds),
        code_books=code_books,
    )
    encoded.validate()
    return encoded


def _impute_median(series: pd.Series, col: str, dataset: str) -> np.ndarray:
    values = pd.to_numeric(series, errors="raise").astype(np.float64)
    if values.isna().all():
        raise DataError(f"{dataset}: numeric column {col!r} is entirely missing")
    return values.fillna(values.median()).to_numpy()


def _impute_mode(series: pd.Series, col: str, dataset: str):
    if series.isna().all():
        raise DataError(f"{dataset}: categorical column {col!r} is entirely missing")
    if series.isna().any():
        # most frequent value; ties broken by first appearance in the column
        counts = {}
        for v in series.dropna():
            counts[v] = counts.get(v, 0) + 1
        mode = max(counts, key=counts.get)
        series = series.fillna(mode)
    return series


def _first_appearance_codes(series: pd.Series):
    book = []
    lookup = {}
    codes = np.empty(len(series), dtype=np.float64)
    for i, v in enumerate(series):
        if v not in lookup:
            lookup[v] = len(book)
            book.append(v)
        codes[i] = lookup[v]
    return book, codes


def decode_column(data: EncodedDataset, column: str) -> list:
    """Map a categorical column's codes back to raw values (round-trip check)."""
    j = data.feature_names.index(column)
    book = data.code_books[column]
    return [book[int(c)] for c in data.features[:, j]]


def split_sizes(n: int):
    """Partition sizes for n rows: learn/validation/test per the 56.25/18.75/25 protocol."""
    n_learn = round_half_up(LEARN_FRACTION * n)
    n_train = round_half_up(TRAIN_FRACTION * n)
    return n_learn, n_train - n_learn, n - n_train


def split(data: EncodedDataset, seed: int, stratify: bool = False) -> SplitBundle:
    """Seeded random partition into learn/validation/test.

    A uniform random permutation is sliced contiguously at the rounded
    proportion boundaries.  With ``stratify=True`` the same slicing is applied
    within each target class (off by default: the protocol samples plainly).
    """
    n = data.n
    if n < 16:
        raise DatasetTooSmallError(f"need at least 16 rows to split, got {n}")
    rng = np.random.default_rng(seed)
    if stratify:
        learn_idx, val_idx, test_idx = [], [], []
        for label in (0, 1):
            rows = np.flatnonzero(data.y == label)
            rows = rows[rng.permutation(len(rows))]
            k_learn, k_val, _ = split_sizes(len(rows))
            learn_idx.append(rows[:k_learn])
            val_idx.append(rows[k_learn:k_learn + k_val])
            test_idx.append(rows[k_learn + k_val:])
        learn_idx = np.concatenate(learn_idx)
        val_idx = np.concatenate(val_idx)
        test_idx = np.concatenate(test_idx)
    else:
        perm = rng.permutation(n)
        n_learn, n_val, _ = split_sizes(n)
        learn_idx = perm[:n_learn]
        val_idx = perm[n_learn:n_learn + n_val]
        test_idx = perm[n_learn + n_val:]
    return SplitBundle(
        learn=data.take(learn_idx),
        validation=data.take(val_idx),
        test=data.take(test_idx),
        seed=seed,
    )


def _evaluable(part: EncodedDataset) -> bool:
    """Both classes present and each protected group contributes a negative."""
    y, z = part.y, part.z
    if 0 not in y or 1 not in y:
        return False
    neg = y == 0
    return bool((neg & (z == 0)).any() and (neg & (z == 1)).any())


def split_checked(data: EncodedDataset, seed: int, max_attempts: int = 100,
                  stratify: bool = False) -> SplitBundle:
    """Split, resplitting with derived sub-seeds until the objective
    preconditions hold on validation and test (both classes, both-group
    negatives).  Each retry is logged; the returned bundle keeps the
    requested seed for bookkeeping."""
    for attempt in range(max_attempts):
        if attempt == 0:
            sub_seed = seed
        else:
            sub_seed = int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])
            logger.warning("seed %d: partition misses a class/group rate, resplitting (attempt %d)",
                           seed, attempt)
        bundle = split(data, sub_seed, stratify=stratify)
        if _evaluable(bundle.validation) and _evaluable(bundle.test):
            bundle.seed = seed
            return bundle
    raise DataError(f"no evaluable partition found for seed {seed} "
                    f"after {max_attempts} attempts")
