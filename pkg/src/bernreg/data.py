"""Delimited-file parsing, sampling, class balancing, and design encoding.

The expected input is the 21-column direct-marketing table: ten categorical
predictors, ten numeric predictors, and a yes/no response. Categorical
columns are label-encoded (codes 1..L in lexicographic level order, one
column per predictor) and all predictor columns are optionally standardized;
the resulting design matrix keeps enough metadata to encode new rows the
same way later.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateClasses,
    EmptyTable,
    EncodingMismatch,
    MissingField,
    SampleTooLarge,
    UnknownColumn,
    UnknownTargetLabel,
    UnparseableNumber,
    UnseenLevel,
)
from .rngutil import substream_seed, substream_rng

CATEGORICAL_COLUMNS = (
    "job", "marital", "education", "default", "housing", "loan",
    "contact", "month", "day_of_week", "poutcome",
)
NUMERIC_COLUMNS = (
    "age", "duration", "campaign", "pdays", "previous",
    "emp.var.rate", "cons.price.idx", "cons.conf.idx", "euribor3m",
    "nr.employed",
)
# File order of the twenty predictors; also the row order of reports.
PREDICTOR_ORDER = (
    "age", "job", "marital", "education", "default", "housing", "loan",
    "contact", "month", "day_of_week", "duration", "campaign", "pdays",
    "previous", "poutcome", "emp.var.rate", "cons.price.idx",
    "cons.conf.idx", "euribor3m", "nr.employed",
)
TARGET_COLUMN = "y"
TARGET_LABELS = {"no": 0, "yes": 1}

# Pipeline stage substreams, derived from the run seed.
SUBSAMPLE_STREAM = 1
BALANCE_STREAM = 2
TRIM_STREAM = 3
HOLDOUT_STREAM = 4


@dataclass
class RecordTable:
    """Parsed rows: raw category strings, numeric arrays, 0/1 target."""

    categorical: dict
    numeric: dict
    target: np.ndarray
    source_indices: np.ndarray
    predictor_order: tuple = PREDICTOR_ORDER

    def __post_init__(self):
        n = len(self.target)
        for name, col in self.categorical.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} length differs from target")
        for name, col in self.numeric.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} length differs from target")
        if len(self.source_indices) != n:
            raise ValueError("source_indices length differs from target")

    @property
    def n_rows(self):
        return len(self.target)

    def class_counts(self):
        """(negatives, positives)."""
        ones = int(self.target.sum())
        return self.n_rows - ones, ones

    def take(self, indices):
        """New table holding the given row positions, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return RecordTable(
            categorical={k: [v[i] for i in idx] for k, v in self.categorical.items()},
            numeric={k: v[idx] for k, v in self.numeric.items()},
            target=self.target[idx],
            source_indices=self.source_indices[idx],
            predictor_order=self.predictor_order,
        )


def _open_text(source):
    """Normalize path / text stream / bytes into a text stream."""
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8-sig")
        return io.StringIO(data)
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"))
    return open(source, "r", encoding="utf-8-sig", newline="")


def _parse_header(row, expected):
    names = [c.strip().strip('"') for c in row]
    missing = [c for c in expected if c not in names]
    extra = [c for c in names if c not in expected]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing columns: " + ", ".join(missing))
        if extra:
            parts.append("unexpected columns: " + ", ".join(extra))
        raise UnknownColumn("; ".join(parts))
    if len(names) != len(expected):
        raise UnknownColumn("duplicate columns in header")
    return names


def parse_dataset(source, delimiter=";"):
    """Read the full 21-column table from a path, stream, or bytes."""
    expected = list(PREDICTOR_ORDER) + [TARGET_COLUMN]
    stream = _open_text(source)
    try:
        reader = csv.reader(stream, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise UnknownColumn("empty input: no header row") from None
        names = _parse_header(header, expected)
        pos = {c: names.index(c) for c in names}

        cat = {c: [] for c in CATEGORICAL_COLUMNS}
        num = {c: [] for c in NUMERIC_COLUMNS}
        target = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise MissingField(
                    f"row {row_number}: expected {len(expected)} fields, got {len(row)}"
                )
            for c in CATEGORICAL_COLUMNS:
                cat[c].append(row[pos[c]].strip())
            for c in NUMERIC_COLUMNS:
                text = row[pos[c]].strip()
                try:
                    num[c].append(float(text))
                except ValueError:
                    raise UnparseableNumber(
                        f"row {row_number}, column {c!r}: {text!r} is not a number"
                    ) from None
            label = row[pos[TARGET_COLUMN]].strip()
            if label not in TARGET_LABELS:
                raise UnknownTargetLabel(
                    f"row {row_number}: target label {label!r} is not yes/no"
                )
            target.append(TARGET_LABELS[label])
    finally:
        stream.close()

    n = len(target)
    return RecordTable(
        categorical=cat,
        numeric={c: np.asarray(v, dtype=np.float64) for c, v in num.items()},
        target=np.asarray(target, dtype=np.int8),
        source_indices=np.arange(n, dtype=np.int64),
    )


def parse_new_rows(source, delimiter, metadata):
    """Read predictor-only rows for scoring, using stored design metadata.

    The response column is optional; when present its labels are kept so
    callers can report them alongside predictions.
    """
    columns = list(metadata["column_names"])
    cat_names = set(metadata["encoding_map"])
    stream = _open_text(source)
    try:
        reader = csv.reader(stream, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise UnknownColumn("empty input: no header row") from None
        names = [c.strip().strip('"') for c in header]
        has_target = TARGET_COLUMN in names
        expected = columns + ([TARGET_COLUMN] if has_target else [])
        missing = [c for c in expected if c not in names]
        extra = [c for c in names if c not in expected]
        if missing or extra:
            raise UnknownColumn(
                "new-data header does not match the stored design: "
                + "; ".join(
                    filter(None, [
                        "missing: " + ", ".join(missing) if missing else "",
                        "unexpected: " + ", ".join(extra) if extra else "",
                    ])
                )
            )
        pos = {c: names.index(c) for c in names}

        cat = {c: [] for c in columns if c in cat_names}
        num = {c: [] for c in columns if c not in cat_names}
        target = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise MissingField(
                    f"row {row_number}: expected {len(names)} fields, got {len(row)}"
                )
            for c in columns:
                text = row[pos[c]].strip()
                if c in cat_names:
                    cat[c].append(text)
                else:
                    try:
                        num[c].append(float(text))
                    except ValueError:
                        raise UnparseableNumber(
                            f"row {row_number}, column {c!r}: {text!r} is not a number"
                        ) from None
            if has_target:
                label = row[pos[TARGET_COLUMN]].strip()
                if label not in TARGET_LABELS:
                    raise UnknownTargetLabel(
                        f"row {row_number}: target label {label!r} is not yes/no"
                    )
                target.append(TARGET_LABELS[label])
    finally:
        stream.close()

    n = len(next(iter(cat.values()), [])) if cat else len(next(iter(num.values()), []))
    return RecordTable(
        categorical=cat,
        numeric={c: np.asarray(v, dtype=np.float64) for c, v in num.items()},
        target=np.asarray(target if has_target else [0] * n, dtype=np.int8),
        source_indices=np.arange(n, dtype=np.int64),
        predictor_order=tuple(columns),
    )


def write_records(table, path, delimiter=";"):
    """Write a table back out in the input file layout (strings quoted)."""
    columns = list(table.predictor_order) + [TARGET_COLUMN]
    inverse = {v: k for k, v in TARGET_LABELS.items()}
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter=delimiter, quoting=csv.QUOTE_NONNUMERIC)
        writer.writerow(columns)
        for i in range(table.n_rows):
            row = []
            for c in table.predictor_order:
                if c in table.categorical:
                    row.append(table.categorical[c][i])
                else:
                    value = table.numeric[c][i]
                    row.append(int(value) if float(value).is_integer() else float(value))
            row.append(inverse[int(table.target[i])])
            writer.writerow(row)


def _partial_shuffle_take(n_total, n_take, rng):
    """First n_take entries of a seeded Fisher-Yates shuffle of 0..n_total-1."""
    idx = np.arange(n_total, dtype=np.int64)
    for i in range(n_take):
        j = int(rng.integers(i, n_total))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:n_take]


def subsample(table, n, seed):
    """Uniform without-replacement sample of n rows."""
    if n < 1:
        raise SampleTooLarge(f"sample size must be positive, got {n}")
    if n > table.n_rows:
        raise SampleTooLarge(f"sample size {n} exceeds table size {table.n_rows}")
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    return table.take(_partial_shuffle_take(table.n_rows, n, rng))


@dataclass
class BalanceReport:
    """What oversampling did, for the run record."""

    n_before: int
    n_positive_before: int
    n_after: int
    n_positive_after: int
    duplicated_rows: list
    seed: int

    def to_dict(self):
        return {
            "n_before": self.n_before,
            "n_positive_before": self.n_positive_before,
            "n_after": self.n_after,
            "n_positive_after": self.n_positive_after,
            "duplicated_rows": list(map(int, self.duplicated_rows)),
            "seed": int(self.seed),
        }


def balance_oversample(table, seed):
    """Duplicate minority rows (with replacement) until classes are equal."""
    n_neg, n_pos = table.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise DegenerateClasses(
            f"both classes required, got {n_neg} negatives and {n_pos} positives"
        )
    minority = 1 if n_pos < n_neg else 0
    deficit = abs(n_neg - n_pos)
    positions = np.flatnonzero(table.target == minority)
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    if deficit == 0:
        duplicated = np.empty(0, dtype=np.int64)
    else:
        duplicated = positions[rng.integers(0, len(positions), size=deficit)]
    order = np.concatenate([np.arange(table.n_rows, dtype=np.int64), duplicated])
    report = BalanceReport(
        n_before=table.n_rows,
        n_positive_before=n_pos,
        n_after=len(order),
        n_positive_after=max(n_neg, n_pos),
        duplicated_rows=duplicated.tolist(),
        seed=int(seed),
    )
    return table.take(order), report


def stratified_trim(table, n, seed):
    """Seeded per-class subsample down to n rows, split as evenly as n allows."""
    if n < 2 or n > table.n_rows:
        raise SampleTooLarge(f"trim size {n} out of range for {table.n_rows} rows")
    n_pos_target = n // 2
    n_neg_target = n - n_pos_target
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    keep = []
    for label, want in ((0, n_neg_target), (1, n_pos_target)):
        positions = np.flatnonzero(table.target == label)
        if want > len(positions):
            raise SampleTooLarge(
                f"trim wants {want} rows of class {label}, only {len(positions)} present"
            )
        keep.append(positions[_partial_shuffle_take(len(positions), want, rng)])
    order = np.sort(np.concatenate(keep))
    return table.take(order)


def holdout_split(table, n_holdout, seed):
    """(train, holdout) from a seeded full shuffle; rows are disjoint."""
    if not 0 < n_holdout < table.n_rows:
        raise SampleTooLarge(
            f"holdout size {n_holdout} out of range for {table.n_rows} rows"
        )
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    perm = _partial_shuffle_take(table.n_rows, table.n_rows, rng)
    return table.take(perm[n_holdout:]), table.take(perm[:n_holdout])


def prepare_training_table(table, n, balance_mode, seed):
    """subsample/balance pipeline with per-stage substreams of `seed`.

    Modes: "after" (default) subsamples n rows, oversamples the minority,
    then trims back to n stratified; "before" balances the full table first
    and then subsamples; "off" only subsamples. n = 0 means the whole table.
    Returns (table, BalanceReport or None).
    """
    if balance_mode not in ("before", "after", "off"):
        raise ValueError(f"unknown balance mode {balance_mode!r}")
    s_sub = substream_seed(seed, SUBSAMPLE_STREAM)
    s_bal = substream_seed(seed, BALANCE_STREAM)
    s_trim = substream_seed(seed, TRIM_STREAM)

    if balance_mode == "before":
        out, report = balance_oversample(table, s_bal)
        if n:
            out = subsample(out, n, s_sub)
        return out, report

    out = subsample(table, n, s_sub) if n else table
    if balance_mode == "off":
        return out, None
    out, report = balance_oversample(out, s_bal)
    if n and out.n_rows > n:
        out = stratified_trim(out, n, s_trim)
    return out, report


@dataclass
class DesignMatrix:
    """Numeric design with the metadata needed to encode future rows."""

    values: np.ndarray
    column_names: tuple
    encoding_map: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    standardized: bool = False
    constant_columns: tuple = ()

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("design values must be 2-D")
        if self.values.shape[1] != len(self.column_names):
            raise ValueError("column_names length differs from design width")
        for name, (center, scale) in self.scaling.items():
            if not scale > 0:
                raise ValueError(f"column {name!r} has non-positive scale {scale}")

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_columns(self):
        return self.values.shape[1]

    def metadata(self):
        """JSON-ready description sufficient to encode new rows."""
        return {
            "column_names": list(self.column_names),
            "encoding_map": {
                c: dict(levels) for c, levels in sorted(self.encoding_map.items())
            },
            "scaling": {c: [float(a), float(b)] for c, (a, b) in sorted(self.scaling.items())},
            "standardized": bool(self.standardized),
            "constant_columns": list(self.constant_columns),
        }

    def decode_categorical(self, column, codes):
        """Map integer codes back to level strings for one column."""
        levels = sorted(self.encoding_map[column], key=self.encoding_map[column].get)
        return [levels[int(c) - 1] for c in codes]

    @classmethod
    def from_values(cls, values, column_names=None):
        """Plain numeric design, identity scaling; for synthetic inputs."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if column_names is None:
            column_names = tuple(f"x{j + 1}" for j in range(values.shape[1]))
        scaling = {c: (0.0, 1.0) for c in column_names}
        return cls(values=values, column_names=tuple(column_names), scaling=scaling)


def encode(table, standardize=True):
    """(DesignMatrix, target) from a record table.

    Categorical codes are 1..L in lexicographic level order. Standardization
    centers and scales by the sample sd (denominator n-1); constant columns
    keep scale 1 and are flagged instead of divided by zero.
    """
    if table.n_rows == 0:
        raise EmptyTable("cannot encode an empty table")
    n = table.n_rows
    columns = []
    encoding_map = {}
    scaling = {}
    constants = []
    for name in table.predictor_order:
        if name in table.categorical:
            levels = sorted(set(table.categorical[name]))
            codes = {level: i + 1 for i, level in enumerate(levels)}
            encoding_map[name] = codes
            col = np.asarray([codes[v] for v in table.categorical[name]], dtype=np.float64)
        else:
            col = np.asarray(table.numeric[name], dtype=np.float64)
        if standardize:
            center = float(col.mean())
            scale = float(col.std(ddof=1)) if n > 1 else 0.0
            if scale == 0.0:
                scale = 1.0
                constants.append(name)
            col = (col - center) / scale
            scaling[name] = (center, scale)
        else:
            if np.ptp(col) == 0.0:
                constants.append(name)
            scaling[name] = (0.0, 1.0)
        columns.append(col)
    design = DesignMatrix(
        values=np.column_stack(columns) if columns else np.empty((n, 0)),
        column_names=tuple(table.predictor_order),
        encoding_map=encoding_map,
        scaling=scaling,
        standardized=standardize,
        constant_columns=tuple(constants),
    )
    return design, table.target.astype(np.float64)


def encode_new(metadata, table):
    """Design values for new rows under stored metadata.

    Raises UnseenLevel for a category absent from training, and
    EncodingMismatch when the table's columns do not line up with the
    stored design.
    """
    columns = list(metadata["column_names"])
    if list(table.predictor_order) != columns:
        raise EncodingMismatch(
            "new data columns do not match the stored design: "
            f"{list(table.predictor_order)} vs {columns}"
        )
    n = table.n_rows
    encoding_map = metadata["encoding_map"]
    scaling = metadata["scaling"]
    out = np.empty((n, len(columns)), dtype=np.float64)
    for j, name in enumerate(columns):
        if name in encoding_map:
            codes = encoding_map[name]
            raw = np.empty(n, dtype=np.float64)
            for i, level in enumerate(table.categorical[name]):
                if level not in codes:
                    raise UnseenLevel(
                        f"column {name!r}: level {level!r} was not seen in training"
                    )
                raw[i] = codes[level]
        else:
            raw = np.asarray(table.numeric[name], dtype=np.float64)
        center, scale = scaling[name]
        out[:, j] = (raw - center) / scale
    return out


def design_from_metadata(metadata, values):
    """Rebuild a DesignMatrix around already-encoded values."""
    return DesignMatrix(
        values=values,
        column_names=tuple(metadata["column_names"]),
        encoding_map={c: dict(v) for c, v in metadata["encoding_map"].items()},
        scaling={c: (float(a), float(b)) for c, (a, b) in metadata["scaling"].items()},
        standardized=bool(metadata["standardized"]),
        constant_columns=tuple(metadata["constant_columns"]),
    )


def dataset_fingerprint(design, target):
    """Row-order-independent identity of (size, class counts, design shape)."""
    target = np.asarray(target)
    n, k = design.values.shape
    ones = int(np.sum(target == 1))
    payload = json.dumps(
        {"n": int(n), "k": int(k), "ones": ones, "zeros": int(n - ones)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]
