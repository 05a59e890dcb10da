"""Flow-record loading, preprocessing and stratified splitting.

Turns a CSV of pre-extracted flow features (Bot-IoT layout or anything
described by a :class:`SchemaConfig`) into a dense numeric matrix with binary
labels: identifier columns are dropped, port columns are parsed (hex strings
included), text columns are label-encoded, everything else is read as a float.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

ALL_REMAINING = "all"
PORT_SENTINEL = -1


@dataclass(frozen=True)
class SchemaConfig:
    """Column roles of a flow CSV."""

    label_column: str
    positive_label_values: frozenset[str] = frozenset({"1"})
    drop_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    port_columns: tuple[str, ...] = ()
    feature_columns: tuple[str, ...] | str = ALL_REMAINING

    def __post_init__(self):
        if not self.label_column:
            raise DataError("label_column must be set")
        if self.label_column in self.drop_columns:
            raise DataError(f"label column {self.label_column!r} is listed in drop")
        overlap = set(self.port_columns) & set(self.categorical_columns)
        if overlap:
            raise DataError(f"columns are both port and categorical: {sorted(overlap)}")
        for name, group in (
            ("drop", self.drop_columns),
            ("categorical", self.categorical_columns),
            ("ports", self.port_columns),
        ):
            if len(set(group)) != len(group):
                raise DataError(f"duplicate names in {name}: {list(group)}")
            if self.label_column in group:
                raise DataError(f"label column {self.label_column!r} is listed in {name}")
        dropped = set(self.drop_columns)
        if dropped & (set(self.categorical_columns) | set(self.port_columns)):
            raise DataError("a dropped column cannot also be a feature column")
        if not self.positive_label_values:
            raise DataError("positive_labels must name at least one value")

    def referenced_columns(self) -> list[str]:
        names = [self.label_column, *self.drop_columns, *self.categorical_columns, *self.port_columns]
        if self.feature_columns != ALL_REMAINING:
            names.extend(self.feature_columns)
        return list(dict.fromkeys(names))

    def resolve_features(self, column_names: Sequence[str]) -> list[str]:
        """Feature columns in output order for a table with ``column_names``."""
        if self.feature_columns == ALL_REMAINING:
            excluded = {self.label_column, *self.drop_columns}
            return [c for c in column_names if c not in excluded]
        return list(self.feature_columns)

    def to_text(self) -> str:
        lines = [
            f"label_column={self.label_column}",
            f"positive_labels={','.join(sorted(self.positive_label_values))}",
            f"drop={','.join(self.drop_columns)}",
            f"categorical={','.join(self.categorical_columns)}",
            f"ports={','.join(self.port_columns)}",
        ]
        if self.feature_columns != ALL_REMAINING:
            lines.append(f"features={','.join(self.feature_columns)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "label_column": self.label_column,
            "positive_label_values": sorted(self.positive_label_values),
            "drop_columns": list(self.drop_columns),
            "categorical_columns": list(self.categorical_columns),
            "port_columns": list(self.port_columns),
            "feature_columns": (
                self.feature_columns
                if self.feature_columns == ALL_REMAINING
                else list(self.feature_columns)
            ),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SchemaConfig:
        features = d.get("feature_columns", ALL_REMAINING)
        return cls(
            label_column=d["label_column"],
            positive_label_values=frozenset(d["positive_label_values"]),
            drop_columns=tuple(d["drop_columns"]),
            categorical_columns=tuple(d["categorical_columns"]),
            port_columns=tuple(d["port_columns"]),
            feature_columns=features if features == ALL_REMAINING else tuple(features),
        )


# Bot-IoT ships category/subcategory next to the binary label; both leak it.
BOTIOT_SCHEMA = SchemaConfig(
    label_column="attack",
    positive_label_values=frozenset({"1"}),
    drop_columns=("pkSeqID", "seq", "stime", "ltime", "category", "subcategory"),
    categorical_columns=("proto", "saddr", "daddr", "flgs", "state"),
    port_columns=("sport", "dport"),
)

_SCHEMA_KEYS = {"label_column", "positive_labels", "drop", "categorical", "ports", "features"}


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_schema(text: str) -> SchemaConfig:
    """Parse the flat ``key=value`` schema format.

    Blank lines and ``#`` comments are ignored. List values are comma separated.
    """
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"schema line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA_KEYS:
            raise DataError(f"schema line {lineno}: unknown key {key!r}")
        if key in values:
            raise DataError(f"schema line {lineno}: duplicate key {key!r}")
        values[key] = value
    if "label_column" not in values:
        raise DataError("schema must define label_column")
    features = values.get("features", ALL_REMAINING)
    return SchemaConfig(
        label_column=values["label_column"],
        positive_label_values=frozenset(_split_list(values.get("positive_labels", "1"))),
        drop_columns=_split_list(values.get("drop", "")),
        categorical_columns=_split_list(values.get("categorical", "")),
        port_columns=_split_list(values.get("ports", "")),
        feature_columns=(
            ALL_REMAINING if features.strip() in ("", ALL_REMAINING) else _split_list(features)
        ),
    )


def load_schema(path: str | Path) -> SchemaConfig:
    """Read a schema file, or return the built-in preset when ``path`` is ``"botiot"``."""
    if str(path) == "botiot":
        return BOTIOT_SCHEMA
    p = Path(path)
    if not p.is_file():
        raise DataError(f"schema file not found: {p}")
    return parse_schema(p.read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    rows: list[tuple[str, ...]]
    # CSV line on which each row ends (header is line 1)
    line_numbers: tuple[int, ...] = field(default=(), repr=False)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        j = self.column_names.index(name)
        return [row[j] for row in self.rows]

    def take(self, indices: Iterable[int]) -> RawTable:
        idx = list(indices)
        lines = tuple(self.line_numbers[i] for i in idx) if self.line_numbers else ()
        return RawTable(self.column_names, [self.rows[i] for i in idx], lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.column_names)
            writer.writerows(self.rows)


def load_table(path: str | Path, schema: SchemaConfig, require_label: bool = True) -> RawTable:
    """Read a flow CSV, checking the header against ``schema``.

    Args:
        path: CSV file with a header row.
        schema: Column roles; every column it names must be present.
        require_label: Set to False for unlabeled inputs (prediction).

    Raises:
        DataError: missing file, missing columns, or a ragged row.
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise DataError(f"{p}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            raise DataError(f"{p}: duplicate column names in header")
        if require_label and schema.label_column not in header:
            raise DataError(f"{p}: label column not found: {schema.label_column!r}")
        missing = [
            c for c in schema.referenced_columns()
            if c not in header and c != schema.label_column
        ]
        if missing:
            raise DataError(f"{p}: schema columns not found in header: {missing}")
        width = len(header)
        rows: list[tuple[str, ...]] = []
        lines: list[int] = []
        for record in reader:
            if not record:
                continue
            if len(record) != width:
                raise DataError(
                    f"{p}: line {reader.line_num} has {len(record)} cells, expected {width}"
                )
            rows.append(tuple(record))
            lines.append(reader.line_num)
    return RawTable(header, rows, tuple(lines))


def parse_port(cell: str) -> int:
    """Port cell to integer; hex (``0x..``) and decimal accepted, anything else is -1."""
    s = cell.strip()
    if not s:
        return PORT_SENTINEL
    try:
        if s[:2] in ("0x", "0X"):
            value = int(s[2:], 16)
        else:
            try:
                value = int(s, 10)
            except ValueError:
                f = float(s)
                if not math.isfinite(f) or f != int(f):
                    return PORT_SENTINEL
                value = int(f)
    except ValueError:
        return PORT_SENTINEL
    return value if value >= 0 else PORT_SENTINEL


@dataclass(frozen=True)
class CategoryEncoder:
    """Sorted-order label encoder; values never seen at fit time get ``unseen_code``."""

    column: str
    categories: tuple[str, ...]

    def __post_init__(self):
        if list(self.categories) != sorted(set(self.categories)):
            raise DataError(f"encoder {self.column!r}: categories must be sorted and unique")

    @property
    def unseen_code(self) -> int:
        return len(self.categories)

    def transform(self, values: Iterable[str]) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.categories)}
        unseen = self.unseen_code
        return np.fromiter((lookup.get(v, unseen) for v in values), dtype=np.float64)

    def inverse(self, codes: Iterable[int]) -> list[str]:
        return [self.categories[int(c)] for c in codes]

    def to_dict(self) -> dict:
        return {"column": self.column, "categories": list(self.categories)}

    @classmethod
    def from_dict(cls, d: dict) -> CategoryEncoder:
        return cls(d["column"], tuple(d["categories"]))


def fit_category_encoder(values: Sequence[str], column: str = "") -> CategoryEncoder:
    if len(values) == 0:
        raise DataError(f"cannot fit encoder on empty column {column!r}")
    return CategoryEncoder(column, tuple(sorted(set(values))))


@dataclass(frozen=True)
class EncodedDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    encoders: tuple[CategoryEncoder, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if y.shape != (X.shape[0],):
            raise DataError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if X.shape[1] != len(self.feature_names):
            raise DataError("feature_names does not match the feature matrix width")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 (normal) or 1 (attack)")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.n_rows - n1, n1

    def subset(self, indices) -> EncodedDataset:
        idx = np.asarray(indices)
        return EncodedDataset(self.features[idx], self.labels[idx], self.feature_names, self.encoders)

    def with_rows(self, features: np.ndarray, labels: np.ndarray) -> EncodedDataset:
        return EncodedDataset(features, labels, self.feature_names, self.encoders)


def _parse_float_column(values: list[str], column: str, raw: RawTable) -> np.ndarray:
    out = np.empty(len(values), dtype=np.float64)
    for i, cell in enumerate(values):
        try:
            v = float(cell)
        except ValueError:
            v = math.nan
        if not math.isfinite(v):
            line = raw.line_numbers[i] if raw.line_numbers else i + 2
            raise DataError(
                f"non-numeric value {cell!r} in column {column!r}, row {i} (line {line})"
            )
        out[i] = v
    return out


def encode_features(
    raw: RawTable,
    schema: SchemaConfig,
    encoders: Sequence[CategoryEncoder] | None = None,
) -> tuple[np.ndarray, list[str], tuple[CategoryEncoder, ...]]:
    """Numeric feature matrix for ``raw``.

    Encoders are fitted fresh unless ``encoders`` is given, in which case the
    stored ones are reused (prediction time).
    """
    names = schema.resolve_features(raw.column_names)
    missing = [c for c in names if c not in raw.column_names]
    if missing:
        raise DataError(f"feature columns not found in table: {missing}")
    given = {e.column: e for e in encoders} if encoders is not None else None
    ports = set(schema.port_columns)
    categorical = set(schema.categorical_columns)
    cols = []
    fitted: list[CategoryEncoder] = []
    for name in names:
        values = raw.column(name)
        if name in ports:
            cache: dict[str, int] = {}
            col = np.empty(len(values), dtype=np.float64)
            for i, cell in enumerate(values):
                code = cache.get(cell)
                if code is None:
                    code = cache[cell] = parse_port(cell)
                col[i] = code
        elif name in categorical:
            if given is not None:
                if name not in given:
                    raise DataError(f"no fitted encoder for categorical column {name!r}")
                enc = given[name]
            else:
                enc = fit_category_encoder(values, name)
            fitted.append(enc)
            col = enc.transform(values)
        else:
            col = _parse_float_column(values, name, raw)
        cols.append(col)
    X = np.column_stack(cols) if cols else np.empty((raw.row_count, 0))
    return X, names, tuple(fitted)


def encode_labels(raw: RawTable, schema: SchemaConfig) -> np.ndarray:
    positive = schema.positive_label_values
    return np.fromiter(
        (1 if cell.strip() in positive else 0 for cell in raw.column(schema.label_column)),
        dtype=np.int64,
        count=raw.row_count,
    )


def encode_table(
    raw: RawTable,
    schema: SchemaConfig,
    encoders: Sequence[CategoryEncoder] | None = None,
) -> EncodedDataset:
    """Apply column dropping, port parsing, categorical encoding and label derivation."""
    X, names, fitted = encode_features(raw, schema, encoders)
    return EncodedDataset(X, encode_labels(raw, schema), tuple(names), fitted)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split_indices(
    labels: np.ndarray, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Index sets (sorted ascending) for a per-class seeded split."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise DataError(f"class {cls} has {idx.size} sample(s); cannot stratify")
        n_train = min(max(_round_half_up(idx.size * train_fraction), 1), idx.size - 1)
        perm = rng.permutation(idx)
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    if not train_parts:
        raise DataError("cannot split an empty dataset")
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def stratified_split(
    data: EncodedDataset, train_fraction: float, seed: int
) -> tuple[EncodedDataset, EncodedDataset]:
    train_idx, test_idx = stratified_split_indices(data.labels, train_fraction, seed)
    return data.subset(train_idx), data.subset(test_idx)
