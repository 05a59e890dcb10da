from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridids.errors import DataError
from hybridids.flowdata import (
    BOTIOT_SCHEMA,
    PORT_SENTINEL,
    SchemaConfig,
    encode_table,
    fit_category_encoder,
    load_schema,
    load_table,
    parse_port,
    parse_schema,
    stratified_split,
    stratified_split_indices,
)

from conftest import make_dataset

SCHEMA = SchemaConfig(
    label_column="attack",
    positive_label_values=frozenset({"1"}),
    drop_columns=("pkSeqID",),
    categorical_columns=("proto",),
    port_columns=("sport",),
)


def write(tmp_path, text, name="flows.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_three_rows(tmp_path):
    p = write(tmp_path, "pkSeqID,proto,sport,bytes,attack\n1,udp,80,10,1\n2,tcp,0x0303,20,0\n"
                        "3,tcp,,5.5,1\n")
    raw = load_table(p, SCHEMA)
    assert raw.row_count == 3
    assert raw.column_names == ("pkSeqID", "proto", "sport", "bytes", "attack")
    assert raw.rows[1] == ("2", "tcp", "0x0303", "20", "0")


def test_missing_label_column(tmp_path):
    p = write(tmp_path, "pkSeqID,proto,sport,bytes\n1,udp,80,10\n")
    with pytest.raises(DataError, match="label column not found"):
        load_table(p, SCHEMA)


def test_missing_referenced_column(tmp_path):
    p = write(tmp_path, "pkSeqID,sport,bytes,attack\n1,80,10,1\n")
    with pytest.raises(DataError, match="proto"):
        load_table(p, SCHEMA)


def test_ragged_row_cites_line(tmp_path):
    lines = ["pkSeqID,proto,sport,bytes,attack"] + [f"{i},udp,80,1,1" for i in range(1, 5)]
    lines.append("5,udp,80,1")  # data row 5 -> file line 6
    p = write(tmp_path, "\n".join(lines) + "\n")
    with pytest.raises(DataError, match="line 6"):
        load_table(p, SCHEMA)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_table(tmp_path / "nope.csv", SCHEMA)


def test_quoted_cells(tmp_path):
    p = write(tmp_path, 'pkSeqID,proto,sport,bytes,attack\n1,"tc,p",80,10,1\n')
    assert load_table(p, SCHEMA).rows[0][1] == "tc,p"


@pytest.mark.parametrize("cell,expected", [
    ("0x0303", 3 * 256 + 3),
    ("0X1f", 31),
    ("80", 80),
    (" 443 ", 443),
    ("", PORT_SENTINEL),
    ("-5", PORT_SENTINEL),
    ("abc", PORT_SENTINEL),
    ("0x", PORT_SENTINEL),
    ("0xzz", PORT_SENTINEL),
])
def test_parse_port(cell, expected):
    assert parse_port(cell) == expected


@given(st.text(max_size=8))
def test_parse_port_total_and_idempotent(cell):
    v = parse_port(cell)
    assert v == PORT_SENTINEL or v >= 0
    if v >= 0:
        assert parse_port(str(v)) == v


def test_category_encoder_examples():
    enc = fit_category_encoder(["udp", "tcp", "tcp"])
    assert enc.categories == ("tcp", "udp")
    assert enc.transform(["udp", "tcp", "tcp"]).tolist() == [1, 0, 0]
    assert enc.unseen_code == 2
    assert enc.transform(["arp"]).tolist() == [2]
    single = fit_category_encoder(["tcp"])
    assert single.categories == ("tcp",)
    assert single.transform(["tcp", "tcp"]).tolist() == [0, 0]
    with pytest.raises(DataError):
        fit_category_encoder([])


@given(st.lists(st.text(max_size=4), min_size=1, max_size=30))
def test_category_round_trip(values):
    enc = fit_category_encoder(values)
    assert list(enc.categories) == sorted(set(values))
    codes = enc.transform(values)
    assert enc.inverse(codes) == list(values)


def test_encode_table(tmp_path):
    p = write(tmp_path, "pkSeqID,proto,sport,bytes,attack\n1,udp,0x0303,10,1\n2,tcp,80,2.5,0\n")
    data = encode_table(load_table(p, SCHEMA), SCHEMA)
    assert "pkSeqID" not in data.feature_names
    assert data.feature_names == ("proto", "sport", "bytes")
    assert data.features.tolist() == [[1.0, 771.0, 10.0], [0.0, 80.0, 2.5]]
    assert data.labels.tolist() == [1, 0]
    assert data.encoders[0].column == "proto"


def test_encode_non_numeric_cell(tmp_path):
    p = write(tmp_path, "pkSeqID,proto,sport,bytes,attack\n1,udp,80,ten,1\n")
    with pytest.raises(DataError, match="bytes"):
        encode_table(load_table(p, SCHEMA), SCHEMA)


def test_encode_reuses_encoders(tmp_path):
    train = write(tmp_path, "pkSeqID,proto,sport,bytes,attack\n1,udp,80,1,1\n2,tcp,80,1,0\n")
    test = write(tmp_path, "pkSeqID,proto,sport,bytes,attack\n1,icmp,80,1,1\n", "t.csv")
    fitted = encode_table(load_table(train, SCHEMA), SCHEMA)
    again = encode_table(load_table(test, SCHEMA), SCHEMA, fitted.encoders)
    assert again.features[0, 0] == 2  # unseen protocol -> reserved code


def test_schema_invariants():
    with pytest.raises(DataError):
        SchemaConfig("attack", frozenset({"1"}), drop_columns=("attack",))
    with pytest.raises(DataError):
        SchemaConfig("attack", frozenset({"1"}), categorical_columns=("sport",),
                     port_columns=("sport",))


def test_schema_text_round_trip(tmp_path):
    text = BOTIOT_SCHEMA.to_text()
    assert parse_schema(text) == BOTIOT_SCHEMA
    p = write(tmp_path, text, "s.cfg")
    assert load_schema(p) == BOTIOT_SCHEMA
    assert load_schema("botiot") is BOTIOT_SCHEMA
    with pytest.raises(DataError):
        parse_schema("label_column=attack\nbogus=1\n")


def test_stratified_split_arithmetic():
    y = np.r_[np.ones(90, dtype=int), np.zeros(10, dtype=int)]
    data = make_dataset(np.arange(100.0)[:, None], y)
    tr, te = stratified_split(data, 0.7, seed=3)
    assert tr.class_counts() == (7, 63)
    assert te.class_counts() == (3, 27)


def test_stratified_split_two_sample_class():
    y = np.r_[np.ones(10, dtype=int), np.zeros(2, dtype=int)]
    tr, te = stratified_split_indices(y, 0.7, seed=0)
    assert int(np.sum(y[tr] == 0)) == 1 and int(np.sum(y[te] == 0)) == 1


def test_stratified_split_errors_and_determinism():
    y = np.r_[np.ones(10, dtype=int), np.zeros(1, dtype=int)]
    with pytest.raises(DataError):
        stratified_split_indices(y, 0.7, 0)
    y = np.r_[np.ones(30, dtype=int), np.zeros(5, dtype=int)]
    a = stratified_split_indices(y, 0.6, 9)
    b = stratified_split_indices(y, 0.6, 9)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


@settings(max_examples=50)
@given(st.integers(2, 40), st.integers(2, 40), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_partitions_each_class(n0, n1, frac, seed):
    y = np.r_[np.zeros(n0, dtype=int), np.ones(n1, dtype=int)]
    tr, te = stratified_split_indices(y, frac, seed)
    assert np.intersect1d(tr, te).size == 0
    assert np.union1d(tr, te).tolist() == list(range(n0 + n1))
    for cls, n in ((0, n0), (1, n1)):
        a, b = int(np.sum(y[tr] == cls)), int(np.sum(y[te] == cls))
        assert a + b == n and a >= 1 and b >= 1


def test_dataset_validation():
    with pytest.raises(DataError):
        make_dataset([[np.nan]], [1])
    with pytest.raises(DataError):
        make_dataset([[1.0]], [2])
    with pytest.raises(DataError):
        make_dataset([[1.0], [2.0]], [1])
