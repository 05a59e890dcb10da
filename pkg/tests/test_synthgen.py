from __future__ import annotations

import numpy as np
import pytest

from hybridids.errors import DataError
from hybridids.flowdata import encode_table, load_table
from hybridids.synthgen import (
    PAPER_NORMAL_FRACTION,
    SYNTH_SCHEMA,
    SynthConfig,
    generate,
    preset,
    write_synth,
)


def test_exact_normal_count():
    res = generate(SynthConfig(n_rows=100_000, normal_fraction=0.005, seed=1))
    assert int(np.sum(res.labels == 0)) == 500
    assert res.table.row_count == 100_000


def test_paper_ratio_mode():
    res = generate(SynthConfig(n_rows=100_000, normal_fraction=PAPER_NORMAL_FRACTION, seed=1))
    assert int(np.sum(res.labels == 0)) == 13


def test_infeasible_config():
    with pytest.raises(DataError):
        generate(SynthConfig(n_rows=100, normal_fraction=0.001))
    with pytest.raises(DataError):
        SynthConfig(profile_weights=(0.5, 0.6, -0.1))
    with pytest.raises(DataError):
        preset("nope")


def test_byte_identical_per_seed(tmp_path):
    cfg = preset("hetero3", n_rows=3000, seed=5)
    write_synth(cfg, tmp_path / "a.csv")
    write_synth(cfg, tmp_path / "b.csv", tmp_path / "s.cfg")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.profiles").read_text().startswith("row,profile\n0,")
    other = tmp_path / "c.csv"
    write_synth(preset("hetero3", n_rows=3000, seed=6), other)
    assert other.read_bytes() != (tmp_path / "a.csv").read_bytes()


def test_hex_ports_and_full_path(tmp_path):
    cfg = preset("hetero3", n_rows=2000, seed=2)
    write_synth(cfg, tmp_path / "d.csv")
    raw = load_table(tmp_path / "d.csv", SYNTH_SCHEMA)
    assert any(c.startswith("0x") for c in raw.column("sport"))
    data = encode_table(raw, SYNTH_SCHEMA)
    assert "pkSeqID" not in data.feature_names and "seq" not in data.feature_names
    assert data.n_rows == 2000
    assert data.features[:, data.feature_names.index("sport")].min() >= 40000


def test_each_profile_holds_both_classes():
    res = generate(preset("hetero3", n_rows=20_000, seed=3))
    for p in range(3):
        assert set(res.labels[res.profiles == p].tolist()) == {0, 1}


def test_hetero3_profiles_match_kmeans():
    import itertools

    from hybridids.clustering import kmeans_fit

    res = generate(preset("hetero3", seed=7))
    data = encode_table(res.table, SYNTH_SCHEMA)
    labels = kmeans_fit(data.features, 3, seed=7).assign_batch(data.features)
    agreement = max(float(np.mean(np.array(p)[labels] == res.profiles))
                    for p in itertools.permutations(range(3)))
    assert agreement >= 0.99
