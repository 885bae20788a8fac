"""Parsing, vocabulary construction, augmentation, and the filter index."""

import numpy as np
import pytest

from hercules.data import (DataError, FilterIndex, augment_inverse,
                           build_filter_index, build_vocab, index_quadruples,
                           load_dataset, parse_split)

RAW = [
    ("alice", "likes", "bob", "2014-01-01"),
    ("bob", "likes", "alice", "2014-01-02"),
    ("alice", "likes", "bob", "2014-01-02"),
]


def write_split(path, rows):
    with open(path, "w") as fh:
        for r in rows:
            fh.write("\t".join(r) + "\n")


def test_parse_split_round_trip(tmp_path):
    write_split(tmp_path / "train.txt", RAW)
    assert parse_split(tmp_path / "train.txt") == RAW


def test_parse_split_skips_blank_lines(tmp_path):
    with open(tmp_path / "s.txt", "w") as fh:
        fh.write("a\tr\tb\tt0\n\n\nc\tr\td\tt1\n")
    assert len(parse_split(tmp_path / "s.txt")) == 2


def test_parse_split_field_count_error_names_line(tmp_path):
    with open(tmp_path / "bad.txt", "w") as fh:
        fh.write("a\tr\tb\tt0\n")
        fh.write("a\tr\tb\n")
    with pytest.raises(DataError, match=r"bad\.txt:2.*4 tab-separated.*3"):
        parse_split(tmp_path / "bad.txt")


def test_parse_split_empty_and_missing(tmp_path):
    (tmp_path / "empty.txt").write_text("")
    with pytest.raises(DataError, match="empty"):
        parse_split(tmp_path / "empty.txt")
    with pytest.raises(DataError, match="cannot read"):
        parse_split(tmp_path / "nope.txt")


def test_vocab_first_occurrence_order():
    vocab = build_vocab(RAW, [], [])
    assert vocab.entities == ("alice", "bob")
    assert vocab.relations == ("likes",)
    assert vocab.timestamps == ("2014-01-01", "2014-01-02")
    assert (vocab.n_entities, vocab.n_relations, vocab.n_timestamps) == (2, 1, 2)
    assert vocab.entity_index("bob") == 1
    assert vocab.relation_label(0) == "likes"
    assert vocab.relation_label(1) == "likes^-1"


def test_vocab_covers_later_splits():
    vocab = build_vocab(RAW[:1], RAW[1:2], [("carol", "hates", "bob", "2014-01-03")])
    assert "carol" in vocab.entities
    assert "hates" in vocab.relations
    # train symbols come first
    assert vocab.entities[:2] == ("alice", "bob")


def test_vocab_hash_is_order_sensitive():
    a = build_vocab(RAW, [], [])
    b = build_vocab(list(reversed(RAW)), [], [])
    assert a.hash() == build_vocab(RAW, [], []).hash()
    assert a.hash() != b.hash()


def test_index_quadruples_and_unknown_symbol():
    vocab = build_vocab(RAW, [], [])
    arr = index_quadruples(RAW, vocab)
    assert arr.shape == (3, 4)
    np.testing.assert_array_equal(arr[0], [0, 0, 1, 0])
    with pytest.raises(DataError, match="missing from vocabulary"):
        index_quadruples([("zed", "likes", "bob", "2014-01-01")], vocab)


def test_augment_inverse_swaps_endpoints():
    quads = np.array([[0, 0, 1, 0], [2, 1, 0, 1]])
    aug = augment_inverse(quads, n_relations=2)
    assert aug.shape == (4, 4)
    np.testing.assert_array_equal(aug[2], [1, 2, 0, 0])  # <o, p+|R|, s, t>
    np.testing.assert_array_equal(aug[3], [0, 3, 2, 1])
    with pytest.raises(DataError, match="refusing to augment twice"):
        augment_inverse(aug, n_relations=2)


def test_filter_index_toy_enumeration():
    quads = np.array([[0, 0, 1, 0], [0, 0, 2, 0], [3, 0, 1, 1]])
    aug = augment_inverse(quads, n_relations=1)
    index = FilterIndex(aug)
    np.testing.assert_array_equal(index.lookup(0, 0, 0), [1, 2])
    np.testing.assert_array_equal(index.lookup(3, 0, 1), [1])
    # inverse direction is covered by the same lookup
    np.testing.assert_array_equal(index.lookup(1, 1, 0), [0])
    np.testing.assert_array_equal(index.lookup(2, 1, 0), [0])
    assert index.lookup(5, 0, 0).size == 0
    assert len(index) == 5  # (0,0,t0) merges the two shared-subject facts


def test_filter_index_symmetry_under_augmentation():
    rng = np.random.default_rng(0)
    quads = np.column_stack([rng.integers(5, size=30), rng.integers(2, size=30),
                             rng.integers(5, size=30), rng.integers(3, size=30)])
    index = build_filter_index(augment_inverse(quads, 2))
    for s, p, o, t in quads:
        assert o in index.lookup(int(s), int(p), int(t))
        assert s in index.lookup(int(o), int(p) + 2, int(t))


def test_load_dataset_end_to_end(tmp_path):
    write_split(tmp_path / "train.txt", RAW)
    write_split(tmp_path / "valid.tsv", RAW[:1])
    write_split(tmp_path / "test", RAW[1:2])
    ds = load_dataset(tmp_path)
    assert ds.train.shape == (3, 4)
    assert ds.train_aug.shape == (6, 4)
    assert ds.valid.shape == (1, 4)
    assert len(ds.filter_index) > 0
    # every augmented fact of every split is in the filter index
    for split in (ds.train_aug, ds.valid_aug, ds.test_aug):
        for s, p, o, t in split:
            assert o in ds.filter_index.lookup(int(s), int(p), int(t))


def test_load_dataset_missing_split(tmp_path):
    write_split(tmp_path / "train.txt", RAW)
    with pytest.raises(DataError, match="no valid split"):
        load_dataset(tmp_path)


def test_dump_tsv_round_trips_vocabulary(tmp_path):
    vocab = build_vocab(RAW, [], [])
    vocab.dump_tsv(tmp_path / "vocab.tsv")
    lines = (tmp_path / "vocab.tsv").read_text().splitlines()
    assert "entity\t0\talice" in lines
    assert "relation\t0\tlikes" in lines
    assert "timestamp\t1\t2014-01-02" in lines
