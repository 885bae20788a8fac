"""Shared fixtures: tiny in-memory datasets and randomized model parameters."""

import numpy as np
import pytest

from hercules.data import (Dataset, augment_inverse, build_filter_index,
                           build_vocab, index_quadruples)
from hercules.params import CurvatureSpec, VocabSizes, init_params


def make_dataset(raw_train, raw_valid, raw_test) -> Dataset:
    """Assemble a Dataset from in-memory string quadruples."""
    vocab = build_vocab(raw_train, raw_valid, raw_test)
    indexed = {name: index_quadruples(rows, vocab)
               for name, rows in (("train", raw_train), ("valid", raw_valid),
                                  ("test", raw_test))}
    augmented = {name: augment_inverse(arr, vocab.n_relations)
                 for name, arr in indexed.items()}
    return Dataset(
        vocab=vocab,
        train=indexed["train"], valid=indexed["valid"], test=indexed["test"],
        train_aug=augmented["train"], valid_aug=augmented["valid"],
        test_aug=augmented["test"],
        filter_index=build_filter_index(*augmented.values()),
    )


def random_toy_dataset(rng, n_entities=8, n_relations=2, n_timestamps=3,
                       n_train=24, n_valid=6, n_test=6) -> Dataset:
    """Random quadruple soup with every symbol guaranteed to appear in train."""
    ents = [f"e{i}" for i in range(n_entities)]
    rels = [f"r{i}" for i in range(n_relations)]
    times = [f"t{i}" for i in range(n_timestamps)]

    def draw(k):
        return [(ents[rng.integers(n_entities)], rels[rng.integers(n_relations)],
                 ents[rng.integers(n_entities)], times[rng.integers(n_timestamps)])
                for _ in range(k)]

    # seed train with one fact per symbol so valid/test never introduce new ids
    train = [(e, rels[i % n_relations], ents[(i + 1) % n_entities],
              times[i % n_timestamps]) for i, e in enumerate(ents)]
    train += draw(max(0, n_train - len(train)))
    return make_dataset(train, draw(n_valid), draw(n_test))


def randomize_params(params, rng, scale=0.3):
    """Overwrite the near-zero init with values that exercise every term."""
    for name, arr in params.arrays().items():
        if name in ("rel_rot", "rel_ref"):
            arr[...] = rng.uniform(-np.pi, np.pi, arr.shape)
        elif name == "rel_curv":
            arr[...] = rng.uniform(-1.0, 1.0, arr.shape)
        elif name == "time_curv":
            arr[...] = rng.uniform(0.5, 1.5, arr.shape)
        else:
            arr[...] = rng.uniform(-scale, scale, arr.shape)
    return params


def small_params(spec=None, n=4, n_entities=6, n_relations=2, n_timestamps=3,
                 seed=0, randomized=True):
    spec = spec or CurvatureSpec.relation_only()
    sizes = VocabSizes(n_entities, n_relations, n_timestamps)
    params = init_params(sizes, n, spec, seed)
    if randomized:
        randomize_params(params, np.random.default_rng(seed + 1))
    return params


@pytest.fixture
def toy_dataset():
    return random_toy_dataset(np.random.default_rng(7))


@pytest.fixture
def toy_dataset_dir(tmp_path, toy_dataset):
    """The toy dataset written out as TSV splits for CLI-level tests."""
    vocab = toy_dataset.vocab
    for name in ("train", "valid", "test"):
        arr = getattr(toy_dataset, name)
        with open(tmp_path / f"{name}.txt", "w") as fh:
            for s, p, o, t in arr:
                fh.write(f"{vocab.entities[s]}\t{vocab.relations[p]}\t"
                         f"{vocab.entities[o]}\t{vocab.timestamps[t]}\n")
    return tmp_path
