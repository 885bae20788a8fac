"""Filtered link-prediction ranking, aggregate metrics, and the probes.

Both query directions are realized as object-side queries: the test split
is augmented with inverse relations before evaluation, so each original
fact contributes an object query and a subject query.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FilterIndex
from .model import score_all_objects
from .params import CurvatureSpec, ModelParams


class IntegrityError(Exception):
    """Dataset / filter-index mismatch detected during ranking."""


@dataclass(frozen=True)
class RankReport:
    """Per-query filtered ranks with the usual aggregates."""

    ranks: np.ndarray
    mrr: float
    hits1: float
    hits3: float
    hits10: float

    @property
    def query_count(self) -> int:
        return len(self.ranks)

    @classmethod
    def from_ranks(cls, ranks) -> "RankReport":
        ranks = np.asarray(ranks, dtype=np.int64)
        if ranks.size == 0:
            raise ValueError("cannot aggregate an empty rank list")
        if np.any(ranks < 1):
            raise ValueError("ranks must be positive")
        inv = 1.0 / ranks
        return cls(
            ranks=ranks,
            mrr=float(inv.mean()),
            hits1=float(np.mean(ranks <= 1)),
            hits3=float(np.mean(ranks <= 3)),
            hits10=float(np.mean(ranks <= 10)),
        )

    def to_dict(self) -> dict:
        return {"mrr": self.mrr, "h1": self.hits1, "h3": self.hits3,
                "h10": self.hits10, "queries": self.query_count}


def _ranks_for_chunk(params, spec, chunk, filter_index, n_entities):
    """Filtered ranks for an (m, 4) chunk of augmented query quadruples."""
    scores = score_all_objects(params, spec, chunk[:, 0], chunk[:, 1], chunk[:, 3],
                               n_entities)
    gold = chunk[:, 2]
    gold_scores = scores[np.arange(len(chunk)), gold].copy()
    for i, (s, p, o, t) in enumerate(chunk):
        known = filter_index.lookup(int(s), int(p), int(t))
        if int(o) not in known:
            raise IntegrityError(
                f"gold object {o} missing from filter set of ({s}, {p}, {t})"
            )
        scores[i, known] = -np.inf  # every known-true object, gold included
    # rank = 1 + number of candidates strictly above the gold score
    return 1 + np.count_nonzero(scores > gold_scores[:, None], axis=1)


def filtered_rank(params: ModelParams, spec: CurvatureSpec, query, gold: int,
                  filter_index: FilterIndex, n_entities: int) -> int:
    """Filtered rank of `gold` for a single (s, p, t) query.

    All other known-true objects are forced to -inf; ties above the gold
    score are counted, ties at it are not (optimistic, deterministic).
    """
    s, p, t = query
    chunk = np.array([[s, p, gold, t]], dtype=np.int64)
    return int(_ranks_for_chunk(params, spec, chunk, filter_index, n_entities)[0])


def evaluate(params: ModelParams, spec: CurvatureSpec, queries, filter_index: FilterIndex,
             n_entities: int, chunk_size: int = 256, threads: int = 1) -> RankReport:
    """Rank every augmented query; aggregation is order-independent.

    `queries` is an (N, 4) array of augmented quadruples (object queries
    plus inverse-relation subject queries).
    """
    queries = np.asarray(queries, dtype=np.int64)
    chunks = [queries[lo:lo + chunk_size] for lo in range(0, len(queries), chunk_size)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda ch: _ranks_for_chunk(params, spec, ch, filter_index, n_entities),
                chunks))
    else:
        parts = [_ranks_for_chunk(params, spec, ch, filter_index, n_entities)
                 for ch in chunks]
    return RankReport.from_ranks(np.concatenate(parts))


@dataclass(frozen=True)
class TemporalProbeResult:
    """One report per forced timestamp plus deviations from the reference."""

    reference: RankReport
    reports: list  # RankReport, indexed by timestamp id
    stds: dict = field(default_factory=dict)  # metric -> rms deviation from reference


def temporal_probe(params: ModelParams, spec: CurvatureSpec, queries,
                   filter_index: FilterIndex, n_entities: int, n_timestamps: int,
                   chunk_size: int = 256, threads: int = 1) -> TemporalProbeResult:
    """Re-evaluate with every query's timestamp replaced by each tau in T.

    The filter index keeps using the query's original timestamp: the probe
    corrupts the model input, not the ground truth.
    """
    queries = np.asarray(queries, dtype=np.int64)
    reference = evaluate(params, spec, queries, filter_index, n_entities,
                         chunk_size=chunk_size, threads=threads)
    reports = []
    for tau in range(n_timestamps):
        corrupted = queries.copy()
        corrupted[:, 3] = tau
        # ranks still filtered against the true (s, p, t) key
        chunks = [(corrupted[lo:lo + chunk_size], queries[lo:lo + chunk_size])
                  for lo in range(0, len(queries), chunk_size)]

        def rank_pair(pair):
            corr, orig = pair
            scores = score_all_objects(params, spec, corr[:, 0], corr[:, 1],
                                       corr[:, 3], n_entities)
            gold = corr[:, 2]
            gold_scores = scores[np.arange(len(corr)), gold].copy()
            for i, (s, p, o, t) in enumerate(orig):
                known = filter_index.lookup(int(s), int(p), int(t))
                scores[i, known] = -np.inf
            return 1 + np.count_nonzero(scores > gold_scores[:, None], axis=1)

        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(rank_pair, chunks))
        else:
            parts = [rank_pair(pair) for pair in chunks]
        reports.append(RankReport.from_ranks(np.concatenate(parts)))

    stds = {}
    for metric in ("mrr", "hits1", "hits3", "hits10"):
        ref = getattr(reference, metric)
        devs = np.array([getattr(r, metric) - ref for r in reports])
        stds[metric] = float(np.sqrt(np.mean(devs ** 2)))
    return TemporalProbeResult(reference=reference, reports=reports, stds=stds)


@dataclass(frozen=True)
class SweepRow:
    negatives: int
    report: RankReport


def negative_sweep(base_config, k_values, dataset, eval_split: str = "test",
                   threads: int = 1) -> list[SweepRow]:
    """Train one model per negative-sample count, all else held fixed."""
    from dataclasses import replace

    from .training import train

    if any(k < 1 for k in k_values):
        raise ValueError("negative-sample counts must be positive")
    queries = getattr(dataset, f"{eval_split}_aug")
    rows = []
    for k in k_values:
        config = replace(base_config, negatives=int(k))
        result = train(config, dataset)
        report = evaluate(result.best_params, config.spec, queries,
                          dataset.filter_index, dataset.vocab.n_entities,
                          threads=threads)
        rows.append(SweepRow(negatives=int(k), report=report))
    return rows
