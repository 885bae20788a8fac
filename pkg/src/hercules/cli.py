"""Command-line workflow: train, evaluate, probe, sweep, analyze, export.

Configuration resolution order is defaults < config file (`key = value`
lines) < explicit flags. Every command echoes its fully resolved
configuration into the output directory before doing any work, and all
experiment outputs are plain JSON/CSV with optional matplotlib renderings
next to them. The only environment variable honored is HERCULES_QUIET
(suppresses progress lines).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, figures
from .data import DataError, load_dataset
from .evaluation import evaluate, negative_sweep, temporal_probe
from .params import (CheckpointError, CurvatureSpec, VocabSizes, count_params,
                     read_checkpoint, write_checkpoint)
from .training import TrainConfig, train


class UsageError(Exception):
    pass


def _say(message):
    if not os.environ.get("HERCULES_QUIET"):
        print(message, flush=True)


def _read_config_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_TRAIN_DEFAULTS = {
    "dim": 32, "model": "atth", "curvature": None, "time_translation": False,
    "neg": 500, "epochs": 500, "batch": 256, "lr": 0.001, "seed": 0,
    "valid_every": 20, "threads": 1, "deterministic": False,
}

_CASTS = {
    "dim": int, "neg": int, "epochs": int, "batch": int, "seed": int,
    "valid_every": int, "threads": int, "lr": float,
    "time_translation": lambda v: str(v).lower() in ("1", "true", "yes"),
    "deterministic": lambda v: str(v).lower() in ("1", "true", "yes"),
}


def _resolve(args, keys) -> dict:
    """Merge defaults, config file, and explicit flags for `keys`."""
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None and key in file_values:
            value = file_values[key]
            if key in _CASTS:
                value = _CASTS[key](value)
        if value is None:
            value = _TRAIN_DEFAULTS.get(key)
        resolved[key] = value
    return resolved


def _spec_from(resolved) -> CurvatureSpec:
    curvature = resolved.get("curvature")
    if curvature is None:
        curvature = "relation-time" if resolved.get("model") == "hercules" else "relation"
    if curvature not in ("relation", "relation-time", "relation-time-dot"):
        raise UsageError(f"unknown curvature form {curvature!r}")
    return CurvatureSpec(
        time_curvature=curvature != "relation",
        time_translation=bool(resolved.get("time_translation")),
        dot_product=curvature == "relation-time-dot",
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, resolved: dict, command: str):
    payload = {"command": command, **{k: v for k, v in sorted(resolved.items())}}
    (out / "config.json").write_text(json.dumps(payload, indent=2) + "\n")


def _threads(resolved) -> int:
    return 1 if resolved.get("deterministic") else max(1, int(resolved.get("threads", 1)))


def _train_config(resolved, spec) -> TrainConfig:
    return TrainConfig(
        dim=resolved["dim"], spec=spec, epochs=resolved["epochs"],
        batch_size=resolved["batch"], negatives=resolved["neg"],
        learning_rate=resolved["lr"], seed=resolved["seed"],
        valid_every=resolved["valid_every"], eval_threads=_threads(resolved),
    )


def _checkpoint_meta(config: TrainConfig, dataset, epoch, mrr) -> dict:
    return {
        "n": config.dim,
        "seed": config.seed,
        "epoch": epoch,
        "valid_mrr": mrr,
        "vocab_hash": dataset.vocab.hash(),
        "sizes": [dataset.vocab.n_entities, dataset.vocab.n_relations,
                  dataset.vocab.n_timestamps],
        "config": config.to_dict(),
    }


def _split_queries(dataset, split: str):
    try:
        return getattr(dataset, f"{split}_aug")
    except AttributeError:
        raise UsageError(f"unknown split {split!r}")


# -- commands -------------------------------------------------------------

def cmd_train(args):
    resolved = _resolve(args, _TRAIN_DEFAULTS.keys())
    spec = _spec_from(resolved)
    resolved["curvature"] = spec.variant
    out = _out_dir(args)
    _echo_config(out, {**resolved, "data": str(args.data)}, "train")
    dataset = load_dataset(args.data)
    dataset.vocab.dump_tsv(out / "vocab.tsv")
    config = _train_config(resolved, spec)

    log_path = out / "log.jsonl"
    log_path.write_text("")

    def log_fn(row):
        with open(log_path, "a") as fh:
            fh.write(json.dumps(row) + "\n")
        extras = f" valid_mrr={row['mrr']:.4f}" if "mrr" in row else ""
        _say(f"epoch {row['epoch']}: loss={row['loss']:.4f}{extras}")

    def checkpoint_fn(tag, params, epoch, mrr):
        if tag == "best":  # "last" is written once, after the loop
            write_checkpoint(out / "best.herc", params, spec,
                             _checkpoint_meta(config, dataset, epoch, mrr))

    result = train(config, dataset, log_fn=log_fn, checkpoint_fn=checkpoint_fn)
    write_checkpoint(out / "best.herc", result.best_params, spec,
                     _checkpoint_meta(config, dataset, result.best_epoch,
                                      result.best_mrr))
    write_checkpoint(out / "last.herc", result.final_params, spec,
                     _checkpoint_meta(config, dataset, config.epochs, None))
    if not args.no_figures:
        figures.training_curve_figure(result.history, out / "training_curve.png")
    _say(f"best checkpoint: epoch {result.best_epoch}"
         + (f", valid MRR {result.best_mrr:.4f}" if result.best_mrr is not None else ""))
    return 0


def _load_for_eval(args):
    dataset = load_dataset(args.data)
    params, spec, meta = read_checkpoint(args.checkpoint,
                                         expected_vocab_hash=dataset.vocab.hash())
    return dataset, params, spec, meta


def cmd_eval(args):
    resolved = _resolve(args, ("threads", "deterministic"))
    out = _out_dir(args)
    _echo_config(out, {"checkpoint": str(args.checkpoint), "data": str(args.data),
                       "split": args.split, **resolved}, "eval")
    dataset, params, spec, meta = _load_for_eval(args)
    report = evaluate(params, spec, _split_queries(dataset, args.split),
                      dataset.filter_index, dataset.vocab.n_entities,
                      threads=_threads(resolved))
    payload = {"split": args.split, "checkpoint_epoch": meta.get("epoch"),
               "curvature": spec.variant, **report.to_dict()}
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(payload, indent=2))
    return 0


def cmd_probe_time(args):
    resolved = _resolve(args, ("threads", "deterministic"))
    out = _out_dir(args)
    _echo_config(out, {"checkpoint": str(args.checkpoint), "data": str(args.data),
                       "split": args.split, **resolved}, "probe-time")
    dataset, params, spec, meta = _load_for_eval(args)
    probe = temporal_probe(params, spec, _split_queries(dataset, args.split),
                           dataset.filter_index, dataset.vocab.n_entities,
                           dataset.vocab.n_timestamps, threads=_threads(resolved))
    with open(out / "probe.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "mrr", "h1", "h3", "h10"])
        for tau, report in enumerate(probe.reports):
            writer.writerow([dataset.vocab.timestamps[tau],
                             f"{report.mrr:.10g}", f"{report.hits1:.10g}",
                             f"{report.hits3:.10g}", f"{report.hits10:.10g}"])
    payload = {"reference": probe.reference.to_dict(),
               "stds": {"mrr": probe.stds["mrr"], "h1": probe.stds["hits1"],
                        "h3": probe.stds["hits3"], "h10": probe.stds["hits10"]}}
    (out / "probe.json").write_text(json.dumps(payload, indent=2) + "\n")
    if not args.no_figures:
        figures.probe_figure(probe, out / "probe.png")
    print(json.dumps(payload["stds"], indent=2))
    return 0


def cmd_sweep_neg(args):
    keys = [k for k in _TRAIN_DEFAULTS if k != "neg"]
    resolved = _resolve(args, keys)
    spec = _spec_from(resolved)
    resolved["curvature"] = spec.variant
    k_values = [int(v) for v in args.neg_values.split(",") if v.strip()]
    if not k_values:
        raise UsageError("--neg-values must list at least one count")
    out = _out_dir(args)
    _echo_config(out, {**resolved, "neg_values": k_values, "data": str(args.data),
                       "split": args.split}, "sweep-neg")
    dataset = load_dataset(args.data)
    base = _train_config({**resolved, "neg": k_values[0]}, spec)
    rows = negative_sweep(base, k_values, dataset, eval_split=args.split,
                          threads=_threads(resolved))
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["negatives", "mrr", "h1", "h3", "h10"])
        for row in rows:
            writer.writerow([row.negatives, f"{row.report.mrr:.10g}",
                             f"{row.report.hits1:.10g}", f"{row.report.hits3:.10g}",
                             f"{row.report.hits10:.10g}"])
    if not args.no_figures:
        figures.sweep_figure(rows, out / "sweep.png")
    for row in rows:
        _say(f"k={row.negatives}: mrr={row.report.mrr:.4f}")
    return 0


def cmd_curvature_diff(args):
    out = _out_dir(args)
    _echo_config(out, {"checkpoint_a": str(args.checkpoint_a),
                       "checkpoint_b": str(args.checkpoint_b)}, "curvature-diff")
    params_a, spec_a, meta_a = read_checkpoint(args.checkpoint_a)
    params_b, spec_b, meta_b = read_checkpoint(args.checkpoint_b)
    if meta_a.get("vocab_hash") != meta_b.get("vocab_hash"):
        raise UsageError("checkpoints were trained on different vocabularies")
    n_relations = meta_a["sizes"][1]
    mat_a = analysis.curvature_matrix(params_a, spec_a, n_relations)
    mat_b = analysis.curvature_matrix(params_b, spec_b, n_relations)
    delta, fraction = analysis.curvature_delta(mat_a, mat_b)
    analysis.write_curvature_csv(delta, out / "delta.csv")
    summary = {"fraction_below_0.1": fraction,
               "fractions": analysis.delta_fractions(delta),
               "max_delta": float(np.max(delta))}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if not args.no_figures:
        figures.curvature_delta_figure(delta, out / "delta.png")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_count_params(args):
    resolved = _resolve(args, ("dim", "model", "curvature", "time_translation"))
    spec = _spec_from(resolved)
    dataset = load_dataset(args.data)
    sizes = VocabSizes(dataset.vocab.n_entities, dataset.vocab.n_relations,
                       dataset.vocab.n_timestamps)
    print(count_params(sizes, resolved["dim"], spec))
    return 0


def cmd_export_2d(args):
    out = _out_dir(args)
    dataset, params, spec, meta = _load_for_eval(args)
    vocab = dataset.vocab
    try:
        p = int(args.relation) if args.relation.isdigit() else vocab.relation_index(args.relation)
        t = int(args.timestamp) if args.timestamp.isdigit() else vocab.timestamp_index(args.timestamp)
    except KeyError as exc:
        raise UsageError(f"unknown symbol {exc}")
    _echo_config(out, {"checkpoint": str(args.checkpoint), "data": str(args.data),
                       "relation": p, "timestamp": t}, "export-2d")
    rows = analysis.export_embeddings_2d(params, spec, vocab, p, t,
                                         out / "embeddings_2d.csv")
    if not args.no_figures:
        from . import geometry
        from .model import curvature as model_curvature
        if spec.dot_product:
            c = float(np.logaddexp(0.0, params.rel_curv[p] * params.time_curv[t]))
        else:
            c = float(np.asarray(model_curvature(params, spec, p, t)))
        points = geometry.exp0(params.entity_emb, c)
        figures.embeddings_2d_figure(points, c, out / "embeddings_2d.png")
    _say(f"wrote {rows} rows")
    return 0


# -- parser ---------------------------------------------------------------

def _add_common(parser, data=True, out=True, config=True):
    if data:
        parser.add_argument("--data", required=True, help="dataset directory with train/valid/test TSVs")
    if out:
        parser.add_argument("--out", required=True, help="output directory for artifacts")
        parser.add_argument("--no-figures", action="store_true",
                            help="skip matplotlib renderings, keep CSV/JSON only")
    if config:
        parser.add_argument("--config", help="key = value file supplying defaults")
    parser.add_argument("--threads", type=int, help="evaluation worker threads")
    parser.add_argument("--deterministic", action="store_true", default=None,
                        help="force single-threaded, bit-reproducible execution")


def _add_model_flags(parser):
    parser.add_argument("--dim", type=int, help="embedding dimension (even)")
    parser.add_argument("--model", choices=["atth", "hercules"],
                        help="atth = relation curvature, hercules = relation-time")
    parser.add_argument("--curvature",
                        choices=["relation", "relation-time", "relation-time-dot"],
                        help="curvature definition (overrides --model's default)")
    parser.add_argument("--time-translation", action="store_true", default=None,
                        dest="time_translation", help="add a per-timestamp translation")
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hercules",
        description="Hyperbolic temporal knowledge-graph embedding workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and keep the best-MRR checkpoint")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--neg", type=int, help="negative samples per positive")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--valid-every", type=int, dest="valid_every")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="filtered link-prediction metrics for a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe-time", help="re-evaluate with every timestamp forced")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.set_defaults(func=cmd_probe_time)

    p = sub.add_parser("sweep-neg", help="train once per negative-sample count")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--neg-values", required=True,
                   help="comma-separated counts, e.g. 50,100,200")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--valid-every", type=int, dest="valid_every")
    p.add_argument("--split", default="test", choices=["valid", "test"])
    p.set_defaults(func=cmd_sweep_neg)

    p = sub.add_parser("curvature-diff", help="|curvature| difference of two checkpoints")
    _add_common(p, data=False, config=False)
    p.add_argument("--checkpoint-a", required=True)
    p.add_argument("--checkpoint-b", required=True)
    p.set_defaults(func=cmd_curvature_diff)

    p = sub.add_parser("count-params", help="trainable parameter count for a dataset/model")
    _add_common(p, out=False)
    _add_model_flags(p)
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("export-2d", help="CSV of exp-mapped 2-D entity embeddings")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--relation", required=True, help="relation name or index")
    p.add_argument("--timestamp", required=True, help="timestamp label or index")
    p.set_defaults(func=cmd_export_2d)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
