"""Trainable arrays: initialization, accounting, and checkpoint i/o.

All embeddings are stored in Euclidean space and mapped onto the ball at
use time, so a plain Euclidean optimizer applies. Relations are doubled
up front by inverse augmentation, hence every per-relation array has
2|R| rows.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"HERC"
FORMAT_VERSION = 1

# Canonical Table-4 variant names.
RELATION_ONLY = "relation"
RELATION_TIME = "relation-time"
RELATION_TIME_TRANSLATION = "relation-time-translation"
RELATION_TIME_DOT = "relation-time-dot"


class CheckpointError(Exception):
    """Raised when a checkpoint stream cannot be loaded."""


@dataclass(frozen=True)
class CurvatureSpec:
    """Which curvature/translation ingredients are active.

    The four canonical combinations (AttH; time curvature; + time
    translation; + subject-object dot product) are exposed as
    constructors. Time translation and the dot product both require the
    per-timestamp curvature factors.
    """

    time_curvature: bool = False
    time_translation: bool = False
    dot_product: bool = False

    def __post_init__(self):
        if (self.time_translation or self.dot_product) and not self.time_curvature:
            raise ValueError("time translation / dot-product curvature require time curvature")

    @classmethod
    def relation_only(cls):
        return cls()

    @classmethod
    def relation_time(cls):
        return cls(time_curvature=True)

    @classmethod
    def relation_time_translation(cls):
        return cls(time_curvature=True, time_translation=True)

    @classmethod
    def relation_time_dot(cls):
        return cls(time_curvature=True, time_translation=True, dot_product=True)

    @property
    def variant(self) -> str:
        if self.dot_product:
            return RELATION_TIME_DOT
        if self.time_translation:
            return RELATION_TIME_TRANSLATION
        if self.time_curvature:
            return RELATION_TIME
        return RELATION_ONLY

    def to_dict(self) -> dict:
        return {"time_curvature": self.time_curvature,
                "time_translation": self.time_translation,
                "dot_product": self.dot_product}

    @classmethod
    def from_dict(cls, d: dict) -> "CurvatureSpec":
        return cls(bool(d["time_curvature"]), bool(d["time_translation"]),
                   bool(d["dot_product"]))

    @classmethod
    def from_variant(cls, name: str) -> "CurvatureSpec":
        table = {
            RELATION_ONLY: cls.relation_only,
            RELATION_TIME: cls.relation_time,
            RELATION_TIME_TRANSLATION: cls.relation_time_translation,
            RELATION_TIME_DOT: cls.relation_time_dot,
        }
        if name not in table:
            raise ValueError(f"unknown curvature variant {name!r}")
        return table[name]()


@dataclass(frozen=True)
class VocabSizes:
    n_entities: int
    n_relations: int  # base relations, before inverse doubling
    n_timestamps: int

    def __post_init__(self):
        for v in (self.n_entities, self.n_relations, self.n_timestamps):
            if v < 0:
                raise ValueError("vocabulary sizes must be non-negative")


@dataclass
class ModelParams:
    """All trainable arrays for one model instance."""

    entity_emb: np.ndarray    # (|E|, n)
    entity_bias: np.ndarray   # (|E|,) shared between subject and object roles
    rel_emb: np.ndarray       # (2|R|, n)
    rel_rot: np.ndarray       # (2|R|, n) rotation parameters, paired into n/2 blocks
    rel_ref: np.ndarray       # (2|R|, n) reflection parameters, same layout
    rel_ctx: np.ndarray       # (2|R|, n) attention context vectors
    rel_curv: np.ndarray      # (2|R|,)
    time_curv: np.ndarray | None = None   # (|T|,) only for time-curvature variants
    time_trans: np.ndarray | None = None  # (|T|, n) only with time translation

    ARRAY_ORDER = (
        "entity_emb", "entity_bias", "rel_emb", "rel_rot", "rel_ref",
        "rel_ctx", "rel_curv", "time_curv", "time_trans",
    )

    @property
    def dim(self) -> int:
        return self.entity_emb.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        """Allocated arrays in declared order (absent optionals omitted)."""
        out = {}
        for name in self.ARRAY_ORDER:
            arr = getattr(self, name)
            if arr is not None:
                out[name] = arr
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(**{
            name: (getattr(self, name).copy() if getattr(self, name) is not None else None)
            for name in self.ARRAY_ORDER
        })

    def check_finite(self):
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter array {name} contains non-finite values")


def init_params(sizes: VocabSizes, n: int, spec: CurvatureSpec, seed: int) -> ModelParams:
    """Deterministic initialization.

    Embeddings start uniform in (-0.001, 0.001) so early ball images sit
    near the origin; rotation/reflection parameters uniform in (-pi, pi);
    relation curvature parameters start at 0 and timestamp factors at 1,
    so the time-aware model initially coincides with the time-unaware one.
    Biases and time translations start at 0.
    """
    if n <= 0 or n % 2 != 0:
        raise ValueError(f"embedding dimension must be a positive even integer, got {n}")
    rng = np.random.default_rng(seed)
    e, r2, t = sizes.n_entities, 2 * sizes.n_relations, sizes.n_timestamps
    scale = 0.001
    params = ModelParams(
        entity_emb=rng.uniform(-scale, scale, (e, n)),
        entity_bias=np.zeros(e),
        rel_emb=rng.uniform(-scale, scale, (r2, n)),
        rel_rot=rng.uniform(-np.pi, np.pi, (r2, n)),
        rel_ref=rng.uniform(-np.pi, np.pi, (r2, n)),
        rel_ctx=rng.uniform(-scale, scale, (r2, n)),
        rel_curv=np.zeros(r2),
        time_curv=np.ones(t) if spec.time_curvature else None,
        time_trans=np.zeros((t, n)) if spec.time_translation else None,
    )
    return params


def count_params(sizes: VocabSizes, n: int, spec: CurvatureSpec) -> int:
    """Total trainable scalar count for the active variant.

    AttH: (|E| + 2|R|) n + |E| + 2|R| (1 + 3n); the time-curvature
    variants add |T| and time translation adds a further |T| n.
    """
    e, r, t = sizes.n_entities, sizes.n_relations, sizes.n_timestamps
    total = (e + 2 * r) * n + e + 2 * r * (1 + 3 * n)
    if spec.time_curvature:
        total += t
    if spec.time_translation:
        total += t * n
    return total


# -- checkpoint container -------------------------------------------------
#
# Layout: MAGIC | uint32 version | uint64 metadata length | metadata JSON |
# per array: uint64 byte length | raw little-endian float64 data.
# Array names/shapes are declared in the metadata, in ModelParams order.


def save_checkpoint(params: ModelParams, spec: CurvatureSpec, metadata: dict) -> bytes:
    params.check_finite()
    arrays = params.arrays()
    meta = dict(metadata)
    meta["variant"] = spec.variant  # display only; the flags below are authoritative
    meta["curvature"] = spec.to_dict()
    meta["arrays"] = [[name, list(arr.shape)] for name, arr in arrays.items()]
    meta_blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<Q", len(meta_blob)))
    buf.write(meta_blob)
    for arr in arrays.values():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        buf.write(struct.pack("<Q", len(raw)))
        buf.write(raw)
    return buf.getvalue()


def load_checkpoint(blob: bytes, expected_vocab_hash: str | None = None):
    """Inverse of :func:`save_checkpoint`; returns (params, spec, metadata)."""
    buf = io.BytesIO(blob)

    def read_exact(k, what):
        data = buf.read(k)
        if len(data) != k:
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        return data

    if read_exact(4, "magic") != MAGIC:
        raise CheckpointError("not a checkpoint stream (bad magic)")
    (version,) = struct.unpack("<I", read_exact(4, "version"))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<Q", read_exact(8, "metadata length"))
    try:
        meta = json.loads(read_exact(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata block: {exc}") from None
    if expected_vocab_hash is not None:
        stored = meta.get("vocab_hash")
        if stored != expected_vocab_hash:
            raise CheckpointError(
                f"vocabulary hash mismatch: checkpoint {stored!r} vs current {expected_vocab_hash!r}"
            )
    try:
        spec = (CurvatureSpec.from_dict(meta["curvature"])
                if "curvature" in meta else CurvatureSpec.from_variant(meta["variant"]))
        declared = meta["arrays"]
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint metadata: {exc}") from None
    fields = {name: None for name in ModelParams.ARRAY_ORDER}
    for name, shape in declared:
        if name not in fields:
            raise CheckpointError(f"unknown array {name!r} in checkpoint")
        (nbytes,) = struct.unpack("<Q", read_exact(8, f"{name} length"))
        raw = read_exact(nbytes, f"{name} data")
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if arr.size != expected:
            raise CheckpointError(f"array {name!r} has {arr.size} values, expected {expected}")
        fields[name] = arr.reshape(shape)
    if buf.read(1):
        raise CheckpointError("trailing bytes after declared arrays")
    missing = [n for n in ("entity_emb", "entity_bias", "rel_emb", "rel_rot",
                           "rel_ref", "rel_ctx", "rel_curv") if fields[n] is None]
    if missing:
        raise CheckpointError(f"checkpoint missing required arrays: {missing}")
    return ModelParams(**fields), spec, meta


def write_checkpoint(path, params, spec, metadata):
    blob = save_checkpoint(params, spec, metadata)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_checkpoint(path, expected_vocab_hash=None):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read(), expected_vocab_hash)
