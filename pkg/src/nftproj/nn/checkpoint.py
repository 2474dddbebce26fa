"""Binary checkpoint container.

Layout (little-endian)::

    b"NFTP" | u32 version | sections... | u64 checksum

Each section is a 4-byte tag, a u64 payload length and the payload. Tags,
in order: ``pca_``, ``norm``, ``ctxs``, ``modl`` (named float64 arrays) and
``conf`` (UTF-8 JSON, sorted keys). A named-array payload is a u32 count
followed by, per array: u16 name length, name, u8 ndim, u32 dims, float64
data. The checksum is an 8-byte BLAKE2b digest of everything before it.
An empty ``modl`` section means the checkpoint carries contexts only.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..context import NormalizationParams, PcaModel
from ..exceptions import CorruptCheckpoint, IoError
from .lstm import LstmLayerParams, ModelParams

MAGIC = b"NFTP"
FORMAT_VERSION = 1
_TAGS = (b"pca_", b"norm", b"ctxs", b"modl", b"conf")


@dataclass
class Checkpoint:
    model: ModelParams | None
    pca: PcaModel
    norm: NormalizationParams
    contexts: dict
    config: dict = field(default_factory=dict)


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _pack_arrays(arrays: dict) -> bytes:
    out = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        raw_name = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw_name)) + raw_name)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes(order="C"))
    return b"".join(out)


def _unpack_arrays(buf: bytes) -> dict:
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CorruptCheckpoint("array section truncated")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(buf):
        raise CorruptCheckpoint("trailing bytes in array section")
    return arrays


def _model_arrays(model: ModelParams | None) -> dict:
    if model is None:
        return {}
    arrays = dict(model.arrays())
    arrays["scale"] = model.scale
    arrays["dropout"] = np.array(model.dropout)
    return arrays


def encode_checkpoint(model, pca, norm, contexts, config=None) -> bytes:
    norm_arrays = {k: np.array(getattr(norm, k)) for k in ("abs_min_offset", "global_min", "global_max", "a", "b")}
    payloads = [
        _pack_arrays({"mean": pca.mean, "components": pca.components,
                      "explained_variance": pca.explained_variance}),
        _pack_arrays(norm_arrays),
        _pack_arrays({str(k): np.asarray(v) for k, v in contexts.items()}),
        _pack_arrays(_model_arrays(model)),
        json.dumps(config or {}, sort_keys=True, separators=(",", ":")).encode("utf-8"),
    ]
    body = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for tag, payload in zip(_TAGS, payloads):
        body.append(tag + struct.pack("<Q", len(payload)) + payload)
    blob = b"".join(body)
    return blob + _checksum(blob)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CorruptCheckpoint("not a checkpoint (bad magic or truncated)")
    (version,) = struct.unpack("<I", blob[4:8])
    if version > FORMAT_VERSION:
        raise CorruptCheckpoint(f"unsupported format version {version} (this build reads up to {FORMAT_VERSION})")
    if _checksum(blob[:-8]) != blob[-8:]:
        raise CorruptCheckpoint("checksum mismatch (file truncated or modified)")
    pos, end = 8, len(blob) - 8
    sections = {}
    for tag in _TAGS:
        if pos + 12 > end or blob[pos:pos + 4] != tag:
            raise CorruptCheckpoint(f"missing section {tag.decode()}")
        (length,) = struct.unpack("<Q", blob[pos + 4:pos + 12])
        pos += 12
        if pos + length > end:
            raise CorruptCheckpoint(f"section {tag.decode()} truncated")
        sections[tag] = blob[pos:pos + length]
        pos += length
    if pos != end:
        raise CorruptCheckpoint("unexpected bytes after last section")
    try:
        p = _unpack_arrays(sections[b"pca_"])
        pca = PcaModel(p["mean"], p["components"], p["explained_variance"])
        n = _unpack_arrays(sections[b"norm"])
        norm = NormalizationParams(*(float(n[k]) for k in ("abs_min_offset", "global_min", "global_max", "a", "b")))
        contexts = _unpack_arrays(sections[b"ctxs"])
        m = _unpack_arrays(sections[b"modl"])
        model = None
        if m:
            model = ModelParams(LstmLayerParams(m["layer1.W"], m["layer1.b"]),
                                LstmLayerParams(m["layer2.W"], m["layer2.b"]),
                                m["head_W"], m["head_b"], m["scale"], float(m["dropout"]))
        config = json.loads(sections[b"conf"].decode("utf-8"))
    except (KeyError, ValueError, struct.error, UnicodeDecodeError) as exc:
        raise CorruptCheckpoint(f"malformed section: {exc}") from None
    return Checkpoint(model, pca, norm, contexts, config)


def save_checkpoint(model, pca, norm_params, context_table, config, path) -> None:
    blob = encode_checkpoint(model, pca, norm_params, context_table, config)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_checkpoint(blob)
