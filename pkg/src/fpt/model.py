"""The registration network: twin weight-sharing feature extractors feeding a
per-point displacement MLP.

Both point sets run through the same per-point MLP (3 -> 64 -> 128 -> 1024,
ReLU between layers, none after the last, no batch normalization anywhere)
and are max-pooled into 1024-d features. Their concatenation conditions a
second MLP ((3+2048) -> 1024 -> 512 -> 256 -> 128 -> 3) that maps each source
point to its displacement. No smoothness or coherence constraint is applied.

The final displacement layer is zero-initialized so an untrained model is
exactly the identity map.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .autodiff import (
    Parameter,
    Tape,
    Tensor,
    as_array,
    concat_vectors,
    hstack_cols,
    linear_forward,
    maxpool_points,
    relu_forward,
    tile_rows,
)

FE_WIDTHS = (3, 64, 128, 1024)
PT_HIDDEN = (1024, 512, 256, 128)

CHECKPOINT_MAGIC = b"FPT1"
CHECKPOINT_VERSION = 1


@dataclass
class FPTModel:
    fe_layers: list            # [(W, b)] shared by both branches
    pt_layers: list            # [(W, b)] displacement MLP
    seed: int
    fe_widths: tuple
    pt_widths: tuple
    version: int = CHECKPOINT_VERSION
    meta: Optional[dict] = None  # extra header keys from a loaded checkpoint

    def parameters(self) -> list:
        out = []
        for w, b in self.fe_layers + self.pt_layers:
            out.extend((w, b))
        return out

    @property
    def feature_dim(self) -> int:
        return self.fe_widths[-1]

    @property
    def global_dim(self) -> int:
        return 2 * self.fe_widths[-1]


@dataclass
class DisplacementField:
    """Per-source-point displacements plus the conditioning global feature."""
    displacements: np.ndarray        # [N, 3]
    global_feature: np.ndarray       # [2 * feature_dim]
    node: Optional[Tensor] = None    # tape node when recorded

    def apply_to(self, source: np.ndarray) -> np.ndarray:
        return np.asarray(source) + self.displacements


def init_model(seed: int, fe_widths: Sequence[int] = FE_WIDTHS,
               pt_hidden: Sequence[int] = PT_HIDDEN,
               dtype=np.float32) -> FPTModel:
    """Deterministic init: W ~ U(+-sqrt(1/fan_in)), biases zero, last layer zero."""
    fe_widths = tuple(int(w) for w in fe_widths)
    pt_widths = (3 + 2 * fe_widths[-1],) + tuple(int(w) for w in pt_hidden) + (3,)
    if fe_widths[0] != 3:
        raise ValueError(f"init_model: feature extractor must take 3-d points, got {fe_widths}")
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out, name, zero=False):
        if zero:
            w = np.zeros((fan_in, fan_out), dtype=dtype)
        else:
            bound = np.sqrt(1.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
        return (Parameter(w, f"{name}.W"),
                Parameter(np.zeros(fan_out, dtype=dtype), f"{name}.b"))

    fe = [layer(fe_widths[i], fe_widths[i + 1], f"fe.{i}")
          for i in range(len(fe_widths) - 1)]
    last = len(pt_widths) - 2
    pt = [layer(pt_widths[i], pt_widths[i + 1], f"pt.{i}", zero=(i == last))
          for i in range(len(pt_widths) - 1)]
    return FPTModel(fe, pt, seed=int(seed), fe_widths=fe_widths, pt_widths=pt_widths)


def _mlp(tape: Optional[Tape], x, layers):
    """linear/ReLU chain; no activation after the final layer."""
    h = x
    for i, (w, b) in enumerate(layers):
        h = linear_forward(tape, h, w, b)
        if i < len(layers) - 1:
            h = relu_forward(tape, h)
    return h


def extract_global_feature(ps, model: FPTModel, tape: Optional[Tape] = None) -> Tensor:
    """Shared per-point MLP then column-wise max over points: [feature_dim]."""
    arr = as_array(ps)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise ValueError(f"extract_global_feature: need a nonempty [N, 3] set, got {arr.shape}")
    h = _mlp(tape, ps, model.fe_layers)
    pooled, _ = maxpool_points(tape, h)
    return pooled


def fpt_forward(source, target, model: FPTModel,
                tape: Optional[Tape] = None) -> DisplacementField:
    """Displacements for every source point, conditioned on both sets.

    Inputs are expected roughly within [-1, 1]^3 (callers normalize).
    """
    src = as_array(source)
    tgt = as_array(target)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape[0] < 1:
        raise ValueError(f"fpt_forward: bad source shape {src.shape}")
    if tgt.ndim != 2 or tgt.shape[1] != 3 or tgt.shape[0] < 1:
        raise ValueError(f"fpt_forward: bad target shape {tgt.shape}")
    f_src = extract_global_feature(source, model, tape)
    f_tgt = extract_global_feature(target, model, tape)
    global_feature = concat_vectors(tape, f_src, f_tgt)
    conditioned = hstack_cols(tape, source,
                              tile_rows(tape, global_feature, src.shape[0]))
    disp = _mlp(tape, conditioned, model.pt_layers)
    return DisplacementField(displacements=disp.data,
                             global_feature=global_feature.data,
                             node=disp)


def point_displacement(p, global_feature: np.ndarray, model: FPTModel) -> np.ndarray:
    """MLP([p; global]) for one point; bitwise-equal to the fpt_forward
    displacement row when p is a source point of the pair that produced
    global_feature."""
    p = np.asarray(as_array(p), dtype=global_feature.dtype).reshape(1, 3)
    row = np.hstack([p, global_feature.reshape(1, -1)])
    return _mlp(None, row, model.pt_layers).data.reshape(3)


def transform_point(p, global_feature: np.ndarray, model: FPTModel) -> np.ndarray:
    """p + MLP([p; global]); agrees exactly with fpt_forward on source rows."""
    p = np.asarray(as_array(p), dtype=global_feature.dtype).reshape(3)
    return p + point_displacement(p, global_feature, model)


# ---------------------------------------------------------------------------
# Checkpoints: magic "FPT1", uint32-LE length-prefixed JSON header, parameters
# as little-endian float32 in manifest order, CRC32 over header and parameters.


def _manifest(model: FPTModel):
    entries = []
    offset = 0
    for p in model.parameters():
        nbytes = int(np.prod(p.value.shape)) * 4
        entries.append({"name": p.name, "shape": list(p.value.shape), "offset": offset})
        offset += nbytes
    return entries, offset


def save_checkpoint(model: FPTModel, path, extra: Optional[dict] = None):
    """extra: additional JSON-safe header keys (training provenance etc)."""
    manifest, total = _manifest(model)
    doc = {
        "version": model.version,
        "seed": model.seed,
        "fe_widths": list(model.fe_widths),
        "pt_widths": list(model.pt_widths),
        "manifest": manifest,
    }
    if extra:
        for key in extra:
            if key in doc:
                raise ValueError(f"save_checkpoint: extra key {key!r} shadows a core field")
        doc.update(extra)
    header = json.dumps(doc, sort_keys=True).encode("utf-8")
    params = b"".join(np.ascontiguousarray(p.value, dtype="<f4").tobytes()
                      for p in model.parameters())
    assert len(params) == total
    crc = zlib.crc32(header + params) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(np.uint32(len(header)).astype("<u4").tobytes())
        fh.write(header)
        fh.write(params)
        fh.write(np.uint32(crc).astype("<u4").tobytes())


def load_checkpoint(path) -> FPTModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError("checkpoint load error: bad magic bytes")
    header_len = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    if len(blob) < 8 + header_len + 4:
        raise ValueError("checkpoint load error: truncated header")
    header_bytes = blob[8:8 + header_len]
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ValueError("checkpoint load error: unreadable header")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint load error: unsupported version {header.get('version')!r}")
    manifest = header["manifest"]
    total = sum(int(np.prod(e["shape"])) * 4 for e in manifest)
    end = 8 + header_len + total
    if len(blob) < end + 4:
        raise ValueError("checkpoint load error: truncated parameter block")
    params_bytes = blob[8 + header_len:end]
    stored_crc = int(np.frombuffer(blob[end:end + 4], dtype="<u4")[0])
    actual_crc = zlib.crc32(header_bytes + params_bytes) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ValueError("checkpoint load error: checksum mismatch")

    fe_widths = tuple(header["fe_widths"])
    pt_widths = tuple(header["pt_widths"])
    model = init_model(header["seed"], fe_widths=fe_widths, pt_hidden=pt_widths[1:-1])
    by_name = {p.name: p for p in model.parameters()}
    if [e["name"] for e in manifest] != [p.name for p in model.parameters()]:
        raise ValueError("checkpoint load error: manifest does not match architecture")
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        start = entry["offset"]
        values = np.frombuffer(params_bytes, dtype="<f4", count=count,
                               offset=start).reshape(shape)
        param = by_name[entry["name"]]
        param.value = np.ascontiguousarray(values, dtype=np.float32)
        param.grad = np.zeros_like(param.value)
    core = {"version", "seed", "fe_widths", "pt_widths", "manifest"}
    model.meta = {k: v for k, v in header.items() if k not in core}
    return model
