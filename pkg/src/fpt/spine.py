"""Spine registration and transverse-process angle (TxA) measurement.

A labeled generic spine model is registered to a (possibly partial)
reconstruction with a trained displacement network; its landmarks ride along
through the same displacement field, and TxA is the coronal-plane angle
between the landmark lines above and below the curvature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import UnitBoxRecord, unit_box_record
from .model import FPTModel, fpt_forward, point_displacement

PREALIGN_MODES = ("none", "centroid", "centroid_scale")


@dataclass
class LabeledSpineModel:
    surface: np.ndarray          # [N, 3] resampled generic model
    landmarks: dict              # name -> [3] transverse-process lateral ends
    ap_axis: int = 1             # which axis is anterior-posterior

    def __post_init__(self):
        self.surface = np.asarray(self.surface, dtype=np.float64)
        self.landmarks = {k: np.asarray(v, dtype=np.float64).reshape(3)
                          for k, v in self.landmarks.items()}
        if self.ap_axis not in (0, 1, 2):
            raise ValueError(f"LabeledSpineModel: ap_axis must be 0, 1, or 2, got {self.ap_axis}")
        lo = self.surface.min(axis=0) - 1e-9
        hi = self.surface.max(axis=0) + 1e-9
        for name, p in self.landmarks.items():
            if np.any(p < lo) or np.any(p > hi):
                raise ValueError(
                    f"LabeledSpineModel: landmark {name!r} lies outside the surface bounding box")


@dataclass
class SpineRegistration:
    deformed_surface: np.ndarray
    deformed_landmarks: dict
    global_feature: np.ndarray
    record: UnitBoxRecord            # the shared normalization used
    prealigned_recon: np.ndarray     # reconstruction after pre-alignment, raw units


@dataclass
class TxAResult:
    upper_line: np.ndarray       # [2, 3]
    lower_line: np.ndarray       # [2, 3]
    angle_deg: float
    upper_coronal: np.ndarray    # [2, 2]
    lower_coronal: np.ndarray    # [2, 2]


def _prealign(recon: np.ndarray, surface: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return np.asarray(recon, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if mode == "centroid":
        return recon - recon.mean(axis=0) + surface.mean(axis=0)
    if mode == "centroid_scale":
        rec_r = unit_box_record(recon)
        rec_s = unit_box_record(surface)
        return (recon - rec_r.center) * (rec_s.half / rec_r.half) + rec_s.center
    raise ValueError(f"register_spine: prealign must be one of {PREALIGN_MODES}, got {mode!r}")


def register_spine(model: LabeledSpineModel, recon: np.ndarray, fpt: FPTModel,
                   prealign: str = "centroid") -> SpineRegistration:
    """Deform the labeled model onto the reconstruction.

    Both sets share the model surface's unit-box normalization (after the
    chosen pre-alignment of the reconstruction), so landmark coordinates and
    surface points live in the same network frame. Outputs are denormalized
    by adding the rescaled displacement to the raw input, which keeps an
    identity network exactly the identity.
    """
    recon = np.asarray(recon, dtype=np.float64)
    if recon.size == 0 or model.surface.size == 0:
        raise ValueError("register_spine: point sets must be nonempty")
    record = unit_box_record(model.surface)
    aligned = _prealign(recon, model.surface, prealign)

    dtype = fpt.parameters()[0].value.dtype
    src = record.normalize(model.surface).astype(dtype)
    tgt = record.normalize(aligned).astype(dtype)
    field = fpt_forward(src, tgt, fpt)

    half = record.half
    deformed_surface = model.surface + field.displacements.astype(np.float64) * half
    deformed_landmarks = {}
    for name, p in model.landmarks.items():
        p_n = record.normalize(p).astype(dtype)
        disp = point_displacement(p_n, field.global_feature, fpt)
        deformed_landmarks[name] = p + disp.astype(np.float64) * half
    return SpineRegistration(deformed_surface=deformed_surface,
                             deformed_landmarks=deformed_landmarks,
                             global_feature=field.global_feature,
                             record=record, prealigned_recon=aligned)


def project_coronal(p: np.ndarray, ap_axis: int = 1) -> np.ndarray:
    """Drop the anterior-posterior coordinate: (lateral, superior-inferior)."""
    if ap_axis not in (0, 1, 2):
        raise ValueError(f"project_coronal: ap_axis must be 0, 1, or 2, got {ap_axis}")
    return np.delete(np.asarray(p, dtype=np.float64), ap_axis, axis=-1)


def txa(upper: np.ndarray, lower: np.ndarray, ap_axis: int = 1) -> float:
    """Acute angle in degrees between the coronally projected lines."""
    u = np.subtract(*project_coronal(np.asarray(upper, dtype=np.float64), ap_axis))
    v = np.subtract(*project_coronal(np.asarray(lower, dtype=np.float64), ap_axis))
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("txa: a projected line has zero length")
    c = np.clip(abs(float(u @ v)) / (nu * nv), 0.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def _landmark_line(landmarks: dict, vertebra: str) -> np.ndarray:
    line = []
    for side in ("left", "right"):
        name = f"{vertebra}_{side}"
        if name not in landmarks:
            raise ValueError(f"measure_case: missing landmark {name!r}")
        line.append(landmarks[name])
    return np.asarray(line)


def measure_case(model: LabeledSpineModel, recon: np.ndarray, fpt: FPTModel,
                 upper_vertebra: str, lower_vertebra: str,
                 prealign: str = "centroid") -> TxAResult:
    """Register, then measure TxA between the named vertebrae's landmark lines."""
    _landmark_line(model.landmarks, upper_vertebra)  # fail before the expensive part
    _landmark_line(model.landmarks, lower_vertebra)
    reg = register_spine(model, recon, fpt, prealign=prealign)
    upper = _landmark_line(reg.deformed_landmarks, upper_vertebra)
    lower = _landmark_line(reg.deformed_landmarks, lower_vertebra)
    return TxAResult(
        upper_line=upper, lower_line=lower,
        angle_deg=txa(upper, lower, model.ap_axis),
        upper_coronal=project_coronal(upper, model.ap_axis),
        lower_coronal=project_coronal(lower, model.ap_axis))


# ---------------------------------------------------------------------------
# Landmark and report I/O


def load_landmarks(path):
    """JSON of name -> [x, y, z] plus an "ap_axis" key; returns (dict, ap_axis)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "ap_axis" not in doc:
        raise ValueError(f"landmarks file {path}: missing required key 'ap_axis'")
    ap_axis = doc.pop("ap_axis")
    if ap_axis not in (0, 1, 2):
        raise ValueError(f"landmarks file {path}: ap_axis must be 0, 1, or 2")
    landmarks = {}
    for name, xyz in doc.items():
        arr = np.asarray(xyz, dtype=np.float64)
        if arr.shape != (3,):
            raise ValueError(f"landmarks file {path}: {name!r} is not a 3-vector")
        landmarks[name] = arr
    return landmarks, ap_axis


def save_landmarks(landmarks: dict, ap_axis: int, path):
    doc = {"ap_axis": int(ap_axis)}
    doc.update({name: [float(c) for c in p] for name, p in landmarks.items()})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_txa_report(result: TxAResult, checkpoint_id: str, path):
    doc = {
        "angle_deg": result.angle_deg,
        "upper_line": result.upper_line.tolist(),
        "lower_line": result.lower_line.tolist(),
        "upper_line_coronal": result.upper_coronal.tolist(),
        "lower_line_coronal": result.lower_coronal.tolist(),
        "checkpoint": checkpoint_id,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
