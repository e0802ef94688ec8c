"""Point-set and mesh primitives.

A PointSet is a plain [N, 3] float ndarray; row order is meaningful (row i of
a transformed set corresponds to row i of its source). OFF parsing, surface
sampling, unit-box normalization, rigid transforms, exact nearest neighbors,
occlusion, and Kabsch best-fit live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels


@dataclass
class Mesh:
    vertices: np.ndarray  # [V, 3] float64
    faces: np.ndarray     # [F, 3] int64, triangles

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)


@dataclass
class EulerAngles:
    """Rotation angles in degrees about the fixed X, Y, Z axes."""
    rx: float
    ry: float
    rz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz], dtype=np.float64)


@dataclass
class RigidTransform:
    """p' = rotation @ p + translation (column-vector convention)."""
    rotation: np.ndarray
    translation: np.ndarray
    source_angles: Optional[EulerAngles] = None

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        det = np.linalg.det(self.rotation)
        if err > 1e-6 or abs(det - 1.0) > 1e-6:
            raise ValueError(
                f"invalid rotation: |R^T R - I| = {err:.3g}, det = {det:.6f}"
            )

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3), EulerAngles(0.0, 0.0, 0.0))

    def apply(self, ps: np.ndarray) -> np.ndarray:
        return np.asarray(ps) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying `first`, then self."""
        return RigidTransform(self.rotation @ first.rotation,
                              self.rotation @ first.translation + self.translation)


# ---------------------------------------------------------------------------
# OFF parsing


def _numbers(tokens, lineno, kind):
    try:
        return [kind(t) for t in tokens]
    except ValueError:
        raise ValueError(f"OFF parse error at line {lineno}: non-numeric token in {tokens!r}")


def parse_off(text: str) -> Mesh:
    """Parse OFF text into a triangulated Mesh.

    Accepts the optional "OFF" header, the ModelNet quirk of the header fused
    with the counts line ("OFF123 456 0"), '#' comment lines, and polygon
    faces (fan-triangulated). Errors carry the 1-based line number.
    """
    lines = []  # (lineno, stripped content)
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        lines.append((no, s))
    if not lines:
        raise ValueError("OFF parse error: empty file")

    pos = 0
    lineno, first = lines[pos]
    if first.upper().startswith("OFF"):
        rest = first[3:].strip()
        pos += 1
        if rest:
            counts_line = (lineno, rest)  # fused-header quirk
        else:
            if pos >= len(lines):
                raise ValueError(f"OFF parse error at line {lineno}: missing counts line")
            counts_line = lines[pos]
            pos += 1
    else:
        counts_line = (lineno, first)
        pos += 1

    lineno, s = counts_line
    tokens = s.split()
    if len(tokens) != 3:
        raise ValueError(f"OFF parse error at line {lineno}: counts line must be 'V F E', got {s!r}")
    nv, nf, _ = _numbers(tokens, lineno, int)
    if nv < 0 or nf < 0:
        raise ValueError(f"OFF parse error at line {lineno}: negative counts")
    if len(lines) - pos < nv + nf:
        raise ValueError(
            f"OFF parse error: expected {nv} vertex and {nf} face lines, "
            f"found {len(lines) - pos}"
        )

    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        lineno, s = lines[pos + i]
        tokens = s.split()
        if len(tokens) != 3:
            raise ValueError(f"OFF parse error at line {lineno}: vertex needs 3 coordinates, got {s!r}")
        verts[i] = _numbers(tokens, lineno, float)
    pos += nv

    tris = []
    for i in range(nf):
        lineno, s = lines[pos + i]
        tokens = s.split()
        vals = _numbers(tokens, lineno, int)
        if not vals or vals[0] < 3 or len(vals) != vals[0] + 1:
            raise ValueError(f"OFF parse error at line {lineno}: malformed face {s!r}")
        idx = vals[1:]
        for j in idx:
            if j < 0 or j >= nv:
                raise ValueError(
                    f"OFF parse error at line {lineno}: vertex index {j} out of range (V={nv})"
                )
        for a, b in zip(idx[1:-1], idx[2:]):  # fan triangulation
            tris.append((idx[0], a, b))

    return Mesh(verts, np.asarray(tris, dtype=np.int64).reshape(-1, 3))


def load_off(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_off(fh.read())


# ---------------------------------------------------------------------------
# Sampling and normalization


def triangle_areas(mesh: Mesh) -> np.ndarray:
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_surface(mesh: Mesh, n: int, seed: int) -> np.ndarray:
    """n area-weighted uniform surface samples; deterministic per seed."""
    if n < 1:
        raise ValueError("sample_surface: n must be >= 1")
    areas = triangle_areas(mesh)
    total = areas.sum()
    if not total > 0:
        raise ValueError("sample_surface: mesh has zero total area")
    rng = np.random.default_rng(seed)
    # inverse-CDF triangle choice keeps the draw explicit and stable
    cum = np.cumsum(areas / total)
    cum[-1] = 1.0
    tri = np.searchsorted(cum, rng.random(n), side="right")
    tri = np.minimum(tri, len(areas) - 1)
    a = mesh.vertices[mesh.faces[tri, 0]]
    b = mesh.vertices[mesh.faces[tri, 1]]
    c = mesh.vertices[mesh.faces[tri, 2]]
    r1 = rng.random((n, 1))
    r2 = rng.random((n, 1))
    s1 = np.sqrt(r1)
    return (1.0 - s1) * a + s1 * (1.0 - r2) * b + s1 * r2 * c


@dataclass
class UnitBoxRecord:
    """Per-axis affine map used by normalize_to_unit_box; invertible."""
    center: np.ndarray
    half: np.ndarray

    def normalize(self, ps: np.ndarray) -> np.ndarray:
        return (np.asarray(ps) - self.center) / self.half

    def denormalize(self, ps: np.ndarray) -> np.ndarray:
        return np.asarray(ps) * self.half + self.center


def unit_box_record(ps: np.ndarray) -> UnitBoxRecord:
    ps = np.asarray(ps)
    lo = ps.min(axis=0)
    hi = ps.max(axis=0)
    extent = hi - lo
    if np.any(extent <= 0):
        axis = int(np.argmin(extent))
        raise ValueError(f"degenerate extent on axis {axis}: cannot normalize to unit box")
    return UnitBoxRecord(center=(lo + hi) / 2.0, half=extent / 2.0)


def normalize_to_unit_box(ps: np.ndarray):
    """Map each axis's [min, max] to [-1, 1]; returns (points, record)."""
    rec = unit_box_record(ps)
    return rec.normalize(ps), rec


# ---------------------------------------------------------------------------
# Rotations


def euler_to_matrix(angles: EulerAngles) -> np.ndarray:
    """R = Rz(rz) @ Ry(ry) @ Rx(rx), right-handed, column-vector convention."""
    rx, ry, rz = np.deg2rad([angles.rx, angles.ry, angles.rz])
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    rx_m = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry_m = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz_m = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz_m @ ry_m @ rx_m


def matrix_to_euler(rot: np.ndarray) -> EulerAngles:
    """Inverse of euler_to_matrix; degrees in (-180, 180], ry in [-90, 90].

    At the gimbal singularity (|ry| = 90) rx is conventionally set to 0.
    """
    rot = np.asarray(rot, dtype=np.float64)
    sy = -rot[2, 0]
    if abs(sy) >= 1.0 - 1e-12:
        # only the sum or difference of rx and rz is determined; pin rx = 0
        # (the rz closed form below is the same for either sign of ry)
        ry = float(np.copysign(90.0, sy))
        rz = float(np.rad2deg(np.arctan2(-rot[0, 1], rot[1, 1])))
        return EulerAngles(0.0, ry, rz)
    ry = np.rad2deg(np.arcsin(sy))
    rx = np.rad2deg(np.arctan2(rot[2, 1], rot[2, 2]))
    rz = np.rad2deg(np.arctan2(rot[1, 0], rot[0, 0]))
    return EulerAngles(float(rx), float(ry), float(rz))


def apply_rigid(ps: np.ndarray, transform: RigidTransform) -> np.ndarray:
    """p' = R p + t, row order preserved."""
    return transform.apply(ps)


# ---------------------------------------------------------------------------
# Neighbors, occlusion, best-fit


def nearest_neighbors(query: np.ndarray, target: np.ndarray):
    """Exact nearest neighbor per query point: (indices, squared distances).

    Ties break to the smallest target index.
    """
    target = np.asarray(target)
    if target.size == 0:
        raise ValueError("nearest_neighbors: empty target point set")
    return kernels.nn_indices(query, target)


def occlude(ps: np.ndarray, seed: int, k: int = 512) -> np.ndarray:
    """Remove the k points nearest a seed-chosen anchor point of ps.

    The anchor is drawn uniformly from ps and counts as its own nearest
    neighbor, so it is removed. Remaining row order is preserved.
    """
    ps = np.asarray(ps)
    n = ps.shape[0]
    if k < 0:
        raise ValueError("occlude: k must be >= 0")
    if k >= n:
        raise ValueError(f"occlude: k={k} must be smaller than the point count {n}")
    if k == 0:
        return ps.copy()
    rng = np.random.default_rng(seed)
    anchor = int(rng.integers(n))
    d = ((ps.astype(np.float64) - ps[anchor].astype(np.float64)) ** 2).sum(axis=1)
    order = np.argsort(d, kind="stable")  # distance, then index: deterministic under ties
    keep = np.ones(n, dtype=bool)
    keep[order[:k]] = False
    return ps[keep]


def kabsch(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform: argmin_{R,t} sum ||R src_i + t - dst_i||^2.

    Index-paired correspondences; proper rotation enforced by flipping the
    smallest singular direction when the best orthogonal map is a reflection.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape:
        raise ValueError(f"kabsch: size mismatch: {src.shape} vs {dst.shape}")
    if src.shape[0] < 3:
        raise ValueError("kabsch: need at least 3 point pairs")
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0 or s[1] <= 1e-9 * s[0]:
        raise ValueError("kabsch: degenerate (collinear or coincident) configuration")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, cd - rot @ cs)


# ---------------------------------------------------------------------------
# Point-set text I/O: one "x y z" per line, '#' comments


def parse_xyz(text: str) -> np.ndarray:
    pts = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        tokens = s.split()
        if len(tokens) != 3:
            raise ValueError(f"point-set parse error at line {no}: expected 'x y z', got {s!r}")
        pts.append(_numbers(tokens, no, float))
    if not pts:
        raise ValueError("point-set parse error: no points found")
    return np.asarray(pts, dtype=np.float64)


def load_xyz(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_xyz(fh.read())


def save_xyz(path, ps: np.ndarray):
    ps = np.asarray(ps, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in ps:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
