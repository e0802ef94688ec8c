"""Synthetic meshes: training primitives and a labeled spine surrogate.

Nothing here ships real scan data; the spine surrogate is a stack of
vertebra-like bodies with lateral prongs whose tips carry named landmarks.
Axis convention for the surrogate: x lateral, y anterior-posterior, z
superior-inferior (ap_axis = 1).
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, sample_surface


def _mesh(vertices, faces) -> Mesh:
    return Mesh(np.asarray(vertices, dtype=np.float64),
                np.asarray(faces, dtype=np.int64))


def merge_meshes(meshes) -> Mesh:
    verts, faces, offset = [], [], 0
    for mesh in meshes:
        verts.append(mesh.vertices)
        faces.append(mesh.faces + offset)
        offset += len(mesh.vertices)
    return Mesh(np.vstack(verts), np.vstack(faces))


def box(center=(0, 0, 0), half=(1, 1, 1)) -> Mesh:
    c = np.asarray(center, dtype=np.float64)
    h = np.asarray(half, dtype=np.float64)
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    verts = c + corners * h
    quads = [  # outward-facing, one per side
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3),
    ]
    faces = []
    for a, b, cc, d in quads:
        faces.extend([(a, b, cc), (a, cc, d)])
    return _mesh(verts, faces)


def tetrahedron(scale=1.0) -> Mesh:
    verts = scale * np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                             dtype=np.float64) / np.sqrt(3)
    faces = [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)]
    return _mesh(verts, faces)


def octahedron(scale=1.0) -> Mesh:
    verts = scale * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                              [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)
    faces = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
             (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    return _mesh(verts, faces)


def icosahedron(scale=1.0) -> Mesh:
    phi = (1 + np.sqrt(5)) / 2
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts *= scale / np.linalg.norm(verts[0])
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    return _mesh(verts, faces)


def uv_sphere(n_theta=12, n_phi=24, radii=(1.0, 1.0, 1.0)) -> Mesh:
    rx, ry, rz = radii
    verts = [(0.0, 0.0, rz), (0.0, 0.0, -rz)]
    rings = []
    for i in range(1, n_theta):
        th = np.pi * i / n_theta
        ring = []
        for j in range(n_phi):
            ph = 2 * np.pi * j / n_phi
            ring.append(len(verts))
            verts.append((rx * np.sin(th) * np.cos(ph),
                          ry * np.sin(th) * np.sin(ph),
                          rz * np.cos(th)))
        rings.append(ring)
    faces = []
    for j in range(n_phi):
        jn = (j + 1) % n_phi
        faces.append((0, rings[0][j], rings[0][jn]))
        faces.append((1, rings[-1][jn], rings[-1][j]))
    for a, b in zip(rings[:-1], rings[1:]):
        for j in range(n_phi):
            jn = (j + 1) % n_phi
            faces.extend([(a[j], b[j], b[jn]), (a[j], b[jn], a[jn])])
    return _mesh(verts, faces)


def cylinder(radius=0.6, height=2.0, n=24) -> Mesh:
    ang = 2 * np.pi * np.arange(n) / n
    top = np.column_stack([radius * np.cos(ang), radius * np.sin(ang),
                           np.full(n, height / 2)])
    bot = top.copy()
    bot[:, 2] = -height / 2
    verts = np.vstack([top, bot, [[0, 0, height / 2]], [[0, 0, -height / 2]]])
    ct, cb = 2 * n, 2 * n + 1
    faces = []
    for j in range(n):
        jn = (j + 1) % n
        faces.extend([(j, n + j, n + jn), (j, n + jn, jn)])       # wall
        faces.append((ct, j, jn))                                  # top cap
        faces.append((cb, n + jn, n + j))                          # bottom cap
    return _mesh(verts, faces)


def cone(radius=0.8, height=1.6, n=24) -> Mesh:
    ang = 2 * np.pi * np.arange(n) / n
    base = np.column_stack([radius * np.cos(ang), radius * np.sin(ang),
                            np.full(n, -height / 2)])
    verts = np.vstack([base, [[0, 0, height / 2]], [[0, 0, -height / 2]]])
    apex, cb = n, n + 1
    faces = []
    for j in range(n):
        jn = (j + 1) % n
        faces.append((apex, j, jn))
        faces.append((cb, jn, j))
    return _mesh(verts, faces)


def torus(major=0.8, minor=0.3, n_major=24, n_minor=12) -> Mesh:
    verts = []
    for i in range(n_major):
        u = 2 * np.pi * i / n_major
        for j in range(n_minor):
            v = 2 * np.pi * j / n_minor
            verts.append(((major + minor * np.cos(v)) * np.cos(u),
                          (major + minor * np.cos(v)) * np.sin(u),
                          minor * np.sin(v)))
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            a2 = i * n_minor + (j + 1) % n_minor
            b2 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            faces.extend([(a, b, b2), (a, b2, a2)])
    return _mesh(verts, faces)


def wedge(width=1.2, depth=0.8, height=1.0) -> Mesh:
    w, d, h = width / 2, depth / 2, height / 2
    verts = [(-w, -d, -h), (w, -d, -h), (w, d, -h), (-w, d, -h),
             (-w, 0, h), (w, 0, h)]
    faces = [(0, 2, 1), (0, 3, 2),              # base
             (0, 1, 5), (0, 5, 4),              # front slope
             (3, 4, 5), (3, 5, 2),              # back slope
             (0, 4, 3), (1, 2, 5)]              # ends
    return _mesh(verts, faces)


def primitive_meshes() -> dict:
    """Ten distinct closed shapes for synthetic training sets."""
    return {
        "box": box(half=(0.7, 0.9, 1.1)),
        "slab": box(half=(1.2, 0.8, 0.25)),
        "tetrahedron": tetrahedron(1.2),
        "octahedron": octahedron(1.1),
        "icosahedron": icosahedron(1.0),
        "sphere": uv_sphere(),
        "ellipsoid": uv_sphere(radii=(1.2, 0.7, 0.5)),
        "cylinder": cylinder(),
        "cone": cone(),
        "torus": torus(),
    }


# ---------------------------------------------------------------------------
# Spine surrogate

SPINE_AP_AXIS = 1


def spine_mesh(n_vertebrae: int = 5, spacing: float = 1.0):
    """(mesh, landmarks) for a straight labeled spine stand-in.

    Each vertebra is a body box plus two lateral prongs; the landmark pair
    f"v{i}_left"/f"v{i}_right" sits at the prong tips. Vertebrae are stacked
    along +z, centered on the origin.
    """
    if n_vertebrae < 2:
        raise ValueError("spine_mesh: need at least 2 vertebrae")
    parts = []
    landmarks = {}
    z0 = -spacing * (n_vertebrae - 1) / 2
    for i in range(n_vertebrae):
        z = z0 + i * spacing
        parts.append(box(center=(0, 0, z), half=(0.32, 0.3, 0.34 * spacing)))
        for side, sign in (("left", -1.0), ("right", 1.0)):
            parts.append(box(center=(sign * 0.66, 0, z),
                             half=(0.34, 0.1, 0.09 * spacing)))
            landmarks[f"v{i}_{side}"] = np.array([sign * 1.0, 0.0, z])
    return merge_meshes(parts), landmarks


def spine_point_set(n_points: int, seed: int, n_vertebrae: int = 5,
                    spacing: float = 1.0):
    """(surface [n_points, 3], landmarks) with the landmark points included
    in the surface set.

    The lateral ends are themselves surface points of the model; keeping them
    in the resampled set preserves the landmarks-inside-bounding-box
    invariant that random subsampling alone would break.
    """
    mesh, landmarks = spine_mesh(n_vertebrae=n_vertebrae, spacing=spacing)
    tips = np.array(list(landmarks.values()))
    if n_points <= len(tips):
        raise ValueError(f"spine_point_set: n_points must exceed the "
                         f"{len(tips)} landmarks")
    sampled = sample_surface(mesh, n_points - len(tips), seed=seed)
    return np.vstack([tips, sampled]), landmarks


def arc_bend(ps: np.ndarray, radius: float) -> np.ndarray:
    """Bend the z axis onto a circular arc of the given radius in the x-z plane.

    x' = r - (r - x) cos(z / r), z' = (r - x) sin(z / r), y unchanged. A
    lateral line at height z maps to a straight line rotated by exactly z / r
    about the AP axis, so two landmark lines at heights z_u, z_l acquire a
    coronal-plane angle of |z_u - z_l| / r exactly.
    """
    ps = np.asarray(ps, dtype=np.float64)
    if radius <= 0:
        raise ValueError("arc_bend: radius must be positive")
    x, y, z = ps[:, 0], ps[:, 1], ps[:, 2]
    theta = z / radius
    arm = radius - x
    return np.column_stack([radius - arm * np.cos(theta), y, arm * np.sin(theta)])


def arc_bend_txa(z_upper: float, z_lower: float, radius: float) -> float:
    """Exact coronal angle, in degrees, between bent lateral lines at two heights."""
    return float(np.degrees(abs(z_upper - z_lower) / radius))
