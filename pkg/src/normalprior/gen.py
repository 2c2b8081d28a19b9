"""Synthetic inputs: icospheres, label sets, box and skyline geometry, noise.

All generators are deterministic functions of their arguments.  Randomness
comes exclusively from the counter-based Philox generator seeded with the
caller's 64-bit seed, so outputs are reproducible across runs and platforms.
"""

from dataclasses import dataclass

import numpy as np

from .energy import LabelSet
from .mesh import SurfaceMesh, mean_incident_edge_lengths

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class NoiseSpec:
    """Edge-length-scaled Gaussian vertex noise.

    The per-vertex variance is ``variance_factor * e^2`` per coordinate,
    where ``e`` is the mean length of the incident edges.
    """

    variance_factor: float
    seed: int = 0

    def __post_init__(self):
        if self.variance_factor < 0.0:
            raise ValueError("variance_factor must be nonnegative")


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


# -- icosphere ------------------------------------------------------------

_ICO_VERTS = np.array(
    [
        [-1, GOLDEN_RATIO, 0],
        [1, GOLDEN_RATIO, 0],
        [-1, -GOLDEN_RATIO, 0],
        [1, -GOLDEN_RATIO, 0],
        [0, -1, GOLDEN_RATIO],
        [0, 1, GOLDEN_RATIO],
        [0, -1, -GOLDEN_RATIO],
        [0, 1, -GOLDEN_RATIO],
        [GOLDEN_RATIO, 0, -1],
        [GOLDEN_RATIO, 0, 1],
        [-GOLDEN_RATIO, 0, -1],
        [-GOLDEN_RATIO, 0, 1],
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def gen_icosphere(subdivisions, radius=1.0):
    """Icosahedron subdivided ``subdivisions`` times, projected to a sphere."""
    if not 0 <= subdivisions <= 7:
        raise ValueError("subdivisions must be between 0 and 7")
    if radius <= 0.0:
        raise ValueError("radius must be positive")

    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdivisions):
        midpoint = {}

        def split(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab = split(a, b)
            bc = split(b, c)
            ca = split(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    return SurfaceMesh(radius * np.array(verts), np.array(faces, dtype=np.int64))


# -- label sets ------------------------------------------------------------

def gen_fibonacci_labels(count):
    """Near-uniform unit vectors from the Fibonacci lattice on the sphere."""
    if count < 1:
        raise ValueError("count must be at least 1")
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    az = i * GOLDEN_ANGLE
    pts = np.stack([r * np.cos(az), r * np.sin(az), z], axis=1)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return LabelSet(pts)


def gen_platonic_labels(kind):
    """Outward unit face normals of a platonic solid.

    ``kind`` is one of ``tetrahedron`` (L=4), ``cube`` (L=6) or
    ``dodecahedron`` (L=12).
    """
    t = GOLDEN_RATIO
    if kind == "tetrahedron":
        raw = np.array(
            [[1, 1, -1], [1, -1, 1], [-1, 1, 1], [-1, -1, -1]], dtype=np.float64
        )
    elif kind == "cube":
        raw = np.array(
            [
                [1, 0, 0], [-1, 0, 0],
                [0, 1, 0], [0, -1, 0],
                [0, 0, 1], [0, 0, -1],
            ],
            dtype=np.float64,
        )
    elif kind == "dodecahedron":
        raw = np.array(
            [
                [0, 1, t], [0, 1, -t], [0, -1, t], [0, -1, -t],
                [1, t, 0], [1, -t, 0], [-1, t, 0], [-1, -t, 0],
                [t, 0, 1], [-t, 0, 1], [t, 0, -1], [-t, 0, -1],
            ],
            dtype=np.float64,
        )
    else:
        raise ValueError(f"unknown platonic solid {kind!r}")
    return LabelSet(raw / np.linalg.norm(raw, axis=1, keepdims=True))


def axis_labels():
    """The six antipodal coordinate-axis unit vectors."""
    return gen_platonic_labels("cube")


# -- axis-aligned block geometry -------------------------------------------

class _QuadMeshBuilder:
    """Welds vertices by exact coordinates and collects triangle pairs."""

    def __init__(self):
        self._index = {}
        self.vertices = []
        self.faces = []

    def vertex(self, p):
        key = (float(p[0]), float(p[1]), float(p[2]))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.vertices)
            self._index[key] = idx
            self.vertices.append(key)
        return idx

    def quad(self, p0, p1, p2, p3):
        """Two triangles of the quad p0-p1-p2-p3 (counterclockwise)."""
        a, b, c, d = (self.vertex(p) for p in (p0, p1, p2, p3))
        self.faces.append((a, b, c))
        self.faces.append((a, c, d))

    def build(self):
        return SurfaceMesh(
            np.array(self.vertices, dtype=np.float64),
            np.array(self.faces, dtype=np.int64),
        )


def gen_grid_cube(cells_per_side, size=1.0):
    """Axis-aligned cube surface with each side split into n x n quads."""
    if cells_per_side < 1:
        raise ValueError("cells_per_side must be at least 1")
    grid = np.linspace(-0.5 * size, 0.5 * size, cells_per_side + 1)
    lo, hi = grid[0], grid[-1]
    builder = _QuadMeshBuilder()

    def face(plane, level, flip):
        for i in range(cells_per_side):
            for j in range(cells_per_side):
                u0, u1 = grid[i], grid[i + 1]
                v0, v1 = grid[j], grid[j + 1]
                corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
                if flip:
                    corners.reverse()
                pts = []
                for u, v in corners:
                    if plane == "z":
                        pts.append((u, v, level))
                    elif plane == "y":
                        pts.append((u, level, v))
                    else:
                        pts.append((level, u, v))
                builder.quad(*pts)

    face("z", hi, flip=False)
    face("z", lo, flip=True)
    face("y", hi, flip=True)
    face("y", lo, flip=False)
    face("x", hi, flip=False)
    face("x", lo, flip=True)
    return builder.build()


def gen_skyline(seed=0, lots_per_side=5, lot_cells=7, border_cells=1,
                cell_size=1.0, ground_height=1.0, height_range=(2.0, 8.0),
                footprint_range=(3, 5)):
    """Synthetic city block: a ground slab with a grid of axis-aligned boxes.

    A ``lots_per_side`` x ``lots_per_side`` grid of buildings with random
    footprints, offsets and heights is placed on a cell grid; every building
    keeps at least a one-cell margin inside its lot, so footprints never
    touch.  The surface is the boundary of the resulting column heightfield,
    closed and manifold with all face normals along the coordinate axes.

    Returns the ground-truth mesh and a metadata dict (cell heights and the
    building list).
    """
    fp_min, fp_max = footprint_range
    if fp_max > lot_cells - 2:
        raise ValueError("footprints must leave a one-cell margin per lot")
    n = lots_per_side * lot_cells + 2 * border_cells
    rng = _rng(seed)

    heights = np.full((n, n), float(ground_height))
    buildings = []
    for li in range(lots_per_side):
        for lj in range(lots_per_side):
            w = int(rng.integers(fp_min, fp_max + 1))
            d = int(rng.integers(fp_min, fp_max + 1))
            ox = int(rng.integers(1, lot_cells - w))
            oy = int(rng.integers(1, lot_cells - d))
            roof = ground_height + float(
                rng.uniform(height_range[0], height_range[1])
            )
            i0 = border_cells + li * lot_cells + ox
            j0 = border_cells + lj * lot_cells + oy
            heights[i0 : i0 + w, j0 : j0 + d] = roof
            buildings.append(
                {"i0": i0, "j0": j0, "w": w, "d": d, "roof": roof}
            )

    xs = cell_size * np.arange(n + 1)
    builder = _QuadMeshBuilder()

    # cell tops (normal +z) and the bottom of the slab (normal -z)
    for i in range(n):
        for j in range(n):
            x0, x1 = xs[i], xs[i + 1]
            y0, y1 = xs[j], xs[j + 1]
            h = heights[i, j]
            builder.quad((x0, y0, h), (x1, y0, h), (x1, y1, h), (x0, y1, h))
            builder.quad((x0, y0, 0.0), (x0, y1, 0.0), (x1, y1, 0.0),
                         (x1, y0, 0.0))

    def column(i, j):
        return heights[i, j] if 0 <= i < n and 0 <= j < n else 0.0

    # vertical walls wherever adjacent columns differ in height
    for i in range(n + 1):
        for j in range(n):
            hl = column(i - 1, j)
            hr = column(i, j)
            if hl == hr:
                continue
            x = xs[i]
            y0, y1 = xs[j], xs[j + 1]
            zlo, zhi = min(hl, hr), max(hl, hr)
            if hl > hr:  # outward normal +x
                builder.quad((x, y0, zlo), (x, y1, zlo), (x, y1, zhi),
                             (x, y0, zhi))
            else:  # outward normal -x
                builder.quad((x, y1, zlo), (x, y0, zlo), (x, y0, zhi),
                             (x, y1, zhi))
    for j in range(n + 1):
        for i in range(n):
            hl = column(i, j - 1)
            hr = column(i, j)
            if hl == hr:
                continue
            y = xs[j]
            x0, x1 = xs[i], xs[i + 1]
            zlo, zhi = min(hl, hr), max(hl, hr)
            if hl > hr:  # outward normal +y
                builder.quad((x1, y, zlo), (x0, y, zlo), (x0, y, zhi),
                             (x1, y, zhi))
            else:  # outward normal -y
                builder.quad((x0, y, zlo), (x1, y, zlo), (x1, y, zhi),
                             (x0, y, zhi))

    mesh = builder.build()
    metadata = {
        "cells_per_side": n,
        "cell_size": cell_size,
        "ground_height": ground_height,
        "heights": heights,
        "buildings": buildings,
        "seed": seed,
    }
    return mesh, metadata


def add_noise(mesh, spec):
    """Displace every vertex by an isotropic Gaussian with edge-scaled sigma.

    Returns a new validated mesh; the input is untouched.
    """
    sigma = np.sqrt(spec.variance_factor) * mean_incident_edge_lengths(mesh)
    rng = _rng(spec.seed)
    displacement = sigma[:, None] * rng.standard_normal((mesh.n_vertices, 3))
    return SurfaceMesh(mesh.positions + displacement, mesh.faces.copy())
