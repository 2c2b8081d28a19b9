"""Indexed triangle meshes with an orientation-consistent edge structure.

A :class:`SurfaceMesh` is a closed, oriented, manifold triangle mesh.  The
connectivity (faces and the derived edge list) is fixed for the lifetime of
the mesh; only the vertex positions may be rewritten, after which the cached
geometric quantities must be recomputed with :func:`recompute_cache`.

Per-face and per-edge data ("face fields" / "edge fields") are plain numpy
arrays whose leading axis is indexed by face id or edge id.  Their values are
attached to the combinatorial entities and are untouched by vertex motion.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFaceError,
    InconsistentOrientationError,
    NonManifoldError,
)

# Faces with area below DEGENERATE_AREA_FACTOR * (bounding box diagonal)^2
# are rejected at construction time.
DEGENERATE_AREA_FACTOR = 1e-14


class SurfaceMesh:
    """Closed oriented manifold triangle mesh.

    Parameters
    ----------
    positions : (V, 3) float array
        Vertex coordinates.
    faces : (F, 3) int array
        Vertex indices per triangle, in counterclockwise order as seen from
        outside the surface.

    Attributes
    ----------
    positions : (V, 3) float64 array
        Mutable vertex coordinates (connectivity stays fixed).
    faces : (F, 3) int64 array
    edge_vertices : (E, 2) int64 array
        Endpoint pair of every edge, in the order in which the edge is
        traversed by its plus-side face.
    edge_face_plus, edge_face_minus : (E,) int64 arrays
        The two faces incident to every edge.  The plus face is the one that
        traverses the edge in the stored endpoint order; it is the face that
        first mentions the edge in face-array order, so the assignment is
        arbitrary but fixed and deterministic.

    Raises
    ------
    NonManifoldError
        If some edge is incident to fewer or more than two faces.
    InconsistentOrientationError
        If two faces traverse a shared edge in the same direction.
    DegenerateFaceError
        If a face has repeated vertices or area below the construction
        threshold.
    """

    def __init__(self, positions, faces):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError("positions must be an (V, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) array")
        if faces.shape[0] == 0:
            raise ValueError("mesh must contain at least one face")
        if not np.isfinite(positions).all():
            raise ValueError("positions contain non-finite values")
        if faces.min() < 0 or faces.max() >= positions.shape[0]:
            raise ValueError("face indices out of range")

        repeated = (
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 2] == faces[:, 0])
        )
        if repeated.any():
            raise DegenerateFaceError(
                f"face {int(np.flatnonzero(repeated)[0])} has repeated vertices"
            )

        self.positions = positions
        self.faces = faces
        self._build_edges()
        self._check_areas()

    # -- construction helpers -------------------------------------------

    def _build_edges(self):
        by_key = {}
        for f in range(self.faces.shape[0]):
            i, j, k = self.faces[f]
            for u, v in ((i, j), (j, k), (k, i)):
                key = (u, v) if u < v else (v, u)
                by_key.setdefault(key, []).append((f, u, v))

        ev = []
        fplus = []
        fminus = []
        order = {}
        # Edges are numbered by first encounter in face order.
        for f in range(self.faces.shape[0]):
            i, j, k = self.faces[f]
            for u, v in ((i, j), (j, k), (k, i)):
                key = (u, v) if u < v else (v, u)
                if key in order:
                    continue
                inc = by_key[key]
                if len(inc) != 2:
                    raise NonManifoldError(
                        f"edge {key} is incident to {len(inc)} faces"
                    )
                (fa, ua, va), (fb, ub, vb) = inc
                if (ua, va) == (ub, vb):
                    raise InconsistentOrientationError(
                        f"faces {fa} and {fb} traverse edge {key} in the "
                        "same direction"
                    )
                order[key] = len(ev)
                ev.append((ua, va))
                fplus.append(fa)
                fminus.append(fb)

        self.edge_vertices = np.array(ev, dtype=np.int64)
        self.edge_face_plus = np.array(fplus, dtype=np.int64)
        self.edge_face_minus = np.array(fminus, dtype=np.int64)

    def _check_areas(self):
        span = self.positions.max(axis=0) - self.positions.min(axis=0)
        diag_sq = float(np.dot(span, span))
        areas = triangle_areas(self.positions, self.faces)
        floor = DEGENERATE_AREA_FACTOR * diag_sq
        if (areas < floor).any():
            f = int(np.argmin(areas))
            raise DegenerateFaceError(
                f"face {f} has area {areas[f]:.3e} below threshold {floor:.3e}"
            )
        self._construction_area_floor = floor

    # -- sizes ------------------------------------------------------------

    @property
    def n_vertices(self):
        return self.positions.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @property
    def n_edges(self):
        return self.edge_vertices.shape[0]


@dataclass
class GeometryCache:
    """Per-face areas and unit normals plus per-edge lengths.

    The cache is valid only for the vertex positions it was computed from;
    using a stale cache after a vertex update is a usage error.
    """

    face_area: np.ndarray
    face_normal: np.ndarray
    edge_length: np.ndarray

    @property
    def min_face_area(self):
        return float(self.face_area.min())


def triangle_cross(positions, faces):
    """Unnormalized face normals (b - a) x (c - a), shape (F, 3)."""
    a = positions[faces[:, 0]]
    b = positions[faces[:, 1]]
    c = positions[faces[:, 2]]
    return np.cross(b - a, c - a)


def triangle_areas(positions, faces):
    """Face areas, shape (F,)."""
    return 0.5 * np.linalg.norm(triangle_cross(positions, faces), axis=1)


def edge_lengths(positions, edge_vertices):
    """Edge lengths, shape (E,)."""
    d = positions[edge_vertices[:, 0]] - positions[edge_vertices[:, 1]]
    return np.linalg.norm(d, axis=1)


def build_mesh(positions, faces):
    """Validate and build a :class:`SurfaceMesh` from raw arrays."""
    return SurfaceMesh(positions, faces)


def recompute_cache(mesh, positions=None):
    """Compute a fresh :class:`GeometryCache` for the current positions.

    An alternative ``positions`` array (same shape) may be supplied to
    evaluate trial configurations without touching the mesh; faces with zero
    area get a zero normal vector, which callers such as the line search
    guard against.
    """
    if positions is None:
        positions = mesh.positions
    m = triangle_cross(positions, mesh.faces)
    two_area = np.linalg.norm(m, axis=1)
    normal = np.zeros_like(m)
    ok = two_area > 0.0
    normal[ok] = m[ok] / two_area[ok, None]
    return GeometryCache(
        face_area=0.5 * two_area,
        face_normal=normal,
        edge_length=edge_lengths(positions, mesh.edge_vertices),
    )


def face_area(mesh, f):
    """Area of face ``f`` at current positions."""
    a, b, c = mesh.positions[mesh.faces[f]]
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


def face_normal(mesh, f):
    """Outward unit normal of face ``f``.

    Raises
    ------
    DegenerateFaceError
        If the face area is below the construction threshold.
    """
    a, b, c = mesh.positions[mesh.faces[f]]
    m = np.cross(b - a, c - a)
    two_area = float(np.linalg.norm(m))
    if 0.5 * two_area < mesh._construction_area_floor:
        raise DegenerateFaceError(f"face {f} is degenerate")
    return m / two_area


def edge_length(mesh, e):
    """Length of edge ``e`` at current positions."""
    u, v = mesh.edge_vertices[e]
    return float(np.linalg.norm(mesh.positions[u] - mesh.positions[v]))


def mean_incident_edge_length(mesh, v):
    """Arithmetic mean length of the edges incident to vertex ``v``."""
    mask = (mesh.edge_vertices[:, 0] == v) | (mesh.edge_vertices[:, 1] == v)
    if not mask.any():
        raise ValueError(f"vertex {v} has no incident edges")
    return float(edge_lengths(mesh.positions, mesh.edge_vertices[mask]).mean())


def mean_incident_edge_lengths(mesh, cache=None):
    """Mean incident edge length for every vertex at once, shape (V,)."""
    if cache is None:
        lengths = edge_lengths(mesh.positions, mesh.edge_vertices)
    else:
        lengths = cache.edge_length
    total = np.zeros(mesh.n_vertices)
    count = np.zeros(mesh.n_vertices)
    for col in (0, 1):
        idx = mesh.edge_vertices[:, col]
        total += np.bincount(idx, weights=lengths, minlength=mesh.n_vertices)
        count += np.bincount(idx, minlength=mesh.n_vertices)
    if (count == 0).any():
        raise ValueError("mesh has isolated vertices")
    return total / count
