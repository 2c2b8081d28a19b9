"""Mesh, label and config file IO.

Meshes are read and written as Wavefront OBJ (``v``/``f`` records, 1-based
indices, triangles only) or OFF.  Coordinates are written with Python's
shortest round-trip float representation, so write-then-read reproduces the
positions bit for bit and the connectivity exactly.
"""

import numpy as np

from .errors import NonTriangleFaceError, ParseError
from .mesh import build_mesh


def _fmt(x):
    return repr(float(x))


def read_mesh(path):
    """Read an OBJ or OFF triangle mesh and validate it."""
    path = str(path)
    lower = path.lower()
    if lower.endswith(".obj"):
        positions, faces = _read_obj(path)
    elif lower.endswith(".off"):
        positions, faces = _read_off(path)
    else:
        raise ParseError("unknown mesh format (expected .obj or .off)", path)
    return build_mesh(positions, faces)


def write_mesh(path, mesh):
    """Write a mesh as OBJ or OFF depending on the file extension.

    A trailing ``.partial`` marker (used when flushing interrupted runs) is
    ignored when sniffing the format.
    """
    path = str(path)
    lower = path.lower()
    if lower.endswith(".partial"):
        lower = lower[: -len(".partial")]
    if lower.endswith(".obj"):
        _write_obj(path, mesh)
    elif lower.endswith(".off"):
        _write_off(path, mesh)
    else:
        raise ParseError("unknown mesh format (expected .obj or .off)", path)


def _read_obj(path):
    positions = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex record needs 3 coordinates",
                                     path, lineno)
                try:
                    positions.append([float(p) for p in parts[1:4]])
                except ValueError:
                    raise ParseError("bad vertex coordinate", path, lineno)
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise NonTriangleFaceError(
                        f"face with {len(refs)} vertices", path, lineno
                    )
                try:
                    idx = [int(r.split("/")[0]) for r in refs]
                except ValueError:
                    raise ParseError("bad face index", path, lineno)
                if any(i < 1 for i in idx):
                    raise ParseError("face indices must be positive (1-based)",
                                     path, lineno)
                faces.append([i - 1 for i in idx])
            # all other records (vn, vt, o, s, ...) are ignored
    if not positions or not faces:
        raise ParseError("no vertices or faces found", path)
    return np.array(positions), np.array(faces)


def _write_obj(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.positions:
            fh.write(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        for i, j, k in mesh.faces:
            fh.write(f"f {i + 1} {j + 1} {k + 1}\n")


def _read_off(path):
    with open(path, "r", encoding="utf-8") as fh:
        numbered = [
            (no, line.strip())
            for no, line in enumerate(fh, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    if not numbered or numbered[0][1] != "OFF":
        raise ParseError("missing OFF header", path, 1)
    if len(numbered) < 2:
        raise ParseError("missing element counts", path)
    no, counts = numbered[1]
    try:
        nv, nf, _ = (int(t) for t in counts.split()[:3])
    except ValueError:
        raise ParseError("bad element counts", path, no)
    body = numbered[2:]
    if len(body) < nv + nf:
        raise ParseError("truncated file", path)
    positions = []
    for no, line in body[:nv]:
        try:
            positions.append([float(t) for t in line.split()[:3]])
        except ValueError:
            raise ParseError("bad vertex coordinate", path, no)
    faces = []
    for no, line in body[nv : nv + nf]:
        parts = line.split()
        try:
            arity = int(parts[0])
        except (ValueError, IndexError):
            raise ParseError("bad face record", path, no)
        if arity != 3:
            raise NonTriangleFaceError(f"face with {arity} vertices", path, no)
        try:
            faces.append([int(t) for t in parts[1:4]])
        except ValueError:
            raise ParseError("bad face index", path, no)
    return np.array(positions), np.array(faces)


def _write_off(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        for x, y, z in mesh.positions:
            fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        for i, j, k in mesh.faces:
            fh.write(f"3 {i} {j} {k}\n")


def write_labels(path, assignment):
    """Write the face labeling as CSV: face index, argmax label, confidence."""
    assignment = np.asarray(assignment)
    winner = np.argmax(assignment, axis=1)
    confidence = assignment[np.arange(assignment.shape[0]), winner]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("face_index,label_index,confidence\n")
        for f, (ell, conf) in enumerate(zip(winner, confidence)):
            fh.write(f"{f},{int(ell)},{_fmt(conf)}\n")


def write_config(path, items):
    """Write a flat ``key = value`` config file."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {value}\n")


def read_config(path):
    """Read a flat ``key = value`` config file into a string dict."""
    items = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", str(path), lineno)
            key, _, value = line.partition("=")
            items[key.strip()] = value.strip()
    return items
