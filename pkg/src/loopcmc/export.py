"""Mesh and table writers for :class:`FrameField` results."""

import numpy as np

from .birkhoff import Stratum

CSV_FIELDS = (
    ["i", "j", "a", "b", "stratum"]
    + [f"{name}_{c}" for name in ("f", "fa", "fb", "normal", "nE") for c in ("t", "x1", "x2")]
    + ["chi", "c_minus1", "b_minus1", "residual", "f_norm", "singular"]
)


def _num(x):
    return "%.17g" % x


def mesh_arrays(field, polylines=()):
    """Vertices, quad faces and polylines with 0-based vertex indices.

    Vertices are the grid points where ``f`` is finite.  Quads are emitted
    only for grid cells whose four corners lie in the big cell.
    """
    f = field.f
    finite = np.all(np.isfinite(f), axis=-1)
    index = np.full(field.shape, -1)
    index[finite] = np.arange(int(finite.sum()))
    verts = f[finite]
    big = field.big_cell & finite
    quads = big[:-1, :-1] & big[1:, :-1] & big[1:, 1:] & big[:-1, 1:]
    ii, jj = np.nonzero(quads)
    faces = np.stack([index[ii, jj], index[ii + 1, jj], index[ii + 1, jj + 1], index[ii, jj + 1]],
                     axis=-1) if len(ii) else np.zeros((0, 4), dtype=int)
    lines = []
    for nodes in polylines:
        idx = [int(index[i, j]) for i, j in nodes if index[i, j] >= 0]
        if len(idx) > 1:
            lines.append(idx)
    return verts, faces, lines


def write_obj(field, path, polylines=()):
    verts, faces, lines = mesh_arrays(field, polylines)
    with open(path, "w") as fh:
        for v in verts:
            fh.write("v {} {} {}\n".format(*map(_num, v)))
        for q in faces:
            fh.write("f {} {} {} {}\n".format(*(q + 1)))
        for line in lines:
            fh.write("l " + " ".join(str(k + 1) for k in line) + "\n")
    return path


def write_ply(field, path, polylines=()):
    verts, faces, lines = mesh_arrays(field, polylines)
    edges = [(a, b) for line in lines for a, b in zip(line[:-1], line[1:])]
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(verts)}\nproperty double x\nproperty double y\nproperty double z\n")
        fh.write(f"element face {len(faces)}\nproperty list uchar int vertex_indices\n")
        fh.write(f"element edge {len(edges)}\nproperty int vertex1\nproperty int vertex2\n")
        fh.write("end_header\n")
        for v in verts:
            fh.write("{} {} {}\n".format(*map(_num, v)))
        for q in faces:
            fh.write("4 {} {} {} {}\n".format(*q))
        for a, b in edges:
            fh.write(f"{a} {b}\n")
    return path


def write_csv(field, path, singular=None):
    """One row per grid point; floats with 17 significant digits.

    ``f_norm`` is ``inf`` at points where the surface is not evaluable
    (blow-up cells), so those points are flagged rather than clamped.
    """
    singular = np.zeros(field.shape, bool) if singular is None else singular
    fa, fb = field.fa, field.fb
    with open(path, "w") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for i in range(field.shape[0]):
            for j in range(field.shape[1]):
                f = field.f[i, j]
                norm = float(np.linalg.norm(f)) if np.all(np.isfinite(f)) else np.inf
                row = [str(i), str(j), _num(field.a[i]), _num(field.b[j]),
                       Stratum(int(field.stratum[i, j])).name]
                for vec in (f, fa[i, j], fb[i, j], field.normal[i, j], field.nE[i, j]):
                    row += [_num(c) for c in vec]
                row += [_num(field.chi[i, j]), _num(field.c_minus1[i, j]),
                        _num(field.b_minus1[i, j]), _num(field.residual[i, j]), _num(norm),
                        str(int(singular[i, j]))]
                fh.write(",".join(row) + "\n")
    return path


def read_csv(path):
    """Read a table written by :func:`write_csv` into a dict of columns."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    cols = {}
    for k, name in enumerate(header):
        vals = [r[k] for r in rows]
        cols[name] = vals if name == "stratum" else np.array([float(v) for v in vals])
    return cols


WRITERS = {"obj": write_obj, "ply": write_ply}


def export_mesh(field, fmt, path, polylines=(), singular=None):
    if fmt == "csv":
        return write_csv(field, path, singular)
    if fmt not in WRITERS:
        raise ValueError(f"unknown format '{fmt}'")
    return WRITERS[fmt](field, path, polylines)
