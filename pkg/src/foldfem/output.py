"""Legacy-VTK export of meshes with the discrete solution and indicators."""
from __future__ import annotations

from pathlib import Path

import numpy as np

VTK_TRIANGLE = 5


def vertex_values(space, coeffs) -> np.ndarray:
    """u_h at mesh vertices, averaged over the elements sharing each vertex.

    The first three local Lagrange nodes are the element vertices, so the
    nodal coefficients there are the one-sided vertex values.
    """
    mesh = space.mesh
    c = np.asarray(space.element_coeffs(coeffs), dtype=float)[:, :3]
    tot = np.zeros(mesh.n_vertices)
    cnt = np.zeros(mesh.n_vertices)
    np.add.at(tot, mesh.triangles.ravel(), c.ravel())
    np.add.at(cnt, mesh.triangles.ravel(), 1.0)
    return tot / np.maximum(cnt, 1.0)


def write_vtk(path, mesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "foldfem mesh") -> Path:
    """Write an ASCII legacy-VTK unstructured grid of triangles."""
    path = Path(path)
    nV, nT = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nV} double"]
    lines += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nT} {4 * nT}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nT}")
    lines += [str(VTK_TRIANGLE)] * nT
    for header, n, data in (("POINT_DATA", nV, point_data), ("CELL_DATA", nT, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {n}")
        for name, vals in data.items():
            vals = np.asarray(vals)
            if vals.shape != (n,):
                raise ValueError(f"{name}: expected {n} values, got shape {vals.shape}")
            kind = "int" if np.issubdtype(vals.dtype, np.integer) else "double"
            lines += [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
            lines += [str(int(v)) if kind == "int" else repr(float(v)) for v in vals]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_level_vtk(directory, level: int, space, coeffs, indicators) -> Path:
    """``mesh_level_{level}.vtk`` with ``u_h`` per vertex, ``indicator`` and ``level`` per cell."""
    mesh = space.mesh
    return write_vtk(Path(directory) / f"mesh_level_{level}.vtk", mesh,
                     point_data={"u_h": vertex_values(space, coeffs)},
                     cell_data={"indicator": np.asarray(indicators, dtype=float),
                                "level": np.full(mesh.n_triangles, level, dtype=np.int64)},
                     title=f"adaptive level {level}")


def read_vtk(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk` (used in tests)."""
    tokens = Path(path).read_text().split("\n")
    out = {"point_data": {}, "cell_data": {}}
    i, section = 0, None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + j].split()] for j in range(n)])
            i += n
        elif line.startswith("CELLS"):
            n = int(line.split()[1])
            out["cells"] = np.array([[int(v) for v in tokens[i + 1 + j].split()[1:]] for j in range(n)])
            i += n
        elif line.startswith("CELL_TYPES"):
            n = int(line.split()[1])
            out["cell_types"] = np.array([int(tokens[i + 1 + j]) for j in range(n)])
            i += n
        elif line.startswith("POINT_DATA"):
            section, n = "point_data", int(line.split()[1])
        elif line.startswith("CELL_DATA"):
            section, n = "cell_data", int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            out[section][name] = np.array([float(tokens[i + 2 + j]) for j in range(n)])
            i += n + 1
        i += 1
    return out
