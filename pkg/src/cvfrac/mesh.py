"""Conforming triangulations of convex domains.

Provides deterministic structured generators for rectangles and disks, a
line-oriented text loader/saver, and boundary/interior node classification
derived purely from edge adjacency (an edge with a single incident triangle
is a boundary edge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh",
    "Rectangle",
    "Disk",
    "MeshFileOnly",
    "DomainDescriptor",
    "MeshFormatError",
    "MeshInvariantError",
    "INTERIOR",
    "BOUNDARY",
    "generate_rect_mesh",
    "generate_disk_mesh",
    "load_mesh",
    "save_mesh",
    "mesh_h",
    "interior_nodes",
    "triangle_areas",
]

INTERIOR = 0
BOUNDARY = 1


class MeshFormatError(ValueError):
    """Raised when a mesh file cannot be parsed; carries the line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshInvariantError(ValueError):
    """Raised when a triangulation violates a structural invariant."""


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (a, b) x (c, d)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise ValueError(f"degenerate rectangle ({self.a},{self.b})x({self.c},{self.d})")

    @property
    def area(self):
        return (self.b - self.a) * (self.d - self.c)


@dataclass(frozen=True)
class Disk:
    """Disk of given radius centred at (cx, cy)."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class MeshFileOnly:
    """Domain known only through an externally supplied mesh file."""


DomainDescriptor = Rectangle | Disk | MeshFileOnly


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation.

    Attributes:
        vertices: (nv, 2) float64 coordinates.
        triangles: (ne, 3) int32 vertex indices, counter-clockwise.
        node_class: (nv,) uint8, INTERIOR or BOUNDARY per vertex.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    node_class: np.ndarray

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_interior(self):
        return int(np.count_nonzero(self.node_class == INTERIOR))


def _signed_areas(verts, tris):
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Positive triangle areas (signed areas are positive by invariant)."""
    return _signed_areas(mesh.vertices, mesh.triangles)


def _edge_counts(tris, nv):
    """Map undirected edge -> number of incident triangles; errors on over-sharing."""
    edges = {}
    for t, (i0, i1, i2) in enumerate(tris):
        for u, v in ((i0, i1), (i1, i2), (i2, i0)):
            key = (u, v) if u < v else (v, u)
            edges[key] = edges.get(key, 0) + 1
            if edges[key] > 2:
                raise MeshInvariantError(
                    f"edge {key} is shared by more than two triangles (triangle {t})"
                )
    return edges


def _validate_fans(tris, node_class, edges, nv):
    """Interior nodes must have a single closed fan of incident triangles."""
    # Count boundary edges per node; an interior node must have none, and its
    # incident edges must all be shared (degree-2), which with conformity
    # forces a single cycle unless the vertex is pinched.
    incident = [[] for _ in range(nv)]
    for t, tri in enumerate(tris):
        for v in tri:
            incident[v].append(t)
    for k in range(nv):
        if node_class[k] != INTERIOR:
            continue
        tri_ids = incident[k]
        m = len(tri_ids)
        if m < 3:
            raise MeshInvariantError(f"interior node {k} has only {m} incident triangles")
        # Walk the fan: opposite edges of the incident triangles must chain
        # into one cycle over the neighbour vertices.
        nxt = {}
        for t in tri_ids:
            tri = tris[t]
            j = int(np.where(tri == k)[0][0])
            a, b = int(tri[(j + 1) % 3]), int(tri[(j + 2) % 3])
            if a in nxt:
                raise MeshInvariantError(f"node {k} is pinched at neighbour {a}")
            nxt[a] = b
        start = next(iter(nxt))
        cur, seen = start, 0
        while True:
            cur = nxt[cur]
            seen += 1
            if cur == start:
                break
            if seen > m:
                raise MeshInvariantError(f"incident triangles of node {k} do not form one fan")
        if seen != m:
            raise MeshInvariantError(f"incident triangles of node {k} form more than one fan")


def _build_mesh(vertices, triangles, repair_orientation=False):
    """Validate (optionally repair) connectivity and classify nodes."""
    verts = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    tris = np.ascontiguousarray(np.asarray(triangles, dtype=np.int32))
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshInvariantError("vertices must be an (n, 2) array")
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise MeshInvariantError("triangles must be an (n, 3) array")
    nv = verts.shape[0]

    bad = np.where((tris < 0) | (tris >= nv))
    if bad[0].size:
        t = int(bad[0][0])
        raise MeshInvariantError(
            f"triangle {t} references vertex {int(tris[t, bad[1][0]])} out of range [0, {nv})"
        )
    for t, (i0, i1, i2) in enumerate(tris):
        if i0 == i1 or i1 == i2 or i2 == i0:
            raise MeshInvariantError(f"triangle {t} repeats a vertex")

    areas = _signed_areas(verts, tris)
    if repair_orientation:
        cw = areas < 0
        if np.any(cw):
            tris = tris.copy()
            tris[cw, 1], tris[cw, 2] = tris[cw, 2].copy(), tris[cw, 1].copy()
            areas = np.abs(areas)
    extent = max(np.ptp(verts[:, 0]), np.ptp(verts[:, 1]))
    tiny = 1e-14 * extent * extent if extent > 0 else 0.0
    flat = np.where(areas <= tiny)[0]
    if flat.size:
        raise MeshInvariantError(f"triangle {int(flat[0])} is degenerate or clockwise")

    edges = _edge_counts(tris, nv)
    node_class = np.zeros(nv, dtype=np.uint8)
    for (u, v), count in edges.items():
        if count == 1:
            node_class[u] = BOUNDARY
            node_class[v] = BOUNDARY
    _validate_fans(tris, node_class, edges, nv)
    return Mesh(vertices=verts, triangles=tris, node_class=node_class)


def interior_nodes(mesh: Mesh) -> np.ndarray:
    """Interior vertex indices in ascending order."""
    return np.where(mesh.node_class == INTERIOR)[0].astype(np.int64)


def mesh_h(mesh: Mesh) -> float:
    """Maximum triangle edge length."""
    v = mesh.vertices
    t = mesh.triangles
    h = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = v[t[:, i]] - v[t[:, j]]
        h = max(h, float(np.sqrt((d * d).sum(axis=1)).max()))
    return h


def generate_rect_mesh(nx: int, ny: int, rect: Rectangle) -> Mesh:
    """Structured triangulation of a rectangle.

    The (nx+1) x (ny+1) grid nodes are connected cell by cell, each cell
    split along its lower-left to upper-right diagonal, giving 2*nx*ny
    counter-clockwise triangles. Deterministic for fixed arguments.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    if not isinstance(rect, Rectangle):
        raise TypeError("generate_rect_mesh requires a Rectangle domain")
    xs = np.linspace(rect.a, rect.b, nx + 1)
    ys = np.linspace(rect.c, rect.d, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int32)
    t = 0
    for j in range(ny):
        for i in range(nx):
            ll, lr = nid(i, j), nid(i + 1, j)
            ul, ur = nid(i, j + 1), nid(i + 1, j + 1)
            tris[t] = (ll, lr, ur)
            tris[t + 1] = (ll, ur, ul)
            t += 2
    return _build_mesh(verts, tris)


def _stitch_rings(inner, outer):
    """Triangulate the annulus between two concentric CCW node rings."""
    n_in, n_out = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < n_in or j < n_out:
        if i == n_in:
            advance_outer = True
        elif j == n_out:
            advance_outer = False
        else:
            advance_outer = (j + 1) * n_in <= (i + 1) * n_out  # compare next angles
        if advance_outer:
            tris.append((inner[i % n_in], outer[j % n_out], outer[(j + 1) % n_out]))
            j += 1
        else:
            tris.append((inner[i % n_in], inner[(i + 1) % n_in], outer[j % n_out]))
            i += 1
    return tris


def generate_disk_mesh(target_h: float, disk: Disk) -> Mesh:
    """Concentric-ring triangulation of a disk.

    Rings sit at radii k * dr with node counts ceil(2*pi*k); the ring count
    is chosen so the longest edge stays below 1.25 * target_h. Outer-ring
    vertices lie exactly on the circle. Deterministic for fixed arguments.
    """
    if not isinstance(disk, Disk):
        raise TypeError("generate_disk_mesh requires a Disk domain")
    if not (0 < target_h < disk.radius):
        raise ValueError("target_h must satisfy 0 < target_h < radius (at least one ring)")
    n_rings = math.ceil(disk.radius / (0.80 * target_h))
    dr = disk.radius / n_rings

    verts = [(disk.cx, disk.cy)]
    rings = [[0]]
    for k in range(1, n_rings + 1):
        count = math.ceil(2 * math.pi * k)
        r = disk.radius if k == n_rings else k * dr  # outer ring exactly on the circle
        ring = []
        for j in range(count):
            theta = 2.0 * math.pi * j / count
            ring.append(len(verts))
            verts.append((disk.cx + r * math.cos(theta), disk.cy + r * math.sin(theta)))
        rings.append(ring)

    tris = []
    for j in range(len(rings[1])):
        tris.append((0, rings[1][j], rings[1][(j + 1) % len(rings[1])]))
    for k in range(2, n_rings + 1):
        tris.extend(_stitch_rings(rings[k - 1], rings[k]))

    verts = np.asarray(verts, dtype=np.float64)
    tris = np.asarray(tris, dtype=np.int32)
    return _build_mesh(verts, tris, repair_orientation=True)


def save_mesh(mesh: Mesh, path) -> None:
    """Write the line-oriented text format (see load_mesh)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        for i0, i1, i2 in mesh.triangles:
            fh.write(f"{i0} {i1} {i2}\n")


def load_mesh(path) -> Mesh:
    """Parse the text mesh format.

    Format ('#' starts a comment, blank lines ignored)::

        nodes <count>
        <x> <y>          (count lines)
        triangles <count>
        <i0> <i1> <i2>   (count lines, zero-based)

    Clockwise triangles are silently repaired by swapping two indices.
    Node classification is recomputed from connectivity, never read from
    the file.
    """
    tokens = []  # (line_number, [fields])
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                tokens.append((lineno, text.split()))

    pos = 0

    def take(expect_kw=None):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][0] if tokens else 0
            raise MeshFormatError("unexpected end of file", line=last)
        lineno, fields = tokens[pos]
        pos += 1
        if expect_kw is not None:
            if len(fields) != 2 or fields[0] != expect_kw:
                raise MeshFormatError(f"expected '{expect_kw} <count>'", line=lineno)
            try:
                return lineno, int(fields[1])
            except ValueError:
                raise MeshFormatError(f"bad count {fields[1]!r}", line=lineno) from None
        return lineno, fields

    _, n_nodes = take("nodes")
    verts = np.empty((n_nodes, 2), dtype=np.float64)
    for i in range(n_nodes):
        lineno, fields = take()
        if len(fields) != 2:
            raise MeshFormatError("expected '<x> <y>'", line=lineno)
        try:
            verts[i, 0] = float(fields[0])
            verts[i, 1] = float(fields[1])
        except ValueError:
            raise MeshFormatError(f"bad coordinate in {fields!r}", line=lineno) from None

    _, n_tris = take("triangles")
    tris = np.empty((n_tris, 3), dtype=np.int32)
    for i in range(n_tris):
        lineno, fields = take()
        if len(fields) != 3:
            raise MeshFormatError("expected '<i0> <i1> <i2>'", line=lineno)
        try:
            tris[i] = [int(f) for f in fields]
        except ValueError:
            raise MeshFormatError(f"bad vertex index in {fields!r}", line=lineno) from None

    if pos != len(tokens):
        raise MeshFormatError("trailing content after triangle block", line=tokens[pos][0])
    return _build_mesh(verts, tris, repair_orientation=True)
