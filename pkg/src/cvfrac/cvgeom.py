"""Barycentric dual control volumes over a triangulation.

Each triangle is split into three quadrilateral sub-control volumes by its
barycenter and edge midpoints; the control volume of a node is the union of
its sub-control volumes. Every triangle contributes two control faces per
vertex (edge midpoint to barycenter, barycenter to the other edge midpoint),
oriented so that each owner traverses its control-volume boundary
anticlockwise. Boundary nodes get truncated, open volumes; they are kept for
area accounting but excluded from the unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshInvariantError

__all__ = ["ControlFace", "CvGeometry", "build_control_volumes"]


@dataclass(frozen=True)
class ControlFace:
    """One segment of a control-volume boundary, signed along the owner's loop."""

    owner_node: int
    midpoint: tuple[float, float]
    dx: float
    dy: float
    element: int


@dataclass(frozen=True)
class CvGeometry:
    """Flat per-face and per-node arrays describing the dual mesh.

    Faces are grouped by owner: faces of node i occupy
    ``face_* [owner_offsets[i]:owner_offsets[i+1]]``.
    """

    cv_area: np.ndarray      # (nv,) control volume area per node
    sub_area: np.ndarray     # (ne, 3) sub-CV area per (triangle, local vertex)
    m_i: np.ndarray          # (nv,) sub-CV count per node
    face_owner: np.ndarray   # (nf,)
    face_mid_x: np.ndarray   # (nf,)
    face_mid_y: np.ndarray   # (nf,)
    face_dx: np.ndarray      # (nf,)
    face_dy: np.ndarray      # (nf,)
    face_elem: np.ndarray    # (nf,)
    owner_offsets: np.ndarray  # (nv + 1,)

    @property
    def n_faces(self):
        return self.face_owner.shape[0]

    def faces_of(self, node: int) -> list[ControlFace]:
        lo, hi = self.owner_offsets[node], self.owner_offsets[node + 1]
        return [
            ControlFace(
                owner_node=int(self.face_owner[f]),
                midpoint=(float(self.face_mid_x[f]), float(self.face_mid_y[f])),
                dx=float(self.face_dx[f]),
                dy=float(self.face_dy[f]),
                element=int(self.face_elem[f]),
            )
            for f in range(lo, hi)
        ]


def _quad_area(p0, p1, p2, p3):
    # shoelace for a quadrilateral given as (n, 2) corner arrays
    x = np.stack([p0[:, 0], p1[:, 0], p2[:, 0], p3[:, 0]], axis=1)
    y = np.stack([p0[:, 1], p1[:, 1], p2[:, 1], p3[:, 1]], axis=1)
    xn = np.roll(x, -1, axis=1)
    yn = np.roll(y, -1, axis=1)
    return 0.5 * np.sum(x * yn - xn * y, axis=1)


def build_control_volumes(mesh: Mesh) -> CvGeometry:
    """Construct barycenters, edge midpoints, control faces and areas."""
    verts = mesh.vertices
    tris = mesh.triangles
    ne = tris.shape[0]
    nv = verts.shape[0]

    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    two_area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    extent = max(np.ptp(verts[:, 0]), np.ptp(verts[:, 1]))
    tiny = 1e-14 * extent * extent
    flat = np.where(two_area <= 2.0 * tiny)[0]
    if flat.size:
        raise MeshInvariantError(f"triangle {int(flat[0])} is degenerate")

    q = (a + b + c) / 3.0
    s01 = 0.5 * (a + b)
    s12 = 0.5 * (b + c)
    s20 = 0.5 * (c + a)

    # Sub-CV quadrilaterals, traversed anticlockwise (triangles are CCW):
    #   vertex 0: (v0, S01, Q, S20), vertex 1: (v1, S12, Q, S01),
    #   vertex 2: (v2, S20, Q, S12).
    sub_area = np.empty((ne, 3), dtype=np.float64)
    sub_area[:, 0] = _quad_area(a, s01, q, s20)
    sub_area[:, 1] = _quad_area(b, s12, q, s01)
    sub_area[:, 2] = _quad_area(c, s20, q, s12)

    # Two faces per vertex, ordered along the owner's anticlockwise loop:
    # midpoint of the outgoing edge -> barycenter -> midpoint of the incoming
    # edge. Face order within each (owner, triangle) pair: (S_out -> Q) then
    # (Q -> S_in).
    starts = (s01, q, s12, q, s20, q)
    ends = (q, s20, q, s01, q, s12)
    owners = (tris[:, 0], tris[:, 0], tris[:, 1], tris[:, 1], tris[:, 2], tris[:, 2])

    elem_ids = np.arange(ne, dtype=np.int64)
    face_owner = np.concatenate([o.astype(np.int64) for o in owners])
    face_elem = np.concatenate([elem_ids] * 6)
    start = np.vstack([s for s in starts])
    end = np.vstack([e for e in ends])
    face_mid = 0.5 * (start + end)
    face_d = end - start

    order = np.argsort(face_owner, kind="stable")
    face_owner = face_owner[order]
    face_elem = face_elem[order]
    face_mid = face_mid[order]
    face_d = face_d[order]
    owner_offsets = np.searchsorted(face_owner, np.arange(nv + 1))

    cv_area = np.zeros(nv, dtype=np.float64)
    m_i = np.zeros(nv, dtype=np.int64)
    for j in range(3):
        np.add.at(cv_area, tris[:, j], sub_area[:, j])
        np.add.at(m_i, tris[:, j], 1)

    return CvGeometry(
        cv_area=cv_area,
        sub_area=sub_area,
        m_i=m_i,
        face_owner=face_owner,
        face_mid_x=np.ascontiguousarray(face_mid[:, 0]),
        face_mid_y=np.ascontiguousarray(face_mid[:, 1]),
        face_dx=np.ascontiguousarray(face_d[:, 0]),
        face_dy=np.ascontiguousarray(face_d[:, 1]),
        face_elem=face_elem,
        owner_offsets=owner_offsets.astype(np.int64),
    )
