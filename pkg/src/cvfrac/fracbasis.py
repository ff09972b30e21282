"""Riemann-Liouville fractional derivatives of the global linear basis.

The global hat function of node k is nonzero only on the triangles incident
to k. Restricting it to a horizontal or vertical line yields a compactly
supported piecewise-linear profile; its left/right fractional derivative of
order ``0 < alpha < 1`` at a point is a finite sum of closed-form segment
kernels, obtained by integrating the singular convolution by parts on each
linear piece and differentiating analytically.

Curved domain boundaries never enter: the basis vanishes outside its support,
so the convolution integral collapses to the support intervals regardless of
where the domain boundary lies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

__all__ = [
    "Side",
    "LineProfile",
    "SupportDomain",
    "HORIZONTAL",
    "VERTICAL",
    "support_domain",
    "line_restriction",
    "rl_segment_kernel_left",
    "rl_segment_kernel_right",
    "frac_deriv_at",
]

HORIZONTAL = 0  # line y = level, profile parametrised by x
VERTICAL = 1    # line x = level, profile parametrised by y

_AXIS_CODES = {"horizontal": HORIZONTAL, "vertical": VERTICAL, HORIZONTAL: HORIZONTAL, VERTICAL: VERTICAL}


class Side(enum.Enum):
    """Side of a one-dimensional fractional derivative."""

    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class SupportDomain:
    """Triangles incident to a node, with their joint bounding box."""

    node: int
    elements: np.ndarray
    bbox: tuple[float, float, float, float]  # (xmin, xmax, ymin, ymax)


@dataclass(frozen=True)
class LineProfile:
    """Piecewise-linear restriction of a basis function to an axis line.

    ``value = slopes[j] * s + intercepts[j]`` on ``[breakpoints[j],
    breakpoints[j+1]]`` where ``s`` is the running coordinate along the line
    (x for horizontal lines, y for vertical ones); zero outside the
    breakpoint range. An empty profile (no intersection with the support)
    has zero-length arrays.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    axis: int
    level: float

    @property
    def empty(self) -> bool:
        return self.breakpoints.size == 0

    def value(self, s):
        """Evaluate the profile at coordinate(s) ``s`` (0 outside support)."""
        s = np.asarray(s, dtype=np.float64)
        if self.empty:
            return np.zeros_like(s)
        j = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, self.slopes.size - 1)
        out = self.slopes[j] * s + self.intercepts[j]
        inside = (s >= self.breakpoints[0]) & (s <= self.breakpoints[-1])
        return np.where(inside, out, 0.0)

    @classmethod
    def from_samples(cls, coords, values, axis=HORIZONTAL, level=0.0) -> "LineProfile":
        """Build a profile interpolating (coords, values) nodal samples."""
        coords = np.asarray(coords, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        ds = np.diff(coords)
        if np.any(ds <= 0):
            raise ValueError("coords must be strictly increasing")
        slopes = np.diff(values) / ds
        intercepts = values[:-1] - slopes * coords[:-1]
        return cls(coords, slopes, intercepts, _AXIS_CODES[axis], float(level))


def support_domain(mesh: Mesh, k: int) -> SupportDomain:
    """Triangles incident to node k and their bounding box."""
    if not 0 <= k < mesh.n_vertices:
        raise IndexError(f"vertex index {k} out of range")
    elements = np.where((mesh.triangles == k).any(axis=1))[0].astype(np.int64)
    pts = mesh.vertices[mesh.triangles[elements].ravel()]
    bbox = (
        float(pts[:, 0].min()),
        float(pts[:, 0].max()),
        float(pts[:, 1].min()),
        float(pts[:, 1].max()),
    )
    return SupportDomain(node=int(k), elements=elements, bbox=bbox)


def _clip_triangle(xs, ys, tri, axis, level):
    """Intersect an axis line with one triangle.

    Returns (lo, hi) in the line coordinate, or None. Vertices exactly on
    the line count as hits, so a line running along an edge returns that
    edge as the segment.
    """
    if axis == HORIZONTAL:
        c = (xs[tri[0]], xs[tri[1]], xs[tri[2]])
        d = (ys[tri[0]] - level, ys[tri[1]] - level, ys[tri[2]] - level)
    else:
        c = (ys[tri[0]], ys[tri[1]], ys[tri[2]])
        d = (xs[tri[0]] - level, xs[tri[1]] - level, xs[tri[2]] - level)
    hits = []
    for j in range(3):
        if d[j] == 0.0:
            hits.append(c[j])
    for j0, j1 in ((0, 1), (1, 2), (2, 0)):
        if (d[j0] < 0.0 and d[j1] > 0.0) or (d[j0] > 0.0 and d[j1] < 0.0):
            t = d[j0] / (d[j0] - d[j1])
            hits.append(c[j0] + t * (c[j1] - c[j0]))
    if len(hits) < 2:
        return None
    lo, hi = min(hits), max(hits)
    if hi <= lo:
        return None
    return lo, hi


def _basis_on_line(xs, ys, tri, k, axis, level):
    """Slope/intercept of basis function of vertex k of ``tri`` along the line."""
    j = 0 if tri[0] == k else (1 if tri[1] == k else 2)
    j1, j2 = (j + 1) % 3, (j + 2) % 3
    x1, y1 = xs[tri[j1]], ys[tri[j1]]
    x2, y2 = xs[tri[j2]], ys[tri[j2]]
    a = y1 - y2
    b = x2 - x1
    cc = x1 * y2 - x2 * y1
    x0, y0 = xs[tri[j]], ys[tri[j]]
    two_area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if axis == HORIZONTAL:
        return a / two_area, (b * level + cc) / two_area
    return b / two_area, (a * level + cc) / two_area


def _line_segments(xs, ys, tris, elements, k, axis, level, graze_tol):
    """Clipped, per-triangle linear segments of basis k along the line."""
    segs = []
    for e in elements:
        tri = tris[e]
        clip = _clip_triangle(xs, ys, tri, axis, level)
        if clip is None:
            continue
        lo, hi = clip
        if hi - lo <= graze_tol:
            continue
        p, q = _basis_on_line(xs, ys, tri, k, axis, level)
        segs.append((lo, hi, p, q))
    return segs


def line_restriction(mesh: Mesh, support: SupportDomain, axis, level: float, graze_tol=None) -> LineProfile:
    """Restrict the basis of ``support.node`` to an axis-aligned line.

    Clips the line against every incident triangle, evaluates the local
    linear basis on each clipped piece, and merges the pieces into one
    sorted profile (holes are filled with explicit zero pieces). Returns an
    empty profile when the line misses the support; grazing contacts
    shorter than ``graze_tol`` are discarded.
    """
    axis = _AXIS_CODES[axis]
    if not math.isfinite(level):
        raise ValueError("line level must be finite")
    xs = mesh.vertices[:, 0]
    ys = mesh.vertices[:, 1]
    if graze_tol is None:
        pts = mesh.vertices[mesh.triangles[support.elements].ravel()]
        scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1])) if pts.size else 1.0
        graze_tol = 1e-12 * scale
    segs = _line_segments(xs, ys, mesh.triangles, support.elements, support.node, axis, level, graze_tol)
    bps, slopes, intercepts = _merge_pieces(segs, graze_tol)
    return LineProfile(
        breakpoints=np.asarray(bps, dtype=np.float64),
        slopes=np.asarray(slopes, dtype=np.float64),
        intercepts=np.asarray(intercepts, dtype=np.float64),
        axis=axis,
        level=float(level),
    )


def _merge_pieces(segs, graze_tol):
    """Sorted non-overlapping pieces with zero filler across support holes."""
    segs = sorted(segs, key=lambda s: (s[0], s[1]))
    bps: list[float] = []
    slopes: list[float] = []
    intercepts: list[float] = []
    for lo, hi, p, q in segs:
        if bps:
            cur_hi = bps[-1]
            if lo < cur_hi:
                lo = cur_hi
                if hi - lo <= graze_tol:
                    continue
            elif lo - cur_hi > graze_tol:
                bps.append(lo)
                slopes.append(0.0)
                intercepts.append(0.0)
        else:
            bps.append(lo)
        bps.append(hi)
        slopes.append(p)
        intercepts.append(q)
    return bps, slopes, intercepts


def _raw_left(p, q, s0, s1, x, alpha):
    """d/dx of the left convolution over one piece, without the gamma factor.

    Requires s0 < s1 <= x. At s1 == x the vanishing boundary terms are
    dropped, which is the analytic limit for alpha < 1.
    """
    a0 = x - s0
    a1 = x - s1
    val = (p * x + q) * a0 ** (-alpha) + p * (alpha / (1.0 - alpha)) * a0 ** (1.0 - alpha)
    if a1 > 0.0:
        val -= (p * x + q) * a1 ** (-alpha) + p * (alpha / (1.0 - alpha)) * a1 ** (1.0 - alpha)
    return val


def _raw_right(p, q, s0, s1, x, alpha):
    """Mirror of :func:`_raw_left` for x <= s0 < s1, gamma factor excluded."""
    b0 = s0 - x
    b1 = s1 - x
    val = (p * x + q) * b1 ** (-alpha) - p * (alpha / (1.0 - alpha)) * b1 ** (1.0 - alpha)
    if b0 > 0.0:
        val -= (p * x + q) * b0 ** (-alpha) - p * (alpha / (1.0 - alpha)) * b0 ** (1.0 - alpha)
    return val


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


def rl_segment_kernel_left(p, q, s0, s1, x, alpha) -> float:
    """Left Riemann-Liouville kernel of a linear piece p*s + q on [s0, s1].

    Evaluates ``1/Gamma(1-alpha) * d/dx int_{s0}^{s1} (x-s)^(-alpha)
    (p*s+q) ds`` in closed form; the piece must lie left of (or end at) the
    evaluation point x.
    """
    _check_alpha(alpha)
    if not s0 < s1 <= x:
        raise ValueError(f"segment [{s0}, {s1}] must satisfy s0 < s1 <= x (x={x})")
    return _raw_left(p, q, s0, s1, x, alpha) / math.gamma(1.0 - alpha)


def rl_segment_kernel_right(p, q, s0, s1, x, alpha) -> float:
    """Right Riemann-Liouville kernel of a linear piece right of x.

    Evaluates ``-1/Gamma(1-alpha) * d/dx int_{s0}^{s1} (s-x)^(-alpha)
    (p*s+q) ds`` in closed form; requires x <= s0 < s1.
    """
    _check_alpha(alpha)
    if not x <= s0 < s1:
        raise ValueError(f"segment [{s0}, {s1}] must satisfy x <= s0 < s1 (x={x})")
    return _raw_right(p, q, s0, s1, x, alpha) / math.gamma(1.0 - alpha)


def frac_deriv_at(profile: LineProfile, alpha: float, point: float, side: Side) -> float:
    """Fractional derivative of a piecewise-linear profile at ``point``.

    Sums the closed-form piece kernels on the relevant side of the point;
    the piece containing the point contributes its partial span. Empty
    profiles, and profiles lying entirely on the wrong side, give 0.
    """
    _check_alpha(alpha)
    if profile.empty:
        return 0.0
    bps = profile.breakpoints
    acc = 0.0
    if side is Side.LEFT:
        for j in range(profile.slopes.size):
            b0 = bps[j]
            if b0 >= point:
                break
            s1 = min(bps[j + 1], point)
            acc += _raw_left(profile.slopes[j], profile.intercepts[j], b0, s1, point, alpha)
    else:
        for j in range(profile.slopes.size - 1, -1, -1):
            b1 = bps[j + 1]
            if b1 <= point:
                break
            s0 = max(bps[j], point)
            acc += _raw_right(profile.slopes[j], profile.intercepts[j], s0, b1, point, alpha)
    return acc / math.gamma(1.0 - alpha)
