"""Pure-Python kernel backend.

Same contract as the compiled ``_speedups`` extension: for a batch of
candidate basis nodes, restrict each basis function to one axis line and
evaluate the left/right fractional derivatives at a single point. Used when
the extension is unavailable (or forced via ``CVFRAC_KERNELS=python``).
"""

from __future__ import annotations

import math

from . import fracbasis as fb

compiled = False


def line_frac_derivs(xs, ys, tris, sup_off, sup_tri, cand, axis, level, point,
                     alpha, graze_tol, out_left, out_right):
    """Fill out_left/out_right with basis derivatives along one line.

    Arguments mirror the compiled kernel: flat vertex coordinates, (ne, 3)
    connectivity, CSR node->incident-triangle arrays, candidate node ids,
    axis code (fracbasis.HORIZONTAL or VERTICAL), the line level, the
    evaluation point along the line, the order in (0, 1) and the grazing
    tolerance below which clipped slivers are dropped.
    """
    inv_gamma = 1.0 / math.gamma(1.0 - alpha)
    for idx in range(len(cand)):
        k = int(cand[idx])
        elements = sup_tri[sup_off[k]:sup_off[k + 1]]
        segs = fb._line_segments(xs, ys, tris, elements, k, axis, level, graze_tol)
        bps, slopes, intercepts = fb._merge_pieces(segs, graze_tol)
        left = 0.0
        right = 0.0
        for j in range(len(slopes)):
            b0 = bps[j]
            b1 = bps[j + 1]
            if b0 < point:
                left += fb._raw_left(slopes[j], intercepts[j], b0, min(b1, point), point, alpha)
            if b1 > point:
                right += fb._raw_right(slopes[j], intercepts[j], max(b0, point), b1, point, alpha)
        out_left[idx] = left * inv_gamma
        out_right[idx] = right * inv_gamma
