# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core: line clipping plus closed-form fractional kernels.

Hot inner loop of the stiffness assembly. The pure-Python twin lives in
``_speedups_py``; both implement the same arithmetic so results agree to
rounding.
"""

from libc.math cimport pow, tgamma

compiled = True

DEF MAX_SEG = 64
DEF MAX_PIECE = 130


cdef inline double _raw_left(double p, double q, double s0, double s1,
                             double x, double alpha) nogil:
    cdef double a0 = x - s0
    cdef double a1 = x - s1
    cdef double val = (p * x + q) * pow(a0, -alpha) \
        + p * (alpha / (1.0 - alpha)) * pow(a0, 1.0 - alpha)
    if a1 > 0.0:
        val -= (p * x + q) * pow(a1, -alpha) \
            + p * (alpha / (1.0 - alpha)) * pow(a1, 1.0 - alpha)
    return val


cdef inline double _raw_right(double p, double q, double s0, double s1,
                              double x, double alpha) nogil:
    cdef double b0 = s0 - x
    cdef double b1 = s1 - x
    cdef double val = (p * x + q) * pow(b1, -alpha) \
        - p * (alpha / (1.0 - alpha)) * pow(b1, 1.0 - alpha)
    if b0 > 0.0:
        val -= (p * x + q) * pow(b0, -alpha) \
            - p * (alpha / (1.0 - alpha)) * pow(b0, 1.0 - alpha)
    return val


cdef inline int _clip_triangle(double c0, double c1, double c2,
                               double d0, double d1, double d2,
                               double* lo, double* hi) nogil:
    # c: coordinate along the line, d: signed offset from the line.
    cdef double pts[6]
    cdef int n = 0
    cdef int j
    cdef double t, a, b
    if d0 == 0.0:
        pts[n] = c0; n += 1
    if d1 == 0.0:
        pts[n] = c1; n += 1
    if d2 == 0.0:
        pts[n] = c2; n += 1
    if (d0 < 0.0 and d1 > 0.0) or (d0 > 0.0 and d1 < 0.0):
        t = d0 / (d0 - d1)
        pts[n] = c0 + t * (c1 - c0); n += 1
    if (d1 < 0.0 and d2 > 0.0) or (d1 > 0.0 and d2 < 0.0):
        t = d1 / (d1 - d2)
        pts[n] = c1 + t * (c2 - c1); n += 1
    if (d2 < 0.0 and d0 > 0.0) or (d2 > 0.0 and d0 < 0.0):
        t = d2 / (d2 - d0)
        pts[n] = c2 + t * (c0 - c2); n += 1
    if n < 2:
        return 0
    a = pts[0]
    b = pts[0]
    for j in range(1, n):
        if pts[j] < a:
            a = pts[j]
        if pts[j] > b:
            b = pts[j]
    if b <= a:
        return 0
    lo[0] = a
    hi[0] = b
    return 1


def line_frac_derivs(double[::1] xs, double[::1] ys, int[:, ::1] tris,
                     long long[::1] sup_off, long long[::1] sup_tri,
                     long long[::1] cand, int axis, double level, double point,
                     double alpha, double graze_tol,
                     double[::1] out_left, double[::1] out_right):
    """Compiled twin of ``_speedups_py.line_frac_derivs``."""
    cdef double inv_gamma = 1.0 / tgamma(1.0 - alpha)
    cdef Py_ssize_t idx, nc = cand.shape[0]
    cdef long long k, e, lo_i, hi_i
    cdef int nseg, npiece, j, jj, slot, j1, j2, ins
    cdef double seg_lo[MAX_SEG]
    cdef double seg_hi[MAX_SEG]
    cdef double seg_p[MAX_SEG]
    cdef double seg_q[MAX_SEG]
    cdef double bp[MAX_PIECE + 1]
    cdef double pp[MAX_PIECE]
    cdef double pq[MAX_PIECE]
    cdef double lo = 0.0, hi = 0.0
    cdef double x0, y0, x1, y1, x2, y2, a, b, cc, two_area, p, q
    cdef double tlo, thi, tp, tq, cur_hi, left, right, b0, b1
    cdef int i0, i1, i2

    for idx in range(nc):
        k = cand[idx]
        lo_i = sup_off[k]
        hi_i = sup_off[k + 1]
        if hi_i - lo_i > MAX_SEG:
            raise ValueError("node has more incident triangles than supported")
        nseg = 0
        for e in range(lo_i, hi_i):
            i0 = tris[sup_tri[e], 0]
            i1 = tris[sup_tri[e], 1]
            i2 = tris[sup_tri[e], 2]
            if axis == 0:
                if not _clip_triangle(xs[i0], xs[i1], xs[i2],
                                      ys[i0] - level, ys[i1] - level, ys[i2] - level,
                                      &lo, &hi):
                    continue
            else:
                if not _clip_triangle(ys[i0], ys[i1], ys[i2],
                                      xs[i0] - level, xs[i1] - level, xs[i2] - level,
                                      &lo, &hi):
                    continue
            if hi - lo <= graze_tol:
                continue
            # local basis coefficients of vertex k on this triangle
            if i0 == k:
                slot = 0
            elif i1 == k:
                slot = 1
            else:
                slot = 2
            j1 = (slot + 1) % 3
            j2 = (slot + 2) % 3
            x0 = xs[tris[sup_tri[e], slot]]; y0 = ys[tris[sup_tri[e], slot]]
            x1 = xs[tris[sup_tri[e], j1]]; y1 = ys[tris[sup_tri[e], j1]]
            x2 = xs[tris[sup_tri[e], j2]]; y2 = ys[tris[sup_tri[e], j2]]
            a = y1 - y2
            b = x2 - x1
            cc = x1 * y2 - x2 * y1
            two_area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if axis == 0:
                p = a / two_area
                q = (b * level + cc) / two_area
            else:
                p = b / two_area
                q = (a * level + cc) / two_area
            # insertion sort by (lo, hi)
            ins = nseg
            while ins > 0 and (seg_lo[ins - 1] > lo or
                               (seg_lo[ins - 1] == lo and seg_hi[ins - 1] > hi)):
                seg_lo[ins] = seg_lo[ins - 1]
                seg_hi[ins] = seg_hi[ins - 1]
                seg_p[ins] = seg_p[ins - 1]
                seg_q[ins] = seg_q[ins - 1]
                ins -= 1
            seg_lo[ins] = lo
            seg_hi[ins] = hi
            seg_p[ins] = p
            seg_q[ins] = q
            nseg += 1

        # merge sorted segments into contiguous pieces, zero-filling holes
        npiece = 0
        for j in range(nseg):
            tlo = seg_lo[j]
            thi = seg_hi[j]
            tp = seg_p[j]
            tq = seg_q[j]
            if npiece > 0:
                cur_hi = bp[npiece]
                if tlo < cur_hi:
                    tlo = cur_hi
                    if thi - tlo <= graze_tol:
                        continue
                elif tlo - cur_hi > graze_tol:
                    bp[npiece + 1] = tlo
                    pp[npiece] = 0.0
                    pq[npiece] = 0.0
                    npiece += 1
            else:
                bp[0] = tlo
            bp[npiece + 1] = thi
            pp[npiece] = tp
            pq[npiece] = tq
            npiece += 1

        left = 0.0
        right = 0.0
        for j in range(npiece):
            b0 = bp[j]
            b1 = bp[j + 1]
            if b0 < point:
                left += _raw_left(pp[j], pq[j], b0,
                                  point if b1 > point else b1, point, alpha)
            if b1 > point:
                right += _raw_right(pp[j], pq[j],
                                    point if b0 < point else b0, b1, point, alpha)
        out_left[idx] = left * inv_gamma
        out_right[idx] = right * inv_gamma
