"""System assembly and backward-Euler time stepping.

Builds the lumped mass diagonal, the non-local stiffness matrix (one row
per interior node, columns restricted to interior nodes since the boundary
values are identically zero) and the forcing vector, and advances

    (A - tau * M) U^n = A U^{n-1} + tau * A F^n.

Sparsity-aware assembly: for each control-face midpoint only the basis
functions whose support bounding box meets the face's horizontal or
vertical evaluation line can contribute, which a bucketed interval index
answers without scanning all nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import fracbasis, kernels, solver
from .cvgeom import CvGeometry
from .mesh import INTERIOR, DomainDescriptor, Mesh, mesh_h

__all__ = [
    "ProblemSpec",
    "DiscreteState",
    "AssemblyContext",
    "prepare",
    "interior_order",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_stiffness_riesz",
    "candidate_columns",
    "assemble_rhs",
    "step",
    "riesz_to_two_sided",
]

CoefficientFn = Callable[[float, float, float], float]

_STIFFNESS_DROP_TOL = 1e-15


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem data: orders, coefficients, forcing, initial state."""

    alpha: float
    beta: float
    K1: CoefficientFn
    K2: CoefficientFn
    K3: CoefficientFn
    K4: CoefficientFn
    forcing: Callable
    initial: Callable
    domain: DomainDescriptor
    t_final: float
    tau: float
    coefficients_time_dependent: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 and 0.0 < self.beta < 1.0):
            raise ValueError(f"orders must lie in (0, 1), got alpha={self.alpha}, beta={self.beta}")
        if not self.t_final > 0.0:
            raise ValueError("final time must be positive")
        if not self.tau > 0.0:
            raise ValueError("time step must be positive")


@dataclass(frozen=True)
class DiscreteState:
    """Unknown vector over interior nodes at time t (boundary values are 0)."""

    u: np.ndarray
    t: float


class _IntervalStabber:
    """Bucketed stabbing index over static 1-D intervals.

    Answers "which intervals contain v" by checking only the intervals
    overlapping v's bucket, keeping assembly clear of a full per-face scan
    over all nodes.
    """

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        n = self.lo.shape[0]
        self.vmin = float(self.lo.min()) if n else 0.0
        self.vmax = float(self.hi.max()) if n else 1.0
        self.nbins = max(1, int(math.isqrt(n)) * 2)
        width = self.vmax - self.vmin
        self.width = width if width > 0 else 1.0
        buckets = [[] for _ in range(self.nbins)]
        for i in range(n):
            b0 = self._bin(self.lo[i])
            b1 = self._bin(self.hi[i])
            for b in range(b0, b1 + 1):
                buckets[b].append(i)
        self._buckets = [np.asarray(b, dtype=np.int64) for b in buckets]

    def _bin(self, v):
        b = int((v - self.vmin) / self.width * self.nbins)
        return min(max(b, 0), self.nbins - 1)

    def stab(self, v: float) -> np.ndarray:
        """Sorted indices of intervals with lo <= v <= hi."""
        if v < self.vmin or v > self.vmax:
            return np.empty(0, dtype=np.int64)
        ids = self._buckets[self._bin(v)]
        if ids.size == 0:
            return ids
        keep = (self.lo[ids] <= v) & (self.hi[ids] >= v)
        return ids[keep]


def interior_order(mesh: Mesh) -> np.ndarray:
    """Interior node ids ordered by (y, then x) of their coordinates."""
    ids = np.where(mesh.node_class == INTERIOR)[0]
    xs = mesh.vertices[ids, 0]
    ys = mesh.vertices[ids, 1]
    return ids[np.lexsort((xs, ys))].astype(np.int64)


@dataclass(frozen=True)
class AssemblyContext:
    """Precomputed per-mesh data shared by every assembly call."""

    mesh: Mesh
    interior: np.ndarray        # interior node ids, unknown order
    col_of: np.ndarray          # (nv,) unknown index or -1
    xs: np.ndarray
    ys: np.ndarray
    tris: np.ndarray            # int32 (ne, 3)
    sup_off: np.ndarray         # CSR node -> incident triangles
    sup_tri: np.ndarray
    x_stab: _IntervalStabber    # over interior support x-ranges
    y_stab: _IntervalStabber    # over interior support y-ranges
    graze_tol: float

    @property
    def n_unknowns(self) -> int:
        return int(self.interior.shape[0])

    @property
    def interior_xy(self) -> tuple[np.ndarray, np.ndarray]:
        return self.xs[self.interior], self.ys[self.interior]


def prepare(mesh: Mesh, cv: CvGeometry | None = None) -> AssemblyContext:
    """Build supports, unknown ordering and the line-stabbing indexes."""
    interior = interior_order(mesh)
    nv = mesh.n_vertices
    col_of = np.full(nv, -1, dtype=np.int64)
    col_of[interior] = np.arange(interior.shape[0])

    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int32)
    counts = np.bincount(tris.ravel(), minlength=nv)
    sup_off = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(counts, out=sup_off[1:])
    order = np.argsort(tris.ravel(), kind="stable")
    sup_tri = (order // 3).astype(np.int64)

    xs = np.ascontiguousarray(mesh.vertices[:, 0])
    ys = np.ascontiguousarray(mesh.vertices[:, 1])
    n = interior.shape[0]
    xmin = np.empty(n)
    xmax = np.empty(n)
    ymin = np.empty(n)
    ymax = np.empty(n)
    for i, k in enumerate(interior):
        verts = tris[sup_tri[sup_off[k]:sup_off[k + 1]]].ravel()
        xmin[i] = xs[verts].min()
        xmax[i] = xs[verts].max()
        ymin[i] = ys[verts].min()
        ymax[i] = ys[verts].max()

    return AssemblyContext(
        mesh=mesh,
        interior=interior,
        col_of=col_of,
        xs=xs,
        ys=ys,
        tris=tris,
        sup_off=sup_off,
        sup_tri=sup_tri,
        x_stab=_IntervalStabber(xmin, xmax),
        y_stab=_IntervalStabber(ymin, ymax),
        graze_tol=1e-12 * mesh_h(mesh),
    )


def assemble_mass(cv: CvGeometry, ctx: AssemblyContext) -> np.ndarray:
    """Diagonal of the lumped mass matrix: control volume areas, unknown order."""
    diag = cv.cv_area[ctx.interior]
    if np.any(diag <= 0.0):
        k = int(ctx.interior[np.argmin(diag)])
        raise ValueError(f"non-positive control volume area at node {k}")
    return diag.copy()


def _stiffness_from_fluxes(cv, ctx, face_terms, backend):
    """Shared assembly loop; ``face_terms`` maps per-face kernel outputs to values.

    face_terms(axis, xr, yr, dxf, dyf, out_left, out_right) -> contribution
    array over the candidate columns.
    """
    kern = kernels.get_backend(backend)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    offsets = cv.owner_offsets
    for k in ctx.interior:
        row = ctx.col_of[k]
        for f in range(offsets[k], offsets[k + 1]):
            xr = cv.face_mid_x[f]
            yr = cv.face_mid_y[f]
            dxf = cv.face_dx[f]
            dyf = cv.face_dy[f]
            if dyf != 0.0:
                cand_cols = ctx.y_stab.stab(yr)
                if cand_cols.size:
                    cand = ctx.interior[cand_cols]
                    out_l = np.empty(cand.size)
                    out_r = np.empty(cand.size)
                    kern.line_frac_derivs(
                        ctx.xs, ctx.ys, ctx.tris, ctx.sup_off, ctx.sup_tri, cand,
                        fracbasis.HORIZONTAL, yr, xr, face_terms.alpha,
                        ctx.graze_tol, out_l, out_r,
                    )
                    contrib = face_terms.x_flux(xr, yr, out_l, out_r) * dyf
                    rows.append(np.full(cand.size, row))
                    cols.append(cand_cols)
                    vals.append(contrib)
            if dxf != 0.0:
                cand_cols = ctx.x_stab.stab(xr)
                if cand_cols.size:
                    cand = ctx.interior[cand_cols]
                    out_l = np.empty(cand.size)
                    out_r = np.empty(cand.size)
                    kern.line_frac_derivs(
                        ctx.xs, ctx.ys, ctx.tris, ctx.sup_off, ctx.sup_tri, cand,
                        fracbasis.VERTICAL, xr, yr, face_terms.beta,
                        ctx.graze_tol, out_l, out_r,
                    )
                    contrib = -face_terms.y_flux(xr, yr, out_l, out_r) * dxf
                    rows.append(np.full(cand.size, row))
                    cols.append(cand_cols)
                    vals.append(contrib)
    n = ctx.n_unknowns
    if not rows:
        return solver.CsrMatrix.from_coo(n, n, [], [], [])
    return solver.CsrMatrix.from_coo(
        n, n,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
        drop_tol_rel=_STIFFNESS_DROP_TOL,
    )


class _VariableFluxes:
    """Flux brackets K1*D_left - K2*D_right with coefficients at midpoints."""

    def __init__(self, problem, t):
        self.problem = problem
        self.t = t
        self.alpha = problem.alpha
        self.beta = problem.beta

    def x_flux(self, xr, yr, out_l, out_r):
        p, t = self.problem, self.t
        return p.K1(xr, yr, t) * out_l - p.K2(xr, yr, t) * out_r

    def y_flux(self, xr, yr, out_l, out_r):
        p, t = self.problem, self.t
        return p.K3(xr, yr, t) * out_l - p.K4(xr, yr, t) * out_r


class _RieszFluxes:
    """Constant-coefficient symmetric fluxes c * (D_left - D_right)."""

    def __init__(self, kx, ky, alpha, beta):
        self.cx = riesz_coefficient(kx, alpha)
        self.cy = riesz_coefficient(ky, beta)
        self.alpha = alpha
        self.beta = beta

    def x_flux(self, xr, yr, out_l, out_r):
        return self.cx * (out_l - out_r)

    def y_flux(self, xr, yr, out_l, out_r):
        return self.cy * (out_l - out_r)


def assemble_stiffness(mesh: Mesh, cv: CvGeometry, problem: ProblemSpec, t: float,
                       ctx: AssemblyContext | None = None, backend: str | None = None) -> solver.CsrMatrix:
    """Stiffness matrix M at time t over interior unknowns.

    Row i sums, over the control faces of node i, the midpoint-evaluated
    fluxes (K1 * D_x^a,left - K2 * D_x^a,right) * dy minus
    (K3 * D_y^b,left - K4 * D_y^b,right) * dx applied to each candidate
    basis function. Entries below 1e-15 of the largest magnitude are
    dropped.
    """
    if ctx is None:
        ctx = prepare(mesh, cv)
    return _stiffness_from_fluxes(cv, ctx, _VariableFluxes(problem, t), backend)


def assemble_stiffness_riesz(mesh: Mesh, cv: CvGeometry, kx: float, ky: float,
                             alpha: float, beta: float,
                             ctx: AssemblyContext | None = None,
                             backend: str | None = None) -> solver.CsrMatrix:
    """Dedicated assembly path for the symmetric (Riesz) special case."""
    if ctx is None:
        ctx = prepare(mesh, cv)
    return _stiffness_from_fluxes(cv, ctx, _RieszFluxes(kx, ky, alpha, beta), backend)


def riesz_coefficient(k: float, order: float) -> float:
    """Two-sided coefficient -k / (2 cos(pi (1 + order) / 2)); positive for k > 0."""
    return -k / (2.0 * math.cos(math.pi * (1.0 + order) / 2.0))


def riesz_to_two_sided(kx: float, ky: float, alpha: float, beta: float):
    """Map symmetric-diffusion coefficients to the four one-sided ones."""
    if kx <= 0 or ky <= 0:
        raise ValueError("symmetric coefficients must be positive")
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("orders must lie in (0, 1)")
    k1 = riesz_coefficient(kx, alpha)
    k3 = riesz_coefficient(ky, beta)
    return k1, k1, k3, k3


def candidate_columns(mesh: Mesh, ctx: AssemblyContext, midpoint) -> np.ndarray:
    """Nodes whose basis can contribute at a face midpoint.

    Bounding-box stabs of the horizontal and vertical lines through the
    midpoint, pruned by exact emptiness of the line restriction. Returns
    sorted global node ids.
    """
    xr, yr = midpoint
    found = set()
    for stab, axis, level in (
        (ctx.y_stab, "horizontal", yr),
        (ctx.x_stab, "vertical", xr),
    ):
        for col in stab.stab(level):
            k = int(ctx.interior[col])
            if k in found:
                continue
            support = fracbasis.support_domain(mesh, k)
            if not fracbasis.line_restriction(mesh, support, axis, level, ctx.graze_tol).empty:
                found.add(k)
    return np.asarray(sorted(found), dtype=np.int64)


def assemble_rhs(problem: ProblemSpec, ctx: AssemblyContext, t: float) -> np.ndarray:
    """Nodal forcing values f(x_i, y_i, t) over interior unknowns."""
    xi, yi = ctx.interior_xy
    f = np.asarray(problem.forcing(xi, yi, t), dtype=np.float64)
    f = np.broadcast_to(f, xi.shape).copy()
    bad = np.where(~np.isfinite(f))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"forcing is not finite at node ({xi[i]:.6g}, {yi[i]:.6g}), t={t:.6g}"
        )
    return f


def step(state: DiscreteState, mass_diag: np.ndarray, M: solver.CsrMatrix,
         problem: ProblemSpec, ctx: AssemblyContext, *, cv: CvGeometry | None = None,
         method: str = "bicgstab", tol: float = 1e-10, maxit: int = 100,
         backend: str | None = None):
    """One backward-Euler step; returns (new state, solve report).

    With time-dependent coefficients the stiffness matrix is reassembled at
    the new time level (requires ``cv``). Non-convergence of the iterative
    solver raises :class:`solver.NonConvergenceError`.
    """
    tau = problem.tau
    t_next = state.t + tau
    if problem.coefficients_time_dependent:
        if cv is None:
            raise ValueError("time-dependent coefficients need the control volume geometry")
        M = assemble_stiffness(ctx.mesh, cv, problem, t_next, ctx, backend)
    f = assemble_rhs(problem, ctx, t_next)
    b = mass_diag * (state.u + tau * f)
    if ctx.n_unknowns == 0:
        return replace(state, t=t_next), solver.SolveReport(0, 0.0, True)
    A0 = solver.diag_minus_scaled(mass_diag, M, tau)
    if method == "dense":
        u_next = solver.dense_solve(A0.toarray(), b)
        report = solver.SolveReport(0, 0.0, True)
    elif method == "bicgstab":
        u_next, report = solver.bicgstab(A0, b, x0=state.u, tol=tol, maxit=maxit)
        if not report.converged:
            raise solver.NonConvergenceError(report)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    return DiscreteState(u=u_next, t=t_next), report
