"""Benchmark problems, error norms, convergence studies and file output.

Four manufactured-solution presets are shipped: three variable-coefficient
cases on the unit square (linear, quadratic and exponential coefficients,
exact solution ``(t^2+1) x^2 (1-x)^2 y^2 (1-y)^2``) and a symmetric constant
coefficient case on the unit disk (exact solution ``exp(-t) (x^2+y^2-1)^2``).
The forcing terms are built from closed-form fractional derivatives of the
polynomial factors; the disk case uses monomial derivatives with limits on
the circle itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import rgamma

from . import assembly, solver
from .assembly import AssemblyContext, DiscreteState, ProblemSpec, prepare
from .cvgeom import CvGeometry, build_control_volumes
from .fracbasis import Side
from .mesh import Disk, Mesh, Rectangle, generate_disk_mesh, generate_rect_mesh, mesh_h

__all__ = [
    "PRESET_NAMES",
    "BuiltPreset",
    "ConvergenceRow",
    "SolveResult",
    "p_helper",
    "rl_monomial",
    "build_preset",
    "preset_mesh",
    "error_norms",
    "convergence_order",
    "run_single",
    "run_convergence",
    "density_study",
    "emit_vtk",
    "full_field",
    "write_convergence_csv",
    "write_density_csv",
]

#: preset name -> default (alpha, beta)
PRESET_NAMES = {
    "example1-linear": (0.3, 0.5),
    "example1-quadratic": (0.7, 0.9),
    "example1-exponential": (0.7, 0.9),
    "example2-riesz-disk": (0.8, 0.8),
}


def p_helper(z, r):
    """Fractional derivative of z^2 (1-z)^2 expanded in shifted monomials.

    Evaluates ``G(3)/G(3-r) z^(2-r) - 2 G(4)/G(4-r) z^(3-r)
    + G(5)/G(5-r) z^(4-r)`` for orders r in (0,1) or (1,2), z >= 0.
    """
    if not (0.0 < r < 1.0 or 1.0 < r < 2.0):
        raise ValueError(f"order must lie in (0,1) or (1,2), got {r}")
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    out = (
        math.gamma(3.0) * rgamma(3.0 - r) * z ** (2.0 - r)
        - 2.0 * math.gamma(4.0) * rgamma(4.0 - r) * z ** (3.0 - r)
        + math.gamma(5.0) * rgamma(5.0 - r) * z ** (4.0 - r)
    )
    return out if out.ndim else float(out)


def rl_monomial(n, limit, mu, x, side: Side):
    """Fractional derivative of x^n with a shifted limit, order mu in (1, 2).

    Expands ``x^n`` around the limit and differentiates term by term; the
    left version needs x > limit, the right one x < limit. Vectorised over
    ``x`` and ``limit``.
    """
    if not isinstance(n, (int, np.integer)) or not 0 <= n <= 4:
        raise ValueError(f"monomial degree must be an integer in [0, 4], got {n}")
    if not 1.0 < mu < 2.0:
        raise ValueError(f"order must lie in (1, 2), got {mu}")
    limit = np.asarray(limit, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    s = x - limit if side is Side.LEFT else limit - x
    if np.any(s <= 0.0):
        raise ValueError("evaluation point must lie strictly on the differentiation side")
    acc = np.zeros(np.broadcast(limit, x).shape)
    for m in range(int(n) + 1):
        coef = math.comb(int(n), m) * math.gamma(m + 1.0) * rgamma(m + 1.0 - mu)
        if side is Side.RIGHT and m % 2 == 1:
            coef = -coef
        acc = acc + coef * limit ** (int(n) - m) * s ** (m - mu)
    return acc if acc.ndim else float(acc)


@dataclass(frozen=True)
class BuiltPreset:
    """A preset instantiated on a mesh, with everything needed for audits."""

    name: str
    mesh: Mesh
    spec: ProblemSpec
    exact: Callable
    exact_dt: Callable
    k_derivs: tuple  # (dK1/dx, dK2/dx, dK3/dy, dK4/dy), each (x, y, t) -> value


def _example1_pieces(case: str):
    if case == "linear":
        k = (
            lambda x, y, t: 2.0 - x,
            lambda x, y, t: 2.0 + x,
            lambda x, y, t: 2.0 - y,
            lambda x, y, t: 2.0 + y,
        )
        dk = (
            lambda x, y, t: -1.0,
            lambda x, y, t: 1.0,
            lambda x, y, t: -1.0,
            lambda x, y, t: 1.0,
        )
    elif case == "quadratic":
        k = (
            lambda x, y, t: 2.0 - x * x,
            lambda x, y, t: 2.0 + x * x,
            lambda x, y, t: 2.0 - y * y,
            lambda x, y, t: 2.0 + y * y,
        )
        dk = (
            lambda x, y, t: -2.0 * x,
            lambda x, y, t: 2.0 * x,
            lambda x, y, t: -2.0 * y,
            lambda x, y, t: 2.0 * y,
        )
    else:  # exponential
        k = (
            lambda x, y, t: 3.0 - np.exp(x),
            lambda x, y, t: 3.0 + np.exp(x),
            lambda x, y, t: 3.0 - np.exp(y),
            lambda x, y, t: 3.0 + np.exp(y),
        )
        dk = (
            lambda x, y, t: -np.exp(x),
            lambda x, y, t: np.exp(x),
            lambda x, y, t: -np.exp(y),
            lambda x, y, t: np.exp(y),
        )
    return k, dk


def _example1_exact(x, y, t):
    return (t * t + 1.0) * x * x * (1.0 - x) ** 2 * y * y * (1.0 - y) ** 2


def _example1_forcing(alpha, beta, k, dk):
    k1, k2, k3, k4 = k
    dk1, dk2, dk3, dk4 = dk

    def forcing(x, y, t):
        X = x * x * (1.0 - x) ** 2
        Y = y * y * (1.0 - y) ** 2
        g = t * t + 1.0
        bx = (
            dk1(x, y, t) * p_helper(x, alpha)
            + k1(x, y, t) * p_helper(x, 1.0 + alpha)
            - dk2(x, y, t) * p_helper(1.0 - x, alpha)
            + k2(x, y, t) * p_helper(1.0 - x, 1.0 + alpha)
        )
        by = (
            dk3(x, y, t) * p_helper(y, beta)
            + k3(x, y, t) * p_helper(y, 1.0 + beta)
            - dk4(x, y, t) * p_helper(1.0 - y, beta)
            + k4(x, y, t) * p_helper(1.0 - y, 1.0 + beta)
        )
        return 2.0 * t * X * Y - bx * Y * g - by * X * g

    return forcing


def _example2_exact(x, y, t):
    return np.exp(-t) * (x * x + y * y - 1.0) ** 2


def _example2_forcing(alpha, beta):
    mux = 1.0 + alpha
    muy = 1.0 + beta
    cosx = 2.0 * math.cos(math.pi * (1.0 + alpha) / 2.0)
    cosy = 2.0 * math.cos(math.pi * (1.0 + beta) / 2.0)

    def one_direction(u, v, mu):
        # fractional content along the u axis at height v, limits on the circle
        lo = -np.sqrt(1.0 - v * v)
        hi = np.sqrt(1.0 - v * v)
        s4 = rl_monomial(4, lo, mu, u, Side.LEFT) + rl_monomial(4, hi, mu, u, Side.RIGHT)
        s2 = rl_monomial(2, lo, mu, u, Side.LEFT) + rl_monomial(2, hi, mu, u, Side.RIGHT)
        s0 = rl_monomial(0, lo, mu, u, Side.LEFT) + rl_monomial(0, hi, mu, u, Side.RIGHT)
        return s4 + (2.0 * v * v - 2.0) * s2 + (v * v - 1.0) ** 2 * s0

    def forcing(x, y, t):
        w = x * x + y * y - 1.0
        e = np.exp(-t)
        return (
            -e * w * w
            + e / cosx * one_direction(x, y, mux)
            + e / cosy * one_direction(y, x, muy)
        )

    return forcing


def preset_mesh(name: str, h_target: float) -> Mesh:
    """Deterministic mesh for a preset with maximum edge near h_target."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r} (choose from {sorted(PRESET_NAMES)})")
    if name == "example2-riesz-disk":
        return generate_disk_mesh(h_target, Disk(0.0, 0.0, 1.0))
    n = max(1, math.ceil(math.sqrt(2.0) / h_target))
    return generate_rect_mesh(n, n, Rectangle(0.0, 1.0, 0.0, 1.0))


def build_preset(name: str, h_target: float, tau: float, alpha=None, beta=None,
                 t_final: float = 1.0) -> BuiltPreset:
    """Instantiate a named preset: mesh, problem data and exact solution."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r} (choose from {sorted(PRESET_NAMES)})")
    def_alpha, def_beta = PRESET_NAMES[name]
    alpha = def_alpha if alpha is None else float(alpha)
    beta = def_beta if beta is None else float(beta)
    mesh = preset_mesh(name, h_target)

    if name == "example2-riesz-disk":
        k1, k2, k3, k4 = assembly.riesz_to_two_sided(1.0, 1.0, alpha, beta)
        zero = lambda x, y, t: 0.0
        spec = ProblemSpec(
            alpha=alpha,
            beta=beta,
            K1=lambda x, y, t: k1,
            K2=lambda x, y, t: k2,
            K3=lambda x, y, t: k3,
            K4=lambda x, y, t: k4,
            forcing=_example2_forcing(alpha, beta),
            initial=lambda x, y: _example2_exact(x, y, 0.0),
            domain=Disk(0.0, 0.0, 1.0),
            t_final=t_final,
            tau=tau,
        )
        exact = _example2_exact
        exact_dt = lambda x, y, t: -_example2_exact(x, y, t)
        k_derivs = (zero, zero, zero, zero)
    else:
        case = name.split("-", 1)[1]
        k, dk = _example1_pieces(case)
        spec = ProblemSpec(
            alpha=alpha,
            beta=beta,
            K1=k[0], K2=k[1], K3=k[2], K4=k[3],
            forcing=_example1_forcing(alpha, beta, k, dk),
            initial=lambda x, y: _example1_exact(x, y, 0.0),
            domain=Rectangle(0.0, 1.0, 0.0, 1.0),
            t_final=t_final,
            tau=tau,
        )
        exact = _example1_exact
        exact_dt = lambda x, y, t: 2.0 * t * x * x * (1.0 - x) ** 2 * y * y * (1.0 - y) ** 2
        k_derivs = dk

    return BuiltPreset(name=name, mesh=mesh, spec=spec, exact=exact,
                       exact_dt=exact_dt, k_derivs=k_derivs)


def error_norms(u_numeric, exact, mesh: Mesh, cv: CvGeometry, t: float,
                ctx: AssemblyContext | None = None):
    """(l2, linf) nodal errors over interior nodes at time t.

    The discrete L2 norm weights each nodal error by its control volume
    area, the natural norm for this discretisation.
    """
    ids = ctx.interior if ctx is not None else assembly.interior_order(mesh)
    if ids.size == 0:
        return 0.0, 0.0
    xi = mesh.vertices[ids, 0]
    yi = mesh.vertices[ids, 1]
    err = np.asarray(u_numeric, dtype=np.float64) - exact(xi, yi, t)
    linf = float(np.abs(err).max())
    l2 = float(np.sqrt(np.sum(cv.cv_area[ids] * err * err)))
    return l2, linf


def convergence_order(e1: float, h1: float, e2: float, h2: float) -> float:
    """log(e1/e2) / log(h1/h2)."""
    if min(e1, h1, e2, h2) <= 0.0:
        raise ValueError("errors and mesh sizes must be positive")
    if h1 == h2:
        raise ValueError("mesh sizes must differ")
    return math.log(e1 / e2) / math.log(h1 / h2)


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a single preset run."""

    built: BuiltPreset
    cv: CvGeometry
    ctx: AssemblyContext
    state: DiscreteState
    l2_error: float
    linf_error: float
    iters_avg: float
    wall_seconds: float


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    l2_error: float
    linf_error: float
    order_l2: float | None
    order_linf: float | None
    iters_avg: float
    wall_seconds: float
    n_unknowns: int


def run_single(name: str, h_target: float, tau: float, alpha=None, beta=None,
               t_final: float = 1.0, method: str = "bicgstab",
               backend: str | None = None, tol: float = 1e-10,
               maxit: int = 100) -> SolveResult:
    """Build, assemble and march one preset to its final time."""
    built = build_preset(name, h_target, tau, alpha, beta, t_final)
    start = time.perf_counter()
    cv = build_control_volumes(built.mesh)
    ctx = prepare(built.mesh, cv)
    mass = assembly.assemble_mass(cv, ctx)
    M = assemble_preset_stiffness(built, cv, ctx, backend)
    xi, yi = ctx.interior_xy
    u0 = np.broadcast_to(np.asarray(built.spec.initial(xi, yi), dtype=np.float64), xi.shape)
    state = DiscreteState(u=u0.copy(), t=0.0)
    n_steps = max(1, round(built.spec.t_final / tau))
    total_iters = 0
    for _ in range(n_steps):
        state, report = assembly.step(state, mass, M, built.spec, ctx, cv=cv,
                                      method=method, tol=tol, maxit=maxit, backend=backend)
        total_iters += report.iterations
    wall = time.perf_counter() - start
    l2, linf = error_norms(state.u, built.exact, built.mesh, cv, state.t, ctx)
    return SolveResult(built=built, cv=cv, ctx=ctx, state=state,
                       l2_error=l2, linf_error=linf,
                       iters_avg=total_iters / n_steps, wall_seconds=wall)


def assemble_preset_stiffness(built: BuiltPreset, cv, ctx, backend=None):
    """Stiffness matrix of a built preset (coefficients are time independent)."""
    return assembly.assemble_stiffness(built.mesh, cv, built.spec, built.spec.tau,
                                       ctx, backend)


def run_convergence(name: str, h_list, tau: float, alpha=None, beta=None,
                    t_final: float = 1.0, method: str = "bicgstab",
                    backend: str | None = None, tol: float = 1e-10,
                    maxit: int = 100) -> list[ConvergenceRow]:
    """March the preset on successively finer meshes and tabulate orders."""
    h_list = list(h_list)
    if len(h_list) < 2:
        raise ValueError("need at least two mesh levels")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("mesh levels must be strictly decreasing")
    rows: list[ConvergenceRow] = []
    for h_target in h_list:
        res = run_single(name, h_target, tau, alpha, beta, t_final, method, backend,
                         tol, maxit)
        h = mesh_h(res.built.mesh)
        order_l2 = order_linf = None
        if rows:
            prev = rows[-1]
            order_l2 = convergence_order(prev.l2_error, prev.h, res.l2_error, h)
            order_linf = convergence_order(prev.linf_error, prev.h, res.linf_error, h)
        rows.append(ConvergenceRow(
            h=h, l2_error=res.l2_error, linf_error=res.linf_error,
            order_l2=order_l2, order_linf=order_linf,
            iters_avg=res.iters_avg, wall_seconds=res.wall_seconds,
            n_unknowns=res.ctx.n_unknowns,
        ))
    return rows


def density_study(name: str, h_list, alpha=None, beta=None, backend=None):
    """Stiffness size and density per mesh level: rows (h, size, nnz, density%)."""
    out = []
    for h_target in h_list:
        built = build_preset(name, h_target, tau=1e-3, alpha=alpha, beta=beta)
        cv = build_control_volumes(built.mesh)
        ctx = prepare(built.mesh, cv)
        M = assemble_preset_stiffness(built, cv, ctx, backend)
        out.append((mesh_h(built.mesh), ctx.n_unknowns, M.nnz, solver.density(M)))
    return out


def full_field(mesh: Mesh, ctx: AssemblyContext, u_interior) -> np.ndarray:
    """Expand interior unknowns to a per-vertex field, zero on the boundary."""
    out = np.zeros(mesh.n_vertices)
    out[ctx.interior] = u_interior
    return out


def emit_vtk(mesh: Mesh, values, path, field_name: str = "u") -> None:
    """Legacy ASCII VTK unstructured grid with one point scalar field."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("field length must equal the vertex count")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("cvfrac solution field\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0.0\n")
        fh.write(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}\n")
        for i0, i1, i2 in mesh.triangles:
            fh.write(f"3 {i0} {i1} {i2}\n")
        fh.write(f"CELL_TYPES {mesh.n_triangles}\n")
        for _ in range(mesh.n_triangles):
            fh.write("5\n")
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        fh.write(f"SCALARS {field_name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in values:
            fh.write(f"{v:.17g}\n")


def _fmt_order(order) -> str:
    return "" if order is None else f"{order:.2f}"


def write_convergence_csv(rows, path) -> None:
    """CSV with columns h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds\n")
        for r in rows:
            fh.write(
                f"{r.h:.4E},{r.l2_error:.4E},{_fmt_order(r.order_l2)},"
                f"{r.linf_error:.4E},{_fmt_order(r.order_linf)},"
                f"{r.iters_avg:.2f},{r.wall_seconds:.3f}\n"
            )


def write_density_csv(rows, path) -> None:
    """CSV with columns h,size,nnz,density_pct."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("h,size,nnz,density_pct\n")
        for h, size, nnz, dens in rows:
            fh.write(f"{h:.4E},{size},{nnz},{dens:.3f}\n")
