"""Command line interface.

Subcommands: ``solve``, ``convergence``, ``density``, ``mesh-info`` and
``bench``. Exit codes: 0 success, 2 solver non-convergence, 3 input or
parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import assembly, harness, kernels, solver
from .cvgeom import build_control_volumes
from .mesh import MeshFormatError, MeshInvariantError, load_mesh, mesh_h

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 2
EXIT_BAD_INPUT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_BAD_INPUT)


def _parse_h_levels(text):
    try:
        levels = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"bad h level list {text!r}") from None
    if len(levels) < 2:
        raise ValueError("need at least two comma-separated h levels")
    return levels


def _build_parser():
    parser = _Parser(prog="cvfrac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--alpha", type=float, default=None, help="x-direction order in (0,1)")
        p.add_argument("--beta", type=float, default=None, help="y-direction order in (0,1)")
        p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")

    p = sub.add_parser("solve", help="march one preset to its final time")
    p.add_argument("--preset", required=True, choices=sorted(harness.PRESET_NAMES))
    p.add_argument("--h", type=float, required=True, help="target maximum edge length")
    p.add_argument("--tau", type=float, required=True, help="time step")
    p.add_argument("--t-final", type=float, default=1.0)
    add_common(p)
    p.add_argument("--solver", choices=["bicgstab", "dense"], default="bicgstab")
    p.add_argument("--vtk", default=None, help="write the final field as legacy VTK")
    p.add_argument("--csv", default=None, help="write a one-row result CSV")

    p = sub.add_parser("convergence", help="error/order study over mesh levels")
    p.add_argument("--preset", required=True, choices=sorted(harness.PRESET_NAMES))
    p.add_argument("--h-levels", required=True, help="comma separated, strictly decreasing")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--t-final", type=float, default=1.0)
    add_common(p)
    p.add_argument("--solver", choices=["bicgstab", "dense"], default="bicgstab")
    p.add_argument("--csv", default=None)

    p = sub.add_parser("density", help="stiffness sparsity study over mesh levels")
    p.add_argument("--preset", required=True, choices=sorted(harness.PRESET_NAMES))
    p.add_argument("--h-levels", required=True)
    add_common(p)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("mesh-info", help="print mesh statistics")
    p.add_argument("target", help="mesh file path, or preset spec '<name>[:h]'")

    p = sub.add_parser("bench", help="time the assembly kernels on both backends")
    p.add_argument("--preset", choices=sorted(harness.PRESET_NAMES), default="example1-linear")
    p.add_argument("--h", type=float, default=0.15)
    p.add_argument("--repeats", type=int, default=3)
    return parser


def _norm_backend(name):
    return None if name == "auto" else name


def cmd_solve(args) -> int:
    res = harness.run_single(
        args.preset, args.h, args.tau, args.alpha, args.beta,
        t_final=args.t_final, method=args.solver, backend=_norm_backend(args.backend),
    )
    h = mesh_h(res.built.mesh)
    print(f"preset:      {args.preset}")
    print(f"mesh h:      {h:.4E}  ({res.ctx.n_unknowns} unknowns)")
    print(f"L2 error:    {res.l2_error:.4E}")
    print(f"Linf error:  {res.linf_error:.4E}")
    print(f"iters avg:   {res.iters_avg:.2f}")
    print(f"wall:        {res.wall_seconds:.3f}s")
    if args.vtk:
        harness.emit_vtk(res.built.mesh, harness.full_field(res.built.mesh, res.ctx, res.state.u), args.vtk)
        print(f"wrote {args.vtk}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("h,l2_error,linf_error,iters_avg,wall_seconds\n")
            fh.write(f"{h:.4E},{res.l2_error:.4E},{res.linf_error:.4E},"
                     f"{res.iters_avg:.2f},{res.wall_seconds:.3f}\n")
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    levels = _parse_h_levels(args.h_levels)
    rows = harness.run_convergence(
        args.preset, levels, args.tau, args.alpha, args.beta,
        t_final=args.t_final, method=args.solver, backend=_norm_backend(args.backend),
    )
    print(f"{'h':>12} {'L2 error':>12} {'order':>6} {'Linf error':>12} {'order':>6} {'iters':>6} {'wall[s]':>9}")
    for r in rows:
        o2 = f"{r.order_l2:.2f}" if r.order_l2 is not None else "--"
        oi = f"{r.order_linf:.2f}" if r.order_linf is not None else "--"
        print(f"{r.h:>12.4E} {r.l2_error:>12.4E} {o2:>6} {r.linf_error:>12.4E} "
              f"{oi:>6} {r.iters_avg:>6.2f} {r.wall_seconds:>9.3f}")
    if args.csv:
        harness.write_convergence_csv(rows, args.csv)
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_density(args) -> int:
    levels = _parse_h_levels(args.h_levels)
    rows = harness.density_study(args.preset, levels, args.alpha, args.beta,
                                 backend=_norm_backend(args.backend))
    print(f"{'h':>12} {'size':>8} {'nnz':>10} {'density':>9}")
    for h, size, nnz, dens in rows:
        print(f"{h:>12.4E} {size:>8} {nnz:>10} {dens:>8.3f}%")
    if args.csv:
        harness.write_density_csv(rows, args.csv)
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    target = args.target
    if os.path.exists(target):
        mesh = load_mesh(target)
    else:
        name, _, h_text = target.partition(":")
        if name not in harness.PRESET_NAMES:
            raise ValueError(f"{target!r} is neither a file nor a preset spec '<name>[:h]'")
        h_target = float(h_text) if h_text else 0.3
        mesh = harness.preset_mesh(name, h_target)
    cv = build_control_volumes(mesh)
    print(f"interior nodes (N_p): {mesh.n_interior}")
    print(f"total vertices:       {mesh.n_vertices}")
    print(f"triangles (N_e):      {mesh.n_triangles}")
    print(f"mesh h:               {mesh_h(mesh):.4E}")
    print(f"total CV area:        {cv.cv_area.sum():.12g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    built = harness.build_preset(args.preset, args.h, tau=1e-3)
    cv = build_control_volumes(built.mesh)
    ctx = assembly.prepare(built.mesh, cv)
    print(f"preset {args.preset}, h={mesh_h(built.mesh):.4E}, "
          f"{ctx.n_unknowns} unknowns, {cv.n_faces} control faces")
    timings = {}
    reference = None
    for backend in kernels.available_backends():
        best = float("inf")
        M = None
        for _ in range(max(1, args.repeats)):
            start = time.perf_counter()
            M = harness.assemble_preset_stiffness(built, cv, ctx, backend)
            best = min(best, time.perf_counter() - start)
        timings[backend] = best
        if reference is None:
            reference = M
        else:
            same = (np.array_equal(reference.col_indices, M.col_indices)
                    and np.allclose(reference.values, M.values, rtol=1e-12, atol=1e-14))
            print(f"backend agreement: {'ok' if same else 'MISMATCH'}")
        print(f"{backend:>9}: {best:.3f}s per stiffness assembly")
    if "compiled" in timings and "python" in timings:
        print(f"speedup (python/compiled): {timings['python'] / timings['compiled']:.1f}x")
    else:
        print("compiled extension not built; only the python backend was timed")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "convergence": cmd_convergence,
        "density": cmd_density,
        "mesh-info": cmd_mesh_info,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except solver.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (MeshFormatError, MeshInvariantError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
