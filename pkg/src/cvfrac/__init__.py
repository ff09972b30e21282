"""Control volume method for two-sided space-fractional diffusion equations
with variable coefficients on convex domains, discretised on unstructured
triangular meshes with a barycentric dual and marched with backward Euler.
"""

from .assembly import (
    DiscreteState,
    ProblemSpec,
    assemble_mass,
    assemble_rhs,
    assemble_stiffness,
    assemble_stiffness_riesz,
    candidate_columns,
    prepare,
    riesz_to_two_sided,
    step,
)
from .cvgeom import ControlFace, CvGeometry, build_control_volumes
from .fracbasis import (
    LineProfile,
    Side,
    SupportDomain,
    frac_deriv_at,
    line_restriction,
    rl_segment_kernel_left,
    rl_segment_kernel_right,
    support_domain,
)
from .harness import (
    build_preset,
    convergence_order,
    emit_vtk,
    error_norms,
    p_helper,
    rl_monomial,
    run_convergence,
    run_single,
)
from .kernels import backend_name
from .mesh import (
    Disk,
    Mesh,
    MeshFileOnly,
    Rectangle,
    generate_disk_mesh,
    generate_rect_mesh,
    load_mesh,
    mesh_h,
    save_mesh,
)
from .solver import CsrMatrix, SolveReport, bicgstab, dense_solve, density, spmv

__version__ = "0.1.0"
