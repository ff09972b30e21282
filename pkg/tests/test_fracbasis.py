import math

import numpy as np
import pytest

from oracles import basis_value_direct, gl_profile_deriv, quad_fd_kernel, random_profile

from cvfrac.fracbasis import (
    LineProfile,
    Side,
    frac_deriv_at,
    line_restriction,
    rl_segment_kernel_left,
    rl_segment_kernel_right,
    support_domain,
)
from cvfrac.mesh import Rectangle, generate_rect_mesh

UNIT_SQUARE = Rectangle(0.0, 1.0, 0.0, 1.0)


# ---------------------------------------------------------------- supports

def test_support_counts(grid22):
    k = 4  # centre node of the 2x2 grid
    sup = support_domain(grid22, k)
    assert sup.elements.size == 6


def test_corner_support_single_element():
    m = generate_rect_mesh(1, 1, UNIT_SQUARE)
    assert support_domain(m, 1).elements.size == 1  # (1, 0) corner


def test_zero_outside_support(grid44):
    sup = support_domain(grid44, 12)
    outside = [t for t in range(grid44.n_triangles) if t not in set(sup.elements)]
    tri = grid44.triangles[outside[0]]
    cx = grid44.vertices[tri, 0].mean()
    cy = grid44.vertices[tri, 1].mean()
    assert basis_value_direct(grid44, 12, cx, cy) == 0.0


# ---------------------------------------------------------- line profiles

def test_profile_through_node_peaks_at_one(grid44):
    k = 12
    x_k, y_k = grid44.vertices[k]
    prof = line_restriction(grid44, support_domain(grid44, k), "horizontal", y_k)
    assert prof.value(x_k) == pytest.approx(1.0, abs=1e-14)
    assert float(np.max(prof.value(np.linspace(-0.2, 1.2, 201)))) <= 1.0 + 1e-12


def test_profile_missing_support_is_empty(grid44):
    sup = support_domain(grid44, 12)
    prof = line_restriction(grid44, sup, "horizontal", 0.9)
    assert prof.empty
    assert frac_deriv_at(prof, 0.5, 0.5, Side.LEFT) == 0.0
    assert frac_deriv_at(prof, 0.5, 0.5, Side.RIGHT) == 0.0


@pytest.mark.parametrize("axis,level", [
    ("horizontal", 0.55), ("horizontal", 0.5), ("horizontal", 0.27),
    ("vertical", 0.43), ("vertical", 0.75),
])
def test_profile_matches_direct_evaluation(grid44, axis, level):
    for k in (12, 13, 17):
        sup = support_domain(grid44, k)
        prof = line_restriction(grid44, sup, axis, level)
        samples = np.linspace(-0.1, 1.1, 50)
        for s in samples:
            x, y = (s, level) if axis == "horizontal" else (level, s)
            assert prof.value(s) == pytest.approx(
                basis_value_direct(grid44, k, x, y), abs=1e-12
            )


def test_profile_pieces_continuous(grid44):
    sup = support_domain(grid44, 12)
    prof = line_restriction(grid44, sup, "horizontal", 0.55)
    for j in range(prof.slopes.size - 1):
        bp = prof.breakpoints[j + 1]
        left = prof.slopes[j] * bp + prof.intercepts[j]
        right = prof.slopes[j + 1] * bp + prof.intercepts[j + 1]
        assert left == pytest.approx(right, abs=1e-12)


# ------------------------------------------------------------ raw kernels

def test_kernel_left_constant():
    # derivative of the constant 1 over [0, x]: x^(-a) / Gamma(1-a)
    assert rl_segment_kernel_left(0.0, 1.0, 0.0, 1.0, 1.0, 0.5) == pytest.approx(
        1.0 / math.sqrt(math.pi), rel=1e-13
    )


def test_kernel_left_linear():
    # derivative of xi over [0, x]: x^(1-a) / Gamma(2-a)
    assert rl_segment_kernel_left(1.0, 0.0, 0.0, 1.0, 1.0, 0.5) == pytest.approx(
        2.0 / math.sqrt(math.pi), rel=1e-13
    )


def test_kernel_right_constant_sign():
    # the -1/Gamma(1-a) prefactor of the right derivative makes the constant
    # case come out positive, mirroring the left one (quadrature confirms)
    got = rl_segment_kernel_right(0.0, 1.0, 0.0, 1.0, 0.0, 0.5)
    assert got == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-13)
    oracle = quad_fd_kernel(0.0, 1.0, 0.5, 1.0, 0.25, 0.5, Side.RIGHT)
    direct = rl_segment_kernel_right(0.0, 1.0, 0.5, 1.0, 0.25, 0.5)
    assert direct == pytest.approx(oracle, rel=1e-6)


def test_kernel_reflection_identity(rng):
    for _ in range(25):
        p, q = rng.normal(size=2)
        s0, s1 = np.sort(rng.uniform(0.0, 1.0, 2))
        if s1 - s0 < 1e-3:
            continue
        x = s1 + rng.uniform(0.01, 1.0)
        alpha = rng.uniform(0.05, 0.95)
        left = rl_segment_kernel_left(p, q, s0, s1, x, alpha)
        right = rl_segment_kernel_right(-p, q, -s1, -s0, -x, alpha)
        assert right == pytest.approx(left, rel=1e-12, abs=1e-12)


def test_kernel_against_quadrature(rng):
    for _ in range(30):
        p, q = rng.normal(size=2)
        s0, s1 = np.sort(rng.uniform(0.0, 1.0, 2))
        if s1 - s0 < 1e-2:
            continue
        alpha = float(rng.uniform(0.1, 0.9))
        x = s1 + float(rng.uniform(0.05, 1.0))
        got = rl_segment_kernel_left(p, q, s0, s1, x, alpha)
        want = quad_fd_kernel(p, q, s0, s1, x, alpha, Side.LEFT)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-9)
        x = s0 - float(rng.uniform(0.05, 1.0))
        got = rl_segment_kernel_right(p, q, s0, s1, x, alpha)
        want = quad_fd_kernel(p, q, s0, s1, x, alpha, Side.RIGHT)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-9)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        rl_segment_kernel_left(0.0, 1.0, 0.0, 2.0, 1.0, 0.5)  # s1 > x
    with pytest.raises(ValueError):
        rl_segment_kernel_left(0.0, 1.0, 0.0, 1.0, 2.0, 1.5)  # alpha out of range
    with pytest.raises(ValueError):
        rl_segment_kernel_right(0.0, 1.0, -1.0, 2.0, 0.0, 0.5)  # s0 < x


def test_kernel_linearity(rng):
    s0, s1, x, alpha = 0.2, 0.7, 1.3, 0.6
    for _ in range(10):
        p1, q1, p2, q2, a, b = rng.normal(size=6)
        lhs = rl_segment_kernel_left(a * p1 + b * p2, a * q1 + b * q2, s0, s1, x, alpha)
        rhs = a * rl_segment_kernel_left(p1, q1, s0, s1, x, alpha) + b * rl_segment_kernel_left(
            p2, q2, s0, s1, x, alpha
        )
        assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13)


def test_alpha_to_zero_limit():
    # constant 1 on [0, x]: value x^(-a)/Gamma(1-a) -> 1 as a -> 0+
    got = rl_segment_kernel_left(0.0, 1.0, 0.0, 1.0, 1.0, 1e-3)
    assert got == pytest.approx(1.0, abs=1e-2)


# ------------------------------------------------------- profile derivative

def test_hat_profile_vs_gl():
    hat = LineProfile.from_samples([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    got = frac_deriv_at(hat, 0.5, 0.75, Side.LEFT)
    want = gl_profile_deriv(hat, 0.5, 0.75, Side.LEFT, h=1e-5)
    assert got == pytest.approx(want, abs=1e-4)


def test_point_right_of_profile_right_side_zero():
    hat = LineProfile.from_samples([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    assert frac_deriv_at(hat, 0.5, 1.5, Side.RIGHT) == 0.0
    assert frac_deriv_at(hat, 0.5, -0.5, Side.LEFT) == 0.0


def test_point_on_breakpoint_is_legal():
    hat = LineProfile.from_samples([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    for side in Side:
        val = frac_deriv_at(hat, 0.5, 0.5, side)
        assert math.isfinite(val)


def test_locality_pieces_beyond_point_ignored():
    base = LineProfile.from_samples([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    extended = LineProfile.from_samples([0.0, 0.5, 1.0, 1.5, 2.0], [0.0, 1.0, 0.0, 0.8, 0.0])
    point = 0.75
    for alpha in (0.3, 0.7):
        assert frac_deriv_at(base, alpha, point, Side.LEFT) == pytest.approx(
            frac_deriv_at(extended, alpha, point, Side.LEFT), rel=1e-14
        )


def test_profile_scaling_linearity():
    xs = [0.0, 0.4, 0.9, 1.3]
    vals = np.array([0.0, 0.7, 0.3, 0.0])
    prof = LineProfile.from_samples(xs, vals)
    scaled = LineProfile.from_samples(xs, 2.5 * vals)
    for side in Side:
        a = frac_deriv_at(prof, 0.45, 0.8, side)
        b = frac_deriv_at(scaled, 0.45, 0.8, side)
        assert b == pytest.approx(2.5 * a, rel=1e-13)


@pytest.mark.parametrize("alpha", [0.3, 0.5])
def test_continuity_across_breakpoint(alpha):
    # the derivative is Hoelder-(1-alpha) at a kink; check continuity with a
    # tolerance scaled accordingly
    hat = LineProfile.from_samples([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    eps = 1e-9
    at = frac_deriv_at(hat, alpha, 0.5, Side.LEFT)
    lo = frac_deriv_at(hat, alpha, 0.5 - eps, Side.LEFT)
    hi = frac_deriv_at(hat, alpha, 0.5 + eps, Side.LEFT)
    bound = 10.0 * eps ** (1.0 - alpha)
    assert abs(at - lo) <= bound
    assert abs(at - hi) <= bound


def test_random_profiles_vs_gl(rng):
    # smaller copy of acceptance criterion 1, kept here for fast feedback
    for _ in range(10):
        prof = random_profile(rng)
        point = float(rng.uniform(prof.breakpoints[0] - 0.1, prof.breakpoints[-1] + 0.3))
        for alpha in (0.4, 0.8):
            for side in Side:
                got = frac_deriv_at(prof, alpha, point, side)
                want = gl_profile_deriv(prof, alpha, point, side)
                assert got == pytest.approx(want, abs=1e-4)
