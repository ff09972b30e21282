import math

import numpy as np
import pytest

from cvfrac.mesh import (
    BOUNDARY,
    INTERIOR,
    Disk,
    MeshFormatError,
    MeshInvariantError,
    Rectangle,
    generate_disk_mesh,
    generate_rect_mesh,
    interior_nodes,
    load_mesh,
    mesh_h,
    save_mesh,
    triangle_areas,
)

UNIT_SQUARE = Rectangle(0.0, 1.0, 0.0, 1.0)
UNIT_DISK = Disk(0.0, 0.0, 1.0)


def test_rect_1x1_all_boundary():
    m = generate_rect_mesh(1, 1, UNIT_SQUARE)
    assert m.n_vertices == 4
    assert m.n_triangles == 2
    assert m.n_interior == 0


def test_rect_2x2_combinatorics():
    m = generate_rect_mesh(2, 2, UNIT_SQUARE)
    assert m.n_vertices == 9
    assert m.n_triangles == 8
    ids = interior_nodes(m)
    assert ids.size == 1
    np.testing.assert_allclose(m.vertices[ids[0]], [0.5, 0.5])


@pytest.mark.parametrize("n,expected", [(1, math.sqrt(2)), (2, math.sqrt(2) / 2), (4, math.sqrt(2) / 4)])
def test_rect_mesh_h(n, expected):
    m = generate_rect_mesh(n, n, UNIT_SQUARE)
    assert mesh_h(m) == pytest.approx(expected, rel=1e-14)


def test_rect_area_exact():
    rect = Rectangle(-1.0, 2.5, 0.5, 2.0)
    m = generate_rect_mesh(3, 5, rect)
    assert triangle_areas(m).sum() == pytest.approx(rect.area, rel=1e-12)


def test_rect_all_ccw():
    m = generate_rect_mesh(3, 4, UNIT_SQUARE)
    assert np.all(triangle_areas(m) > 0)


def test_disk_boundary_on_circle():
    m = generate_disk_mesh(0.6, UNIT_DISK)
    bnd = np.where(m.node_class == BOUNDARY)[0]
    r = np.hypot(m.vertices[bnd, 0], m.vertices[bnd, 1])
    assert np.abs(r - 1.0).max() <= 1e-12


def test_disk_area_within_polygon_bounds():
    m = generate_disk_mesh(0.3, UNIT_DISK)
    total = triangle_areas(m).sum()
    assert 0.95 * math.pi <= total <= math.pi


def test_disk_h_contract():
    # derived bound: measured h stays below 1.25 * target on a fine mesh
    m = generate_disk_mesh(0.1, UNIT_DISK)
    assert mesh_h(m) <= 0.125


@pytest.mark.parametrize("target", [0.6, 0.3, 0.15, 0.075])
def test_disk_h_generic(target):
    m = generate_disk_mesh(target, UNIT_DISK)
    assert mesh_h(m) <= 1.25 * target


def test_disk_needs_room_for_a_ring():
    with pytest.raises(ValueError):
        generate_disk_mesh(1.5, UNIT_DISK)


def test_mesh_h_matches_edge_scan():
    m = generate_disk_mesh(0.3, UNIT_DISK)
    best = 0.0
    for tri in m.triangles:
        for i, j in ((0, 1), (1, 2), (2, 0)):
            d = m.vertices[tri[i]] - m.vertices[tri[j]]
            best = max(best, float(np.hypot(d[0], d[1])))
    assert mesh_h(m) == pytest.approx(best, rel=0, abs=0)


def test_generators_deterministic():
    a = generate_disk_mesh(0.22, UNIT_DISK)
    b = generate_disk_mesh(0.22, UNIT_DISK)
    assert a.vertices.tobytes() == b.vertices.tobytes()
    assert a.triangles.tobytes() == b.triangles.tobytes()
    c = generate_rect_mesh(5, 3, UNIT_SQUARE)
    d = generate_rect_mesh(5, 3, UNIT_SQUARE)
    assert c.vertices.tobytes() == d.vertices.tobytes()
    assert c.triangles.tobytes() == d.triangles.tobytes()


def test_interior_fan_cycles(grid44):
    # every interior node's incident triangles chain into one closed fan
    tris = grid44.triangles
    for k in interior_nodes(grid44):
        incident = [t for t in range(len(tris)) if k in tris[t]]
        nxt = {}
        for t in incident:
            tri = tris[t]
            j = int(np.where(tri == k)[0][0])
            nxt[int(tri[(j + 1) % 3])] = int(tri[(j + 2) % 3])
        start = next(iter(nxt))
        cur, count = start, 0
        while True:
            cur = nxt[cur]
            count += 1
            if cur == start:
                break
        assert count == len(incident)


def test_save_load_roundtrip(tmp_path):
    m = generate_rect_mesh(2, 2, UNIT_SQUARE)
    path = tmp_path / "grid.mesh"
    save_mesh(m, path)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.node_class, m.node_class)


def test_load_repairs_clockwise(tmp_path):
    path = tmp_path / "cw.mesh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\n")
    m = load_mesh(path)
    assert triangle_areas(m)[0] > 0
    assert sorted(m.triangles[0]) == [0, 1, 2]


def test_load_dangling_index_names_triangle(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\n")
    with pytest.raises(MeshInvariantError, match="triangle 0"):
        load_mesh(path)


def test_load_reports_line_numbers(tmp_path):
    path = tmp_path / "garbled.mesh"
    path.write_text("nodes 2\n0 0\nnot-a-number 1\ntriangles 0\n")
    with pytest.raises(MeshFormatError, match="line 3"):
        load_mesh(path)


def test_load_allows_comments(tmp_path):
    path = tmp_path / "commented.mesh"
    path.write_text(
        "# header comment\nnodes 3\n0 0  # origin\n1 0\n0 1\ntriangles 1\n0 1 2\n"
    )
    m = load_mesh(path)
    assert m.n_vertices == 3


def test_boundary_classification_from_adjacency():
    m = generate_rect_mesh(3, 3, UNIT_SQUARE)
    verts = m.vertices
    on_rim = (
        np.isclose(verts[:, 0], 0) | np.isclose(verts[:, 0], 1)
        | np.isclose(verts[:, 1], 0) | np.isclose(verts[:, 1], 1)
    )
    np.testing.assert_array_equal(m.node_class == BOUNDARY, on_rim)
    assert np.all((m.node_class == INTERIOR) | (m.node_class == BOUNDARY))
