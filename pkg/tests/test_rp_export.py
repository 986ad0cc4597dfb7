import numpy as np
import pytest

from independent_readers import read_stl_ascii, read_stl_binary
from tracshape.errors import ExportError
from tracshape.fixtures import make_fixture
from tracshape.mesh import extract_boundary, measure
from tracshape.rp import (
    SurfaceModel,
    check_manifold,
    draft_check,
    read_stl,
    surface_mesh,
    surface_volume,
    write_stl,
)


def unit_cube():
    return make_fixture("bar3d", {"L": 1.0, "a": 1.0, "n": 1})


def one_triangle():
    verts = np.array([[[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]])
    return SurfaceModel(verts, np.array([[0.0, 0, 1]]), scale=1.0)


def pyramid45():
    """Square-base pyramid whose four side faces slope at exactly 45 deg."""
    from tracshape.mesh import Mesh, loads_mesh, dumps_mesh
    nodes = np.array([
        [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    elems = np.array([[0, 1, 2, 4], [0, 2, 3, 4]])
    return loads_mesh(dumps_mesh(Mesh(3, nodes, elems)))


def test_cube_surface_axis_aligned_normals():
    surf = surface_mesh(unit_cube())
    assert surf.triangle_count == 12
    assert np.allclose(np.abs(surf.normals).max(axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(surf.normals, axis=1), 1.0, atol=1e-12)


def test_single_tet_gauss_property(reference_tet):
    surf = surface_mesh(reference_tet)
    assert surf.triangle_count == 4
    v = surf.vertices
    area_normals = 0.5 * np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    assert np.abs(area_normals.sum(axis=0)).max() <= 1e-12


def test_closed_surface_gauss_property_lug():
    m = make_fixture("lug3d", {"n": 6})
    surf = surface_mesh(m)
    assert surf.triangle_count == len(extract_boundary(m))
    v = surf.vertices
    area_normals = 0.5 * np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    total_area = np.linalg.norm(area_normals, axis=1).sum()
    assert np.abs(area_normals.sum(axis=0)).max() <= 1e-10 * total_area


@pytest.mark.parametrize("fixture, params", [
    ("bar3d", {"n": 2}),
    ("lug3d", {"n": 6}),
])
def test_surface_volume_matches_measure(fixture, params):
    m = make_fixture(fixture, params)
    surf = surface_mesh(m)
    assert surface_volume(surf) == pytest.approx(measure(m).volume, rel=1e-9)


def test_2d_mesh_not_exportable():
    m = make_fixture("cantilever2d", {"n": 4})
    with pytest.raises(ExportError, match="3D"):
        surface_mesh(m)


def test_binary_stl_one_triangle_is_134_bytes():
    data = write_stl(one_triangle(), format="binary")
    assert len(data) == 134
    assert data[80:84] == b"\x01\x00\x00\x00"
    assert data[:9] == b"tracshape"
    assert all(b == 0x20 for b in data[9:80])


def test_binary_stl_cube_is_684_bytes():
    data = write_stl(surface_mesh(unit_cube()), format="binary")
    assert len(data) == 684


def test_binary_stl_round_trip_independent_reader():
    surf = surface_mesh(make_fixture("lug3d", {"n": 4}))
    data = write_stl(surf, format="binary")
    header, tris = read_stl_binary(data)
    assert len(tris) == surf.triangle_count
    expected = (surf.vertices * surf.scale).astype("<f4")
    got = np.array([t[1] for t in tris], dtype="<f4")
    assert np.array_equal(got, expected)
    assert all(t[2] == 0 for t in tris)  # attribute bytes zero


def test_ascii_stl_round_trip_independent_reader():
    surf = surface_mesh(make_fixture("bar3d", {"n": 2}))
    data = write_stl(surf, format="ascii", name="bar")
    name, tris = read_stl_ascii(data)
    assert name == "bar"
    assert len(tris) == surf.triangle_count
    got = np.array([t[1] for t in tris])
    # 9 significant digits in mm: agreement to 1e-6 mm on O(100 mm) parts
    assert np.abs(got - surf.vertices * surf.scale).max() <= 1e-6


def test_package_reader_round_trip():
    surf = surface_mesh(make_fixture("bar3d", {"n": 2}))
    back = read_stl(write_stl(surf, format="binary"))
    assert back.triangle_count == surf.triangle_count
    assert np.array_equal(back.vertices,
                          (surf.vertices * surf.scale).astype("<f4").astype(float))
    back_a = read_stl(write_stl(surf, format="ascii"))
    assert back_a.triangle_count == surf.triangle_count


def test_export_scale_is_a_pure_multiplier():
    m = make_fixture("bar3d", {"n": 1})
    s1 = surface_mesh(m, scale=1.0)
    s1000 = surface_mesh(m, scale=1000.0)
    a = read_stl(write_stl(s1, format="binary"))
    b = read_stl(write_stl(s1000, format="binary"))
    assert np.array_equal(b.vertices,
                          (a.vertices.astype("<f4") * np.float32(1000.0)).astype(float))
    assert np.array_equal(a.normals, b.normals)


def test_unknown_stl_format():
    with pytest.raises(ExportError, match="unknown STL format"):
        write_stl(one_triangle(), format="step")


def test_manifold_closed_cube():
    rep = check_manifold(surface_mesh(unit_cube()))
    assert rep.watertight
    assert rep.edge_defects == []
    assert rep.winding_consistent
    assert not rep.self_intersection_checked


def test_manifold_missing_triangle_gives_three_defects():
    surf = surface_mesh(unit_cube())
    cut = SurfaceModel(surf.vertices[1:], surf.normals[1:], surf.scale)
    rep = check_manifold(cut)
    assert not rep.watertight
    assert len(rep.edge_defects) == 3
    assert all(count == 1 for _, _, count in rep.edge_defects)


def test_manifold_flipped_winding_detected():
    surf = surface_mesh(unit_cube())
    verts = surf.vertices.copy()
    verts[0] = verts[0, ::-1]
    rep = check_manifold(SurfaceModel(verts, surf.normals, surf.scale))
    assert rep.watertight
    assert not rep.winding_consistent


def test_draft_cube_side_walls_violate():
    rep = draft_check(surface_mesh(unit_cube()), [0.0, 0.0, 1.0], 2.0)
    assert len(rep.violations) == 8
    for idx, angle in rep.violations:
        assert angle < 2.0
    # the flagged faces are exactly the vertical walls
    surf = surface_mesh(unit_cube())
    flagged = {i for i, _ in rep.violations}
    vertical = {i for i in range(12) if abs(surf.normals[i, 2]) < 1e-12}
    assert flagged == vertical


def test_draft_45_degree_pyramid_passes():
    rep = draft_check(surface_mesh(pyramid45()), [0.0, 0.0, 1.0], 2.0)
    assert rep.violations == []


def test_draft_zero_min_angle_is_strict():
    rep = draft_check(surface_mesh(unit_cube()), [0.0, 0.0, 1.0], 0.0)
    assert rep.violations == []


def test_draft_argument_validation():
    surf = surface_mesh(unit_cube())
    with pytest.raises(ExportError, match="unit vector"):
        draft_check(surf, [0.0, 0.0, 2.0], 2.0)
    with pytest.raises(ExportError, match="min_angle"):
        draft_check(surf, [0.0, 0.0, 1.0], 90.0)
