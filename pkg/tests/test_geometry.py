import numpy as np
import pytest

from fraclap.errors import MeshError
from fraclap.geometry import (
    BoundaryMesh,
    Panel,
    distance_to_boundary,
    mesh_circle,
    mesh_polygon,
    panel_distances,
    read_mesh,
    refine,
    write_mesh,
)

from conftest import ELL, SQUARE


def shoelace(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def test_panel_properties():
    p = Panel(np.array([1.0, 2.0]), np.array([4.0, 6.0]))
    assert p.h == 5.0
    assert np.allclose(p.midpoint, [2.5, 4.0])
    assert np.allclose(p.tangent, [0.6, 0.8])


def test_circle_square_case():
    mesh = mesh_circle(4, radius=1.0)
    assert np.allclose(mesh.vertices, [(1, 0), (0, 1), (-1, 0), (0, -1)], atol=1e-15)
    assert np.allclose(mesh.lengths, np.sqrt(2.0))


@pytest.mark.parametrize("n", [3, 7, 64, 257])
def test_circle_perimeter_and_uniformity(n):
    mesh = mesh_circle(n, radius=2.0)
    assert mesh.n_panels == n
    expected = 2.0 * 2.0 * np.sin(np.pi / n)
    assert np.allclose(mesh.lengths, expected, rtol=1e-14)
    assert abs(mesh.lengths.sum() - n * expected) < 1e-12


def test_circle_rejects_bad_arguments():
    with pytest.raises(MeshError):
        mesh_circle(2)
    with pytest.raises(MeshError):
        mesh_circle(16, radius=0.0)


def test_polygon_one_panel_per_edge_default():
    mesh = mesh_polygon(SQUARE)
    assert mesh.n_panels == 4
    assert abs(mesh.lengths.sum() - 4.0) < 1e-15
    ell = mesh_polygon(ELL)
    assert ell.n_panels == 6
    assert abs(ell.lengths.sum() - 8.0) < 1e-15


def test_polygon_clockwise_input_normalized():
    ccw = mesh_polygon(SQUARE)
    cw = mesh_polygon(SQUARE[::-1][-1:] + SQUARE[::-1][:-1])  # same start corner, cw order
    assert np.array_equal(ccw.vertices, cw.vertices)
    assert ccw.mesh_hash == cw.mesh_hash


def test_polygon_panel_apportionment():
    # 2x1 rectangle, 12 panels: long edges get twice the panels of short ones
    rect = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)]
    mesh = mesh_polygon(rect, 12)
    assert mesh.n_panels == 12
    assert np.allclose(mesh.lengths, 0.5)
    # corner points survive as vertices
    for corner in rect:
        assert np.min(np.linalg.norm(mesh.vertices - corner, axis=1)) < 1e-15


def test_polygon_rejects_degenerate_input():
    with pytest.raises(MeshError):
        mesh_polygon([(0, 0), (1, 0)])
    with pytest.raises(MeshError):
        mesh_polygon([(0, 0), (1, 0), (1, 0), (0, 1)])
    with pytest.raises(MeshError):
        mesh_polygon(SQUARE, 3)  # fewer panels than edges


def test_mesh_validation_rejects_bad_curves():
    with pytest.raises(MeshError):  # not closed curve material: < 3 vertices
        BoundaryMesh([(0, 0), (1, 0)])
    with pytest.raises(MeshError):  # non-finite
        BoundaryMesh([(0, 0), (1, 0), (np.nan, 1)])
    with pytest.raises(MeshError):  # degenerate panel
        BoundaryMesh([(0, 0), (1, 0), (1, 0), (0, 1)])
    with pytest.raises(MeshError, match="orient"):  # clockwise
        BoundaryMesh([(0, 0), (0, 1), (1, 1), (1, 0)])
    with pytest.raises(MeshError, match="simple"):  # self-crossing pentagon
        BoundaryMesh([(0, 0), (3, 0), (3, 2), (1, -1), (0, 2)])
    with pytest.raises(MeshError):  # bowtie (zero signed area)
        BoundaryMesh([(0, 0), (1, 1), (1, 0), (0, 1)])
    with pytest.raises(MeshError):  # spike folding back on itself
        BoundaryMesh([(0, 0), (1, 0), (2, 0), (1, 0), (1, 1)])


def test_mesh_vertices_read_only():
    mesh = mesh_circle(8)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 7.0


def test_refine_doubles_and_preserves_length():
    for mesh in (mesh_circle(16), mesh_polygon(ELL, 12)):
        fine = refine(mesh)
        assert fine.n_panels == 2 * mesh.n_panels
        assert abs(fine.lengths.sum() - mesh.lengths.sum()) < 1e-13
        assert np.array_equal(fine.a[0::2], mesh.a)
        assert np.allclose(fine.a[1::2], mesh.midpoints)
    assert refine(refine(mesh_circle(8))).n_panels == 32


def test_distance_to_boundary():
    mesh = mesh_circle(256)
    # distance from the center to any chord is the apothem
    assert abs(distance_to_boundary(mesh, (0.0, 0.0)) - np.cos(np.pi / 256)) < 1e-14
    sq = mesh_polygon(SQUARE)
    assert abs(distance_to_boundary(sq, (3.0, 0.0)) - 2.0) < 1e-15
    assert distance_to_boundary(sq, sq.midpoints[0]) == 0.0
    d = panel_distances(sq, [(0.5, 0.5), (2.0, 0.5)])
    assert d.shape == (2, 4)
    assert abs(d[0].min() - 0.5) < 1e-15


def test_distance_is_lipschitz():
    rng = np.random.default_rng(42)
    mesh = mesh_polygon(ELL, 24)
    x = rng.uniform(-3, 3, size=(200, 2))
    y = x + rng.normal(scale=0.5, size=(200, 2))
    for xi, yi in zip(x, y):
        dx = distance_to_boundary(mesh, xi)
        dy = distance_to_boundary(mesh, yi)
        assert abs(dx - dy) <= np.linalg.norm(xi - yi) + 1e-12


def test_random_star_polygons_valid():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = rng.integers(5, 40)
        theta = np.sort(rng.uniform(0, 2 * np.pi, size=n))
        if np.min(np.diff(theta)) < 1e-3:
            continue
        r = rng.uniform(0.5, 1.5, size=n)
        V = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        mesh = BoundaryMesh(V)  # star-shaped => simple; must validate
        assert shoelace(mesh.vertices) > 0
        assert distance_to_boundary(mesh, (0.0, 0.0)) > 0


def test_mesh_hash_stability():
    a, b = mesh_circle(32), mesh_circle(32)
    assert a.mesh_hash == b.mesh_hash
    assert len(a.mesh_hash) == 64
    assert a.mesh_hash != mesh_circle(33).mesh_hash
    assert a.mesh_hash != mesh_circle(32, radius=2.0).mesh_hash


def test_mesh_file_roundtrip(tmp_path):
    mesh = mesh_polygon(ELL, 17)
    path = tmp_path / "mesh.txt"
    write_mesh(path, mesh, comment="L-shape\n17 panels")
    back = read_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert back.mesh_hash == mesh.mesh_hash
    text = path.read_text()
    assert text.startswith("# L-shape\n# 17 panels\n")


def test_mesh_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0\n1 0 extra\n1 1\n")
    with pytest.raises(MeshError, match="bad.txt:2"):
        read_mesh(bad)
    bad.write_text("0 0\n1 zero\n1 1\n")
    with pytest.raises(MeshError, match="bad.txt:2"):
        read_mesh(bad)
