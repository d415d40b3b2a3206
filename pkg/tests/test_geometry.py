"""Mesh combinatorics, DEC operators, curvature, and homology oracles."""

import numpy as np
import pytest

from bettibound.dec import (
    betti1_oracle,
    betti1_rank_count,
    build_dec,
    gaussian_curvature,
    ricci_potential,
    schrodinger_comparison,
)
from bettibound.measure import operator_norm, WeightedOperator
from bettibound.mesh import (
    BumpySphere,
    FlatTorus,
    MeshError,
    RoundSphere,
    TorusOfRevolution,
    TriangleMesh,
    flat_torus_mesh,
    genus2_mesh,
    icosphere_mesh,
    read_obj,
    read_off,
    revolution_torus_mesh,
    write_off,
)

TET_VERTICES = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
TET_FACES = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]


def tetrahedron():
    return TriangleMesh(TET_VERTICES, TET_FACES)


# -- validation ---------------------------------------------------------------


def test_open_mesh_rejected():
    with pytest.raises(MeshError, match="mesh not closed"):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def test_inconsistent_orientation_rejected():
    faces = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 3, 2]]  # last face flipped
    with pytest.raises(MeshError, match="not orientable"):
        TriangleMesh(TET_VERTICES, faces)


def test_degenerate_face_rejected():
    with pytest.raises(MeshError, match="repeated vertex"):
        TriangleMesh(TET_VERTICES, [[0, 1, 1], [0, 1, 2], [0, 2, 1], [1, 2, 0]])


def test_euler_characteristics():
    assert tetrahedron().euler_characteristic == 2
    assert flat_torus_mesh(1.0, 1.0, 5, 5).euler_characteristic == 0
    assert genus2_mesh().euler_characteristic == -2


# -- incidence and stars -------------------------------------------------------


@pytest.mark.parametrize(
    "mesh_builder",
    [
        tetrahedron,
        lambda: icosphere_mesh(1),
        lambda: flat_torus_mesh(1.0, 2.0, 5, 7),
        lambda: revolution_torus_mesh(2.0, 0.5, 6, 8),
        genus2_mesh,
    ],
)
def test_incidence_composition_exactly_zero(mesh_builder):
    dec = build_dec(mesh_builder())
    assert dec.incidence_composition_max() == 0


def test_stars_positive_everywhere():
    for mesh in (tetrahedron(), flat_torus_mesh(1, 1, 5, 5), genus2_mesh()):
        dec = build_dec(mesh)
        assert np.all(dec.star0 > 0)
        assert np.all(dec.star1 > 0)
        assert np.all(dec.star2 > 0)


def test_laplacian0_kills_constants_exactly():
    dec = build_dec(icosphere_mesh(1))
    image = dec.apply_laplacian0(np.ones(dec.mesh.vertex_count))
    assert np.max(np.abs(image)) == 0.0


def test_laplacian0_self_adjoint_psd_with_constant_kernel():
    dec = build_dec(revolution_torus_mesh(2.0, 0.6, 8, 8))
    lap = dec.laplacian0()  # constructor verifies weighted self-adjointness
    assert lap.min_eigenvalue >= -lap.zero_threshold()
    assert lap.kernel_dim() == 1


def test_laplacian1_self_adjoint_psd():
    dec = build_dec(flat_torus_mesh(1.0, 1.0, 6, 6))
    lap = dec.laplacian1()
    assert lap.min_eigenvalue >= -lap.zero_threshold()


# -- homology oracles ----------------------------------------------------------


@pytest.mark.parametrize(
    "mesh_builder,expected",
    [
        (tetrahedron, 0),
        (lambda: icosphere_mesh(2), 0),
        (lambda: flat_torus_mesh(1.0, 1.0, 8, 8), 2),
        (lambda: revolution_torus_mesh(2.0, 0.6, 10, 10), 2),
        (genus2_mesh, 4),
    ],
)
def test_betti1_both_oracles(mesh_builder, expected):
    mesh = mesh_builder()
    dec = build_dec(mesh)
    assert betti1_oracle(mesh, dec) == expected
    assert betti1_rank_count(dec) == expected


def test_icosphere_kernel_dimensions():
    dec = build_dec(icosphere_mesh(2))
    assert dec.laplacian0().kernel_dim() == 1
    assert dec.laplacian1().kernel_dim() == 0


# -- curvature -----------------------------------------------------------------


def test_icosahedron_angle_defect():
    # Five equilateral corners meet at each vertex: defect 2 pi - 5 pi / 3.
    mesh = icosphere_mesh(0)
    defects = mesh.angle_defects()
    assert np.allclose(defects, np.pi / 3.0, atol=1e-12)


def test_unit_sphere_analytic_curvature_is_one():
    sphere = RoundSphere(radius=1.0)
    mesh = sphere.mesh(2)
    values = gaussian_curvature(mesh, "analytic", sphere).values
    assert np.all(values == 1.0)


def test_flat_torus_defects_identically_zero():
    mesh = flat_torus_mesh(1.0, 1.0, 8, 8)
    assert np.max(np.abs(mesh.angle_defects())) <= 1e-12
    field = gaussian_curvature(mesh)
    assert np.max(np.abs(field.values)) <= 1e-12


@pytest.mark.parametrize(
    "mesh_builder,chi",
    [
        (tetrahedron, 2),
        (lambda: icosphere_mesh(2), 2),
        (lambda: flat_torus_mesh(1.0, 2.0, 6, 9), 0),
        (lambda: revolution_torus_mesh(2.0, 0.5, 9, 9), 0),
        (genus2_mesh, -2),
    ],
)
def test_discrete_gauss_bonnet(mesh_builder, chi):
    mesh = mesh_builder()
    field = gaussian_curvature(mesh)
    assert mesh.euler_characteristic == chi
    assert field.gauss_bonnet_residual() <= 1e-9


def test_analytic_curvature_converges_to_angle_defect():
    surface = TorusOfRevolution(ring_radius=2.0, tube_radius=0.6)
    errors = []
    for res in (8, 16, 32):
        mesh = surface.mesh(res)
        discrete = gaussian_curvature(mesh).values
        analytic = gaussian_curvature(mesh, "analytic", surface).values
        err = np.sqrt(np.sum(mesh.dual_areas * (discrete - analytic) ** 2))
        errors.append(err)
    rate = np.log2(errors[0] / errors[-1]) / 2.0
    print(f"curvature L2 errors {errors}, observed rate {rate:.2f}")
    assert errors[2] < errors[1] < errors[0]


def test_bumpy_sphere_reduces_to_round_sphere_at_zero_amplitude():
    theta = np.linspace(0.0, np.pi, 101)
    flat = BumpySphere(amplitude=0.0, frequency=3)
    assert np.allclose(flat.curvature_at(theta), 1.0, atol=1e-12)


def test_bumpy_sphere_pole_limit_matches_nearby_values():
    surface = BumpySphere(amplitude=0.05, frequency=3)
    pole = surface.curvature_at(0.0)
    near = surface.curvature_at(1e-5)
    assert np.isclose(pole, near, rtol=1e-6)


def test_bumpy_sphere_positive_curvature_fixture():
    surface = BumpySphere()
    mesh = surface.mesh(2)
    discrete = gaussian_curvature(mesh).values
    assert discrete.min() > 0.2
    analytic = gaussian_curvature(mesh, "analytic", surface).values
    assert analytic.min() > 0.2


def test_spectral_convergence_smoke():
    # First nonzero eigenvalue of the vertex Laplacian on the unit sphere
    # approaches 2; reported at 5%, asserted at 10%.
    from scipy.linalg import eigh

    dec = build_dec(icosphere_mesh(4))
    lap = dec.laplacian0_matrix()
    w = np.sqrt(dec.star0)
    conj = (w[:, None] * lap) / w[None, :]
    conj = 0.5 * (conj + conj.T)
    low = eigh(conj, eigvals_only=True, subset_by_index=[0, 1])
    lam1 = low[1]
    rel = abs(lam1 - 2.0) / 2.0
    print(f"sphere lambda_1 = {lam1:.6f}, relative error {rel:.3%} (5% watermark)")
    assert rel <= 0.10


# -- curvature-derived potential ------------------------------------------------


def test_ricci_potential_vanishes_below_curvature():
    sphere = RoundSphere()
    mesh = sphere.mesh(2)
    field = gaussian_curvature(mesh, "analytic", sphere)
    data = ricci_potential(field, 0.5)
    assert data.norm_2hs == 0.0
    assert np.all(data.hs_density_sq == 0.0)
    assert np.array_equal(data.rho, field.values)


def test_ricci_potential_sphere_above_curvature():
    sphere = RoundSphere()
    mesh = sphere.mesh(3)
    field = gaussian_curvature(mesh, "analytic", sphere)
    data = ricci_potential(field, 2.0)
    # Shortfall is the constant 1, so the squared norm is twice the area;
    # the smooth value 8 pi is approached as the mesh refines.
    assert np.isclose(data.norm_2hs**2, 2.0 * mesh.total_area, rtol=1e-12)
    assert np.isclose(data.norm_2hs**2, 8.0 * np.pi, rtol=2e-2)


def test_ricci_potential_flat_torus_closed_form():
    torus = FlatTorus(width=1.5, height=0.8)
    mesh = torus.mesh(8)
    field = gaussian_curvature(mesh)
    rho0 = 0.7
    data = ricci_potential(field, rho0)
    assert np.isclose(data.norm_2hs**2, 2.0 * rho0**2 * 1.5 * 0.8, rtol=1e-12)


def test_schrodinger_comparison_zero_is_laplacian():
    dec = build_dec(flat_torus_mesh(1, 1, 5, 5))
    base = schrodinger_comparison(dec, np.zeros(dec.mesh.vertex_count))
    assert np.array_equal(base.matrix, dec.laplacian0_matrix())


def test_schrodinger_comparison_constant_shift():
    dec = build_dec(icosphere_mesh(1))
    c = 0.9
    shifted = schrodinger_comparison(dec, np.full(dec.mesh.vertex_count, c))
    base = dec.laplacian0()
    assert np.allclose(
        shifted.eigenvalues, base.eigenvalues + c, rtol=1e-12, atol=1e-12
    )


def test_schrodinger_comparison_matches_direct_assembly():
    surface = BumpySphere()
    mesh = surface.mesh(1)
    dec = build_dec(mesh)
    rho = gaussian_curvature(mesh, "analytic", surface).values
    op = schrodinger_comparison(dec, rho)
    oracle = dec.laplacian0_matrix() + np.diag(rho)
    assert np.array_equal(op.matrix, oracle)
    gap = operator_norm(
        WeightedOperator(op.matrix - oracle, op.space, 1)
    )
    assert gap == 0.0


# -- file io --------------------------------------------------------------------


def test_off_roundtrip(tmp_path):
    mesh = genus2_mesh(n_theta=6, n_phi=6)
    path = tmp_path / "g2.off"
    write_off(mesh, path)
    loaded = read_off(path.read_text())
    assert loaded.vertex_count == mesh.vertex_count
    assert np.array_equal(loaded.faces, mesh.faces)
    assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-15)
    assert betti1_oracle(loaded) == 4


def test_off_with_comments_and_counts():
    text = """OFF
# tetrahedron
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""
    mesh = read_off(text)
    assert mesh.vertex_count == 4
    assert mesh.euler_characteristic == 2


def test_off_bad_header():
    with pytest.raises(MeshError, match="OFF header"):
        read_off("PLY\n1 2 3\n")


def test_off_boundary_edge_message():
    text = "OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    with pytest.raises(MeshError, match="mesh not closed"):
        read_off(text)


def test_obj_reader_minimal():
    text = """# tetrahedron
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 3 2
f 1/1 2/2 4/4
f 1 4 3
f 2 3 4
"""
    mesh = read_obj(text)
    assert mesh.vertex_count == 4
    assert mesh.euler_characteristic == 2
    assert betti1_oracle(mesh) == 0


def test_obj_rejects_quads():
    with pytest.raises(MeshError, match="triangle"):
        read_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n")


# -- analytic surfaces -----------------------------------------------------------


def test_analytic_areas():
    assert np.isclose(RoundSphere(2.0).area(), 16 * np.pi)
    assert np.isclose(FlatTorus(1.5, 0.8).area(), 1.2)
    assert np.isclose(TorusOfRevolution(2.0, 0.5).area(), 4 * np.pi**2)
    # Zero amplitude reduces the quadrature to the round sphere.
    assert np.isclose(BumpySphere(amplitude=0.0).area(), 4 * np.pi, rtol=1e-10)


def test_torus_min_curvature_at_inner_equator():
    surface = TorusOfRevolution(2.0, 0.5)
    mesh = surface.mesh(32)
    sampled = surface.curvature_values(mesh)
    assert np.isclose(sampled.min(), surface.min_curvature(), rtol=1e-10)
    assert np.isclose(surface.min_curvature(), -1.0 / (0.5 * 1.5))


def test_mesh_area_converges_to_analytic():
    surface = TorusOfRevolution(2.0, 0.5)
    coarse = abs(surface.mesh(8).total_area - surface.area())
    fine = abs(surface.mesh(24).total_area - surface.area())
    assert fine < coarse


def test_diameters():
    assert np.isclose(RoundSphere(2.0).diameter(), 2 * np.pi)
    assert np.isclose(FlatTorus(1.0, 1.0).diameter(), np.hypot(0.5, 0.5))
    assert TorusOfRevolution().diameter() is None
    est = icosphere_mesh(2, 1.0).diameter_estimate()
    assert 2.0 <= est <= 1.3 * np.pi


def test_flat_torus_intrinsic_flag_and_lengths():
    mesh = flat_torus_mesh(2.0, 1.0, 4, 4)
    assert mesh.intrinsic
    lengths = sorted(set(np.round(mesh.edge_lengths, 12)))
    assert np.allclose(lengths, [0.25, 0.5, np.hypot(0.5, 0.25)])


def test_genus2_mesh_is_well_formed():
    mesh = genus2_mesh()
    assert mesh.euler_characteristic == -2
    assert np.all(mesh.face_areas > 0)
    assert float(mesh.corner_angles.min()) > 1e-3
