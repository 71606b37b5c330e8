"""Géométrie du tube : angle de rotation, repères, surface, métrique, courbures, V_curv, grilles."""

import math

import numpy as np
import pytest

from core import geometry
from core.errors import DegenerateCurve, DegeneratePeriod, EmbeddingViolation
from core.geometry import HelixSpec, Quantity


# --- HelixSpec ---

def test_spec_rejects_bad_radius():
    with pytest.raises(ValueError):
        HelixSpec(kappa=1.0, tau=1.0, rho0=0.0)
    with pytest.raises(ValueError):
        HelixSpec(kappa=-1.0, tau=1.0, rho0=0.1)


def test_spec_rejects_self_intersection():
    with pytest.raises(EmbeddingViolation):
        HelixSpec(kappa=10.0, tau=1.0, rho0=0.1)


def test_radius_and_pitch_invert_curvature_and_torsion():
    spec = HelixSpec(kappa=0.7, tau=-1.3, rho0=0.1)
    R, p = spec.helix_radius, spec.pitch
    assert spec.kappa == pytest.approx(R / (R * R + p * p), rel=1e-12)
    assert spec.tau == pytest.approx(p / (R * R + p * p), rel=1e-12)


def test_unit_helix_alpha():
    spec = HelixSpec(kappa=1.0, tau=1.0, rho0=0.1)
    assert spec.helix_radius == pytest.approx(0.5)
    assert spec.pitch == pytest.approx(0.5)
    assert spec.alpha == pytest.approx(math.sqrt(2.0))


# --- rotation_angle ---

@pytest.mark.parametrize("tau, s0, s, expected", [
    (1.0, 0.0, math.pi, -math.pi),
    (0.0, 0.0, 5.0, 0.0),
    (2.0, 1.0, 3.0, -4.0),
])
def test_rotation_angle(tau, s0, s, expected):
    spec = HelixSpec(kappa=0.5, tau=tau, rho0=0.1, s0=s0)
    assert geometry.rotation_angle(spec, s) == pytest.approx(expected)


# --- repères ---

def test_frenet_circle():
    frame = geometry.frenet_frame(HelixSpec(kappa=1.0, tau=0.0, rho0=0.1), 0.0)
    np.testing.assert_allclose(frame.t, [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(frame.n, [-1.0, 0.0, 0.0], atol=1e-15)


def test_frenet_degenerate_curve():
    with pytest.raises(DegenerateCurve):
        geometry.frenet_frame(HelixSpec(kappa=0.0, tau=0.0, rho0=0.1), 0.0)


@pytest.mark.parametrize("kappa, tau, s", [(0.5, 0.5, 2 * math.pi), (1.0, 1.0, 0.3), (0.8, -1.7, 4.0)])
def test_frames_orthonormal(kappa, tau, s):
    frame = geometry.rotated_frame(HelixSpec(kappa=kappa, tau=tau, rho0=0.1), s)
    for triad in ((frame.t, frame.n, frame.b), (frame.t, frame.N, frame.B)):
        gram = np.array([[u @ v for v in triad] for u in triad])
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.cross(frame.t, frame.n), frame.b, atol=1e-12)


def test_frenet_equations_by_central_differences():
    spec = HelixSpec(kappa=1.0, tau=1.0, rho0=0.1)
    s, step = 0.7, 1e-5
    ahead, behind, here = (geometry.frenet_frame(spec, x) for x in (s + step, s - step, s))

    def d(attr):
        return (getattr(ahead, attr) - getattr(behind, attr)) / (2 * step)

    np.testing.assert_allclose(d("t"), spec.kappa * here.n, atol=1e-9)
    np.testing.assert_allclose(d("n"), -spec.kappa * here.t + spec.tau * here.b, atol=1e-9)
    np.testing.assert_allclose(d("b"), -spec.tau * here.n, atol=1e-9)


def test_rotated_frame_at_origin_and_without_torsion():
    frame = geometry.rotated_frame(HelixSpec(kappa=1.0, tau=1.0, rho0=0.1, s0=0.4), 0.4)
    assert frame.theta == 0.0
    np.testing.assert_allclose(frame.N, frame.n, atol=1e-15)
    np.testing.assert_allclose(frame.B, frame.b, atol=1e-15)
    flat = geometry.rotated_frame(HelixSpec(kappa=1.0, tau=0.0, rho0=0.1), 2.5)
    np.testing.assert_allclose(flat.N, flat.n, atol=1e-15)


def test_rotated_frame_half_turn():
    frame = geometry.rotated_frame(HelixSpec(kappa=1.0, tau=1.0, rho0=0.1), math.pi)
    np.testing.assert_allclose(frame.N, -frame.n, atol=1e-12)


def test_rotated_frame_has_no_twist():
    spec = HelixSpec(kappa=1.0, tau=1.0, rho0=0.1)
    s, step = 1.1, 1e-5
    dN = (geometry.rotated_frame(spec, s + step).N - geometry.rotated_frame(spec, s - step).N) / (2 * step)
    assert abs(dN @ geometry.rotated_frame(spec, s).B) <= 1e-8


# --- surface ---

def test_surface_point_at_origin(helix_spec):
    frame = geometry.frenet_frame(helix_spec, 0.0)
    expected = geometry.helix_point(helix_spec, 0.0) - helix_spec.rho0 * frame.n
    np.testing.assert_allclose(geometry.surface_point(helix_spec, 0.0, 0.0), expected, atol=1e-15)


def test_surface_point_quarter_turn(helix_spec):
    frame = geometry.rotated_frame(helix_spec, 0.0)
    expected = geometry.helix_point(helix_spec, 0.0) - 0.1 * frame.B
    np.testing.assert_allclose(geometry.surface_point(helix_spec, 0.0, math.pi / 2), expected, atol=1e-15)


def test_torus_lies_in_annulus(torus_spec):
    s, phi = np.meshgrid(np.linspace(0, 2 * math.pi, 17), np.linspace(-math.pi, math.pi, 17))
    X = geometry.surface_point(torus_spec, s, phi)
    radial = np.hypot(X[..., 0], X[..., 1])
    assert radial.min() >= 0.9 - 1e-12
    assert radial.max() <= 1.1 + 1e-12


def test_surface_point_rejects_large_angle(helix_spec):
    with pytest.raises(ValueError):
        geometry.surface_point(helix_spec, 0.0, 3.5)


# --- métrique et courbures ---

def test_metric_h_examples(helix_spec):
    assert geometry.metric_h(helix_spec, 0.0, 0.0) == pytest.approx(1.1)
    assert geometry.metric_h(helix_spec, 0.0, math.pi) == pytest.approx(0.9)
    straight = HelixSpec(kappa=0.0, tau=1.0, rho0=0.3)
    assert geometry.metric_h(straight, 2.0, 1.0) == 1.0


def test_outer_rim_is_stretched(helix_spec):
    assert geometry.metric_h(helix_spec, 0.0, 0.0) > geometry.metric_h(helix_spec, 0.0, math.pi)


def test_weingarten_diagonal(helix_spec):
    W = geometry.weingarten(helix_spec, 0.0, 0.0)
    assert W[0, 1] == 0.0 and W[1, 0] == 0.0
    np.testing.assert_allclose(np.diag(W), [10.0, 1.0 / 1.1], rtol=1e-14)
    cylinder = geometry.weingarten(HelixSpec(kappa=0.0, tau=1.0, rho0=0.5), 1.0, 0.2)
    np.testing.assert_allclose(cylinder, np.diag([2.0, 0.0]))


def test_weingarten_eigenvalues_match_principal_curvatures(helix_spec, rng):
    for s, phi in zip(rng.uniform(0, 6, 5), rng.uniform(-3, 3, 5)):
        k1, k2, M, K = geometry.principal_curvatures(helix_spec, s, phi)
        eig = np.linalg.eigvalsh(geometry.weingarten(helix_spec, s, phi))
        np.testing.assert_allclose(np.sort(eig), np.sort([k1, k2]), atol=1e-12)
        assert M == 0.5 * (k1 + k2)
        assert K == k1 * k2


def test_inner_rim_curvature(helix_spec):
    k1, k2, _, _ = geometry.principal_curvatures(helix_spec, 0.0, math.pi)
    assert k1 == pytest.approx(10.0)
    assert k2 == pytest.approx(-1.0 / 0.9)


def test_surface_sample_at_inner_rim(helix_spec):
    sample = geometry.surface_sample(helix_spec, 0.0, math.pi)
    assert sample.varphi == pytest.approx(0.1 * math.pi)
    assert sample.h == pytest.approx(0.9)
    assert (sample.kappa1, sample.kappa2) == (pytest.approx(10.0), pytest.approx(-1.0 / 0.9))
    assert sample.K == pytest.approx(sample.kappa1 * sample.kappa2)
    assert sample.v_curv == pytest.approx(-(sample.M ** 2 - sample.K))
    np.testing.assert_allclose(sample.point, geometry.surface_point(helix_spec, 0.0, math.pi))


def test_first_fundamental_form(helix_spec):
    step = 1e-5
    for s, phi in [(0.3, 0.4), (2.0, -1.5), (5.1, 2.8)]:
        X_s = (geometry.surface_point(helix_spec, s + step, phi)
               - geometry.surface_point(helix_spec, s - step, phi)) / (2 * step)
        X_v = (geometry.surface_point(helix_spec, s, phi + step)
               - geometry.surface_point(helix_spec, s, phi - step)) / (2 * step * helix_spec.rho0)
        h = geometry.metric_h(helix_spec, s, phi)
        assert X_v @ X_v == pytest.approx(1.0, abs=1e-8)
        assert X_s @ X_s == pytest.approx(h * h, abs=1e-8)
        assert abs(X_s @ X_v) <= 1e-8


def test_v_curv_values(helix_spec):
    assert geometry.v_curv(HelixSpec(kappa=0.0, tau=1.0, rho0=1.0), 0.3, 0.2) == pytest.approx(-0.25)
    assert geometry.v_curv(helix_spec, 0.0, 0.0) == pytest.approx(-1.0 / (4 * 0.01 * 1.21), rel=1e-12)


def test_v_curv_is_minus_mean_squared_plus_gauss(helix_spec, rng):
    s, phi = rng.uniform(0, 6, 20), rng.uniform(-3, 3, 20)
    _, _, M, K = geometry.principal_curvatures(helix_spec, s, phi)
    np.testing.assert_allclose(geometry.v_curv(helix_spec, s, phi), -(M ** 2 - K), rtol=1e-12)


def test_torus_total_curvature_vanishes(torus_spec):
    assert abs(geometry.total_curvature(torus_spec, 64, 64)) <= 1e-8


# --- grilles et champs ---

def test_grid_nodes(helix_spec):
    grid = geometry.cell_grid(helix_spec, 8, 4)
    assert grid.shape == (8, 4)
    np.testing.assert_allclose(grid.s_nodes, np.arange(8) * 2 * math.pi / 8)
    np.testing.assert_allclose(grid.varphi_nodes, -math.pi * 0.1 + np.arange(4) * 2 * math.pi * 0.1 / 4)


def test_grid_requires_period_without_torsion(torus_spec):
    with pytest.raises(DegeneratePeriod):
        geometry.cell_grid(torus_spec, 8, 8)
    assert geometry.cell_grid(torus_spec, 8, 8, period_s=3.0).period_s == 3.0


def test_sample_field_h_on_straight_tube():
    field = geometry.sample_field(HelixSpec(kappa=0.0, tau=1.0, rho0=0.2), Quantity.H, 8, 6)
    assert np.all(field.values == 1.0)
    assert field.values.shape == (8, 6)


def test_h_reflection_symmetry(helix_spec):
    field = geometry.sample_field(helix_spec, Quantity.H, 32, 32)
    np.testing.assert_allclose(field.values, field.grid.reflect(field.values), atol=1e-14)


def test_v_eff_row_minimum_sits_on_the_flanks(helix_spec):
    field = geometry.sample_field(helix_spec, "v_eff", 64, 64)
    phi = field.grid.phi_nodes[np.argmin(field.values[0])]
    assert math.pi / 3 <= abs(phi) <= 2 * math.pi / 3


def test_v_curv_row_minimum_on_inner_rim(helix_spec):
    field = geometry.sample_field(helix_spec, "v_curv", 64, 64)
    assert abs(field.grid.phi_nodes[np.argmin(field.values[0])]) == pytest.approx(math.pi)
