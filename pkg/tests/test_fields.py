import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexgas import fields as F
from vortexgas.errors import GeometryError, ResolutionError, ValidationError


def solid_body(grid, omega):
    X, Y = grid.meshgrid()
    return F.VectorField2D(grid.with_values(-omega * Y), grid.with_values(omega * X))


def test_grid_layout_and_readonly():
    g = F.make_grid(4, 3, 2.0, origin=(10.0, -1.0))
    assert g.shape == (3, 4)
    np.testing.assert_array_equal(g.x, [10, 12, 14, 16])
    np.testing.assert_array_equal(g.y, [-1, 1, 3])
    assert g.nearest_node(13.1, 2.9) == (2, 2)
    with pytest.raises(ValueError):
        g.values[0, 0] = 1.0


@pytest.mark.parametrize("kw", [dict(nx=1, ny=4, dx=1.0), dict(nx=4, ny=4, dx=0.0)])
def test_bad_grid(kw):
    with pytest.raises(GeometryError):
        F.make_grid(**kw)


def test_scalar_field_rejects_nan():
    g = F.make_grid(3, 3, 1.0)
    with pytest.raises(ValidationError):
        F.vorticity_field(g, np.full((3, 3), np.nan))


def test_vector_field_geometry_mismatch():
    with pytest.raises(GeometryError):
        F.VectorField2D(F.make_grid(4, 4, 1.0), F.make_grid(4, 4, 2.0))


def test_curl_uniform_flow_is_zero():
    g = F.make_grid(16, 12, 10.0)
    f = F.VectorField2D(g.with_values(np.full(g.shape, 5.0)), g.with_values(np.zeros(g.shape)))
    assert np.all(F.curl_z(f).values == 0)


def test_curl_solid_body_rotation():
    g = F.make_grid(21, 17, 3.0, origin=(-30.0, -24.0))
    zeta = F.curl_z(solid_body(g, 0.05)).values
    np.testing.assert_allclose(zeta[1:-1, 1:-1], 0.1, atol=1e-10)


@given(omega=st.floats(-1, 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_curl_of_linear_field_exact(omega, a, b):
    # u = a - omega*y, v = b + omega*x has curl 2*omega everywhere, edges included
    g = F.make_grid(9, 7, 0.5)
    X, Y = g.meshgrid()
    f = F.VectorField2D(g.with_values(a - omega * Y), g.with_values(b + omega * X))
    np.testing.assert_allclose(F.curl_z(f).values, 2 * omega, atol=1e-12)


def test_curl_needs_three_nodes():
    g = F.make_grid(2, 5, 1.0)
    with pytest.raises(GeometryError):
        F.curl_z(F.VectorField2D(g, g))


def test_rankine_profile_values():
    assert F.rankine_speed(500.0, 50, 500, 0.7) == 50
    assert F.rankine_speed(1000.0, 50, 500, 1.0) == pytest.approx(25.0)
    assert F.rankine_speed(0.0, 50, 500, 1.0) == 0


def test_rankine_curl_vanishes_outside_core():
    g = F.make_grid(321, 321, 25.0)
    f = F.make_modified_rankine(50.0, 500.0, 1.0, g)
    zeta = F.curl_z(f).values
    X, Y = g.meshgrid()
    cx, cy = g.node_position(*g.center_node())
    r = np.hypot(X - cx, Y - cy)
    far = (r > 1000.0)
    far[[0, -1], :] = far[:, [0, -1]] = False
    assert np.abs(zeta[far]).max() < 1e-3 * 50.0 / 500.0
    # inside the core the solid-body part gives 2*v_max/R
    assert zeta[g.center_node()[1], g.center_node()[0]] == pytest.approx(0.2, rel=1e-9)


def test_rankine_sampled_speed_slope():
    g = F.make_grid(257, 257, 25.0)
    R = 300.0
    f = F.make_modified_rankine(40.0, R, 0.6, g)
    X, Y = g.meshgrid()
    cx, cy = g.node_position(*g.center_node())
    r = np.hypot(X - cx, Y - cy).ravel()
    s = f.speed().ravel()
    keep = (r >= 2 * R) & (r <= 10 * R)
    slope = np.polyfit(np.log(r[keep]), np.log(s[keep]), 1)[0]
    assert slope == pytest.approx(-0.6, abs=0.02)


def test_rankine_resolution_error():
    with pytest.raises(ResolutionError):
        F.make_modified_rankine(50, 100, 1.0, F.make_grid(10, 10, 75.0))


def test_rankine_counterclockwise():
    g = F.make_grid(41, 41, 10.0)
    f = F.make_modified_rankine(10, 50, 1, g)
    i, j = g.center_node()
    assert f.v.values[j, i + 3] > 0 and f.u.values[j + 3, i] < 0


def test_power_law_profile_values():
    assert F.power_law_profile(100.0, 0.2, 100.0, -1.6) == 0.2
    assert F.power_law_profile(1000.0, 0.2, 100.0, -1.6) == pytest.approx(0.2 * 10 ** -1.6, rel=1e-14)
    g = F.make_grid(65, 65, 10.0)
    f = F.make_power_law_vorticity(0.2, 20.0, -1.6, g)
    i, j = g.center_node()
    assert f.values[j, i] == 0.2
    assert f.values[j, i + 20] == pytest.approx(0.2 * 10 ** -1.6)


def test_power_law_supersampled_is_cell_average():
    g = F.make_grid(33, 33, 10.0)
    f1 = F.make_power_law_vorticity(1.0, 5.0, -1.2, g, supersample=1)
    f8 = F.make_power_law_vorticity(1.0, 5.0, -1.2, g, supersample=8)
    i, j = g.center_node()
    # far from the center the profile is smooth and cell means approach point values
    np.testing.assert_allclose(f8.values[j, i + 12:], f1.values[j, i + 12:], rtol=2e-3)
    assert f8.values[j, i] < f1.values[j, i] + 1e-15


@pytest.mark.parametrize("args", [(0.0, 1.0, -1.6), (1.0, 1.0, 0.5), (1.0, -1.0, -1.6)])
def test_power_law_bad_parameters(args):
    with pytest.raises(ValidationError):
        F.make_power_law_vorticity(*args, F.make_grid(8, 8, 1.0))


def test_sheet_circulation():
    g = F.make_grid(200, 200, 10.0)
    length, h, z = 1000.0, 60.0, 0.05
    f = F.make_vortex_sheet(length, h, z, g)
    assert F.circulation(f) == pytest.approx(z * length * h, abs=z * g.dx * max(length, h))


@given(angle=st.floats(0, np.pi), h=st.floats(20, 80))
@settings(max_examples=25, deadline=None)
def test_sheet_circulation_any_angle(angle, h):
    g = F.make_grid(160, 160, 10.0)
    length, z = 800.0, 0.1
    f = F.make_vortex_sheet(length, h, z, g, angle=angle)
    # quantization error is bounded by the perimeter times one cell width
    assert abs(F.circulation(f) - z * length * h) <= z * 2 * (length + h) * g.dx


def test_sheet_kelvin_halving():
    g = F.make_grid(200, 200, 10.0)
    C = 5.0
    thin = F.make_vortex_sheet(1000, 40, C / (1000 * 40), g)
    thick = F.make_vortex_sheet(1000, 80, C / (1000 * 80), g)
    assert thick.values.max() == pytest.approx(thin.values.max() / 2)
    assert F.circulation(thin) == pytest.approx(F.circulation(thick))


def test_sheet_zero_and_errors():
    g = F.make_grid(100, 100, 10.0)
    assert np.all(F.make_vortex_sheet(300, 50, 0.0, g).values == 0)
    with pytest.raises(ResolutionError):
        F.make_vortex_sheet(300, 15, 1.0, g)
    with pytest.raises(GeometryError):
        F.make_vortex_sheet(5000, 50, 1.0, g)
