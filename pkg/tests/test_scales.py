import numpy as np
import pytest

from vortexgas import fields as F
from vortexgas import scales as sa
from vortexgas.errors import (DegeneracyError, GeometryError, LogDomainError, ResolutionError,
                              ScaleRangeError)


def const_field(c, n=64, dx=75.0):
    return F.vorticity_field(F.make_grid(n, n, dx), np.full((n, n), c))


def power_law_field(b=-1.6, n=512, dx=75.0):
    return F.make_power_law_vorticity(0.1, 1.0, b, F.make_grid(n, n, dx), supersample=8)


def test_cressman_weight_endpoints():
    assert sa.cressman_weight(0.0, 7.0) == 1.0
    assert sa.cressman_weight(7.0, 7.0) == 0.0
    assert sa.cressman_weight(8.0, 7.0) == 0.0
    assert sa.cressman_weight(3.0, 5.0) == pytest.approx(16 / 34)


def test_filter_preserves_constant():
    f = sa.cressman_filter(const_field(2.5), 600.0)
    np.testing.assert_allclose(f.values, 2.5, rtol=1e-12)


def test_filter_matches_direct_weighted_mean():
    rng = np.random.default_rng(4)
    g = F.make_grid(20, 16, 10.0)
    vals = rng.normal(size=g.shape)
    out = sa.cressman_filter(F.vorticity_field(g, vals), 15.0).values
    X, Y = g.meshgrid()
    for j, i in [(0, 0), (7, 11), (15, 19), (3, 9)]:
        r = np.hypot(X - X[j, i], Y - Y[j, i])
        w = sa.cressman_weight(r, 30.0)
        assert out[j, i] == pytest.approx(np.sum(w * vals) / np.sum(w), abs=1e-12)


def test_spike_peak_decreases_with_scale():
    g = F.make_grid(257, 257, 75.0)
    vals = np.zeros(g.shape)
    vals[128, 128] = 1.0
    spike = F.vorticity_field(g, vals)
    peaks = [sa.cressman_filter(spike, e).values.max() for e in (300, 600, 1200, 2400, 4800)]
    assert np.all(np.diff(peaks) < 0)


def test_filter_resolution_error():
    with pytest.raises(ResolutionError):
        sa.cressman_filter(const_field(1.0), 50.0)


def test_uniform_series_and_line():
    s = sa.max_filtered_vorticity(const_field(0.3, n=300), sa.DEFAULT_EPSILONS, sa.Window((11000, 11000), 5000))
    np.testing.assert_allclose(s.zeta_max, 0.3, rtol=1e-12)
    line = sa.vorticity_line(s)
    assert abs(line.slope) < 1e-6
    assert line.fit_range == (300.0, 9600.0)


def test_power_law_series_decreases_and_slope():
    f = power_law_field()
    s = sa.max_filtered_vorticity(f)
    assert np.all(np.diff(s.zeta_max) < 0)
    line = sa.vorticity_line(s, sa.DEFAULT_FIT_RANGE)
    assert line.slope == pytest.approx(-1.6, abs=0.1)


def test_nested_windows():
    f = power_law_field(n=256)
    c = f.grid.node_position(*f.grid.center_node())
    small = sa.max_filtered_vorticity(f, window=sa.Window((c[0] + 2000, c[1]), 1000))
    big = sa.max_filtered_vorticity(f, window=sa.Window((c[0] + 2000, c[1]), 4000))
    assert np.all(big.zeta_max >= small.zeta_max)


def test_empty_window():
    with pytest.raises(GeometryError):
        sa.max_filtered_vorticity(const_field(1.0), window=sa.Window((-1e6, 0.0), 10.0))


def test_line_errors():
    s = sa.ScaleSeries([300, 600, 1200, 2400], [1.0, 0.5, 0.0, 0.1])
    with pytest.raises(LogDomainError, match="1200"):
        sa.vorticity_line(s, (300, 2400))
    with pytest.raises(ScaleRangeError):
        sa.vorticity_line(s, (300, 600))
    line = sa.vorticity_line(sa.ScaleSeries([100, 300, 600, 1200], [4, 3, 2, 1]), (300, 1200))
    assert line.points_excluded == (100.0,)


def _line(slope):
    return sa.VorticityLine(slope, 0.0, 1.0, (300.0, 9600.0), ())


@pytest.mark.parametrize("slope,cls", [(-1.7, sa.STRONG_TORNADIC), (-1.0, sa.NON_TORNADIC),
                                       (-1.6, sa.STRONG_TORNADIC), (-1.5999, sa.NON_TORNADIC)])
def test_classify(slope, cls):
    assert sa.classify_slope(_line(slope)) == cls


def test_pseudovorticity_rankine():
    g = F.make_grid(201, 201, 10.0)
    f = F.make_modified_rankine(50.0, 500.0, 1.0, g)
    pv = sa.pseudovorticity(sa.doppler_projection(f, 0.0))
    assert pv.delta_v == pytest.approx(100.0, rel=1e-9)
    assert pv.length == pytest.approx(1000.0)
    assert pv.zeta_pv == pytest.approx(0.1, rel=0.02)
    for angle in (0.3, 0.7, 1.2, 2.5):
        rot = sa.pseudovorticity(sa.doppler_projection(f, angle)).zeta_pv
        assert rot == pytest.approx(pv.zeta_pv, rel=0.02)


def test_pseudovorticity_degenerate():
    with pytest.raises(DegeneracyError):
        sa.pseudovorticity(const_field(0.0))


@pytest.mark.parametrize("b", [0.5, 0.6, 0.7, 1.0])
def test_velocity_exponent(b):
    g = F.make_grid(401, 401, 25.0)
    f = F.make_modified_rankine(50.0, 300.0, b, g)
    c = g.node_position(*g.center_node())
    assert sa.velocity_exponent(f, c, (600.0, 4000.0)) == pytest.approx(-b, abs=0.05)


def test_velocity_exponent_inside_core():
    g = F.make_grid(401, 401, 10.0)
    f = F.make_modified_rankine(50.0, 1500.0, 0.6, g)
    c = g.node_position(*g.center_node())
    assert sa.velocity_exponent(f, c, (100.0, 1200.0)) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(GeometryError):
        sa.velocity_exponent(f, c, (100.0, 5000.0))


def test_static_series():
    f = power_law_field(n=256)
    s = sa.slope_time_series([f, f, f])
    assert len(set(s.slopes)) == 1


def test_morph_sequence():
    bs = np.linspace(-1.0, -1.8, 9)
    frames = [power_law_field(b) for b in bs]
    s = sa.slope_time_series(frames, times=300.0 * np.arange(9))
    slopes = np.array(s.slopes)
    assert np.all(np.diff(slopes) < 0)
    assert slopes[0] == pytest.approx(-1.0, abs=0.1)
    assert slopes[-1] == pytest.approx(-1.8, abs=0.1)
    crossing = int(np.argmax(bs <= -1.6 + 1e-12))
    assert s.first_tornadic is not None and abs(s.first_tornadic - crossing) <= 1


def test_time_series_error_names_frame():
    bad = const_field(0.0, n=300)
    with pytest.raises(LogDomainError, match="frame 1"):
        sa.slope_time_series([const_field(1.0, n=300), bad],
                             window=sa.Window((11000.0, 11000.0), 2000.0))
