import math
import warnings

import numpy as np
import pytest

from enclosure2d.admittivity import AdmittivityField
from enclosure2d.fem import assemble_dtn_matrix, nodal_basis_for_mesh
from enclosure2d.indicator import (IndicatorError, IndicatorSeries,
                                   SupportEstimate, SupportFit, classify_series,
                                   clip_polygon_halfplane, cone_carving,
                                   cones_avoid_shape, convex_hull_estimate,
                                   default_tau_ladder, fit_support_directions,
                                   hull_contains_shape, indicator_cgo, indicator_ml,
                                   j_oracle, read_indicator_csv, support_slope_fit,
                                   transition_search_ml, write_indicator_csv,
                                   write_region_svg)
from enclosure2d.mesh import ShapeSpec, build_disk_mesh
from enclosure2d.probes import ProbeSpec, rot90


def _background(mesh, omega=0.0):
    nt = mesh.n_triangles
    return AdmittivityField(mesh=mesh, a=np.zeros((nt, 2, 2)),
                            b=np.zeros((nt, 2, 2)), omega=omega)


@pytest.fixture(scope="module")
def empty_pair():
    mesh = build_disk_mesh(1.0, 0.08, None)
    basis = nodal_basis_for_mesh(mesh)
    b = assemble_dtn_matrix(mesh, _background(mesh), basis)
    return b, b


@pytest.fixture(scope="module")
def disk_pair():
    mesh = build_disk_mesh(1.0, 0.03, ShapeSpec.disk((0.0, 0.0), 0.5))
    field = AdmittivityField.from_scalars(mesh, a=1.0, b=0.5, omega=1.0)
    basis = nodal_basis_for_mesh(mesh)
    pair = (assemble_dtn_matrix(mesh, field, basis),
            assemble_dtn_matrix(mesh, _background(mesh, 1.0), basis))
    return mesh, pair


def test_indicator_zero_for_empty_inclusion(empty_pair):
    th = np.array([1.0, 0.0])
    for tau in (1.0, 4.0):
        val = indicator_cgo(empty_pair, th, rot90(th), 0.3, tau)
        assert abs(val) < 1e-10


def test_indicator_ml_zero_for_empty_inclusion(empty_pair):
    val = indicator_ml(empty_pair, 0.5, (3.0, 0.0), (1.0, 0.0), -0.5, 1.5)
    assert abs(val) < 1e-10


def test_indicator_ml_rejects_bad_cone(empty_pair):
    from enclosure2d.probes import ProbeError
    with pytest.raises(ProbeError):
        indicator_ml(empty_pair, 0.5, (3.0, 0.0), (-1.0, 0.0), -0.5, 1.5)


def test_indicator_ml_perp_flip_invariance(disk_pair):
    _, pair = disk_pair
    th = np.array([0.8, 0.6])
    a = indicator_ml(pair, 0.5, (3.0, 1.0), th, -0.7, 2.0, theta_perp=rot90(th))
    b = indicator_ml(pair, 0.5, (3.0, 1.0), th, -0.7, 2.0, theta_perp=-rot90(th))
    assert a == pytest.approx(b, abs=1e-10 * max(abs(a), 1.0))


def test_indicator_ml_near_one_reduces_to_cgo(disk_pair):
    # as the order approaches 1 the cone probe is the exponential probe times
    # a fixed scalar exp(tau(-y.theta - t)) exp(-i tau y.theta_perp), so the
    # indicators agree up to that scalar's squared modulus (cgo taken at t = 0)
    _, pair = disk_pair
    y = np.array([3.0, 0.0])
    th = np.array([1.0, 0.0])
    t, tau = -3.3, 2.0
    ml = indicator_ml(pair, 1 - 1e-9, y, th, t, tau)
    scale = math.exp(2 * tau * (-(y @ th) - t))
    cgo = indicator_cgo(pair, th, rot90(th), 0.0, tau)
    assert ml == pytest.approx(scale * cgo, rel=1e-5)


def test_indicator_decays_beyond_support(disk_pair):
    _, pair = disk_pair
    th = np.array([1.0, 0.0])
    taus = default_tau_ladder(0.03, 10)
    vals = np.array([abs(indicator_cgo(pair, th, rot90(th), 0.7, float(t))) for t in taus])
    tail = vals[taus >= 2.0]
    assert np.all(np.diff(tail) < 0)
    assert vals[-1] < 0.2 * vals[0]


def test_indicator_bounded_growth_at_support(disk_pair):
    # at the exact support depth the values stay within a fixed band / tau^2
    _, pair = disk_pair
    th = np.array([1.0, 0.0])
    taus = default_tau_ladder(0.03, 10)
    vals = np.array([indicator_cgo(pair, th, rot90(th), 0.5, float(t)) for t in taus])
    assert np.all(vals > 0)
    assert np.all(vals / taus ** 2 < 10 * (vals[0] / taus[0] ** 2))


# -- slope fitting -------------------------------------------------------------


def _synthetic_series(taus, slope_vs_2tau, intercept, noise=0.0, rng=None):
    logs = 2 * taus * slope_vs_2tau + intercept
    if noise:
        logs = logs + noise * rng.standard_normal(len(taus))
    spec = ProbeSpec(kind="cgo", theta=(1.0, 0.0), theta_perp=(0.0, 1.0),
                     t=0.0, tau=float(taus[-1]))
    return IndicatorSeries(spec=spec, taus=taus, values=np.exp(logs))


def test_slope_fit_exact_linear_data():
    taus = np.linspace(1, 12, 10)
    series = _synthetic_series(taus, 0.5, 1.0)
    fit = support_slope_fit(series)
    assert fit.h_est == pytest.approx(0.5, abs=1e-12)
    assert not fit.low_confidence


def test_slope_fit_with_noise():
    rng = np.random.default_rng(4)
    taus = np.linspace(1, 12, 12)
    series = _synthetic_series(taus, 0.5, 1.0, noise=1e-3, rng=rng)
    fit = support_slope_fit(series)
    assert fit.h_est == pytest.approx(0.5, abs=1e-2)


def test_slope_fit_needs_enough_samples():
    taus = np.linspace(1, 5, 8)
    spec = ProbeSpec(kind="cgo", theta=(1.0, 0.0), theta_perp=(0.0, 1.0), t=0.0, tau=5.0)
    values = np.full(8, 1e-300)
    with pytest.raises(IndicatorError):
        support_slope_fit(IndicatorSeries(spec=spec, taus=taus, values=values))


def test_slope_fit_full_pipeline_two_layer(disk_pair):
    _, pair = disk_pair
    taus = default_tau_ladder(0.03, 12, resolution_factor=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = fit_support_directions(pair, np.array([[1.0, 0.0]]), 0.0, taus)
    assert 0.45 <= est.fits[0].h_est <= 0.55


# -- transition classification --------------------------------------------------


def test_classifier_on_synthetic_exponentials():
    taus = np.geomspace(0.5, 4.0, 10)
    for gamma in (0.1, 0.5, 2.0):
        grow = np.exp(gamma * taus)
        decay = np.exp(-gamma * taus)
        assert classify_series(taus, grow)[0] == "growth"
        assert classify_series(taus, decay)[0] == "decay"


def test_classifier_censors_explosive_tail():
    taus = np.geomspace(0.5, 4.0, 10)
    vals = np.exp(-0.5 * taus)
    vals[-2:] *= np.array([1e4, 1e12])   # leakage signature
    label, _ = classify_series(taus, vals)
    assert label == "decay"


def test_classifier_ties_flag_low_confidence():
    taus = np.geomspace(0.5, 4.0, 10)
    label, tie = classify_series(taus, np.ones(10))
    assert label == "growth" and tie


def test_transition_search_no_transition_on_empty(empty_pair):
    taus = np.geomspace(0.5, 2.0, 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = transition_search_ml(empty_pair, 0.5, (3.0, 0.0), (1.0, 0.0),
                                   (-4.0, -0.3), taus)
    assert est.status == "no_transition"
    assert est.h_est is None


def test_transition_search_interval_validation(empty_pair):
    with pytest.raises(IndicatorError):
        transition_search_ml(empty_pair, 0.5, (3.0, 0.0), (1.0, 0.0), (-1.0, 0.5),
                             np.geomspace(0.5, 2.0, 8))


# -- ground-truth energy oracle -------------------------------------------------


def test_j_oracle_zero_cases():
    mesh = build_disk_mesh(1.0, 0.1, ShapeSpec.disk((0.0, 0.0), 0.5))
    spec = ProbeSpec(kind="cgo", theta=(1.0, 0.0), theta_perp=(0.0, 1.0), t=0.3, tau=0.0)
    assert j_oracle(mesh, spec, 0.0, 0.3) == 0.0
    empty = build_disk_mesh(1.0, 0.1, None)
    spec2 = ProbeSpec(kind="cgo", theta=(1.0, 0.0), theta_perp=(0.0, 1.0), t=0.3, tau=2.0)
    assert j_oracle(empty, spec2, 2.0, 0.3) == 0.0


def test_j_oracle_matches_dense_quadrature():
    # 2 tau^2 integral of exp(2 tau (x.theta - t)) over the centered disk,
    # by dense midpoint sampling of the true disk
    mesh = build_disk_mesh(1.0, 0.025, ShapeSpec.disk((0.0, 0.0), 0.5))
    tau, t = 3.0, 0.6
    spec = ProbeSpec(kind="cgo", theta=(1.0, 0.0), theta_perp=(0.0, 1.0), t=t, tau=tau)
    val = j_oracle(mesh, spec, tau, t)
    n = 1200
    xs = np.linspace(-0.5, 0.5, n, endpoint=False) + 0.5 / n
    gx, gy = np.meshgrid(xs, xs)
    inside = gx ** 2 + gy ** 2 <= 0.25
    cell = (1.0 / n) ** 2
    ref = 2 * tau ** 2 * np.sum(np.exp(2 * tau * (gx[inside] - t))) * cell
    assert val == pytest.approx(ref, rel=2e-2)


# -- region assembly -------------------------------------------------------------


def _estimate_from_values(directions, h_values):
    fits = tuple(SupportFit(theta=(d[0], d[1]), t=0.0, h_est=h, slope=h, intercept=0.0,
                            rms_residual=0.0, window=(0, 5), low_confidence=False)
                 for d, h in zip(directions, h_values))
    return SupportEstimate(fits=fits)


def test_hull_four_directions_square():
    dirs = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    est = _estimate_from_values(dirs, [0.5] * 4)
    region = convex_hull_estimate(est, 1.0)
    assert region.area() == pytest.approx(1.0, rel=1e-9)
    xs, ys = region.polygon[:, 0], region.polygon[:, 1]
    assert xs.max() == pytest.approx(0.5) and xs.min() == pytest.approx(-0.5)
    assert ys.max() == pytest.approx(0.5) and ys.min() == pytest.approx(-0.5)


def test_hull_many_directions_circumscribes_disk():
    ang = 2 * math.pi * np.arange(32) / 32
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    est = _estimate_from_values(dirs, [0.5] * 32)
    region = convex_hull_estimate(est, 1.0)
    assert region.area() == pytest.approx(math.pi * 0.25, rel=2e-2)
    assert region.area() >= math.pi * 0.25


def test_hull_empty_intersection_reported():
    dirs = np.array([[1, 0], [-1, 0], [0, 1]], dtype=float)
    est = _estimate_from_values(dirs, [-0.4, -0.4, 0.5])
    with pytest.raises(IndicatorError):
        convex_hull_estimate(est, 1.0)


def test_clip_halfplane_keeps_interior():
    square = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    clipped = clip_polygon_halfplane(square, np.array([1.0, 0.0]), 0.0)
    assert clipped[:, 0].max() <= 1e-12
    assert len(clipped) == 4


def test_cone_carving_no_estimates_keeps_domain():
    region = cone_carving([], 1.0, resolution=128)
    assert region.cones == ()
    assert region.area() == pytest.approx(math.pi, rel=2e-2)


def test_cone_carving_single_far_cone_keeps_shape():
    from enclosure2d.indicator import TransitionEstimate
    est = TransitionEstimate(y=(3.0, 0.0), theta=(1.0, 0.0), alpha=0.5,
                             h_est=-0.5, bracket=(-0.52, -0.48), status="ok")
    region = cone_carving([est], 1.0, resolution=256)
    d = ShapeSpec.disk((0.0, 0.0), 0.4)
    assert cones_avoid_shape(region, d)
    assert region.area() < math.pi  # something was carved


def test_hull_containment_helper():
    dirs = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    est = _estimate_from_values(dirs, [0.5] * 4)
    assert hull_contains_shape(est, ShapeSpec.disk((0.0, 0.0), 0.45))
    assert not hull_contains_shape(est, ShapeSpec.disk((0.2, 0.0), 0.45))


# -- files ------------------------------------------------------------------------


def test_indicator_csv_roundtrip(tmp_path):
    rows = [{"family": "cgo", "alpha": None, "theta_x": 1.0, "theta_y": 0.0,
             "y_x": None, "y_y": None, "t": 0.2, "tau": 1.5, "I": -0.25,
             "logabsI": math.log(0.25), "J": 0.5},
            {"family": "mittag_leffler", "alpha": 0.5, "theta_x": 0.0, "theta_y": 1.0,
             "y_x": 3.0, "y_y": 0.0, "t": -0.7, "tau": 2.0, "I": 1e-8,
             "logabsI": math.log(1e-8), "J": None}]
    path = tmp_path / "ind.csv"
    write_indicator_csv(path, rows, provenance={"config": "xyz"})
    back = read_indicator_csv(path)
    assert len(back) == 2
    assert back[0]["family"] == "cgo"
    assert back[0]["I"] == pytest.approx(-0.25)
    assert back[1]["alpha"] == pytest.approx(0.5)
    assert back[1]["J"] is None
    text = path.read_text()
    assert text.startswith("# config: xyz")


def test_region_svg_written(tmp_path):
    ang = 2 * math.pi * np.arange(8) / 8
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    est = _estimate_from_values(dirs, [0.5] * 8)
    region = convex_hull_estimate(est, 1.0)
    path = tmp_path / "overlay.svg"
    write_region_svg(path, region, true_shape=ShapeSpec.disk((0.0, 0.0), 0.4))
    text = path.read_text()
    assert text.startswith("<svg") and "</svg>" in text
    assert "circle" in text and "path" in text
