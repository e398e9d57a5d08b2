import math

import numpy as np
import pytest

from rangeinteract.core import Window, validate_trajectory
from rangeinteract.errors import (
    DegenerateGeometry,
    InvalidBandwidth,
    InvalidParams,
    SingularCovariance,
    TooShort,
    UnnormalizedGrid,
    UnsupportedFamily,
)
from rangeinteract.homerange import (
    DensityGrid,
    akde_bandwidth,
    akde_density,
    convex_hull,
    estimate_geojson,
    kde_bandwidth,
    kde_density,
    kde_evaluate,
    level_set,
    mcp_estimate,
    polygon_area,
)
from rangeinteract.semivariogram import FitResult, MovementModel

CHI2_95 = 5.991464547107979
CHI2_50 = 1.3862943611198906


def _traj(xy, dt=3600):
    return validate_trajectory([(k * dt, x, y) for k, (x, y) in enumerate(np.asarray(xy, float))])


def _monotone_chain_area(pts):
    pts = sorted(map(tuple, pts))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return 0.5 * abs(sum(hull[k][0] * hull[k - 1][1] - hull[k - 1][0] * hull[k][1]
                         for k in range(len(hull))))


# -- MCP ---------------------------------------------------------------------------

def test_mcp_unit_square():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert mcp_estimate(_traj(sq), 1.0).area == pytest.approx(1.0)
    assert mcp_estimate(_traj(sq + [(0.5, 0.5)]), 1.0).area == pytest.approx(1.0)


def test_mcp_uniform_trim_against_oracle():
    for seed in range(20):
        xy = np.random.default_rng(seed).random((1000, 2))
        est = mcp_estimate(_traj(xy), 0.95)
        c = xy.mean(axis=0)
        d = [((x - c[0]) ** 2 + (y - c[1]) ** 2, k) for k, (x, y) in enumerate(xy)]
        keep = [xy[k] for _, k in sorted(d)[:950]]
        assert est.area == pytest.approx(_monotone_chain_area(keep), rel=1e-12)
        assert 0.70 <= est.area <= 1.00


def test_mcp_tie_keeps_earlier():
    # four points at equal distance from the centroid; level 0.75 keeps three
    pts = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    est = mcp_estimate(_traj(pts), 0.75)
    assert sorted(map(tuple, est.polygon.tolist())) == sorted([(1, 0), (0, 1), (-1, 0)])


def test_mcp_monotone_in_level():
    xy = np.random.default_rng(3).normal(size=(300, 2))
    areas = [mcp_estimate(_traj(xy), lv).area for lv in (0.3, 0.5, 0.8, 0.95, 1.0)]
    assert all(a <= b for a, b in zip(areas, areas[1:]))


def test_mcp_degenerate():
    with pytest.raises(DegenerateGeometry):
        mcp_estimate(_traj([(0, 0), (1, 1), (2, 2), (3, 3)]), 1.0)
    with pytest.raises(DegenerateGeometry):
        convex_hull([(0, 0), (0, 0), (1, 1)])
    with pytest.raises(InvalidParams):
        mcp_estimate(_traj([(0, 0), (1, 0), (0, 1)]), 0.0)


def test_polygon_area_orientation():
    sq = np.array([(0, 0), (2, 0), (2, 1), (0, 1)], float)
    assert polygon_area(sq) == 2.0
    assert polygon_area(sq[::-1]) == -2.0


# -- KDE ----------------------------------------------------------------------------

def _exact_cov_cloud(n, cov, seed=0):
    z = np.random.default_rng(seed).normal(size=(n, 2))
    z -= z.mean(axis=0)
    L = np.linalg.cholesky(np.cov(z, rowvar=False))
    z = z @ np.linalg.inv(L).T
    return z @ np.linalg.cholesky(cov).T


def test_bandwidth_reference_rule():
    xy = _exact_cov_cloud(1000, 100 * np.eye(2))
    assert np.allclose(kde_bandwidth(_traj(xy)), 10 * np.eye(2), atol=1e-9)


def test_bandwidth_errors():
    with pytest.raises(SingularCovariance):
        kde_bandwidth(_traj([(1.0, 2.0)] * 20))
    with pytest.raises(TooShort):
        kde_bandwidth(_traj(np.random.default_rng(0).normal(size=(9, 2))))


def test_bandwidth_isotropic_cloud():
    bw = kde_bandwidth(_traj(np.random.default_rng(4).normal(size=(5000, 2))))
    assert abs(bw[0, 1]) / bw[0, 0] < 0.05


def test_single_point_density():
    g = kde_density(np.array([[3.0, -2.0]]), np.eye(2) * 4.0)
    assert g.integral() == pytest.approx(1.0, abs=1e-3)
    iy, ix = np.unravel_index(np.argmax(g.values), g.values.shape)
    w = g.window
    assert w.x_min + ix * w.width / g.nx <= 3.0 <= w.x_min + (ix + 1) * w.width / g.nx
    assert w.y_min + iy * w.height / g.ny <= -2.0 <= w.y_min + (iy + 1) * w.height / g.ny


def test_symmetric_density():
    g = kde_density(np.array([[-1.0, 0.5], [1.0, -0.5]]), np.eye(2) * 0.3, grid_size=64)
    v = g.values
    assert np.abs(v - v[::-1, ::-1]).max() <= 1e-12 * v.max()


def test_grid_matches_pointwise_kde():
    xy = np.random.default_rng(5).normal(size=(40, 2))
    bw = np.array([[0.5, 0.2], [0.2, 0.3]])
    g = kde_density(xy, bw, grid_size=32)
    xc, yc = g.centers()
    gx, gy = np.meshgrid(xc, yc)
    direct = kde_evaluate(xy, bw, np.column_stack([gx.ravel(), gy.ravel()])).reshape(32, 32)
    assert np.allclose(g.values, direct, rtol=1e-12, atol=1e-15)
    assert g.integral() == pytest.approx(1.0, abs=1e-3)


def test_invalid_bandwidth():
    with pytest.raises(InvalidBandwidth):
        kde_density(np.zeros((1, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InvalidBandwidth):
        kde_density(np.zeros((1, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]))


# -- level sets ------------------------------------------------------------------------

def _std_gaussian_grid(n=512):
    return kde_density(np.zeros((1, 2)), np.eye(2), grid_size=n)


def test_gaussian_level_set_areas():
    g = _std_gaussian_grid()
    assert g.integral() == pytest.approx(1.0, abs=1e-3)
    assert level_set(g, 0.95).area == pytest.approx(math.pi * CHI2_95, rel=0.03)
    assert level_set(g, 0.50).area == pytest.approx(math.pi * CHI2_50, rel=0.03)


def test_level_set_minimal_and_nested():
    g = _std_gaussian_grid(128)
    lo, hi = level_set(g, 0.5), level_set(g, 0.95)
    assert np.all(hi.mask[lo.mask])
    mass = g.values[hi.mask].sum() * g.cell_area
    assert mass >= 0.95
    assert mass - hi.threshold * g.cell_area < 0.95
    assert np.all(g.values[hi.mask] >= hi.threshold)


def test_uniform_level_set():
    w = Window(0, 10, 0, 5)
    g = DensityGrid(w, np.full((50, 100), 1 / w.area))
    est = level_set(g, 0.4)
    assert abs(est.area - 0.4 * w.area) <= g.cell_area


def test_unnormalized_grid():
    with pytest.raises(UnnormalizedGrid):
        level_set(DensityGrid(Window(0, 1, 0, 1), np.full((4, 4), 2.0)), 0.5)


def test_translation_equivariance():
    xy = np.random.default_rng(6).normal(size=(200, 2)) * 50
    shift = np.array([1234.5, -678.0])
    a, b = _traj(xy), _traj(xy + shift)
    ma, mb = mcp_estimate(a, 0.95), mcp_estimate(b, 0.95)
    assert np.allclose(np.sort(ma.polygon + shift, axis=0), np.sort(mb.polygon, axis=0))
    bw = kde_bandwidth(a)
    ga, gb = kde_density(a, bw, 64), kde_density(b, bw, 64)
    assert np.allclose(ga.values, gb.values, rtol=1e-9, atol=1e-18)
    assert np.allclose(np.array(gb.window.as_tuple()) - np.array(ga.window.as_tuple()),
                       [shift[0], shift[0], shift[1], shift[1]])


# -- AKDE ------------------------------------------------------------------------------------

def _fit(model):
    return FitResult(model, 0.0, 3, 6.0)


def test_akde_iid_equals_kde():
    xy = np.random.default_rng(7).normal(size=(500, 2)) * 30
    tr = _traj(xy)
    model = MovementModel("IID", (900.0, 400.0), theta=0.3)
    ak = akde_density(tr, _fit(model), 128)
    kd = kde_density(tr, len(tr) ** (-1 / 3) * model.covariance(), 128)
    assert np.abs(ak.values - kd.values).max() <= 1e-12 * kd.values.max()


def test_akde_effective_size():
    tr = _traj(np.random.default_rng(8).normal(size=(1000, 2)))
    T = tr.duration
    model = MovementModel.ou(2.0, T / 8)
    bw, n_eff = akde_bandwidth(tr, _fit(model))
    assert n_eff == pytest.approx(8.0)
    assert np.allclose(bw, model.covariance() / 2.0)
    # relative to the KDE rule on n = 1000 the bandwidth grows by (n / n_eff)^(1/3)
    kde_like = 1000 ** (-1 / 3) * model.covariance()
    assert np.allclose(np.diag(bw) / np.diag(kde_like), 5.0)
    # clamps to [1, n]
    _, n1 = akde_bandwidth(tr, _fit(MovementModel.ou(2.0, 10 * T)))
    _, n2 = akde_bandwidth(tr, _fit(MovementModel.ou(2.0, 1e-3)))
    assert (n1, n2) == (1.0, 1000.0)


def test_akde_rejects_brownian():
    tr = _traj(np.random.default_rng(9).normal(size=(20, 2)))
    with pytest.raises(UnsupportedFamily):
        akde_bandwidth(tr, _fit(MovementModel.brownian(1.0)))


def test_geojson_shapes():
    tr = _traj(np.random.default_rng(10).normal(size=(100, 2)))
    mcp = estimate_geojson(mcp_estimate(tr), "a", {"proj": "identity"})
    ring = mcp["features"][0]["geometry"]["coordinates"][0]
    assert ring[0] == ring[-1]
    g = kde_density(tr, kde_bandwidth(tr), 32)
    est = level_set(g, 0.5)
    gj = estimate_geojson(est, "a", {"proj": "identity"})
    polys = gj["features"][0]["geometry"]["coordinates"]
    area = sum(polygon_area(np.array(p[0][:-1])) for p in polys)
    assert area == pytest.approx(est.area)
    assert gj["features"][0]["properties"]["method"] == "KDE"
