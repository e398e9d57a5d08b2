import math

import numpy as np
import pytest

from rangeinteract.errors import InvalidParams
from rangeinteract.semivariogram import MovementModel, empirical_svf
from rangeinteract.simulate import SimSpec, counter_normals, regular_times, simulate


def test_same_seed_bit_identical():
    spec = SimSpec(MovementModel.ouf(2.0, 500.0, 50.0), regular_times(300, 10), 42)
    a, b = simulate(spec), simulate(spec)
    assert a.xy.tobytes() == b.xy.tobytes()
    c = simulate(SimSpec(spec.model, spec.times, 43))
    assert not np.array_equal(a.xy, c.xy)


def test_counter_stream_prefix_stable():
    long = counter_normals(7, 100, 2)
    short = counter_normals(7, 10, 2)
    assert np.array_equal(long[:10], short)
    assert long.std() == pytest.approx(1.0, abs=0.2)


def test_times_must_increase():
    with pytest.raises(InvalidParams):
        SimSpec(MovementModel.iid(1.0), [0, 5, 5])


def test_ou_degenerate_noise_sits_at_mean():
    tr = simulate(SimSpec(MovementModel.ou(1e-300, 100.0, mu=(5.0, 7.0)), regular_times(50, 10), 1))
    assert np.all(tr.xy == [5.0, 7.0])


def test_ou_conditional_mean_halves():
    tau_p = 3600 / math.log(2)
    sill = 2.0
    resid = []
    for seed in range(10000):
        tr = simulate(SimSpec(MovementModel.ou(sill, tau_p), np.array([0, 3600]), seed))
        resid.append(tr.xy[1, 0] - 0.5 * tr.xy[0, 0])
    resid = np.array(resid)
    se = math.sqrt(sill / 2 * 0.75) / math.sqrt(len(resid))
    assert abs(resid.mean()) < 3 * se
    assert resid.var() == pytest.approx(sill / 2 * 0.75, rel=0.05)


def test_ou_lag1_autocorrelation():
    tau_p, dt = 1000.0, 100
    x = simulate(SimSpec(MovementModel.ou(2.0, tau_p), regular_times(100_000, dt), 3)).xy[:, 0]
    x = x - x.mean()
    rho = np.dot(x[1:], x[:-1]) / np.dot(x, x)
    assert rho == pytest.approx(math.exp(-dt / tau_p), abs=0.01)


def test_ou_stationary_variance():
    tr = simulate(SimSpec(MovementModel.ou(2.0, 1000.0), regular_times(100_000, 100), 4))
    assert np.var(tr.xy, axis=0) == pytest.approx([1.0, 1.0], rel=0.05)


def test_ouf_small_tau_v_matches_ou_marginals():
    times = regular_times(50_000, 100)
    ouf = simulate(SimSpec(MovementModel.ouf(2.0, 1000.0, 1e-9 * 1000.0), times, 5)).xy
    assert np.abs(ouf.mean(axis=0)).max() < 0.1
    assert np.var(ouf, axis=0) == pytest.approx([1.0, 1.0], rel=0.07)
    x = ouf[:, 0] - ouf[:, 0].mean()
    assert np.dot(x[1:], x[:-1]) / np.dot(x, x) == pytest.approx(math.exp(-0.1), abs=0.01)


def test_ouf_velocity_smooths_track():
    # with velocity memory, successive displacements are positively correlated
    xy = simulate(SimSpec(MovementModel.ouf(2.0, 10_000.0, 1000.0), regular_times(20_000, 100), 6)).xy
    d = np.diff(xy[:, 0])
    assert np.corrcoef(d[1:], d[:-1])[0, 1] > 0.5


def test_brownian_slope():
    D = 0.5
    tr = simulate(SimSpec(MovementModel.brownian(D), regular_times(20_000, 10), 8))
    ev = empirical_svf(tr, 0.1)
    slope = np.dot(ev.lags, ev.gamma_hat) / np.dot(ev.lags, ev.lags)
    assert slope == pytest.approx(D, rel=0.05)


def test_iid_rotated_covariance():
    m = MovementModel("IID", (9.0, 1.0), theta=math.pi / 4)
    xy = simulate(SimSpec(m, regular_times(50_000, 1), 9)).xy
    assert np.allclose(np.cov(xy, rowvar=False), m.covariance(), atol=0.2)


def test_irregular_times_supported():
    times = np.array([0, 10, 30, 35, 100])
    tr = simulate(SimSpec(MovementModel.ouf(1.0, 100.0, 10.0), times, 1))
    assert tr.t.tolist() == times.tolist()
    assert np.isfinite(tr.xy).all()
