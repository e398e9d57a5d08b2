import warnings

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import UNIT, brute_survival, grid_refs
from rangeinteract.core import MarkedPointPattern, split_by_mark, validate_trajectory
from rangeinteract.envelope import dclf_test, mad_test, random_shift
from rangeinteract.errors import DegenerateGeometry, LowPowerWarning
from rangeinteract.homerange import kde_density, level_set, mcp_estimate
from rangeinteract.ppstats import IntensityModel, SummaryCurve, fhat_inhom, ghat_cross, khat_cross
from rangeinteract.semivariogram import (
    FitResult,
    MovementModel,
    empirical_svf,
    select_model,
    theoretical_svf,
)

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
coord = st.floats(-1e4, 1e4, allow_nan=False)
unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


def _traj(xy, dt=60):
    return validate_trajectory([(k * dt, x, y) for k, (x, y) in enumerate(xy)])


tracks = arrays(float, st.tuples(st.integers(12, 60), st.just(2)), elements=coord)
clouds = arrays(float, st.tuples(st.integers(4, 40), st.just(2)), elements=unit)


# -- core -------------------------------------------------------------------------------

@SETTINGS
@given(st.lists(st.tuples(st.integers(0, 10 ** 6), coord, coord), min_size=1, max_size=30,
                unique_by=lambda r: r[0]))
def test_validate_idempotent(raw):
    once = validate_trajectory(raw, "a")
    assert validate_trajectory(once) == once
    assert np.all(np.diff(once.t) > 0)


@SETTINGS
@given(clouds, st.lists(st.sampled_from("abc"), min_size=40, max_size=40))
def test_split_partitions(xy, labels):
    marks = labels[:len(xy)]
    p = MarkedPointPattern(xy, marks, ("a", "b", "c"), UNIT)
    parts = [split_by_mark(p, m) for m in p.mark_set]
    assert sum(len(s) for s in parts) == len(p)
    for m, s in zip(p.mark_set, parts):
        assert set(s.marks.tolist()) <= {m}
        assert np.array_equal(s.xy, p.points_of(m))


# -- semivariance ----------------------------------------------------------------------------

@SETTINGS
@given(tracks, coord, coord, st.floats(0.1, 10.0))
def test_svf_translation_and_scaling(xy, dx, dy, c):
    ev = empirical_svf(_traj(xy), 0.5)
    scale = max(1.0, float(np.abs(xy).max()) + abs(dx) + abs(dy)) ** 2
    moved = empirical_svf(_traj(xy + [dx, dy]), 0.5)
    assert np.allclose(moved.gamma_hat, ev.gamma_hat, rtol=1e-9, atol=1e-9 * scale)
    scaled = empirical_svf(_traj(c * xy), 0.5)
    assert np.allclose(scaled.gamma_hat, c * c * ev.gamma_hat, rtol=1e-9, atol=1e-9 * scale * c * c)


models = st.one_of(
    st.builds(MovementModel.iid, st.floats(1e-3, 1e6)),
    st.builds(MovementModel.brownian, st.floats(1e-3, 1e3)),
    st.builds(MovementModel.ou, st.floats(1e-3, 1e6), st.floats(1.0, 1e6)),
    st.floats(1.0, 1e6).flatmap(lambda tp: st.builds(
        MovementModel.ouf, st.floats(1e-3, 1e6), st.just(tp), st.floats(1e-3 * tp, 0.999 * tp))),
)


@SETTINGS
@given(models, st.lists(st.floats(0.0, 1e7), min_size=2, max_size=30))
def test_theoretical_nondecreasing(model, taus):
    tau = np.sort(np.array(taus))
    g = theoretical_svf(model, tau)
    assert np.all(g >= 0)
    assert np.all(np.diff(g) >= -1e-9 * max(1.0, float(g.max())))


@SETTINGS
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.integers(1, 8)), min_size=1, max_size=6),
       st.floats(-1e3, 1e3))
def test_ranking_invariant_to_constant_shift(specs, c):
    def fits(shift):
        return [FitResult(MovementModel.ou(1.0 + n, 1.0), pl + shift, k, 2 * k - 2 * (pl + shift))
                for n, (pl, k) in enumerate(specs)]
    a, b = select_model(fits(0.0)), select_model(fits(c))
    assert [f.model.sill for f in a] == [f.model.sill for f in b]
    assert np.allclose([f.delta_aic for f in a], [f.delta_aic for f in b], atol=1e-9)


# -- home range -----------------------------------------------------------------------------

@SETTINGS
@given(arrays(float, st.tuples(st.integers(3, 30), st.just(2)), elements=st.floats(-50, 50)),
       st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_level_sets_nested(xy, a, b):
    lo, hi = sorted((a, b))
    g = kde_density(xy, np.eye(2) * 25.0, grid_size=48)
    small, big = level_set(g, lo), level_set(g, hi)
    assert np.all(big.mask[small.mask])
    assert small.area <= big.area


@SETTINGS
@given(arrays(float, st.tuples(st.integers(6, 40), st.just(2)), elements=st.floats(-50, 50)),
       st.floats(0.3, 1.0), st.floats(0.3, 1.0))
def test_mcp_monotone(xy, a, b):
    lo, hi = sorted((a, b))
    try:
        small = mcp_estimate(_traj(xy), lo).area
    except DegenerateGeometry:
        return
    assert small <= mcp_estimate(_traj(xy), hi).area + 1e-9


# -- point pattern statistics --------------------------------------------------------------------

R = np.linspace(0.0, 0.25, 11)


inner = arrays(float, st.tuples(st.integers(4, 40), st.just(2)), elements=st.floats(0.25, 0.75))


@SETTINGS
@given(inner, clouds)
def test_k_g_monotone_when_border_inactive(a, b):
    # every i-point is eligible up to r = 0.25, so the ratios share one denominator
    p = MarkedPointPattern.from_groups({"a": a, "b": b}, UNIT)
    lam = IntensityModel.constant({"a": float(len(a)), "b": float(len(b))}, UNIT)
    for c in (khat_cross(p, lam, "a", "b", R), ghat_cross(p, lam, "a", "b", R)):
        assert np.isfinite(c.values).all()
        assert np.all(np.diff(c.values) >= -1e-12)


@SETTINGS
@given(clouds, clouds)
def test_f_g_bounded(a, b):
    p = MarkedPointPattern.from_groups({"a": a, "b": b}, UNIT)
    lam = IntensityModel.constant({"a": float(len(a)), "b": float(len(b))}, UNIT)
    for c in (ghat_cross(p, lam, "a", "b", R), fhat_inhom(p, lam, "b", R, resolution=16)):
        v = c.values[np.isfinite(c.values)]
        assert np.all((v >= 0) & (v <= 1))


def test_reduced_sample_f_can_decrease():
    # the eligible reference set shrinks towards the centre, away from a corner cluster
    b = np.full((4, 2), 0.125)
    p = MarkedPointPattern.from_groups({"a": np.zeros((4, 2)), "b": b}, UNIT)
    lam = IntensityModel.constant({"a": 4.0, "b": 4.0}, UNIT)
    F = fhat_inhom(p, lam, "b", R, resolution=16)
    oracle = brute_survival(grid_refs(UNIT, 16), b, [0.0] * 4, UNIT, R)
    assert np.array_equal(F.values, oracle, equal_nan=True)
    assert np.any(np.diff(F.values[np.isfinite(F.values)]) < 0)


@SETTINGS
@given(clouds, clouds, unit, unit)
def test_random_shift_preserves_counts(a, b, sx, sy):
    p = MarkedPointPattern.from_groups({"a": a, "b": b}, UNIT)
    lam = IntensityModel.constant({"a": 1.0, "b": 1.0}, UNIT)
    q, _ = random_shift(p, lam, "b", (sx, sy))
    assert q.counts() == p.counts()
    assert np.array_equal(q.points_of("a"), p.points_of("a"))
    assert UNIT.contains(q.xy).all()


@SETTINGS
@given(st.integers(1, 60), st.integers(0, 2 ** 31))
def test_pvalues_on_rank_lattice(S, seed):
    rng = np.random.default_rng(seed)
    r = np.linspace(0, 1, 9)
    obs = SummaryCurve(r, rng.normal(size=9), "L", "a", "b")
    sims = [SummaryCurve(r, rng.normal(size=9), "L", "a", "b") for _ in range(S)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowPowerWarning)
        for test in (mad_test, dclf_test):
            _, pv = test(obs, sims)
            k = pv * (S + 1)
            assume(np.isfinite(k))
            assert abs(k - round(k)) < 1e-9 and 1 <= round(k) <= S + 1
