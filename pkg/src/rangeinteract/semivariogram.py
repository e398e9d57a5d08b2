"""Empirical and theoretical semivariance of movement tracks, and model fitting.

Semivariance of a 2-D track is the sum over both axes: for relocations ``z``
separated by lag ``tau``

    gamma(tau) = E ||z(t + tau) - z(t)||^2 / 2

so an isotropic OU process with per-axis variance ``s/2`` has sill ``s``.
Models are fitted to the empirical curve by a Gaussian pseudo-likelihood on
the variogram ordinates, with ordinate variance ``2 gamma^2 / n(tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .core import Trajectory
from .errors import (
    DegenerateVariogram,
    InvalidParams,
    NonConvergence,
    TooShort,
    UnevenSampling,
)
from .ingest import median_sampling_interval

__all__ = [
    "Family",
    "MovementModel",
    "EmpiricalVariogram",
    "FitResult",
    "empirical_svf",
    "theoretical_svf",
    "pseudo_log_likelihood",
    "fit_svf_model",
    "select_model",
]

N_STARTS = 8
REL_TOL = 1e-8


class Family(str, Enum):
    IID = "IID"
    BROWNIAN = "Brownian"
    OU = "OU"
    OUF = "OUF"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.lower():
                    return member
        return None


_BASE_K = {Family.IID: 1, Family.BROWNIAN: 1, Family.OU: 2, Family.OUF: 3}


def _pair(v, name):
    if v is None:
        return None
    arr = np.broadcast_to(np.asarray(v, dtype=float), (2,))
    if not np.isfinite(arr).all():
        raise InvalidParams(f"{name} must be finite")
    return (float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class MovementModel:
    """Continuous-time movement model.

    ``sigma2`` holds the position variance along each principal axis; the axes
    are rotated by ``theta``.  Brownian motion has no variance and is described
    by ``diffusion`` (per-axis increment variance per second) instead.
    Use the ``iid``/``ou``/``ouf``/``brownian`` constructors for the isotropic
    case, where ``sill`` is split evenly between the axes.
    """

    family: Family
    sigma2: tuple | None = None
    theta: float = 0.0
    tau_p: float | None = None
    tau_v: float | None = None
    mu: tuple = (0.0, 0.0)
    diffusion: tuple | None = None

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise InvalidParams(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "sigma2", _pair(self.sigma2, "sigma2"))
        object.__setattr__(self, "diffusion", _pair(self.diffusion, "diffusion"))
        object.__setattr__(self, "mu", _pair(self.mu, "mu"))
        if not math.isfinite(self.theta):
            raise InvalidParams("theta must be finite")
        object.__setattr__(self, "theta", float(self.theta) % math.pi)

        if fam is Family.BROWNIAN:
            if self.diffusion is None or min(self.diffusion) <= 0:
                raise InvalidParams("Brownian model needs positive diffusion")
            return
        if self.sigma2 is None or min(self.sigma2) <= 0:
            raise InvalidParams("sigma2 must be positive on both axes")
        if fam in (Family.OU, Family.OUF):
            if self.tau_p is None or not (self.tau_p > 0 and math.isfinite(self.tau_p)):
                raise InvalidParams("tau_p must be positive")
        if fam is Family.OUF:
            if self.tau_v is None or not (0 < self.tau_v < self.tau_p):
                raise InvalidParams("OUF requires 0 < tau_v < tau_p")

    # -- constructors -----------------------------------------------------
    @classmethod
    def iid(cls, sill, mu=(0.0, 0.0)):
        return cls(Family.IID, (sill / 2, sill / 2), mu=mu)

    @classmethod
    def ou(cls, sill, tau_p, mu=(0.0, 0.0)):
        return cls(Family.OU, (sill / 2, sill / 2), tau_p=tau_p, mu=mu)

    @classmethod
    def ouf(cls, sill, tau_p, tau_v, mu=(0.0, 0.0)):
        return cls(Family.OUF, (sill / 2, sill / 2), tau_p=tau_p, tau_v=tau_v, mu=mu)

    @classmethod
    def brownian(cls, D, mu=(0.0, 0.0)):
        return cls(Family.BROWNIAN, diffusion=(D, D), mu=mu)

    # -- derived ----------------------------------------------------------
    @property
    def sill(self) -> float | None:
        return None if self.sigma2 is None else self.sigma2[0] + self.sigma2[1]

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def covariance(self) -> np.ndarray:
        """Stationary position covariance R diag(sigma2) R^T."""
        if self.sigma2 is None:
            raise InvalidParams("Brownian motion has no stationary covariance")
        R = self.rotation()
        return R @ np.diag(self.sigma2) @ R.T

    def to_dict(self) -> dict:
        return {"family": self.family.value, "sigma2": self.sigma2, "theta": self.theta,
                "tau_p": self.tau_p, "tau_v": self.tau_v, "mu": self.mu,
                "diffusion": self.diffusion}

    @classmethod
    def from_dict(cls, d: dict) -> "MovementModel":
        return cls(d["family"], d.get("sigma2"), d.get("theta", 0.0), d.get("tau_p"),
                   d.get("tau_v"), tuple(d.get("mu") or (0.0, 0.0)), d.get("diffusion"))


def _shape(model: MovementModel, tau: np.ndarray) -> np.ndarray:
    """Per-axis semivariance divided by the per-axis scale (sigma2 or diffusion/2)."""
    fam = model.family
    if fam is Family.IID:
        return (tau > 0).astype(float)
    if fam is Family.BROWNIAN:
        return tau
    tp = model.tau_p
    if fam is Family.OU:
        return -np.expm1(-tau / tp)
    tv = model.tau_v
    # OUF: position autocorrelation (tp e^{-t/tp} - tv e^{-t/tv}) / (tp - tv)
    acf = (tp * np.exp(-tau / tp) - tv * np.exp(-tau / tv)) / (tp - tv)
    return 1.0 - acf


def _axis_scales(model: MovementModel) -> tuple:
    if model.family is Family.BROWNIAN:
        return (model.diffusion[0] / 2, model.diffusion[1] / 2)
    return model.sigma2


def theoretical_svf(model: MovementModel, tau):
    """Model semivariance (m^2, both axes summed) at lag(s) ``tau`` in seconds."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0) or not np.isfinite(t).all():
        raise InvalidParams("tau must be finite and >= 0")
    a, b = _axis_scales(model)
    out = (a + b) * _shape(model, t)
    return float(out) if out.ndim == 0 else out


def _axis_svf(model: MovementModel, tau) -> np.ndarray:
    """2x2 matrix semivariance R diag(g_a(tau)) R^T for each lag; shape (n, 2, 2)."""
    t = np.asarray(tau, dtype=float)
    h = _shape(model, t)
    a, b = _axis_scales(model)
    R = model.rotation()
    D = np.zeros(t.shape + (2, 2))
    D[..., 0, 0] = a * h
    D[..., 1, 1] = b * h
    return R @ D @ R.T


@dataclass(frozen=True, eq=False)
class EmpiricalVariogram:
    """Method-of-moments semivariance at integer multiples of the sampling step.

    ``gxx``, ``gyy`` and ``gxy`` are the matching entries of the matrix
    semivariance (half mean outer product of displacements); ``gamma_hat`` is
    their trace.
    """

    lags: np.ndarray
    gamma_hat: np.ndarray
    pair_count: np.ndarray
    gxx: np.ndarray | None = None
    gyy: np.ndarray | None = None
    gxy: np.ndarray | None = None
    dt: float = float("nan")
    duration: float = float("nan")

    def __len__(self):
        return len(self.lags)

    def csv_rows(self):
        return [(float(t), float(g), int(n))
                for t, g, n in zip(self.lags, self.gamma_hat, self.pair_count)]

    def subset(self, mask) -> "EmpiricalVariogram":
        sel = lambda a: None if a is None else np.asarray(a)[mask]  # noqa: E731
        return replace(self, lags=self.lags[mask], gamma_hat=self.gamma_hat[mask],
                       pair_count=self.pair_count[mask], gxx=sel(self.gxx),
                       gyy=sel(self.gyy), gxy=sel(self.gxy))


def _lattice_index(t: np.ndarray, dt: float, tol: float) -> np.ndarray:
    steps = np.diff(t) / dt
    k = np.rint(steps)
    bad = (k < 1) | (np.abs(steps - k) > tol)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise UnevenSampling(
            f"interval {int(t[i + 1] - t[i])} s at index {i} is not a multiple of "
            f"the median step {dt:g} s within {tol:.0%}")
    return np.concatenate([[0], np.cumsum(k.astype(np.int64))])


def empirical_svf(traj: Trajectory, max_lag_fraction: float = 0.5,
                  tol: float = 0.01) -> EmpiricalVariogram:
    """Empirical semivariance of an evenly sampled track.

    Intervals must be whole multiples of the median interval (within ``tol``);
    multiples above one are treated as missing fixes.  Lags run over
    ``k * dt`` up to ``max_lag_fraction * T``; lags without pairs are dropped.
    """
    if not 0 < max_lag_fraction <= 1:
        raise InvalidParams("max_lag_fraction must be in (0, 1]")
    if len(traj) < 2:
        raise TooShort("need at least two relocations")
    dt = median_sampling_interval(traj)
    idx = _lattice_index(traj.t, dt, tol)
    n_slots = int(idx[-1]) + 1
    z = np.zeros((n_slots, 2))
    valid = np.zeros(n_slots, dtype=bool)
    z[idx] = traj.xy - traj.xy.mean(axis=0)
    valid[idx] = True
    dense = bool(valid.all())

    duration = float(traj.duration)
    max_k = min(int(math.floor(max_lag_fraction * duration / dt + 1e-9)), n_slots - 1)
    lags, gx, gy, gc, cnt = [], [], [], [], []
    for k in range(1, max_k + 1):
        d = z[k:] - z[:-k]
        if not dense:
            d = d[valid[k:] & valid[:-k]]
        n = len(d)
        if n == 0:
            continue
        lags.append(k * dt)
        cnt.append(n)
        gx.append(np.dot(d[:, 0], d[:, 0]) / (2 * n))
        gy.append(np.dot(d[:, 1], d[:, 1]) / (2 * n))
        gc.append(np.dot(d[:, 0], d[:, 1]) / (2 * n))
    if not lags:
        raise TooShort("no lag has any pair; track too short for max_lag_fraction")
    gx, gy = np.array(gx), np.array(gy)
    return EmpiricalVariogram(np.array(lags, dtype=float), gx + gy,
                              np.array(cnt, dtype=np.int64), gx, gy, np.array(gc),
                              dt=dt, duration=duration)


# -- fitting ------------------------------------------------------------------

def _trace_pl(gamma_hat, gamma_model, n) -> float:
    v = 2.0 * gamma_model ** 2 / n
    return float(np.sum(-0.5 * np.log(2 * math.pi * v) - (gamma_hat - gamma_model) ** 2 / (2 * v)))


def _orientation_gain(ev: EmpiricalVariogram, model: MovementModel) -> float:
    """Pseudo-log-likelihood gain of the anisotropy terms over zero anisotropy.

    Works on the axis-difference ordinates ``gxx - gyy`` and ``2 gxy`` whose
    model means are ``(c1 - c2) h(tau) (cos 2theta, sin 2theta)``; zero when the
    model is isotropic.
    """
    if ev.gxx is None:
        raise InvalidParams("variogram lacks per-axis components; anisotropic fit impossible")
    gm = theoretical_svf(model, ev.lags)
    w = ev.pair_count / (2.0 * gm ** 2)
    G = _axis_svf(model, ev.lags)
    m1 = G[:, 0, 0] - G[:, 1, 1]
    m2 = 2 * G[:, 0, 1]
    d1 = ev.gxx - ev.gyy
    d2 = 2 * ev.gxy
    return float(0.5 * np.sum(w * (d1 ** 2 + d2 ** 2 - (d1 - m1) ** 2 - (d2 - m2) ** 2)))


def _fit_lags(ev: EmpiricalVariogram, min_pairs: int) -> EmpiricalVariogram:
    return ev.subset(ev.pair_count >= min_pairs)


def pseudo_log_likelihood(ev: EmpiricalVariogram, model: MovementModel,
                          anisotropic: bool = False, min_pairs: int = 30) -> float:
    """Gaussian pseudo-log-likelihood of ``model`` for the variogram ordinates."""
    sub = _fit_lags(ev, min_pairs)
    pl = _trace_pl(sub.gamma_hat, theoretical_svf(model, sub.lags), sub.pair_count)
    if anisotropic:
        pl += _orientation_gain(sub, model)
    return pl


@dataclass(frozen=True)
class FitResult:
    model: MovementModel
    log_pl: float
    k: int
    aic: float
    delta_aic: float = 0.0
    anisotropic: bool = False
    n_lags: int = 0
    notes: tuple = field(default_factory=tuple)

    @property
    def name(self) -> str:
        return self.model.family.value + (" anisotropic" if self.anisotropic else "")

    def to_dict(self) -> dict:
        return {"family": self.model.family.value, "anisotropic": self.anisotropic,
                "params": self.model.to_dict(), "log_pl": self.log_pl, "k": self.k,
                "aic": self.aic, "delta_aic": self.delta_aic, "n_lags": self.n_lags}

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(MovementModel.from_dict(d["params"]), d["log_pl"], d["k"], d["aic"],
                   d.get("delta_aic", 0.0), d.get("anisotropic", False), d.get("n_lags", 0))


def _unpack(family: Family, p: np.ndarray, mu, tv_floor: float = 0.0) -> MovementModel:
    e = np.exp(p)
    if family is Family.IID:
        return MovementModel.iid(e[0], mu)
    if family is Family.BROWNIAN:
        return MovementModel.brownian(e[0], mu)
    if family is Family.OU:
        return MovementModel.ou(e[0], e[1], mu)
    tv = tv_floor + e[1]
    return MovementModel.ouf(e[0], tv + e[2], tv, mu)


def _curve(family: Family, p: np.ndarray, tau: np.ndarray, tv_floor: float = 0.0) -> np.ndarray:
    e = np.exp(p)
    if family is Family.IID:
        return np.full_like(tau, e[0])
    if family is Family.BROWNIAN:
        return e[0] * tau
    if family is Family.OU:
        return -e[0] * np.expm1(-tau / e[1])
    tv = tv_floor + e[1]
    tp = tv + e[2]
    return e[0] * (1.0 - (tp * np.exp(-tau / tp) - tv * np.exp(-tau / tv)) / (tp - tv))


def _starts(family: Family, tau: np.ndarray, g: np.ndarray, dt: float,
            tv_floor: float = 0.0) -> list[np.ndarray]:
    """Eight heuristic starting points in log-parameter space."""
    pos = g[g > 0]
    q = lambda a, p: float(np.quantile(a, p))  # noqa: E731
    if family is Family.IID:
        return [np.log([q(pos, p)]) for p in (0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.99)]
    if family is Family.BROWNIAN:
        rate = pos / tau[g > 0]
        return [np.log([q(rate, p)]) for p in (0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 0.99)]
    starts = []
    for sill in (q(pos, 0.5), q(pos, 0.9)):
        above = np.flatnonzero(g >= (1 - math.exp(-1)) * sill)
        t_cross = tau[above[0]] if above.size else tau[-1]
        for k, tp in enumerate((t_cross, q(tau, 0.05), q(tau, 0.25), 2 * dt)):
            tp = max(float(tp), 0.5 * dt)
            if family is Family.OU:
                starts.append(np.log([sill, tp]))
            else:
                tv = tp / 10 if k % 2 == 0 else tp / 1000
                tv = max(tv, 1.5 * tv_floor)
                tp = max(tp, 2 * tv)
                starts.append(np.log([sill, max(tv - tv_floor, 1e-3 * tv), tp - tv]))
    return starts


def _nelder_mead(fun, x0):
    f0 = fun(x0)
    opts = {"xatol": REL_TOL, "fatol": REL_TOL * max(1.0, abs(f0)),
            "maxiter": 4000 * len(x0), "maxfev": 4000 * len(x0)}
    res = minimize(fun, x0, method="Nelder-Mead", options=opts)
    # one restart guards against premature simplex collapse
    res2 = minimize(fun, res.x, method="Nelder-Mead", options=opts)
    return res2 if res2.fun <= res.fun else res


def fit_svf_model(ev: EmpiricalVariogram, family, anisotropic: bool = False,
                  min_pairs: int = 30, mu=(0.0, 0.0),
                  min_tau_v: float | None = None) -> FitResult:
    """Maximize the variogram pseudo-likelihood for one model family.

    Lags with fewer than ``min_pairs`` pairs are ignored.  Nelder-Mead runs in
    log-parameter space from eight starts; the best finite optimum wins.  For
    anisotropic fits the trace curve fixes sill and timescales and the axis
    split and rotation follow in closed form from the axis-difference
    ordinates by weighted least squares.

    OUF velocity timescales are searched on ``tau_v >= min_tau_v`` (default:
    the sampling interval, below which tau_v is not resolvable from lags at
    multiples of it) together with the ``tau_v -> 0`` limit, which is the OU
    curve; so an OUF fit never scores below the OU fit on the same data.
    """
    family = Family(family)
    sub = _fit_lags(ev, min_pairs)
    if len(sub) < 5:
        raise TooShort(f"need at least 5 lags with >= {min_pairs} pairs, have {len(sub)}")
    g = sub.gamma_hat
    if not np.any(g > 0):
        raise DegenerateVariogram("all semivariance estimates are zero")
    tau, n = sub.lags, sub.pair_count
    dt = ev.dt if math.isfinite(ev.dt) else float(tau[0])
    tv_floor = 0.0
    if family is Family.OUF:
        tv_floor = dt if min_tau_v is None else float(min_tau_v)
        if not (tv_floor >= 0 and math.isfinite(tv_floor)):
            raise InvalidParams("min_tau_v must be a finite value >= 0")

    def objective(p):
        if not np.isfinite(p).all() or np.any(np.abs(p) > 700):
            return 1e300
        with np.errstate(all="ignore"):
            gm = _curve(family, p, tau, tv_floor)
        if not np.isfinite(gm).all() or np.any(gm <= 0):
            return 1e300
        val = -_trace_pl(g, gm, n)
        return val if math.isfinite(val) else 1e300

    best = None
    for x0 in _starts(family, tau, g, dt, tv_floor):
        res = _nelder_mead(objective, np.asarray(x0, dtype=float))
        if res.fun >= 1e300 or not np.isfinite(res.x).all():
            continue
        if best is None or res.fun < best.fun:
            best = res
    notes: tuple = ()
    if family is Family.OUF:
        limit = _ou_limit(ev, min_pairs, mu)
        if limit is not None and (best is None or limit[1] >= -best.fun):
            model, log_pl = limit
            notes = ("tau_v at the OU limit",)
            best = None
    elif best is None:
        raise NonConvergence(f"all {N_STARTS} starts failed for {family.value}")
    if best is not None:
        try:
            model = _unpack(family, best.x, mu, tv_floor)
        except InvalidParams as exc:
            raise NonConvergence(f"{family.value} fit left the parameter space: {exc}") from None
        log_pl = -float(best.fun)
    elif not notes:
        raise NonConvergence(f"all {N_STARTS} starts failed for {family.value}")
    k = _BASE_K[family] + 2
    if anisotropic:
        model = _orient(sub, model)
        log_pl += _orientation_gain(sub, model)
        k += 2
    return FitResult(model, log_pl, k, 2 * k - 2 * log_pl, 0.0, anisotropic, len(sub), notes)


OU_LIMIT_RATIO = 1e-9


def _ou_limit(ev, min_pairs, mu):
    """OUF with a vanishing velocity timescale, scored as the OU fit."""
    try:
        ou = fit_svf_model(ev, Family.OU, min_pairs=min_pairs, mu=mu)
    except NonConvergence:
        return None
    m = ou.model
    return MovementModel.ouf(m.sill, m.tau_p, OU_LIMIT_RATIO * m.tau_p, mu), ou.log_pl


def _orient(sub: EmpiricalVariogram, iso: MovementModel) -> MovementModel:
    if sub.gxx is None:
        raise InvalidParams("variogram lacks per-axis components; anisotropic fit impossible")
    gm = theoretical_svf(iso, sub.lags)
    scale_sum = sum(_axis_scales(iso))
    h = gm / scale_sum
    w = sub.pair_count / (2.0 * gm ** 2)
    den = np.sum(w * h * h)
    a = np.sum(w * h * (sub.gxx - sub.gyy)) / den
    b = np.sum(w * h * 2 * sub.gxy) / den
    amp = math.hypot(a, b)
    cap = scale_sum * (1 - 1e-9)
    if amp > cap:
        a, b, amp = a * cap / amp, b * cap / amp, cap
    theta = 0.5 * math.atan2(b, a) % math.pi
    c = ((scale_sum + amp) / 2, (scale_sum - amp) / 2)
    if iso.family is Family.BROWNIAN:
        return replace(iso, diffusion=(2 * c[0], 2 * c[1]), theta=theta)
    return replace(iso, sigma2=c, theta=theta)


def select_model(fits: Sequence[FitResult]) -> list[FitResult]:
    """Rank fits by AIC (stable for ties) and fill in ``delta_aic``."""
    fits = list(fits)
    if not fits:
        return []
    best = min(f.aic for f in fits)
    ranked = sorted(fits, key=lambda f: f.aic)
    return [replace(f, delta_aic=f.aic - best) for f in ranked]
