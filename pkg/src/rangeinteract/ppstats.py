"""Log-linear multitype intensities and inhomogeneous cross-type K, L, F, G, J.

All distance-based estimators use the border (reduced-sample) correction: at
distance r only reference points at least r from the window edge count.
Neighbour candidates come from a uniform hash grid scaled to r_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import MarkedPointPattern, Window
from .errors import (
    DivisionDomain,
    EmptyComponent,
    GridMismatch,
    InsufficientPoints,
    InvalidParams,
    NoEligiblePoints,
    NoEligibleReference,
    NotConverged,
    UnknownMark,
)

__all__ = [
    "IntensityModel",
    "SummaryCurve",
    "fit_intensity",
    "default_r_grid",
    "khat_cross",
    "lhat_cross",
    "fhat_inhom",
    "ghat_cross",
    "jhat_cross",
    "lambda_floor",
    "torus_wrap",
]

J_TAIL_GUARD = 0.025


def torus_wrap(v, lo: float, width: float):
    return lo + np.mod(np.asarray(v, dtype=float) - lo, width)


# -- intensity -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IntensityModel:
    """lambda_m(x, y) = exp(alpha_m + beta_m x + gamma_m y) per mark.

    ``shifts`` holds accumulated torus translations per mark; a shifted mark
    evaluates its surface at the wrapped, inverse-shifted location.
    """

    coef: dict
    window: Window
    cov: dict = field(default_factory=dict)
    shifts: dict = field(default_factory=dict)
    fitted: bool = True
    iterations: dict = field(default_factory=dict)

    def __post_init__(self):
        coef = {str(m): np.asarray(c, dtype=float).reshape(3) for m, c in self.coef.items()}
        for m, c in coef.items():
            if not np.isfinite(c).all():
                raise InvalidParams(f"non-finite coefficients for mark {m}")
        object.__setattr__(self, "coef", coef)

    @classmethod
    def constant(cls, rates: dict, window: Window) -> "IntensityModel":
        return cls({m: (math.log(r), 0.0, 0.0) for m, r in rates.items()}, window, fitted=False)

    @property
    def marks(self) -> tuple:
        return tuple(self.coef)

    def intensity(self, mark, xy) -> np.ndarray:
        m = str(mark)
        if m not in self.coef:
            raise UnknownMark(m)
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        x, y = xy[:, 0], xy[:, 1]
        dx, dy = self.shifts.get(m, (0.0, 0.0))
        if dx != 0.0 or dy != 0.0:
            w = self.window
            x = torus_wrap(x - dx, w.x_min, w.width)
            y = torus_wrap(y - dy, w.y_min, w.height)
        a, b, g = self.coef[m]
        return np.exp(a + b * x + g * y)

    def with_shift(self, mark, shift) -> "IntensityModel":
        m = str(mark)
        dx, dy = self.shifts.get(m, (0.0, 0.0))
        shifts = dict(self.shifts)
        shifts[m] = (dx + float(shift[0]), dy + float(shift[1]))
        return IntensityModel(self.coef, self.window, self.cov, shifts, self.fitted, self.iterations)

    def updated(self, other: "IntensityModel") -> "IntensityModel":
        """Copy with the marks of ``other`` replaced by its (unshifted) surfaces."""
        shifts = {m: s for m, s in self.shifts.items() if m not in other.coef}
        return IntensityModel(self.coef | other.coef, self.window, self.cov | other.cov, shifts,
                              self.fitted and other.fitted, self.iterations | other.iterations)

    def to_dict(self) -> dict:
        return {
            "window": list(self.window.as_tuple()),
            "coef": {m: [float(v) for v in c] for m, c in self.coef.items()},
            "se": {m: [float(v) for v in np.sqrt(np.diag(c))] for m, c in self.cov.items()},
        }


def _quadrature(xy: np.ndarray, window: Window, q: int):
    """Berman-Turner points, weights and data indicator for one mark."""
    xc, yc = window.cell_centers(q, q)
    gx, gy = np.meshgrid(xc, yc)
    dummies = np.column_stack([gx.ravel(), gy.ravel()])
    ix = np.clip(np.floor((xy[:, 0] - window.x_min) / window.width * q).astype(int), 0, q - 1)
    iy = np.clip(np.floor((xy[:, 1] - window.y_min) / window.height * q).astype(int), 0, q - 1)
    cell_of_data = iy * q + ix
    counts = np.bincount(cell_of_data, minlength=q * q) + 1
    cell_area = window.area / (q * q)
    w = np.concatenate([cell_area / counts[cell_of_data], cell_area / counts])
    u = np.concatenate([xy, dummies])
    z = np.concatenate([np.ones(len(xy)), np.zeros(q * q)])
    return u, w, z


def _irls(X: np.ndarray, w: np.ndarray, z: np.ndarray, max_iter: int, tol: float):
    """Weighted Poisson regression of z = y / w on X with prior weights w."""
    y = z / w
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(z.sum() / w.sum())
    dev_old = None
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = np.exp(eta)
        work = eta + (y - mu) / mu
        sw = np.sqrt(w * mu)
        beta, *_ = np.linalg.lstsq(X * sw[:, None], work * sw, rcond=None)
        mu = np.exp(X @ beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ylogy = np.where(y > 0, y * np.log(y / mu), 0.0)
        dev = 2.0 * float(np.sum(w * (ylogy - (y - mu))))
        if not (np.isfinite(dev) and np.isfinite(beta).all()):
            raise NotConverged("IRLS produced non-finite values")
        if dev_old is not None and abs(dev - dev_old) / (abs(dev) + 0.1) < tol:
            info = X.T @ (X * (w * mu)[:, None])
            return beta, np.linalg.inv(info), it
        dev_old = dev
    raise NotConverged(f"IRLS did not converge in {max_iter} iterations")


def fit_intensity(p: MarkedPointPattern, quad_resolution: int = 64,
                  max_iter: int = 100, tol: float = 1e-8, marks=None) -> IntensityModel:
    """Fit log-linear Poisson intensities per mark by quadrature + IRLS.

    Coordinates are centred and scaled to the window before fitting; the
    returned coefficients and covariances refer to the original coordinates.
    ``marks`` restricts the fit to a subset of the mark set (marks are fitted
    independently, so the subset fit equals the full one on those marks).
    """
    w = p.window
    cx, cy = 0.5 * (w.x_min + w.x_max), 0.5 * (w.y_min + w.y_max)
    sx, sy = 0.5 * w.width, 0.5 * w.height
    # maps standardized coefficients to original ones
    J = np.array([[1.0, -cx / sx, -cy / sy], [0.0, 1.0 / sx, 0.0], [0.0, 0.0, 1.0 / sy]])
    coef, cov, iters = {}, {}, {}
    for m in (p.mark_set if marks is None else tuple(str(v) for v in marks)):
        xy = p.points_of(m)
        if len(xy) < 4:
            raise InsufficientPoints(m, len(xy))
        u, wt, z = _quadrature(xy, w, quad_resolution)
        X = np.column_stack([np.ones(len(u)), (u[:, 0] - cx) / sx, (u[:, 1] - cy) / sy])
        b, c, it = _irls(X, wt, z, max_iter, tol)
        coef[m] = J @ b
        cov[m] = J @ c @ J.T
        iters[m] = it
    return IntensityModel(coef, w, cov, {}, True, iters)


# -- curves ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SummaryCurve:
    r: np.ndarray
    values: np.ndarray
    kind: str
    mark_i: str | None = None
    mark_j: str | None = None
    eligible: np.ndarray | None = None

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def pair(self):
        return (self.mark_i, self.mark_j)

    def csv_rows(self):
        yield ("r_m", "value", "kind", "mark_i", "mark_j")
        for r, v in zip(self.r, self.values):
            yield (repr(float(r)), "" if not np.isfinite(v) else repr(float(v)), self.kind,
                   self.mark_i or "", self.mark_j or "")


def default_r_grid(window: Window, r_max: float | None = None, n: int = 51) -> np.ndarray:
    """Evenly spaced distances from 0; r_max defaults to a quarter of the shorter side."""
    if r_max is None:
        r_max = 0.25 * min(window.width, window.height)
    if not (r_max > 0 and math.isfinite(r_max)):
        raise InvalidParams("r_max must be positive")
    return np.linspace(0.0, float(r_max), n)


def _check_r(r_grid) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) < 1 or r[0] != 0.0 or np.any(np.diff(r) <= 0) or not np.isfinite(r).all():
        raise InvalidParams("r_grid must be finite, increasing and start at 0")
    return r


# -- numba kernels ---------------------------------------------------------------------
#
# Points are bucketed on a uniform grid with cells about r_max / 2 wide; all
# neighbours within r_max of a query lie within ``reach`` cells of its cell.
# Each pair is binned by the first grid distance r[k] >= d; running sums (or
# products) over the bins then give the value at every r in one sweep.

@numba.njit(cache=True, nogil=True, inline="always")
def _first_ge(r, d):
    """Smallest k with r[k] >= d (len(r) if none)."""
    lo, hi = 0, len(r)
    while lo < hi:
        mid = (lo + hi) >> 1
        if r[mid] < d:
            lo = mid + 1
        else:
            hi = mid
    return lo


@numba.njit(cache=True, nogil=True, inline="always")
def _count_le(r, v):
    """Number of k with r[k] <= v."""
    lo, hi = 0, len(r)
    while lo < hi:
        mid = (lo + hi) >> 1
        if r[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@numba.njit(cache=True, nogil=True)
def _bucket(px, py, x0, y0, h, ncx, ncy):
    n = len(px)
    cell = np.empty(n, dtype=np.int64)
    for b in range(n):
        cx = min(max(int((px[b] - x0) / h), 0), ncx - 1)
        cy = min(max(int((py[b] - y0) / h), 0), ncy - 1)
        cell[b] = cy * ncx + cx
    order = np.argsort(cell, kind="mergesort")
    start = np.zeros(ncx * ncy + 1, dtype=np.int64)
    for b in range(n):
        start[cell[b] + 1] += 1
    for c in range(ncx * ncy):
        start[c + 1] += start[c]
    return order, start


@numba.njit(cache=True, nogil=True)
def _k_kernel(qx, qy, bd, lam_i, px, py, lam_j, r, x0, y0, h, ncx, ncy, reach):
    """Border-corrected sums of 1 / (lambda_i lambda_j) over pairs within r."""
    order, start = _bucket(px, py, x0, y0, h, ncx, ncy)
    R = len(r)
    rmax = r[R - 1]
    s = np.zeros(R)
    elig = np.zeros(R, dtype=np.int64)
    local = np.zeros(R)
    for a in range(len(qx)):
        k_end = _count_le(r, bd[a])
        if k_end == 0:
            continue
        local[:k_end] = 0.0
        inv_i = 1.0 / lam_i[a]
        cx = min(max(int((qx[a] - x0) / h), 0), ncx - 1)
        cy = min(max(int((qy[a] - y0) / h), 0), ncy - 1)
        for gy in range(max(cy - reach, 0), min(cy + reach + 1, ncy)):
            for gx in range(max(cx - reach, 0), min(cx + reach + 1, ncx)):
                c = gy * ncx + gx
                for t in range(start[c], start[c + 1]):
                    b = order[t]
                    dx = qx[a] - px[b]
                    dy = qy[a] - py[b]
                    d = math.sqrt(dx * dx + dy * dy)
                    if d <= rmax:
                        k0 = _first_ge(r, d)
                        if k0 < k_end:
                            local[k0] += inv_i / lam_j[b]
        run = 0.0
        for k in range(k_end):
            run += local[k]
            s[k] += run
            elig[k] += 1
    return s, elig


@numba.njit(cache=True, nogil=True)
def _survival_kernel(qx, qy, bd, px, py, fac, r, x0, y0, h, ncx, ncy, reach):
    """Sums over eligible queries of prod_{d <= r} fac, and eligible counts."""
    order, start = _bucket(px, py, x0, y0, h, ncx, ncy)
    R = len(r)
    rmax = r[R - 1]
    s = np.zeros(R)
    elig = np.zeros(R, dtype=np.int64)
    local = np.ones(R)
    for a in range(len(qx)):
        k_end = _count_le(r, bd[a])
        if k_end == 0:
            continue
        local[:k_end] = 1.0
        cx = min(max(int((qx[a] - x0) / h), 0), ncx - 1)
        cy = min(max(int((qy[a] - y0) / h), 0), ncy - 1)
        for gy in range(max(cy - reach, 0), min(cy + reach + 1, ncy)):
            for gx in range(max(cx - reach, 0), min(cx + reach + 1, ncx)):
                c = gy * ncx + gx
                for t in range(start[c], start[c + 1]):
                    b = order[t]
                    dx = qx[a] - px[b]
                    dy = qy[a] - py[b]
                    d = math.sqrt(dx * dx + dy * dy)
                    if d <= rmax:
                        k0 = _first_ge(r, d)
                        if k0 < k_end:
                            local[k0] *= fac[b]
        run = 1.0
        for k in range(k_end):
            run *= local[k]
            s[k] += run
            elig[k] += 1
    return s, elig


def _hash_geometry(window: Window, rmax: float):
    """Cell size, grid shape and the cell reach covering distance rmax."""
    h = max(rmax / 2.0, window.width / 1024.0, window.height / 1024.0)
    ncx = max(1, int(math.ceil(window.width / h)))
    ncy = max(1, int(math.ceil(window.height / h)))
    return h, ncx, ncy, int(math.ceil(rmax / h))


def _cols(xy):
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return np.ascontiguousarray(xy[:, 0]), np.ascontiguousarray(xy[:, 1])


# -- estimators -----------------------------------------------------------------------

def _pair_points(p: MarkedPointPattern, i, j):
    i, j = str(i), str(j)
    if i == j:
        raise InvalidParams("cross-type estimators need two different marks")
    xi, xj = p.points_of(i), p.points_of(j)
    return i, j, xi, xj


def khat_cross(p: MarkedPointPattern, lam: IntensityModel, i, j, r_grid) -> SummaryCurve:
    """Inhomogeneous cross-type K with border correction.

    K(r) = sum_{v eligible} sum_{z: |z - v| <= r} 1 / (lambda_i(v) lambda_j(z))
           / (|W| * n_eligible(r) / n_i)
    """
    r = _check_r(r_grid)
    i, j, xi, xj = _pair_points(p, i, j)
    if len(xi) == 0 or len(xj) == 0:
        raise EmptyComponent(f"mark {i if len(xi) == 0 else j} has no points")
    w = p.window
    bd = w.boundary_distance(xi)
    qx, qy = _cols(xi)
    px, py = _cols(xj)
    h, ncx, ncy, reach = _hash_geometry(w, r[-1])
    s, elig = _k_kernel(qx, qy, bd, lam.intensity(i, xi), px, py, lam.intensity(j, xj), r,
                        w.x_min, w.y_min, h, ncx, ncy, reach)
    K = np.full(len(r), np.nan)
    ok = elig > 0
    if not ok.any():
        raise NoEligiblePoints(float(r[0]))
    K[ok] = s[ok] / (w.area * (elig[ok] / len(xi)))
    return SummaryCurve(r, K, "K", i, j, elig)


def lhat_cross(p: MarkedPointPattern, lam: IntensityModel, i, j, r_grid) -> SummaryCurve:
    K = khat_cross(p, lam, i, j, r_grid)
    return SummaryCurve(K.r, np.sqrt(K.values / math.pi), "L", K.mark_i, K.mark_j, K.eligible)


def lambda_floor(lam: IntensityModel, mark, window: Window, xy=None, resolution: int = 128) -> float:
    """Minimum of lambda_mark over a window grid and the given points."""
    xc, yc = window.cell_centers(resolution, resolution)
    gx, gy = np.meshgrid(xc, yc)
    vals = lam.intensity(mark, np.column_stack([gx.ravel(), gy.ravel()]))
    m = float(vals.min())
    if xy is not None and len(xy):
        m = min(m, float(lam.intensity(mark, xy).min()))
    if not m > 0:
        raise InvalidParams("intensity floor must be positive")
    return m


def _survival_curve(refs, bd, xj, lam_j_vals, floor, window, r, kind, i, j, exc):
    fac = 1.0 - floor / lam_j_vals if len(xj) else np.zeros(0)
    qx, qy = _cols(refs)
    px, py = _cols(xj)
    h, ncx, ncy, reach = _hash_geometry(window, r[-1])
    s, elig = _survival_kernel(qx, qy, bd, px, py, np.ascontiguousarray(fac, dtype=float), r,
                               window.x_min, window.y_min, h, ncx, ncy, reach)
    vals = np.full(len(r), np.nan)
    ok = elig > 0
    if not ok.any():
        raise exc(float(r[0]))
    vals[ok] = 1.0 - s[ok] / elig[ok]
    return SummaryCurve(r, vals, kind, i, j, elig)


def reference_grid(window: Window, resolution: int = 128) -> np.ndarray:
    xc, yc = window.cell_centers(resolution, resolution)
    gx, gy = np.meshgrid(xc, yc)
    return np.column_stack([gx.ravel(), gy.ravel()])


def fhat_inhom(p: MarkedPointPattern, lam: IntensityModel, j, r_grid,
               resolution: int = 128) -> SummaryCurve:
    """Inhomogeneous empty-space function of mark j from a reference grid."""
    r = _check_r(r_grid)
    j = str(j)
    xj = p.points_of(j)
    w = p.window
    floor = lambda_floor(lam, j, w, xj, 128)
    refs = reference_grid(w, resolution)
    return _survival_curve(refs, w.boundary_distance(refs), xj, lam.intensity(j, xj) if len(xj) else None,
                           floor, w, r, "F", None, j, NoEligibleReference)


def ghat_cross(p: MarkedPointPattern, lam: IntensityModel, i, j, r_grid) -> SummaryCurve:
    """Inhomogeneous cross nearest-neighbour function from i-points to j-points."""
    r = _check_r(r_grid)
    i, j, xi, xj = _pair_points(p, i, j)
    if len(xi) == 0:
        raise EmptyComponent(f"mark {i} has no points")
    w = p.window
    floor = lambda_floor(lam, j, w, xj, 128)
    return _survival_curve(xi, w.boundary_distance(xi), xj, lam.intensity(j, xj) if len(xj) else None,
                           floor, w, r, "G", i, j, NoEligibleReference)


def jhat_cross(F: SummaryCurve, G: SummaryCurve) -> SummaryCurve:
    """J = (1 - G) / (1 - F), undefined from the first r where 1 - F < 0.025."""
    if len(F.r) != len(G.r) or not np.array_equal(F.r, G.r):
        raise GridMismatch("F and G use different r grids")
    one_f = 1.0 - F.values
    one_g = 1.0 - G.values
    vals = np.full(len(F.r), np.nan)
    bad = ~(one_f >= J_TAIL_GUARD)  # NaN counts as bad here
    stop = int(np.argmax(bad)) if bad.any() else len(F.r)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals[:stop] = one_g[:stop] / one_f[:stop]
    if not np.isfinite(vals).any():
        raise DivisionDomain("J undefined at every distance")
    return SummaryCurve(F.r, vals, "J", G.mark_i, G.mark_j)
