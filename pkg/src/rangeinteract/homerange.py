"""Home ranges by minimum convex polygon, Gaussian KDE and autocorrelated KDE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .core import Trajectory, Window
from .errors import (
    DegenerateGeometry,
    InvalidBandwidth,
    InvalidParams,
    SingularCovariance,
    TooShort,
    UnnormalizedGrid,
    UnsupportedFamily,
)
from .semivariogram import Family, FitResult

__all__ = [
    "DensityGrid",
    "HomeRangeEstimate",
    "convex_hull",
    "polygon_area",
    "mcp_estimate",
    "kde_bandwidth",
    "kde_evaluate",
    "kde_density",
    "akde_bandwidth",
    "akde_density",
    "level_set",
    "mask_polygons",
    "estimate_geojson",
]


# -- geometry ------------------------------------------------------------------

def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices; raises DegenerateGeometry for flat input."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        raise DegenerateGeometry("fewer than three distinct points")
    try:
        hull = ConvexHull(pts)
    except QhullError:
        raise DegenerateGeometry("points are collinear") from None
    return pts[hull.vertices]


def polygon_area(vertices) -> float:
    """Shoelace area (positive for counter-clockwise vertex order)."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# -- estimates ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Probability density sampled at cell centres; ``values`` is (ny, nx)."""

    window: Window
    values: np.ndarray
    bandwidth: np.ndarray | None = None

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def cell_area(self) -> float:
        return self.window.area / (self.nx * self.ny)

    def centers(self):
        return self.window.cell_centers(self.nx, self.ny)

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)


@dataclass(frozen=True, eq=False)
class HomeRangeEstimate:
    method: str
    level: float
    area: float
    polygon: np.ndarray | None = None
    mask: np.ndarray | None = None
    grid: DensityGrid | None = None
    threshold: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def area_km2(self) -> float:
        return self.area / 1e6

    def contains(self, xy) -> np.ndarray:
        """Whether each point lies in the estimated region."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if self.polygon is not None:
            return _in_convex_polygon(self.polygon, xy)
        w = self.grid.window
        ix = np.floor((xy[:, 0] - w.x_min) / w.width * self.grid.nx).astype(int)
        iy = np.floor((xy[:, 1] - w.y_min) / w.height * self.grid.ny).astype(int)
        inside = (ix >= 0) & (ix < self.grid.nx) & (iy >= 0) & (iy < self.grid.ny)
        out = np.zeros(len(xy), dtype=bool)
        out[inside] = self.mask[iy[inside], ix[inside]]
        return out


def _in_convex_polygon(poly: np.ndarray, xy: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    cross = ((b[:, 0] - a[:, 0])[None, :] * (xy[:, 1:2] - a[:, 1][None, :])
             - (b[:, 1] - a[:, 1])[None, :] * (xy[:, 0:1] - a[:, 0][None, :]))
    return np.all(cross >= 0, axis=1)


def mcp_estimate(traj: Trajectory, level: float = 0.95) -> HomeRangeEstimate:
    """Convex hull of the ``ceil(level * n)`` relocations nearest the centroid.

    Equal distances keep the earlier relocation.
    """
    if not 0 < level <= 1:
        raise InvalidParams("level must be in (0, 1]")
    xy = traj.xy
    n = len(xy)
    keep = int(math.ceil(level * n - 1e-9))
    d2 = np.sum((xy - xy.mean(axis=0)) ** 2, axis=1)
    # lexsort: last key primary; time order is the index order
    order = np.lexsort((np.arange(n), d2))
    retained = xy[order[:keep]]
    hull = convex_hull(retained)
    area = polygon_area(hull)
    return HomeRangeEstimate("MCP", level, area, polygon=hull,
                             extra={"n_retained": keep})


def _sample_cov(xy: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.cov(xy, rowvar=False, ddof=1))


def _check_pd(S: np.ndarray, exc=SingularCovariance) -> None:
    if not np.isfinite(S).all():
        raise exc("matrix has non-finite entries")
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    if w[0] <= 1e-12 * max(abs(w[-1]), 1e-300):
        raise exc(f"matrix is not positive definite (eigenvalues {w})")


def kde_bandwidth(traj: Trajectory) -> np.ndarray:
    """Gaussian reference rule: n^(-1/3) times the sample covariance."""
    n = len(traj)
    if n < 10:
        raise TooShort("KDE bandwidth needs at least 10 relocations")
    S = _sample_cov(traj.xy)
    _check_pd(S)
    return n ** (-1.0 / 3.0) * S


def _kernel_inverse(bw) -> tuple[np.ndarray, float]:
    bw = np.asarray(bw, dtype=float)
    if bw.shape != (2, 2) or not np.allclose(bw, bw.T, rtol=0, atol=1e-12 * np.abs(bw).max()):
        raise InvalidBandwidth("bandwidth must be a symmetric 2x2 matrix")
    _check_pd(bw, InvalidBandwidth)
    det = float(bw[0, 0] * bw[1, 1] - bw[0, 1] * bw[1, 0])
    inv = np.array([[bw[1, 1], -bw[0, 1]], [-bw[1, 0], bw[0, 0]]]) / det
    return inv, 1.0 / (2 * math.pi * math.sqrt(det))


def kde_evaluate(xy, bw, query) -> np.ndarray:
    """Gaussian KDE with bandwidth matrix ``bw`` at arbitrary query points."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    q = np.asarray(query, dtype=float).reshape(-1, 2)
    inv, norm = _kernel_inverse(bw)
    out = np.zeros(len(q))
    for p in xy:
        d = q - p
        qf = inv[0, 0] * d[:, 0] ** 2 + 2 * inv[0, 1] * d[:, 0] * d[:, 1] + inv[1, 1] * d[:, 1] ** 2
        out += np.exp(-0.5 * qf)
    return out * norm / len(xy)


def _grid_window(xy: np.ndarray, bw: np.ndarray) -> Window:
    margin = 4.0 * math.sqrt(max(bw[0, 0], bw[1, 1]))
    return Window.from_points(xy).expanded(margin)


def kde_density(traj_or_xy, bw, grid_size: int = 256, window: Window | None = None) -> DensityGrid:
    """Evaluate the Gaussian KDE on a ``grid_size``^2 grid.

    The grid covers the padded bounding box of the data widened by four
    times the largest marginal bandwidth, unless ``window`` is given.
    """
    xy = traj_or_xy.xy if isinstance(traj_or_xy, Trajectory) else np.asarray(traj_or_xy, dtype=float).reshape(-1, 2)
    if len(xy) == 0:
        raise TooShort("no relocations")
    bw = np.asarray(bw, dtype=float)
    inv, norm = _kernel_inverse(bw)
    win = window or _grid_window(xy, bw)
    xc, yc = win.cell_centers(grid_size, grid_size)
    vals = np.zeros((grid_size, grid_size))
    a, b, c = inv[0, 0], inv[0, 1], inv[1, 1]
    for p in xy:
        dx = xc - p[0]
        dy = yc - p[1]
        ex = np.exp(-0.5 * a * dx * dx)
        ey = np.exp(-0.5 * c * dy * dy)
        if b == 0.0:
            vals += np.outer(ey, ex)
        else:
            vals += np.outer(ey, ex) * np.exp(-b * np.outer(dy, dx))
    vals *= norm / len(xy)
    return DensityGrid(win, vals, bw)


def akde_bandwidth(traj: Trajectory, fit: FitResult) -> tuple[np.ndarray, float]:
    """Bandwidth n_eff^(-1/3) Sigma_model and the effective sample size.

    n_eff is n for IID fits and T / tau_p clamped to [1, n] for OU/OUF.
    """
    model = fit.model
    n = len(traj)
    if model.family is Family.BROWNIAN:
        raise UnsupportedFamily("Brownian motion has no finite home range")
    if model.family is Family.IID:
        n_eff = float(n)
    else:
        n_eff = min(max(traj.duration / model.tau_p, 1.0), float(n))
    return n_eff ** (-1.0 / 3.0) * model.covariance(), n_eff


def akde_density(traj: Trajectory, fit: FitResult, grid_size: int = 256,
                 window: Window | None = None) -> DensityGrid:
    bw, _ = akde_bandwidth(traj, fit)
    return kde_density(traj, bw, grid_size, window)


def level_set(grid: DensityGrid, level: float, method: str = "KDE") -> HomeRangeEstimate:
    """Smallest set of highest-density cells holding probability >= ``level``."""
    if not 0 < level < 1:
        raise InvalidParams("level must be in (0, 1)")
    total = grid.integral()
    if abs(total - 1.0) > 1e-3:
        raise UnnormalizedGrid(f"grid integrates to {total:.6f}")
    flat = grid.values.ravel()
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(flat[order]) * grid.cell_area
    k = min(int(np.searchsorted(cum, level, side="left")) + 1, len(flat))
    mask = np.zeros(flat.shape, dtype=bool)
    mask[order[:k]] = True
    mask = mask.reshape(grid.values.shape)
    return HomeRangeEstimate(method, level, k * grid.cell_area, mask=mask, grid=grid,
                             threshold=float(flat[order[k - 1]]))


# -- export -----------------------------------------------------------------------------

def mask_polygons(est: HomeRangeEstimate) -> list:
    """Cell-boundary rectangles (one per horizontal run of cells) as rings."""
    g = est.grid
    w = g.window
    dx = w.width / g.nx
    dy = w.height / g.ny
    polys = []
    for iy in range(g.ny):
        row = est.mask[iy]
        if not row.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(np.int8), [0]])))
        y0 = w.y_min + iy * dy
        y1 = y0 + dy
        for s, e in zip(edges[::2], edges[1::2]):
            x0 = w.x_min + s * dx
            x1 = w.x_min + e * dx
            polys.append([[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]])
    return polys


def estimate_geojson(est: HomeRangeEstimate, animal_id: str, crs: dict) -> dict:
    if est.polygon is not None:
        ring = est.polygon.tolist()
        geom = {"type": "Polygon", "coordinates": [ring + [ring[0]]]}
    else:
        geom = {"type": "MultiPolygon", "coordinates": mask_polygons(est)}
    props = {"animal_id": animal_id, "method": est.method, "level": est.level,
             "area_m2": est.area, "crs": crs}
    return {"type": "FeatureCollection",
            "features": [{"type": "Feature", "geometry": geom, "properties": props}]}
