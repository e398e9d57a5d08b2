"""Exact simulation of IID, Brownian, OU and OUF movement tracks.

Random numbers come from a counter-based stream: step ``k`` of a track always
consumes the Philox outputs at positions ``[k*w, (k+1)*w)`` of the stream
keyed by the seed, so a track depends only on ``(seed, spec)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

from .core import Trajectory
from .errors import InvalidParams
from .semivariogram import Family, MovementModel

__all__ = ["SimSpec", "simulate", "counter_normals", "regular_times"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class SimSpec:
    model: MovementModel
    times: np.ndarray
    seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        if t.ndim != 1 or len(t) < 1:
            raise InvalidParams("times must be a non-empty 1-D sequence")
        if np.any(np.diff(t) <= 0):
            raise InvalidParams("times must be strictly increasing")
        object.__setattr__(self, "times", t)


def regular_times(n: int, dt: int, t0: int = 0) -> np.ndarray:
    return t0 + dt * np.arange(n, dtype=np.int64)


def counter_normals(seed: int, n_steps: int, width: int) -> np.ndarray:
    """Standard normals of shape ``(n_steps, width)`` from a Philox stream.

    Each raw 64-bit output becomes one uniform in (0, 1) and then one normal by
    the inverse CDF, so row ``k`` is a pure function of ``(seed, k)``.
    """
    bitgen = np.random.Philox(key=int(seed) & _MASK64)
    raw = bitgen.random_raw(n_steps * width)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u).reshape(n_steps, width)


def _ar1(phi: np.ndarray, eps: np.ndarray, x0: float) -> np.ndarray:
    """x_0 = x0, x_k = phi_k x_{k-1} + eps_k for k >= 1."""
    out = np.empty(len(eps) + 1)
    out[0] = x0
    if len(eps) == 0:
        return out
    if np.all(phi == phi[0]):
        out[1:], _ = lfilter([1.0], [1.0, -phi[0]], eps, zi=[phi[0] * x0])
        return out
    x = x0
    for k, (p, e) in enumerate(zip(phi.tolist(), eps.tolist()), start=1):
        x = p * x + e
        out[k] = x
    return out


def _ouf_transition(delta: float, tau_p: float, tau_v: float, var: float):
    """Mean matrix and noise Cholesky factor for one OUF axis over ``delta``.

    State is (position offset, velocity).  The process is the second-order
    linear SDE with decay rates a = 1/tau_p and b = 1/tau_v, whose stationary
    covariance is diag(var, var * a * b).
    """
    a, b = 1.0 / tau_p, 1.0 / tau_v
    ea, eb = math.exp(-a * delta), math.exp(-b * delta)
    inv = 1.0 / (b - a)
    M = np.array([
        [(b * ea - a * eb) * inv, (ea - eb) * inv],
        [-a * b * (ea - eb) * inv, (b * eb - a * ea) * inv],
    ])
    P = np.diag([var, var * a * b])
    Q = P - M @ P @ M.T
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    L = V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    return M, L


def _simulate_ouf_axis(dts, tau_p, tau_v, var, z0, zeta):
    """One OUF axis. ``z0`` and ``zeta`` are (2,) / (n-1, 2) standard normals."""
    pos = np.empty(len(dts) + 1)
    x = math.sqrt(var) * z0[0]
    v = math.sqrt(var / (tau_p * tau_v)) * z0[1]
    pos[0] = x
    cache: dict = {}
    for k, d in enumerate(dts.tolist()):
        if d not in cache:
            cache[d] = _ouf_transition(d, tau_p, tau_v, var)
        M, L = cache[d]
        e0, e1 = zeta[k]
        x, v = (M[0, 0] * x + M[0, 1] * v + L[0, 0] * e0 + L[0, 1] * e1,
                M[1, 0] * x + M[1, 1] * v + L[1, 0] * e0 + L[1, 1] * e1)
        pos[k + 1] = x
    return pos


def simulate(spec: SimSpec, animal_id: str = "sim") -> Trajectory:
    """Draw a track at ``spec.times`` from ``spec.model``.

    IID and OU/OUF tracks start from the stationary distribution; Brownian
    tracks start at ``mu``.
    """
    model = spec.model
    t = spec.times
    n = len(t)
    dts = np.diff(t).astype(float)
    fam = model.family
    width = 4 if fam is Family.OUF else 2
    z = counter_normals(spec.seed, n, width)

    if fam is Family.IID:
        sd = np.sqrt(model.sigma2)
        uv = z[:, :2] * sd
    elif fam is Family.BROWNIAN:
        sd = np.sqrt(np.outer(dts, model.diffusion))
        steps = z[1:, :2] * sd
        uv = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    elif fam is Family.OU:
        phi = np.exp(-dts / model.tau_p)
        innov = np.sqrt(-np.expm1(-2 * dts / model.tau_p))
        cols = []
        for a in range(2):
            sd = math.sqrt(model.sigma2[a])
            cols.append(_ar1(phi, sd * innov * z[1:, a], sd * z[0, a]))
        uv = np.column_stack(cols)
    else:
        cols = [_simulate_ouf_axis(dts, model.tau_p, model.tau_v, model.sigma2[a],
                                   z[0, 2 * a:2 * a + 2], z[1:, 2 * a:2 * a + 2])
                for a in range(2)]
        uv = np.column_stack(cols)

    xy = np.asarray(model.mu) + uv @ model.rotation().T
    return Trajectory(animal_id, t, xy, {"proj": "identity", "units": "m"})
