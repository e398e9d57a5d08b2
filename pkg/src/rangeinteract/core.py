"""Shared value types: relocations, trajectories, windows and marked patterns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DataError,
    DuplicateTimestamp,
    EmptyInput,
    NonFiniteCoordinate,
    UnknownMark,
)

__all__ = [
    "Relocation",
    "Trajectory",
    "Window",
    "MarkedPointPattern",
    "validate_trajectory",
    "split_by_mark",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Relocation:
    t: int
    x: float
    y: float


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular observation window (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise DataError("window bounds must be finite")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DataError(f"degenerate window {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def from_points(cls, xy, pad_fraction: float = 0.01) -> "Window":
        """Bounding box of ``xy`` expanded by ``pad_fraction`` of its extent per side.

        A zero extent along an axis (e.g. a single point) is padded by 1 m so the
        window stays non-degenerate.
        """
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise EmptyInput("cannot build a window from zero points")
        lo = xy.min(axis=0)
        hi = xy.max(axis=0)
        ext = hi - lo
        pad = np.where(ext > 0, ext * pad_fraction, 1.0)
        return cls(float(lo[0] - pad[0]), float(hi[0] + pad[0]),
                   float(lo[1] - pad[1]), float(hi[1] + pad[1]))

    def expanded(self, margin: float) -> "Window":
        return Window(self.x_min - margin, self.x_max + margin,
                      self.y_min - margin, self.y_max + margin)

    def contains(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return ((xy[:, 0] >= self.x_min) & (xy[:, 0] <= self.x_max)
                & (xy[:, 1] >= self.y_min) & (xy[:, 1] <= self.y_max))

    def boundary_distance(self, xy) -> np.ndarray:
        """Distance from each point to the nearest window edge."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return np.minimum.reduce([
            xy[:, 0] - self.x_min, self.x_max - xy[:, 0],
            xy[:, 1] - self.y_min, self.y_max - xy[:, 1],
        ])

    def cell_centers(self, nx: int, ny: int | None = None):
        """Centers of an ``nx`` x ``ny`` grid of equal cells; returns (xc, yc)."""
        ny = nx if ny is None else ny
        dx = self.width / nx
        dy = self.height / ny
        xc = self.x_min + dx * (np.arange(nx) + 0.5)
        yc = self.y_min + dy * (np.arange(ny) + 0.5)
        return xc, yc

    def as_tuple(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered planar relocations of one animal.

    Build through :func:`validate_trajectory`; the constructor does not sort.
    """

    animal_id: str
    t: np.ndarray
    xy: np.ndarray
    crs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(np.asarray(self.t, dtype=np.int64)))
        object.__setattr__(self, "xy", _frozen(np.asarray(self.xy, dtype=float).reshape(-1, 2)))
        if len(self.t) != len(self.xy):
            raise DataError("t and xy lengths differ")

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.animal_id == other.animal_id and self.crs == other.crs
                and np.array_equal(self.t, other.t) and np.array_equal(self.xy, other.xy))

    @property
    def points(self) -> list[Relocation]:
        return [Relocation(int(t), float(x), float(y))
                for t, (x, y) in zip(self.t, self.xy)]

    @property
    def duration(self) -> int:
        """Sampling duration t_n - t_1 in seconds."""
        return int(self.t[-1] - self.t[0]) if len(self.t) else 0

    def window(self, pad_fraction: float = 0.01) -> Window:
        return Window.from_points(self.xy, pad_fraction)

    def to_dict(self) -> dict:
        return {
            "animal_id": self.animal_id,
            "crs": self.crs,
            "points": [[int(t), float(x), float(y)] for t, (x, y) in zip(self.t, self.xy)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        pts = np.asarray(d["points"], dtype=float).reshape(-1, 3)
        return validate_trajectory(
            [Relocation(int(p[0]), p[1], p[2]) for p in pts],
            animal_id=d.get("animal_id", ""), crs=d.get("crs", {}))


def _as_relocation(r) -> Relocation:
    if isinstance(r, Relocation):
        return r
    t, x, y = r
    return Relocation(t, x, y)


def validate_trajectory(raw: Sequence | Trajectory, animal_id: str | None = None,
                        crs: dict | None = None) -> Trajectory:
    """Sort relocations by time and reject duplicates or non-finite values.

    ``raw`` may hold :class:`Relocation` objects or ``(t, x, y)`` tuples, or be
    a :class:`Trajectory` already (which is re-validated, so the call is
    idempotent).
    """
    if isinstance(raw, Trajectory):
        animal_id = raw.animal_id if animal_id is None else animal_id
        crs = raw.crs if crs is None else crs
        raw = raw.points
    rel = [_as_relocation(r) for r in raw]
    if not rel:
        raise EmptyInput("no relocations")
    t = np.empty(len(rel), dtype=np.int64)
    xy = np.empty((len(rel), 2), dtype=float)
    for k, r in enumerate(rel):
        vals = (float(r.t), float(r.x), float(r.y))
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteCoordinate(k)
        t[k] = int(round(r.t))
        xy[k] = vals[1:]
    order = np.argsort(t, kind="stable")
    t = t[order]
    xy = xy[order]
    dup = np.flatnonzero(np.diff(t) == 0)
    if dup.size:
        raise DuplicateTimestamp(int(t[dup[0]]))
    return Trajectory(animal_id or "", t, xy, dict(crs or {}))


@dataclass(frozen=True, eq=False)
class MarkedPointPattern:
    """Planar points with discrete string marks inside a rectangular window."""

    xy: np.ndarray
    marks: np.ndarray
    mark_set: tuple
    window: Window

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        marks = np.asarray([str(m) for m in self.marks], dtype=object)
        if len(marks) != len(xy):
            raise DataError("xy and marks lengths differ")
        mark_set = tuple(str(m) for m in self.mark_set)
        if len(set(mark_set)) != len(mark_set):
            raise DataError("mark set has duplicates")
        unknown = set(marks.tolist()) - set(mark_set)
        if unknown:
            raise UnknownMark(f"marks not in mark set: {sorted(unknown)}")
        if not np.isfinite(xy).all():
            raise NonFiniteCoordinate(int(np.flatnonzero(~np.isfinite(xy).all(axis=1))[0]))
        if len(xy) and not self.window.contains(xy).all():
            raise DataError("points outside window")
        object.__setattr__(self, "xy", _frozen(xy))
        object.__setattr__(self, "marks", _frozen(marks))
        object.__setattr__(self, "mark_set", mark_set)

    def __len__(self):
        return len(self.xy)

    @classmethod
    def from_groups(cls, groups: dict, window: Window | None = None) -> "MarkedPointPattern":
        """Build from ``{mark: (n, 2) array}``; window defaults to the padded bbox."""
        parts = [np.asarray(v, dtype=float).reshape(-1, 2) for v in groups.values()]
        xy = np.concatenate(parts) if parts else np.empty((0, 2))
        marks = np.concatenate([[str(m)] * len(p) for m, p in zip(groups, parts)]) if parts else []
        if window is None:
            window = Window.from_points(xy)
        return cls(xy, marks, tuple(str(m) for m in groups), window)

    def points_of(self, mark) -> np.ndarray:
        if str(mark) not in self.mark_set:
            raise UnknownMark(str(mark))
        return self.xy[self.marks == str(mark)]

    def counts(self) -> dict:
        return {m: int(np.sum(self.marks == m)) for m in self.mark_set}

    def with_points(self, mark, xy) -> "MarkedPointPattern":
        """Copy with the points of ``mark`` replaced (order of others kept)."""
        keep = self.marks != str(mark)
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return MarkedPointPattern(
            np.concatenate([self.xy[keep], xy]),
            np.concatenate([self.marks[keep], np.full(len(xy), str(mark), dtype=object)]),
            self.mark_set, self.window)


def split_by_mark(p: MarkedPointPattern, m) -> MarkedPointPattern:
    """Sub-pattern with only the points labelled ``m`` (same window, same mark set)."""
    if str(m) not in p.mark_set:
        raise UnknownMark(str(m))
    sel = p.marks == str(m)
    return MarkedPointPattern(p.xy[sel], p.marks[sel], p.mark_set, p.window)
