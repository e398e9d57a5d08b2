"""Collar CSV parsing and projection of lon/lat fixes to a local planar frame."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .core import Relocation, Trajectory, validate_trajectory
from .errors import BadRow, EmptyInput, MissingHeader, TooShort

__all__ = [
    "RawFix",
    "TransverseMercator",
    "EARTH_RADIUS_M",
    "parse_relocations",
    "project_to_plane",
    "median_sampling_interval",
    "trajectories_from_csv",
    "parse_timestamp",
    "format_timestamp",
    "write_relocations_csv",
]

HEADER = ("animal_id", "timestamp", "lon", "lat")
EARTH_RADIUS_M = 6371008.8  # IUGG mean radius
IDENTITY_TAG = "# crs=identity"


@dataclass(frozen=True)
class RawFix:
    animal_id: str
    timestamp: str
    lon: float
    lat: float


def parse_timestamp(text: str) -> int:
    """ISO-8601 string to integer UTC epoch seconds; naive times are taken as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(math.floor(dt.timestamp()))


def parse_relocations(csv_text: str, check_range: bool = True) -> list[RawFix]:
    """Parse ``animal_id,timestamp,lon,lat`` rows.

    Lines starting with ``#`` before the header are directives/comments and
    are skipped.  With ``check_range=False`` the lon/lat columns may hold
    arbitrary planar coordinates (used for identity-projected files).
    """
    lines = csv_text.splitlines()
    start = 0
    while start < len(lines) and (not lines[start].strip() or lines[start].lstrip().startswith("#")):
        start += 1
    if start >= len(lines):
        raise MissingHeader("empty file")
    reader = csv.reader(io.StringIO("\n".join(lines[start:])))
    header = tuple(h.strip().lower() for h in next(reader))
    if header != HEADER:
        raise MissingHeader(f"expected header {','.join(HEADER)}, got {','.join(header)}")
    fixes = []
    for offset, row in enumerate(reader):
        line = start + offset + 2
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise BadRow(line, f"expected 4 fields, got {len(row)}")
        aid, ts, lon_s, lat_s = (c.strip() for c in row)
        if not aid:
            raise BadRow(line, "empty animal_id")
        try:
            parse_timestamp(ts)
        except ValueError:
            raise BadRow(line, f"bad timestamp {ts!r}") from None
        try:
            lon, lat = float(lon_s), float(lat_s)
        except ValueError:
            raise BadRow(line, "non-numeric coordinate") from None
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise BadRow(line, "non-finite coordinate")
        if check_range:
            if not -90.0 <= lat <= 90.0:
                raise BadRow(line, f"latitude {lat} out of range")
            if not -180.0 <= lon <= 180.0:
                raise BadRow(line, f"longitude {lon} out of range")
        fixes.append(RawFix(aid, ts, lon, lat))
    return fixes


class TransverseMercator:
    """Spherical transverse Mercator (scale 1 on the central meridian).

    Forward/inverse follow the closed forms for the sphere; ``lon0``/``lat0``
    map to the origin.
    """

    def __init__(self, lon0: float, lat0: float, radius: float = EARTH_RADIUS_M):
        self.lon0 = float(lon0)
        self.lat0 = float(lat0)
        self.radius = float(radius)

    def forward(self, lon, lat):
        lam = np.radians(np.asarray(lon, dtype=float) - self.lon0)
        phi = np.radians(np.asarray(lat, dtype=float))
        b = np.cos(phi) * np.sin(lam)
        x = self.radius * np.arctanh(b)
        y = self.radius * (np.arctan2(np.tan(phi), np.cos(lam)) - math.radians(self.lat0))
        return x, y

    def inverse(self, x, y):
        xr = np.asarray(x, dtype=float) / self.radius
        d = np.asarray(y, dtype=float) / self.radius + math.radians(self.lat0)
        phi = np.arcsin(np.sin(d) / np.cosh(xr))
        lam = np.arctan2(np.sinh(xr), np.cos(d))
        return self.lon0 + np.degrees(lam), np.degrees(phi)

    def descriptor(self) -> dict:
        return {"proj": "tmerc", "lon_0": self.lon0, "lat_0": self.lat0,
                "R": self.radius, "units": "m"}


def _group(fixes, xs, ys, crs) -> dict[str, Trajectory]:
    by_id: dict[str, list] = {}
    for f, x, y in zip(fixes, xs, ys):
        by_id.setdefault(f.animal_id, []).append(Relocation(parse_timestamp(f.timestamp), float(x), float(y)))
    return {aid: validate_trajectory(rel, animal_id=aid, crs=crs)
            for aid, rel in sorted(by_id.items())}


def project_to_plane(fixes) -> dict[str, Trajectory]:
    """Project fixes with a transverse Mercator centred on their mean lon/lat."""
    fixes = list(fixes)
    if not fixes:
        raise EmptyInput("no fixes")
    lon = np.array([f.lon for f in fixes])
    lat = np.array([f.lat for f in fixes])
    tm = TransverseMercator(float(lon.mean()), float(lat.mean()))
    x, y = tm.forward(lon, lat)
    return _group(fixes, x, y, tm.descriptor())


def trajectories_from_csv(csv_text: str) -> dict[str, Trajectory]:
    """Parse and project a collar CSV; honours the ``# crs=identity`` tag."""
    identity = any(line.strip().lower() == IDENTITY_TAG
                   for line in csv_text.splitlines()[:5])
    fixes = parse_relocations(csv_text, check_range=not identity)
    if not fixes:
        raise EmptyInput("no data rows")
    if identity:
        return _group(fixes, [f.lon for f in fixes], [f.lat for f in fixes],
                      {"proj": "identity", "units": "m"})
    return project_to_plane(fixes)


def median_sampling_interval(traj: Trajectory) -> float:
    if len(traj) < 2:
        raise TooShort("need at least two relocations")
    return float(np.median(np.diff(traj.t)))


def format_timestamp(t: int) -> str:
    return datetime.fromtimestamp(int(t), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_relocations_csv(trajs, identity: bool = True) -> str:
    """Collar-format CSV text for planar trajectories.

    With ``identity`` the file starts with the ``# crs=identity`` tag and the
    lon/lat columns carry planar x/y in meters.
    """
    buf = io.StringIO()
    if identity:
        buf.write(IDENTITY_TAG + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for tr in trajs:
        for t, (x, y) in zip(tr.t, tr.xy):
            w.writerow((tr.animal_id, format_timestamp(t), repr(float(x)), repr(float(y))))
    return buf.getvalue()
