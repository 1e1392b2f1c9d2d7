"""WGS84 geodetic coordinates to a local tangent plane."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from tiltlink.errors import NoReference

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


def geodetic_to_ecef(lat_deg: float, lon_deg: float, h: float = 0.0) -> NDArray[np.float64]:
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    sl, cl = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.array([(n + h) * cl * math.cos(lon), (n + h) * cl * math.sin(lon),
                     (n * (1.0 - WGS84_E2) + h) * sl])


def _ne_basis(lat_deg: float, lon_deg: float) -> NDArray[np.float64]:
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    sl, cl, so, co = math.sin(lat), math.cos(lat), math.sin(lon), math.cos(lon)
    north = np.array([-sl * co, -sl * so, cl])
    east = np.array([-so, co, 0.0])
    return np.vstack([north, east])


@dataclass(frozen=True)
class GeoReference:
    lat: float
    lon: float

    @property
    def ecef(self) -> NDArray[np.float64]:
        return geodetic_to_ecef(self.lat, self.lon)


def gps_to_enu(lat_lon, ref: GeoReference | None) -> NDArray[np.float64]:
    """Horizontal tangent-plane offset ``[north, east]`` of a fix from ``ref``.

    The returned order matches the world frame, whose x axis points north
    and y axis points east.
    """
    if ref is None:
        raise NoReference("GPS reference point is not set")
    lat, lon = lat_lon
    d = geodetic_to_ecef(lat, lon) - ref.ecef
    return _ne_basis(ref.lat, ref.lon) @ d


def enu_to_gps(ne, ref: GeoReference) -> tuple[float, float]:
    """Inverse of :func:`gps_to_enu` for points on the ellipsoid surface."""
    lat, lon = ref.lat, ref.lon
    target = np.asarray(ne, dtype=float)
    for _ in range(8):
        err = target - gps_to_enu((lat, lon), ref)
        lat_r = math.radians(lat)
        m = WGS84_A * (1 - WGS84_E2) / (1 - WGS84_E2 * math.sin(lat_r) ** 2) ** 1.5
        n = WGS84_A / math.sqrt(1 - WGS84_E2 * math.sin(lat_r) ** 2)
        lat += math.degrees(err[0] / m)
        lon += math.degrees(err[1] / (n * math.cos(lat_r)))
        if np.abs(err).max() < 1e-10:
            break
    return lat, lon
