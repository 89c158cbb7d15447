"""Geodesic primitives and geofence zones.

All computations use a spherical Earth with the IUGG mean radius; at the
zone sizes used here (tens to hundreds of meters) the error versus an
ellipsoidal model is negligible. Ellipse containment works in a local
equirectangular tangent plane, valid for zones up to a few hundred meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

EARTH_RADIUS_M = 6_371_008.8  # IUGG mean radius


class CoincidentPointsError(ValueError):
    """Bearing is undefined between two identical points."""


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} out of [-90, 90]")
        if not -180.0 <= self.lon_deg < 180.0:
            raise ValueError(f"longitude {self.lon_deg} out of [-180, 180)")


@dataclass(frozen=True)
class CircleZone:
    center: GeoPoint
    radius_m: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius_m) and self.radius_m > 0):
            raise ValueError("radius_m must be positive")


@dataclass(frozen=True)
class EllipseZone:
    """Oriented ellipse; the minor axis points along minor_axis_bearing_deg."""

    center: GeoPoint
    semi_major_m: float
    semi_minor_m: float
    minor_axis_bearing_deg: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.semi_major_m) and self.semi_major_m > 0):
            raise ValueError("semi_major_m must be positive")
        if not (math.isfinite(self.semi_minor_m) and self.semi_minor_m > 0):
            raise ValueError("semi_minor_m must be positive")
        if self.semi_minor_m > self.semi_major_m:
            raise ValueError("semi_minor_m must not exceed semi_major_m")
        object.__setattr__(
            self, "minor_axis_bearing_deg", self.minor_axis_bearing_deg % 360.0
        )


LocalizationZone = Union[CircleZone, EllipseZone]


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    d_phi = math.radians(b.lat_deg - a.lat_deg)
    d_lambda = math.radians(b.lon_deg - a.lon_deg)
    h = (
        math.sin(d_phi / 2.0) ** 2
        + math.cos(phi1) * math.cos(phi2) * math.sin(d_lambda / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(origin: GeoPoint, target: GeoPoint) -> float:
    """Forward azimuth of the great circle at `origin`, degrees in [0, 360)."""
    if origin == target:
        raise CoincidentPointsError("bearing undefined for coincident points")
    phi1 = math.radians(origin.lat_deg)
    phi2 = math.radians(target.lat_deg)
    d_lambda = math.radians(target.lon_deg - origin.lon_deg)
    y = math.sin(d_lambda) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(
        d_lambda
    )
    return math.degrees(math.atan2(y, x)) % 360.0


def destination_point(origin: GeoPoint, bearing_deg: float, distance_m: float) -> GeoPoint:
    """Point reached by traveling distance_m along the given initial bearing."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg % 360.0)
    phi1 = math.radians(origin.lat_deg)
    lambda1 = math.radians(origin.lon_deg)
    phi2 = math.asin(
        math.sin(phi1) * math.cos(delta)
        + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    )
    lambda2 = lambda1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    lon = math.degrees(lambda2)
    lon = (lon + 180.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(phi2), lon)


def _tangent_plane_offset(center: GeoPoint, p: GeoPoint) -> tuple[float, float]:
    """Equirectangular (east, north) offset of p from center, in meters."""
    d_lat = math.radians(p.lat_deg - center.lat_deg)
    d_lon = math.radians(p.lon_deg - center.lon_deg)
    if d_lon > math.pi:
        d_lon -= 2.0 * math.pi
    elif d_lon < -math.pi:
        d_lon += 2.0 * math.pi
    east = EARTH_RADIUS_M * d_lon * math.cos(math.radians(center.lat_deg))
    north = EARTH_RADIUS_M * d_lat
    return east, north


def zone_contains(zone: LocalizationZone, p: GeoPoint) -> bool:
    """Geofence containment test (boundary inclusive)."""
    if isinstance(zone, CircleZone):
        return haversine_distance(zone.center, p) <= zone.radius_m
    east, north = _tangent_plane_offset(zone.center, p)
    beta = math.radians(zone.minor_axis_bearing_deg)
    # u along the minor axis, v along the major axis
    u = east * math.sin(beta) + north * math.cos(beta)
    v = east * math.cos(beta) - north * math.sin(beta)
    return (u / zone.semi_minor_m) ** 2 + (v / zone.semi_major_m) ** 2 <= 1.0


def ellipse_toward(
    center: GeoPoint,
    next_poi: GeoPoint,
    semi_major_m: float,
    semi_minor_m: float,
) -> EllipseZone:
    """Ellipse at center whose minor axis points at the next point of interest."""
    return EllipseZone(
        center=center,
        semi_major_m=semi_major_m,
        semi_minor_m=semi_minor_m,
        minor_axis_bearing_deg=initial_bearing(center, next_poi),
    )
