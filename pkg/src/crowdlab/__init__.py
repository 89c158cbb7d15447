"""Deterministic engine for geolocated crowd-sensing experiments: asset
documents, navigational modalities, geofenced sensing, witnessed-presence
proofs, localized aggregation with rollback, and a cohort simulator."""

from .asset import Asset, parse_asset, serialize_asset, validate_asset
from .geo import CircleZone, EllipseZone, GeoPoint, zone_contains

__all__ = [
    "Asset",
    "CircleZone",
    "EllipseZone",
    "GeoPoint",
    "parse_asset",
    "serialize_asset",
    "validate_asset",
    "zone_contains",
]

__version__ = "0.1.0"
