"""Local metric <-> geographic conversion.

Everything in the toolkit that needs a map projection uses the same
equirectangular approximation about an anchor point:

    x = (lon - lon0) * cos(lat0) * METERS_PER_DEG_LON
    y = (lat - lat0) * METERS_PER_DEG_LAT

which is accurate to centimeters at city scale and trivially invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

METERS_PER_DEG_LON = 111320.0
METERS_PER_DEG_LAT = 110540.0


def _check_latlon(lat: float, lon: float) -> None:
    from .errors import InputError

    if not (-90.0 <= lat <= 90.0):
        raise InputError(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0):
        raise InputError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection anchored at (lat0, lon0)."""

    lat0: float
    lon0: float

    def __post_init__(self):
        _check_latlon(self.lat0, self.lon0)

    @property
    def _x_scale(self) -> float:
        return math.cos(math.radians(self.lat0)) * METERS_PER_DEG_LON

    def to_local(self, lat: float, lon: float) -> tuple[float, float]:
        """Geographic degrees -> local meters (east, north)."""
        return (lon - self.lon0) * self._x_scale, (lat - self.lat0) * METERS_PER_DEG_LAT

    def to_geo(self, x: float, y: float) -> tuple[float, float]:
        """Local meters (east, north) -> (latitude, longitude) degrees."""
        return self.lat0 + y / METERS_PER_DEG_LAT, self.lon0 + x / self._x_scale
