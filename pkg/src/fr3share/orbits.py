"""Circular LEO orbits, constellation construction and look angles.

The inertial frame coincides with the Earth-fixed frame at epoch (t = 0), so
``raan`` is also the geographic longitude of the ascending node at epoch.
The Earth is a sphere of radius ``EARTH_RADIUS`` rotating uniformly.
"""
import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptySample, InvalidArgument

EARTH_RADIUS = 6371.0e3  # m, mean radius
MU_EARTH = 3.986004418e14  # m^3/s^2
EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s


@dataclass(frozen=True)
class OrbitalElements:
    altitude: float  # m above EARTH_RADIUS
    inclination: float  # deg
    raan: float  # deg, node longitude at epoch
    true_anomaly_at_epoch: float  # deg, argument of latitude (e = 0)

    def __post_init__(self):
        if not self.altitude > 0:
            raise InvalidArgument(f"altitude must be positive, got {self.altitude}")
        if not 0.0 <= self.inclination <= 180.0:
            raise InvalidArgument(f"inclination {self.inclination} outside [0, 180]")
        object.__setattr__(self, "raan", float(self.raan) % 360.0)
        object.__setattr__(self, "true_anomaly_at_epoch", float(self.true_anomaly_at_epoch) % 360.0)

    @property
    def radius(self):
        return EARTH_RADIUS + self.altitude

    @property
    def mean_motion(self):
        """Angular rate in rad/s."""
        return np.sqrt(MU_EARTH / self.radius**3)


def elements_from_orbit_args(c_in, d_in, e_in, f_in, altitude=600e3):
    """Map four opaque constellation-constructor arguments to orbital elements.

    ``c_in`` is the inclination, ``d_in`` the node longitude, and ``e_in`` +
    ``f_in`` the argument of latitude at epoch (argument of perigee plus true
    anomaly for a circular orbit). With (63.4, -28.8, 44.55, 0) the satellite
    starts within 0.02 deg of the zenith of 38.85N 5W.
    """
    return OrbitalElements(
        altitude=altitude,
        inclination=c_in,
        raan=d_in,
        true_anomaly_at_epoch=e_in + f_in,
    )


@dataclass(frozen=True)
class GroundSite:
    latitude: float  # deg
    longitude: float  # deg
    height: float = 0.0  # m

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidArgument(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidArgument(f"longitude {self.longitude} outside [-180, 180]")

    def ecef(self):
        lat, lon = np.radians(self.latitude), np.radians(self.longitude)
        r = EARTH_RADIUS + self.height
        return r * np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])

    def enu_basis(self):
        """Rows are the east, north and up unit vectors in ECEF."""
        lat, lon = np.radians(self.latitude), np.radians(self.longitude)
        sl, cl = np.sin(lat), np.cos(lat)
        so, co = np.sin(lon), np.cos(lon)
        return np.array([
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ])


@dataclass(frozen=True)
class SatelliteState:
    slot_index: int
    position_ecef: tuple  # m
    elevation: float  # deg
    azimuth: float  # deg, clockwise from north in [0, 360)
    range: float  # m
    sat_id: int = 0


def build_constellation(base, n_sat, delta_inclination):
    """Copies of ``base`` whose inclination steps by ``delta_inclination``."""
    if n_sat < 1:
        raise InvalidArgument("n_sat must be at least 1")
    out = []
    for k in range(n_sat):
        incl = min(max(base.inclination + k * delta_inclination, 0.0), 180.0)
        out.append(replace(base, inclination=incl))
    return out


def eci_positions(elements, times):
    """Inertial positions (len(times) x 3) on the circular orbit."""
    t = np.asarray(times, dtype=float)
    r = elements.radius
    raan = np.radians(elements.raan)
    inc = np.radians(elements.inclination)
    u = np.radians(elements.true_anomaly_at_epoch) + elements.mean_motion * t
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    return r * np.column_stack([
        co * cu - so * su * ci,
        so * cu + co * su * ci,
        su * si,
    ])


def ecef_positions(elements, times):
    t = np.asarray(times, dtype=float)
    p = eci_positions(elements, t)
    g = EARTH_ROTATION_RATE * t
    cg, sg = np.cos(g), np.sin(g)
    return np.column_stack([cg * p[:, 0] + sg * p[:, 1], -sg * p[:, 0] + cg * p[:, 1], p[:, 2]])


def look_angles(site, positions_ecef):
    """Elevation (deg), azimuth (deg) and range (m) from ``site``."""
    d = np.atleast_2d(positions_ecef) - site.ecef()
    enu = d @ site.enu_basis().T
    rng = np.linalg.norm(enu, axis=1)
    elev = np.degrees(np.arcsin(np.clip(enu[:, 2] / rng, -1.0, 1.0)))
    az = np.degrees(np.arctan2(enu[:, 0], enu[:, 1])) % 360.0
    return elev, az, rng


def propagate(elements, site, n_slots, slot_duration=1.0, start_time=0.0, sat_id=0):
    """SatelliteState for each slot; slot k sits at start_time + k*slot_duration."""
    if n_slots < 1:
        raise InvalidArgument("n_slots must be at least 1")
    if not slot_duration > 0:
        raise InvalidArgument("slot_duration must be positive")
    times = start_time + slot_duration * np.arange(n_slots)
    pos = ecef_positions(elements, times)
    elev, az, rng = look_angles(site, pos)
    return [
        SatelliteState(k, tuple(pos[k]), float(elev[k]), float(az[k]), float(rng[k]), sat_id)
        for k in range(n_slots)
    ]


def elevation_statistics(states, mask_deg=10.0):
    """Mean/median/std/min/max of elevations at or above the mask (deg)."""
    elev = np.array([s.elevation for s in states], dtype=float)
    elev = elev[elev >= mask_deg]
    if elev.size == 0:
        raise EmptySample(f"no elevation at or above {mask_deg} deg")
    return {
        "mean": float(np.mean(elev)),
        "median": float(np.median(elev)),
        "std": float(np.std(elev)),
        "min": float(np.min(elev)),
        "max": float(np.max(elev)),
    }


def write_states_csv(path, trajectories):
    """trajectories: iterable of per-satellite state lists."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "sat_id", "elev_deg", "az_deg", "range_m"])
        rows = sorted((s.slot_index, s.sat_id, s) for traj in trajectories for s in traj)
        for slot, sat, s in rows:
            w.writerow([slot, sat, f"{s.elevation:.6f}", f"{s.azimuth:.6f}", f"{s.range:.3f}"])
