"""Uniform planar arrays, LOS channels and per-slot channel sets.

Local array frame: x' is broadside (boresight), y' is horizontal to the right
when looking along boresight, z' is up, tilted back by the downtilt. The
frame is left-handed so that positive local azimuth lies to the right. Local azimuth is measured from x' toward y', local
elevation from the x'-y' plane toward z'.

Element (p, q) sits at p*spacing along y' and q*spacing along z', flattened
as index q*n_az + p.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InvalidArgument

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    n_az: int
    n_el: int
    spacing: float = 0.5  # wavelengths
    boresight_azimuth: float = 0.0  # deg, clockwise from north
    downtilt: float = 0.0  # deg, positive tilts boresight below the horizon
    element_pattern: str = "isotropic"  # or "3gpp"

    def __post_init__(self):
        if self.n_az < 1 or self.n_el < 1:
            raise InvalidArgument(f"array must have at least 1x1 elements, got {self.n_az}x{self.n_el}")
        if not self.spacing > 0:
            raise InvalidArgument("element spacing must be positive")
        if self.element_pattern not in ("isotropic", "3gpp"):
            raise InvalidArgument(f"unknown element pattern {self.element_pattern!r}")

    @property
    def n_elements(self):
        return self.n_az * self.n_el

    def local_axes(self):
        """Rows: x', y', z' expressed in ENU."""
        b, t = np.radians(self.boresight_azimuth), np.radians(self.downtilt)
        sb, cb, st, ct = np.sin(b), np.cos(b), np.sin(t), np.cos(t)
        return np.array([
            [sb * ct, cb * ct, -st],
            [cb, -sb, 0.0],
            [sb * st, cb * st, ct],
        ])

    def to_local(self, elevation, azimuth):
        """Convert ENU look angles (deg, compass azimuth) to local (elev, az) deg."""
        d = enu_unit_vector(elevation, azimuth)
        loc = d @ self.local_axes().T
        el = np.degrees(np.arcsin(np.clip(loc[..., 2], -1.0, 1.0)))
        az = np.degrees(np.arctan2(loc[..., 1], loc[..., 0]))
        return el, az


def enu_unit_vector(elevation, azimuth):
    el, az = np.radians(elevation), np.radians(azimuth)
    return np.stack([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)], axis=-1)


def _element_index(geom):
    q, p = np.divmod(np.arange(geom.n_elements), geom.n_az)
    return p, q


def _phase_response(geom, u_y, u_z):
    """exp(j 2 pi d (p u_y + q u_z)) / sqrt(N); u_y, u_z may be arrays."""
    p, q = _element_index(geom)
    u_y = np.asarray(u_y, dtype=float)[..., None]
    u_z = np.asarray(u_z, dtype=float)[..., None]
    phase = 2.0 * np.pi * geom.spacing * (p * u_y + q * u_z)
    return np.exp(1j * phase) / np.sqrt(geom.n_elements)


def steering_vector(geom, elevation, azimuth):
    """Unit-norm array response (N x 1) for local elevation/azimuth in degrees."""
    el, az = np.radians(elevation), np.radians(azimuth)
    return _phase_response(geom, np.sin(az) * np.cos(el), np.sin(el)).reshape(-1, 1)


def steering_matrix(geom, elevation, azimuth):
    """Steering vectors for many local directions, one per column (N x D)."""
    el = np.radians(np.ravel(elevation))
    az = np.radians(np.ravel(azimuth))
    return _phase_response(geom, np.sin(az) * np.cos(el), np.sin(el)).T


def array_response(geom, theta_az, theta_el):
    """Array response in the (azimuth, co-elevation) parametrization.

    ``theta_el`` is measured from the array's z' axis, so the phase terms are
    sin(theta_az) sin(theta_el) and cos(theta_el); the response is then
    identical at (theta_az, theta_el) and (-theta_az, -theta_el). This is the
    same vector as ``steering_vector(geom, 90 - theta_el, theta_az)``.
    """
    az, el = np.radians(theta_az), np.radians(theta_el)
    return _phase_response(geom, np.sin(az) * np.sin(el), np.cos(el)).reshape(-1, 1)


def element_gain_db(geom, elevation, azimuth):
    """Element gain (dBi) at local angles; 3GPP TR 38.901 pattern or 0 dBi."""
    if geom.element_pattern == "isotropic":
        return np.zeros(np.shape(elevation)) if np.ndim(elevation) else 0.0
    zenith = 90.0 - np.asarray(elevation, dtype=float)
    az = np.asarray(azimuth, dtype=float)
    a_v = -np.minimum(12.0 * ((zenith - 90.0) / 65.0) ** 2, 30.0)
    a_h = -np.minimum(12.0 * (az / 65.0) ** 2, 30.0)
    return 8.0 - np.minimum(-(a_v + a_h), 30.0)


def fspl_db(distance, carrier):
    """Free-space path loss 20 log10(4 pi d f / c)."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DegenerateGeometry("free-space path loss needs a positive range")
    return 20.0 * np.log10(4.0 * np.pi * d * carrier / SPEED_OF_LIGHT)


def los_channel(tx, rx, tx_angles, rx_angles, distance, carrier, extra_gain_db=0.0):
    """Rank-one LOS channel (N_r x N_t) between two arrays.

    ``tx_angles``/``rx_angles`` are local (elevation, azimuth) departure and
    arrival directions in degrees. Array responses have unit-modulus entries,
    so a matched beam pair collects the full N_r * N_t array gain. The scalar
    path amplitude combines free-space loss, element gains and
    ``extra_gain_db``; its phase is the propagation delay.
    """
    if not distance > 0:
        raise DegenerateGeometry("LOS channel needs a positive range")
    gain_db = (
        -fspl_db(distance, carrier)
        + element_gain_db(tx, *tx_angles)
        + element_gain_db(rx, *rx_angles)
        + extra_gain_db
    )
    wavelength = SPEED_OF_LIGHT / carrier
    g = 10.0 ** (gain_db / 20.0) * np.exp(-2j * np.pi * distance / wavelength)
    a_t = steering_vector(tx, *tx_angles) * np.sqrt(tx.n_elements)
    a_r = steering_vector(rx, *rx_angles) * np.sqrt(rx.n_elements)
    return g * (a_r @ a_t.conj().T), float(gain_db)


def place_ues(k, rng, radius=100.0, min_radius=10.0, sector_center=0.0,
              sector_width=120.0, height=1.6):
    """Uniform-by-area UE positions (k x 3, ENU metres from the gNB mast base)."""
    r = np.sqrt(rng.uniform(min_radius**2, radius**2, size=k))
    az = np.radians(sector_center + rng.uniform(-0.5, 0.5, size=k) * sector_width)
    return np.column_stack([r * np.sin(az), r * np.cos(az), np.full(k, height)])


@dataclass
class Topology:
    """Everything needed to build channels for any slot of a run.

    ``sat_elevation``, ``sat_azimuth`` and ``sat_range`` are (n_sat x n_slots)
    arrays of ENU look angles from the gNB antenna.
    """
    gnb: ArrayGeometry
    ue: ArrayGeometry
    gnb_height: float
    ue_positions: np.ndarray
    carrier: float
    sat_elevation: np.ndarray
    sat_azimuth: np.ndarray
    sat_range: np.ndarray
    elevation_mask: float = 10.0
    satellite_gain_db: float = 0.0

    @property
    def n_ue(self):
        return len(self.ue_positions)

    @property
    def n_sat(self):
        return self.sat_elevation.shape[0]


@dataclass
class ChannelSet:
    slot_index: int
    H_ter: list
    h_sat: list
    H_ter_normalized: list
    h_sat_normalized: list
    ter_path_gain_db: list
    sat_path_gain_db: list
    sat_ids: list = field(default_factory=list)
    sat_local_angles: list = field(default_factory=list)  # (elev, az) deg
    ue_local_angles: list = field(default_factory=list)  # (elev, az) deg
    ue_ids: list = field(default_factory=list)


def ue_link_angles(topo, k):
    """Local departure angles at the gNB and arrival angles at UE k."""
    d = topo.ue_positions[k] - np.array([0.0, 0.0, topo.gnb_height])
    dist = float(np.linalg.norm(d))
    if dist == 0:
        raise DegenerateGeometry(f"UE {k} coincides with the gNB")
    el = np.degrees(np.arcsin(d[2] / dist))
    az = np.degrees(np.arctan2(d[0], d[1])) % 360.0
    tx_angles = topo.gnb.to_local(el, az)
    # UE array faces the gNB, untilted
    ue_geom = ArrayGeometry(topo.ue.n_az, topo.ue.n_el, topo.ue.spacing,
                            boresight_azimuth=(az + 180.0) % 360.0, downtilt=0.0,
                            element_pattern=topo.ue.element_pattern)
    rx_angles = ue_geom.to_local(-el, (az + 180.0) % 360.0)
    return (float(tx_angles[0]), float(tx_angles[1])), (float(rx_angles[0]), float(rx_angles[1])), dist


def build_channel_set(topo, slot, ue_ids=None):
    """Channels for one slot; ``ue_ids`` restricts the terrestrial links built."""
    ue_ids = list(range(topo.n_ue)) if ue_ids is None else list(ue_ids)
    H, Hn, gains, ue_angles = [], [], [], []
    for k in ue_ids:
        tx_a, rx_a, dist = ue_link_angles(topo, k)
        Hk, g_db = los_channel(topo.gnb, topo.ue, tx_a, rx_a, dist, topo.carrier)
        H.append(Hk)
        Hn.append(Hk / np.linalg.norm(Hk))
        gains.append(g_db)
        ue_angles.append(tx_a)

    wavelength = SPEED_OF_LIGHT / topo.carrier
    h, hn, sgains, ids, sat_angles = [], [], [], [], []
    for j in range(topo.n_sat):
        el = topo.sat_elevation[j, slot]
        if el < topo.elevation_mask:
            continue
        loc_el, loc_az = topo.gnb.to_local(el, topo.sat_azimuth[j, slot])
        loc = (float(loc_el), float(loc_az))
        rng = float(topo.sat_range[j, slot])
        g_db = -fspl_db(rng, topo.carrier) + element_gain_db(topo.gnb, *loc) + topo.satellite_gain_db
        g = 10.0 ** (g_db / 20.0) * np.exp(-2j * np.pi * rng / wavelength)
        # h_j^H w_t is the field at the satellite, hence the conjugate
        hj = np.conj(g) * steering_vector(topo.gnb, *loc) * np.sqrt(topo.gnb.n_elements)
        h.append(hj)
        hn.append(hj / np.linalg.norm(hj))
        sgains.append(float(g_db))
        ids.append(j)
        sat_angles.append(loc)
    return ChannelSet(slot, H, h, Hn, hn, gains, sgains, ids, sat_angles, ue_angles, ue_ids)


def channel_set_to_json(cs):
    def pairs(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

    return json.dumps({
        "slot": cs.slot_index,
        "ter": [{"ue_id": k, "path_gain_db": g, "H": pairs(H)}
                for k, H, g in zip(cs.ue_ids, cs.H_ter, cs.ter_path_gain_db)],
        "sat": [{"sat_id": j, "path_gain_db": g, "h": pairs(h)}
                for j, h, g in zip(cs.sat_ids, cs.h_sat, cs.sat_path_gain_db)],
    })
