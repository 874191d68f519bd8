"""Interference-nulling beamformer pair and beam-pattern evaluation.

The transmit beamformer maximizes

    |w_r^H H w_t|^2 - lam * sum_j |h_j^H w_t|^2,   ||w_t|| = ||w_r|| = 1

on normalized channels: w_r is the dominant left singular vector of H and
w_t the principal eigenvector of H^H w_r w_r^H H - lam * sum_j h_j h_j^H.
"""
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .arrays import steering_matrix
from .errors import InvalidArgument, NotNormalized

NORM_TOL = 1e-9
GAIN_FLOOR_DB = -300.0
DEFAULT_LAMBDAS = (0.0, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class NullingConfig:
    lam: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidArgument(f"lambda must be finite and >= 0, got {self.lam}")


@dataclass
class BeamformerPair:
    w_t: np.ndarray  # N_t x 1
    w_r: np.ndarray  # N_r x 1
    lambda_used: float
    degenerate: bool = False


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else GAIN_FLOOR_DB


def leakage_matrix(sat_vectors, n):
    if len(sat_vectors) == 0:
        return np.zeros((n, n), dtype=complex)
    S = np.hstack([np.asarray(h, dtype=complex).reshape(-1, 1) for h in sat_vectors])
    return S @ S.conj().T


def solve_nulling(H_norm, sat_norm, cfg=0.0, method="lapack"):
    """Beamformer pair for one link; ``cfg`` is a NullingConfig or a bare lambda."""
    lam = cfg.lam if isinstance(cfg, NullingConfig) else NullingConfig(float(cfg)).lam
    H = numerics.as_matrix(H_norm)
    if abs(numerics.fro_norm(H) - 1.0) > NORM_TOL:
        raise NotNormalized("terrestrial channel must have unit Frobenius norm")
    for j, h in enumerate(sat_norm):
        if abs(np.linalg.norm(h) - 1.0) > NORM_TOL:
            raise NotNormalized(f"satellite channel {j} must have unit 2-norm")

    U, _, _ = numerics.svd(H, method=method)
    w_r = U[:, :1]
    a = H.conj().T @ w_r
    n = H.shape[1]
    cols, weights = [a], [1.0]
    if lam > 0:
        cols += [np.asarray(h, dtype=complex).reshape(-1, 1) for h in sat_norm]
        weights += [-lam] * len(sat_norm)

    if len(cols) < n:
        # M = B diag(weights) B^H has rank <= len(cols): solve in its range
        Q, L = numerics.eig_hermitian_lowrank(np.hstack(cols), weights, method=method)
        scale = float(np.sqrt(np.sum(L**2)))
        if L[0] > numerics.DEGENERACY_TOL * scale:
            second = max(L[1], 0.0) if len(L) > 1 else 0.0
            degenerate = abs(L[0] - second) < numerics.DEGENERACY_TOL * scale
            return BeamformerPair(Q[:, :1], w_r, lam, degenerate)

    M = (np.hstack(cols) * np.asarray(weights)) @ np.hstack(cols).conj().T
    Q, L = numerics.eig_hermitian(M, method=method)
    return BeamformerPair(Q[:, :1], w_r, lam, numerics.is_degenerate(L, M))


def nulling_matrix(H_norm, w_r, sat_norm, lam):
    """M = H^H w_r w_r^H H - lam sum_j h_j h_j^H, formed explicitly."""
    a = np.asarray(H_norm).conj().T @ w_r
    return a @ a.conj().T - lam * leakage_matrix(sat_norm, a.shape[0])


def beamformed_gain(pair, H):
    """10 log10 |w_r^H H w_t|^2 in dB (floored at -300 dB)."""
    g = np.asarray(pair.w_r).conj().T @ np.asarray(H) @ np.asarray(pair.w_t)
    return _db(float(abs(g[0, 0]) ** 2))


def objective_terms(pair, H_norm, sat_norm):
    """(terrestrial gain, total leakage) on normalized channels, linear."""
    ter = float(abs((pair.w_r.conj().T @ H_norm @ pair.w_t)[0, 0]) ** 2)
    leak = sum(float(abs((np.asarray(h).conj().T @ pair.w_t)[0, 0]) ** 2) for h in sat_norm)
    return ter, leak


def array_gain_db(w_t, geom, elevation, azimuth):
    """10 log10(N_t |e(el, az)^H w_t|^2) for arrays of local angles."""
    el, az = np.broadcast_arrays(np.asarray(elevation, float), np.asarray(azimuth, float))
    E = steering_matrix(geom, el, az)
    g = geom.n_elements * np.abs(E.conj().T @ np.asarray(w_t).reshape(-1)) ** 2
    with np.errstate(divide="ignore"):
        out = np.maximum(10.0 * np.log10(g), GAIN_FLOOR_DB)
    return out.reshape(el.shape)


def gain_map(pair, geom, elevations, azimuths):
    """Transmit beam pattern on an elevation x azimuth grid (dB).

    Rows follow ``elevations``, columns ``azimuths`` (local degrees).
    """
    elevations = np.asarray(elevations, dtype=float)
    azimuths = np.asarray(azimuths, dtype=float)
    if elevations.size == 0 or azimuths.size == 0:
        raise InvalidArgument("gain map grid is empty")
    el, az = np.meshgrid(elevations, azimuths, indexing="ij")
    w_t = pair.w_t if isinstance(pair, BeamformerPair) else pair
    return array_gain_db(w_t, geom, el, az)


def write_gain_map(csv_path, elevations, azimuths, gmap, markers=None):
    """theta_deg,phi_deg,gain_db rows plus a sidecar JSON with marker angles."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_deg", "phi_deg", "gain_db"])
        for i, th in enumerate(elevations):
            for k, ph in enumerate(azimuths):
                w.writerow([f"{th:.4f}", f"{ph:.4f}", f"{gmap[i, k]:.6f}"])
    sidecar = str(csv_path).rsplit(".", 1)[0] + ".markers.json"
    with open(sidecar, "w") as fh:
        json.dump(markers or {}, fh, indent=2, sort_keys=True)
    return sidecar
