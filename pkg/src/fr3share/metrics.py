"""RSS degradation, Jain's fairness index and run-level summaries."""
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyRun, InvalidArgument

RSS_CEILING_DB = 300.0
INR_PERCENTILES = (5, 25, 50, 75, 95)


@dataclass
class SlotRecord:
    slot: int
    ue_id: int
    lam: float
    p_selected: float  # dBm
    beamformed_gain: float  # dB
    rss_degradation: float  # dB
    inr_per_sat: list = field(default_factory=list)  # dB
    degeneracy_flag: bool = False
    infeasible_flag: bool = False
    rss_clamped_flag: bool = False

    @property
    def inr_worst(self):
        return max(self.inr_per_sat) if self.inr_per_sat else -math.inf


@dataclass
class RunSummary:
    per_ue_degradation: list  # dB, mean over each UE's slots
    jfi: float
    jfi_all_zero: bool
    worst_case_rss: float  # dB
    rss_std: float  # dB, std of per-UE means
    mean_rss: float
    median_rss: float
    inr_median: float
    inr_percentiles: dict
    power_decrease: float  # percent
    energy_saved: float  # percent
    mean_power_dbm: float
    n_records: int
    n_infeasible: int
    n_degenerate: int

    def to_dict(self):
        return asdict(self)


def _mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def rss_degradation(p_max_dbm, w_t_ref, p_hat_dbm, w_t_hat, w_r, H):
    """RSS loss (dB) of (p_hat, w_t_hat) against the full-power lambda=0 beam.

    Returns (value, clamped); a vanishing actual gain yields +300 dB.
    """
    w_r = np.asarray(w_r).reshape(-1, 1)
    g_ref = abs(complex((w_r.conj().T @ H @ np.asarray(w_t_ref).reshape(-1, 1))[0, 0])) ** 2
    g_hat = abs(complex((w_r.conj().T @ H @ np.asarray(w_t_hat).reshape(-1, 1))[0, 0])) ** 2
    num = float(_mw(p_max_dbm)) * g_ref
    den = float(_mw(p_hat_dbm)) * g_hat
    if den <= 0.0:
        return RSS_CEILING_DB, True
    return min(10.0 * math.log10(num / den), RSS_CEILING_DB), False


def jain_index(values):
    """(sum v)^2 / (K sum v^2); an all-zero vector returns 1."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InvalidArgument("jain_index needs at least one value")
    sq = float(np.sum(v * v))
    if sq == 0.0:
        return 1.0
    return float(np.sum(v)) ** 2 / (v.size * sq)


def summarize(records, k=None, p_max_dbm=33.0):
    """Aggregate slot records into a RunSummary.

    Degradations below 0 dB (numerical noise) are clamped to 0 before
    averaging. ``k`` defaults to the number of distinct UEs seen.
    """
    if not records:
        raise EmptyRun("no records to summarize")
    by_ue = defaultdict(list)
    for r in records:
        by_ue[r.ue_id].append(max(r.rss_degradation, 0.0))
    ue_ids = sorted(by_ue)
    if k is not None and len(ue_ids) != k:
        raise InvalidArgument(f"expected {k} UEs in the records, found {len(ue_ids)}")
    # sorted before summing so the result does not depend on record order
    per_ue = [math.fsum(sorted(by_ue[u])) / len(by_ue[u]) for u in ue_ids]
    drss = np.sort([max(r.rss_degradation, 0.0) for r in records])

    inrs = np.sort([x for r in records for x in r.inr_per_sat])
    if inrs.size:
        pct = {str(q): float(np.percentile(inrs, q)) for q in INR_PERCENTILES}
        inr_median = pct["50"]
    else:
        pct, inr_median = {str(q): None for q in INR_PERCENTILES}, None

    p_lin = np.sort(_mw([r.p_selected for r in records]))
    ratio = math.fsum(p_lin) / (len(p_lin) * float(_mw(p_max_dbm)))
    return RunSummary(
        per_ue_degradation=per_ue,
        jfi=jain_index(per_ue),
        jfi_all_zero=not any(per_ue),
        worst_case_rss=float(drss[-1]),
        rss_std=float(np.std(per_ue)),
        mean_rss=math.fsum(drss) / len(drss),
        median_rss=float(np.median(drss)),
        inr_median=inr_median,
        inr_percentiles=pct,
        power_decrease=100.0 * (1.0 - ratio),
        # equal slot durations: energy ratio equals the mean power ratio
        energy_saved=100.0 * (1.0 - ratio),
        mean_power_dbm=10.0 * math.log10(ratio) + p_max_dbm,
        n_records=len(records),
        n_infeasible=sum(r.infeasible_flag for r in records),
        n_degenerate=sum(r.degeneracy_flag for r in records),
    )


def pool_summaries(summaries):
    """Mean of the scalar fields over several per-seed summaries."""
    keys = ["jfi", "worst_case_rss", "rss_std", "mean_rss", "median_rss", "inr_median",
            "power_decrease", "energy_saved", "mean_power_dbm"]
    out = {}
    for key in keys:
        vals = [getattr(s, key) for s in summaries if getattr(s, key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    out["n_seeds"] = len(summaries)
    out["n_infeasible"] = int(sum(s.n_infeasible for s in summaries))
    return out
