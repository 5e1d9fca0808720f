"""Link-level radio model: pathloss, RSRP, SINR, CQI and per-RB capacity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

THERMAL_NOISE_DBM_PER_HZ = -174.0

# 4-bit CQI efficiency ladder (bits/s/Hz), CQI 1..15.
_CQI_EFFICIENCIES = (
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
    1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
    3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)


@dataclass(frozen=True)
class RadioConfig:
    """Static radio parameters shared by every cell."""

    tx_power_dbm: float = 20.0
    n_rb: int = 25
    rb_bandwidth_hz: float = 180_000.0
    noise_figure_db: float = 9.0
    pathloss_intercept_db: float = 95.0
    pathloss_slope_db_per_decade: float = 27.0
    rlf_sinr_db: float = -6.0

    def __post_init__(self):
        if self.n_rb < 1:
            raise ValueError("n_rb must be >= 1")
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if self.pathloss_slope_db_per_decade <= 0:
            raise ValueError("pathloss_slope_db_per_decade must be > 0")
        if self.rb_bandwidth_hz <= 0:
            raise ValueError("rb_bandwidth_hz must be > 0")


@dataclass(frozen=True)
class CqiTable:
    """SINR-to-CQI thresholds plus spectral efficiency per CQI index (1..15)."""

    sinr_thresholds_db: tuple
    efficiencies: tuple

    def __post_init__(self):
        if len(self.sinr_thresholds_db) != 15 or len(self.efficiencies) != 15:
            raise ValueError("CqiTable requires 15 thresholds and 15 efficiencies")
        thr = self.sinr_thresholds_db
        eff = self.efficiencies
        if any(a >= b for a, b in zip(thr, thr[1:])):
            raise ValueError("sinr_thresholds_db must be strictly ascending")
        if any(a >= b for a, b in zip(eff, eff[1:])):
            raise ValueError("efficiencies must be strictly ascending")
        if eff[-1] > 6.0:
            raise ValueError("top efficiency must be <= 6.0 bits/s/Hz")


def default_cqi_table() -> CqiTable:
    """Uniform 2.1 dB threshold ladder from -6.7 dB with the standard efficiencies."""
    thresholds = tuple(round(-6.7 + 2.1 * i, 10) for i in range(15))
    return CqiTable(thresholds, _CQI_EFFICIENCIES)


def pathloss_db(distance_m, cfg: RadioConfig | None = None):
    """Log-distance pathloss; distances below 1 m are clamped to 1 m.

    Accepts a scalar or an ndarray of distances in meters.
    """
    cfg = cfg if cfg is not None else RadioConfig()
    d = np.asarray(distance_m, dtype=np.float64)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("distance_m must be positive and finite")
    d = np.maximum(d, 1.0)
    out = cfg.pathloss_intercept_db + cfg.pathloss_slope_db_per_decade * np.log10(d / 1000.0)
    if out.ndim == 0:
        return float(out)
    return out


def rsrp_dbm(cfg: RadioConfig, pathloss: float):
    """Per-RB received power: transmit power split evenly across the RB grid."""
    pl = np.asarray(pathloss, dtype=np.float64)
    out = cfg.tx_power_dbm - 10.0 * np.log10(cfg.n_rb) - pl
    if out.ndim == 0:
        return float(out)
    return out


def noise_dbm_per_rb(cfg: RadioConfig) -> float:
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(cfg.rb_bandwidth_hz) + cfg.noise_figure_db


def sinr_db(serving_rsrp_dbm: float, interferer_rsrps_dbm, noise_dbm: float) -> float:
    """Linear-domain SINR over co-channel interferers plus thermal noise."""
    if not math.isfinite(noise_dbm):
        raise ValueError("noise_dbm must be finite")
    signal_mw = 10.0 ** (serving_rsrp_dbm / 10.0)
    denom_mw = 10.0 ** (noise_dbm / 10.0)
    for p in interferer_rsrps_dbm:
        denom_mw += 10.0 ** (p / 10.0)
    return 10.0 * math.log10(signal_mw / denom_mw)


def cqi_from_sinr(table: CqiTable, sinr: float) -> int:
    """Largest CQI whose threshold is met; 0 when below the bottom threshold."""
    return int(np.searchsorted(table.sinr_thresholds_db, sinr, side="right"))


def bits_per_rb(table: CqiTable, cqi: int, rb_bandwidth_hz: float = 180_000.0) -> int:
    """Achievable MAC-layer bits carried by one RB in one TTI at the given CQI."""
    if cqi == 0:
        return 0
    if not 1 <= cqi <= 15:
        raise ValueError(f"cqi must be in 0..15, got {cqi}")
    return int(math.floor(table.efficiencies[cqi - 1] * rb_bandwidth_hz * 0.001))


def bits_per_rb_table(table: CqiTable, rb_bandwidth_hz: float = 180_000.0) -> np.ndarray:
    """Vector of bits-per-RB indexed by CQI 0..15 (index 0 carries nothing)."""
    vals = [0] + [bits_per_rb(table, q, rb_bandwidth_hz) for q in range(1, 16)]
    return np.asarray(vals, dtype=np.int64)
