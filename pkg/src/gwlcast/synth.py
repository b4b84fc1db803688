"""Synthetic hourly well records with known linear-reservoir dynamics.

Rainfall is a Poisson-cluster process: storm starts arrive with exponential
gaps, each storm lasts an exponential number of hours at an exponential
intensity.  Tide is a sum of sinusoidal constituents.  Groundwater follows

    s[t+1] = a * s[t] + recharge_coeff * rain[t]
    gwl[t] = base_gwl + s[t] + tidal_coeff * tide[t] + N(0, noise_std)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import TimeSeriesFrame, parse_timestamp
from .numerics import Prng

__all__ = [
    "HOURS_PER_MONTH",
    "HydroConfig",
    "StormCell",
    "gen_tide",
    "gen_storm_schedule",
    "gen_rainfall",
    "simulate_gwl",
    "simulate_storage",
    "generate_frame",
]

HOURS_PER_MONTH = 365.0 * 24.0 / 12.0
DEFAULT_CONSTITUENTS = ((0.5, 12.42, 0.0), (0.15, 25.82, 1.0))


@dataclass(frozen=True)
class HydroConfig:
    n_hours: int = 17520
    base_gwl: float = 1.0  # m
    recession: float = 0.98  # per-hour retention
    recharge_coeff: float = 0.005  # m per mm
    tidal_coeff: float = 0.3
    constituents: tuple = DEFAULT_CONSTITUENTS  # (amplitude m, period h, phase rad)
    storms_per_month: float = 3.0
    storm_duration: float = 8.0  # mean hours
    storm_intensity: float = 2.5  # mean mm/h
    noise_std: float = 0.01  # m
    initial_storage: float = 0.0  # m
    seed: int = 0
    start: str = "2010-01-01T00:00:00Z"
    well_id: str = "synthetic"

    def __post_init__(self):
        if not 0.0 < self.recession < 1.0:
            raise ValueError("recession must lie in (0, 1)")
        if self.n_hours < 1:
            raise ValueError("n_hours must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.storms_per_month < 0 or self.storm_duration <= 0 or self.storm_intensity < 0:
            raise ValueError("storm process parameters must be non-negative")
        consts = tuple(tuple(float(v) for v in c) for c in self.constituents)
        for amp, period, _ in consts:
            if amp < 0 or period <= 0:
                raise ValueError("constituent amplitudes must be >= 0 and periods > 0")
        object.__setattr__(self, "constituents", consts)
        parse_timestamp(self.start)

    def with_(self, **changes) -> "HydroConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class StormCell:
    start: int
    duration: int
    intensity: float


def gen_tide(t, constituents):
    """Tide level (m) at hour index ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    for amp, period, phase in constituents:
        out = out + amp * np.sin(2.0 * math.pi * t / period + phase)
    return out if out.ndim else float(out)


def gen_storm_schedule(cfg: HydroConfig, prng: Prng) -> list[StormCell]:
    if cfg.storms_per_month == 0:
        return []
    mean_gap = HOURS_PER_MONTH / cfg.storms_per_month
    cells = []
    t = prng.exponential(mean_gap)
    while t < cfg.n_hours:
        duration = max(1, math.ceil(prng.exponential(cfg.storm_duration)))
        intensity = prng.exponential(cfg.storm_intensity)
        cells.append(StormCell(int(t), duration, intensity))
        t += prng.exponential(mean_gap)
    return cells


def gen_rainfall(cfg: HydroConfig, prng: Prng) -> np.ndarray:
    rain = np.zeros(cfg.n_hours)
    for cell in gen_storm_schedule(cfg, prng):
        rain[cell.start : cell.start + cell.duration] += cell.intensity
    return rain


def simulate_storage(rain, recession: float, recharge_coeff: float,
                     initial_storage: float = 0.0) -> np.ndarray:
    rain = np.asarray(rain, dtype=np.float64)
    s = np.empty_like(rain)
    cur = initial_storage
    for t in range(rain.shape[0]):
        s[t] = cur
        cur = recession * cur + recharge_coeff * rain[t]
    return s


def simulate_gwl(rain, tide, cfg: HydroConfig, prng: Prng) -> np.ndarray:
    rain = np.asarray(rain, dtype=np.float64)
    tide = np.asarray(tide, dtype=np.float64)
    if rain.shape != tide.shape:
        raise ValueError(f"rain length {rain.shape} != tide length {tide.shape}")
    s = simulate_storage(rain, cfg.recession, cfg.recharge_coeff, cfg.initial_storage)
    noise = np.array([prng.normal() for _ in range(rain.shape[0])]) * cfg.noise_std
    return cfg.base_gwl + s + cfg.tidal_coeff * tide + noise


def generate_frame(cfg: HydroConfig = HydroConfig()) -> TimeSeriesFrame:
    prng = Prng(cfg.seed)
    rain = gen_rainfall(cfg, prng)
    tide = gen_tide(np.arange(cfg.n_hours), cfg.constituents)
    gwl = simulate_gwl(rain, tide, cfg, prng)
    ts = parse_timestamp(cfg.start) + np.arange(cfg.n_hours).astype("timedelta64[h]")
    return TimeSeriesFrame(cfg.well_id, ts, rain, tide, gwl)
