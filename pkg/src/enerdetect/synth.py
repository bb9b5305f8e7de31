"""Synthetic meter-data generator with ground-truth anomaly injection.

The clean signal composes a base load, an occupancy term active on working
days, and a thermal (conditioning) term proportional to how far the
temperature sits above 17 degC; Gaussian noise goes on top.  Injection then
perturbs a known fraction of samples with labeled anomalies of four shapes:
isolated spikes, isolated dips, a recurring hour-of-day excess, and a
depressed block within one day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta

import numpy as np

from .dataset import ConsumptionRecord, TimeSeries
from .features import CASE_TEMP_THRESHOLD

DEFAULT_OCCUPANCY = [0, 0, 0, 0, 0, 0, 2, 10, 30, 45, 50, 50,
                     40, 45, 50, 45, 35, 20, 10, 5, 2, 0, 0, 0]


@dataclass
class SynthConfig:
    start: datetime = datetime(2023, 1, 1)
    length_hours: int = 8760
    base_load: float = 40.0          # kW
    occupancy_coeff: float = 0.4     # kW per occupant
    thermal_coeff: float = 1.5       # kW per degC above the case threshold
    temp_mean: float = 18.0          # degC, annual mean
    temp_annual_amp: float = 10.0    # degC, annual swing
    temp_daily_amp: float = 4.0      # degC, within-day swing
    occupancy_profile: list[int] = field(default_factory=lambda: list(DEFAULT_OCCUPANCY))
    holidays: list[date] = field(default_factory=list)
    noise_std: float = 1.2           # kW

    def __post_init__(self):
        if self.base_load <= 0:
            raise ValueError("base_load must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if len(self.occupancy_profile) != 24:
            raise ValueError("occupancy_profile must have 24 entries")


@dataclass
class InjectionSpec:
    rate: float = 0.01
    mix: dict[str, float] = field(
        default_factory=lambda: {"short-spike": 0.4, "short-dip": 0.2,
                                 "time-of-day": 0.2, "day-of-week": 0.2}
    )
    magnitude_range: tuple[float, float] = (5.0, 10.0)  # multiples of clean-signal std
    target_weekday: int | None = None  # pin the day-of-week block to this weekday
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 0.2:
            raise ValueError("rate must be in [0, 0.2]")
        if abs(sum(self.mix.values()) - 1.0) > 1e-9:
            raise ValueError("mix fractions must sum to 1")


def _temperature(config: SynthConfig, ts: datetime) -> float:
    doy = ts.timetuple().tm_yday
    annual = math.sin(2 * math.pi * (doy - 80) / 365.0)
    daily = math.sin(2 * math.pi * (ts.hour - 9) / 24.0)
    return config.temp_mean + config.temp_annual_amp * annual + config.temp_daily_amp * daily


def _is_working_day(config: SynthConfig, ts: datetime) -> bool:
    return ts.weekday() < 5 and ts.date() not in config.holidays


def clean_value(config: SynthConfig, ts: datetime) -> float:
    working = _is_working_day(config, ts)
    occupancy = config.occupancy_profile[ts.hour] if working else 0
    thermal = config.thermal_coeff * max(0.0, _temperature(config, ts) - CASE_TEMP_THRESHOLD)
    return config.base_load + config.occupancy_coeff * occupancy + thermal


def generate(config: SynthConfig, seed: int = 0) -> tuple[TimeSeries, np.ndarray]:
    """Build the noisy series and its noise-free counterpart.

    The clean vector is a pure function of the config, so it doubles as an
    oracle for downstream checks.
    """
    if config.length_hours < 48:
        raise ValueError("need at least 48 hours")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, config.noise_std, size=config.length_hours)
    records = []
    clean = np.zeros(config.length_hours)
    for i in range(config.length_hours):
        ts = config.start + timedelta(hours=i)
        working = _is_working_day(config, ts)
        clean[i] = clean_value(config, ts)
        records.append(
            ConsumptionRecord(
                timestamp=ts,
                power=float(max(0.0, clean[i] + noise[i])),
                temperature=_temperature(config, ts),
                occupancy=config.occupancy_profile[ts.hour] if working else 0,
                working_day=working,
            )
        )
    return TimeSeries(records=tuple(records)), clean


@dataclass
class InjectionResult:
    series: TimeSeries
    labels: np.ndarray      # bool per index
    types: list[str]        # anomaly type per index, "" where clean


def _allocate(budget: int, mix: dict[str, float]) -> dict[str, int]:
    counts = {t: int(budget * f) for t, f in mix.items()}
    order = sorted(mix, key=mix.get, reverse=True)
    i = 0
    while sum(counts.values()) < budget:
        counts[order[i % len(order)]] += 1
        i += 1
    return counts


def inject_anomalies(series: TimeSeries, spec: InjectionSpec) -> InjectionResult:
    """Perturb exactly floor(rate * n) samples, returning ground-truth labels.

    Spikes and the time-of-day pattern push consumption up; dips and the
    day-of-week block pull it down (floored at zero, power cannot go
    negative).  Magnitudes are multiples of the series' own standard
    deviation drawn from the spec range.
    """
    n = len(series.records)
    budget = int(spec.rate * n)
    if budget < 1:
        raise ValueError("rate * length < 1: nothing to inject")
    counts = _allocate(budget, spec.mix)
    if counts.get("day-of-week", 0) > 0 and n < 7 * 24:
        raise ValueError("day-of-week injection needs at least 7 days")

    rng = np.random.default_rng(spec.seed)
    powers = np.array([r.power for r in series.records])
    sigma = powers.std(ddof=1)
    labels = np.zeros(n, dtype=bool)
    types = [""] * n
    taken = np.zeros(n, dtype=bool)

    def magnitude():
        lo, hi = spec.magnitude_range
        return rng.uniform(lo, hi) * sigma

    def free_isolated():
        # keep one clean sample on each side so spikes/dips stay isolated runs
        while True:
            i = int(rng.integers(1, n - 1))
            if not taken[max(0, i - 1) : i + 2].any():
                return i

    for _ in range(counts.get("short-spike", 0)):
        i = free_isolated()
        powers[i] += magnitude()
        taken[i] = labels[i] = True
        types[i] = "short-spike"

    for _ in range(counts.get("short-dip", 0)):
        i = free_isolated()
        powers[i] = max(0.0, powers[i] - magnitude())
        taken[i] = labels[i] = True
        types[i] = "short-dip"

    # time-of-day: the same hour on distinct days, pushed high
    tod = counts.get("time-of-day", 0)
    if tod:
        hour = int(rng.integers(0, 24))
        days = n // 24
        chosen = rng.choice(days, size=min(tod, days), replace=False)
        placed = 0
        for d in sorted(int(d) for d in chosen):
            i = d * 24 + hour
            if i < n and not taken[i]:
                powers[i] += magnitude()
                taken[i] = labels[i] = True
                types[i] = "time-of-day"
                placed += 1
        for _ in range(tod - placed):  # collisions fall back to isolated highs
            i = free_isolated()
            powers[i] += magnitude()
            taken[i] = labels[i] = True
            types[i] = "time-of-day"

    # day-of-week: one depressed block of consecutive hours within one day
    dow = counts.get("day-of-week", 0)
    if dow:
        days = n // 24
        if spec.target_weekday is not None:
            eligible = [
                d for d in range(days)
                if series.records[d * 24].timestamp.weekday() == spec.target_weekday
            ]
            if not eligible:
                raise ValueError("no day matches target_weekday")
            day = eligible[int(rng.integers(0, len(eligible)))]
        else:
            day = int(rng.integers(0, days))
        start = day * 24 + max(0, (24 - dow) // 2)
        block = [i for i in range(start, min(start + dow, n)) if not taken[i]]
        deficit = dow - len(block)
        drop = magnitude()
        for i in block:
            powers[i] = max(0.0, powers[i] - drop)
            taken[i] = labels[i] = True
            types[i] = "day-of-week"
        for _ in range(deficit):
            i = free_isolated()
            powers[i] = max(0.0, powers[i] - drop)
            taken[i] = labels[i] = True
            types[i] = "day-of-week"

    records = tuple(
        replace(r, power=float(powers[i])) if labels[i] else r
        for i, r in enumerate(series.records)
    )
    return InjectionResult(
        series=TimeSeries(records=records, cadence=series.cadence),
        labels=labels,
        types=types,
    )
