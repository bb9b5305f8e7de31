"""Feature construction: cyclic time encoding, case labeling, scaling.

Hour-of-day and day-of-year are periodic, so both are mapped to (sin, cos)
pairs; that keeps hour 24 of one day metrically adjacent to hour 1 of the
next.  Each record also gets a case label in 1..4 from its mean daily
temperature against a 17 degC threshold crossed with the working-day flag.
"""

from __future__ import annotations

import calendar
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import TimeSeries
from .errors import DegenerateSeriesError, ValidationError

CASE_TEMP_THRESHOLD = 17.0

# Columns that are already bounded or binary and must bypass z-scoring.
_PASSTHROUGH_PREFIXES = ("hour_", "day_", "working_day", "case_", "appliance_")


def encode_cyclic(value: float, period: float) -> tuple[float, float]:
    """Map a position in a cycle to its (sin, cos) pair."""
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    angle = 2.0 * math.pi * value / period
    return math.sin(angle), math.cos(angle)


def label_case(
    mean_daily_temp: float,
    working_day: bool,
    temp_threshold: float = CASE_TEMP_THRESHOLD,
) -> int:
    """Assign one of four operating regimes.

    Case 1: warm working day; 2: cool working day; 3: warm non-working day;
    4: cool non-working day.  The boundary temperature goes to the cool side
    so the rule is total.
    """
    if not math.isfinite(mean_daily_temp):
        raise ValueError("mean daily temperature must be finite")
    warm = mean_daily_temp > temp_threshold
    if working_day:
        return 1 if warm else 2
    return 3 if warm else 4


@dataclass
class FeatureMatrix:
    """Dense feature matrix with named columns and a scaling passthrough mask."""

    values: np.ndarray
    columns: list[str]
    scaled: bool = False

    def passthrough_mask(self) -> np.ndarray:
        return np.array(
            [c.startswith(_PASSTHROUGH_PREFIXES) for c in self.columns], dtype=bool
        )

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def _hour_value(hour: int) -> int:
    # Hours are 1..24; midnight is hour 24 of the cycle (numerically identical
    # to 0 under the periodic encoding).
    return 24 if hour == 0 else hour


def build_features(
    series: TimeSeries,
    include_occupancy: bool = True,
    appliance_vocab: list[str] | None = None,
) -> tuple[FeatureMatrix, np.ndarray, np.ndarray]:
    """One feature row per record plus the target power vector.

    Returns (features, targets, case_labels).  The day-of-year period follows
    the record's own year (366 on leap years).  ``appliance_vocab`` fixes the
    one-hot categories; IDs outside it fall into an "other" bucket.
    """
    if any(r.power is None for r in series.records):
        raise ValidationError("series contains missing power; repair it first")
    n = len(series.records)
    if n == 0:
        raise ValidationError("empty series")

    day_temps: dict = {}
    for r in series.records:
        day_temps.setdefault(r.timestamp.date(), []).append(
            r.temperature if r.temperature is not None else math.nan
        )
    mean_temp_by_day = {}
    fallback = [t for ts in day_temps.values() for t in ts if not math.isnan(t)]
    global_mean = sum(fallback) / len(fallback) if fallback else 0.0
    for day, temps in day_temps.items():
        clean = [t for t in temps if not math.isnan(t)]
        mean_temp_by_day[day] = sum(clean) / len(clean) if clean else global_mean

    has_appliance = any(r.appliance_id for r in series.records)
    if has_appliance and appliance_vocab is None:
        appliance_vocab = sorted({r.appliance_id for r in series.records if r.appliance_id})

    columns = ["hour_sin", "hour_cos", "day_sin", "day_cos", "temperature",
               "mean_daily_temp", "working_day"]
    if include_occupancy:
        columns.append("occupancy")
    columns += [f"case_{c}" for c in (1, 2, 3, 4)]
    if has_appliance:
        columns += [f"appliance_{a}" for a in appliance_vocab] + ["appliance_other"]

    rows = np.zeros((n, len(columns)), dtype=np.float64)
    targets = np.zeros(n, dtype=np.float64)
    cases = np.zeros(n, dtype=np.int64)
    for i, r in enumerate(series.records):
        ts = r.timestamp
        year_days = 366 if calendar.isleap(ts.year) else 365
        hs, hc = encode_cyclic(_hour_value(ts.hour), 24)
        doy = ts.timetuple().tm_yday
        ds, dc = encode_cyclic(doy, year_days)
        t_bar = mean_temp_by_day[ts.date()]
        temp = r.temperature if r.temperature is not None else global_mean
        case = label_case(t_bar, r.working_day)
        row = [hs, hc, ds, dc, temp, t_bar, float(r.working_day)]
        if include_occupancy:
            row.append(float(r.occupancy or 0))
        onehot = [0.0] * 4
        onehot[case - 1] = 1.0
        row += onehot
        if has_appliance:
            app = [0.0] * (len(appliance_vocab) + 1)
            if r.appliance_id in appliance_vocab:
                app[appliance_vocab.index(r.appliance_id)] = 1.0
            elif r.appliance_id:
                app[-1] = 1.0
            row += app
        rows[i] = row
        targets[i] = r.power
        cases[i] = case

    return FeatureMatrix(values=rows, columns=columns), targets, cases


@dataclass
class Scaler:
    """Columnwise z-score scaler; bounded/binary columns pass through.

    Fit on training rows only.  Constant columns fall back to std 1 with a
    warning instead of dividing by zero.
    """

    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    apply_mask: np.ndarray | None = None
    fitted: bool = field(default=False)

    def fit(self, matrix: FeatureMatrix) -> "Scaler":
        if self.fitted:
            raise ValidationError("scaler already fitted")
        if matrix.values.size == 0:
            raise ValueError("cannot fit scaler on an empty matrix")
        if matrix.scaled:
            raise ValidationError("refusing to fit on an already-scaled matrix")
        self.apply_mask = ~matrix.passthrough_mask()
        self.mean = np.where(self.apply_mask, matrix.values.mean(axis=0), 0.0)
        std = matrix.values.std(axis=0, ddof=1) if matrix.values.shape[0] > 1 else np.zeros(matrix.values.shape[1])
        if np.any((std == 0) & self.apply_mask):
            warnings.warn("constant feature column; std fallback to 1", stacklevel=2)
        std = np.where(std == 0, 1.0, std)
        self.std = np.where(self.apply_mask, std, 1.0)
        self.fitted = True
        return self

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        if not self.fitted:
            raise ValidationError("scaler not fitted")
        if matrix.scaled:
            raise ValidationError("matrix already scaled")
        values = (matrix.values - self.mean) / self.std
        return FeatureMatrix(values=values, columns=list(matrix.columns), scaled=True)


def fit_scaler(matrix: FeatureMatrix) -> Scaler:
    return Scaler().fit(matrix)


def apply_scaler(scaler: Scaler, matrix: FeatureMatrix) -> FeatureMatrix:
    return scaler.transform(matrix)
