"""Ingestion and repair of raw smart-meter CSV time series.

The canonical in-memory form is :class:`TimeSeries`: an ordered list of
:class:`ConsumptionRecord` at a fixed cadence (hourly by default).  Missing
power cells survive parsing as ``None`` sentinels and are either linearly
interpolated (short gaps) or dropped (long gaps) by :func:`fill_missing`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

from .errors import SchemaError, ValidationError

DEFAULT_COLUMNS = {
    "timestamp": "timestamp",
    "power": "power",
    "temperature": "temperature",
    "occupancy": "occupancy",
    "appliance_id": "appliance_id",
    "working_day": "working_day",
}

REQUIRED_COLUMNS = ("timestamp", "power")


@dataclass(frozen=True)
class ConsumptionRecord:
    """One meter observation with its exogenous context.

    ``power`` is the observed draw in kW; ``None`` marks a missing reading
    (never coerced to 0).  ``working_day`` defaults from the weekday when the
    source file carries no explicit flag.
    """

    timestamp: datetime
    power: float | None
    temperature: float | None = None
    occupancy: int | None = None
    appliance_id: str | None = None
    working_day: bool = True

    def __post_init__(self):
        if self.power is not None and self.power < 0:
            raise ValidationError(f"negative power {self.power} at {self.timestamp}")
        if self.temperature is not None and not math.isfinite(self.temperature):
            raise ValidationError(f"non-finite temperature at {self.timestamp}")
        if self.occupancy is not None and self.occupancy < 0:
            raise ValidationError(f"negative occupancy at {self.timestamp}")


@dataclass(frozen=True)
class TimeSeries:
    records: tuple[ConsumptionRecord, ...]
    cadence: timedelta = timedelta(hours=1)

    def __post_init__(self):
        for a, b in zip(self.records, self.records[1:]):
            if b.timestamp <= a.timestamp:
                raise ValidationError(
                    f"timestamps not strictly increasing at {b.timestamp}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def powers(self) -> list[float | None]:
        return [r.power for r in self.records]

    def missing_count(self) -> int:
        return sum(1 for r in self.records if r.power is None)


@dataclass
class FillReport:
    """Spans (as timestamp pairs) repaired or removed by :func:`fill_missing`."""

    filled: list[tuple[datetime, datetime]] = field(default_factory=list)
    dropped: list[tuple[datetime, datetime]] = field(default_factory=list)


def _parse_float(cell: str | None) -> float | None:
    if cell is None:
        return None
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_bool(cell: str | None) -> bool | None:
    if cell is None or not cell.strip():
        return None
    return cell.strip() not in ("0", "false", "False")


def load_csv(
    path,
    schema: dict[str, str] | None = None,
    cadence: timedelta = timedelta(hours=1),
) -> tuple[TimeSeries, int]:
    """Parse a meter CSV into a sorted TimeSeries.

    ``schema`` remaps canonical field names to file column names.  Returns the
    series and the number of unparseable power/temperature cells that became
    missing sentinels.  Duplicate timestamps are a hard error.
    """
    columns = dict(DEFAULT_COLUMNS)
    if schema:
        columns.update(schema)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for canonical in REQUIRED_COLUMNS:
            if columns[canonical] not in header:
                raise SchemaError(f"missing required column {columns[canonical]!r}")
        have = {k: (columns[k] in header) for k in columns}

        records = []
        missing = 0
        for row in reader:
            ts = datetime.fromisoformat(row[columns["timestamp"]].strip())
            power = _parse_float(row[columns["power"]])
            if power is None:
                missing += 1
            elif power < 0:
                power = None
                missing += 1
            temperature = None
            if have["temperature"]:
                raw = row[columns["temperature"]]
                temperature = _parse_float(raw)
                if temperature is None and raw is not None and raw.strip():
                    missing += 1
            occupancy = None
            if have["occupancy"]:
                occ = _parse_float(row[columns["occupancy"]])
                occupancy = int(occ) if occ is not None and occ >= 0 else None
            appliance = row[columns["appliance_id"]].strip() or None if have["appliance_id"] else None
            wday = _parse_bool(row[columns["working_day"]]) if have["working_day"] else None
            if wday is None:
                wday = ts.weekday() < 5
            records.append(
                ConsumptionRecord(
                    timestamp=ts,
                    power=power,
                    temperature=temperature,
                    occupancy=occupancy,
                    appliance_id=appliance,
                    working_day=wday,
                )
            )

    records.sort(key=lambda r: r.timestamp)
    for a, b in zip(records, records[1:]):
        if a.timestamp == b.timestamp:
            raise ValidationError(f"duplicate timestamp {a.timestamp.isoformat()}")
    return TimeSeries(records=tuple(records), cadence=cadence), missing


def write_csv(series: TimeSeries, path) -> None:
    """Inverse of load_csv for clean series; float cells use repr round-tripping."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["timestamp", "power", "temperature", "occupancy", "appliance_id", "working_day"]
        )
        for r in series.records:
            writer.writerow(
                [
                    r.timestamp.isoformat(),
                    "" if r.power is None else repr(float(r.power)),
                    "" if r.temperature is None else repr(float(r.temperature)),
                    "" if r.occupancy is None else r.occupancy,
                    r.appliance_id or "",
                    int(r.working_day),
                ]
            )


def fill_missing(
    series: TimeSeries, max_gap: int = 3
) -> tuple[TimeSeries, FillReport]:
    """Repair missing power values.

    Gaps of at most ``max_gap`` consecutive missing samples bounded by
    observations on both sides are linearly interpolated; longer or unbounded
    gaps have their records removed.  Observed values are never altered.
    """
    observed = [i for i, r in enumerate(series.records) if r.power is not None]
    if len(observed) < 2:
        raise ValidationError("fewer than 2 observed power values")

    report = FillReport()
    out: list[ConsumptionRecord] = []
    if observed[0] > 0:
        report.dropped.append(
            (series.records[0].timestamp, series.records[observed[0] - 1].timestamp)
        )

    for left, right in zip(observed, observed[1:]):
        out.append(series.records[left])
        gap = right - left - 1
        if gap == 0:
            continue
        span = (series.records[left + 1].timestamp, series.records[right - 1].timestamp)
        if gap <= max_gap:
            p_left = series.records[left].power
            p_right = series.records[right].power
            for j in range(left + 1, right):
                frac = (j - left) / (right - left)
                filled = p_left + frac * (p_right - p_left)
                out.append(replace(series.records[j], power=filled))
            report.filled.append(span)
        else:
            report.dropped.append(span)
    out.append(series.records[observed[-1]])

    tail = list(range(observed[-1] + 1, len(series.records)))
    if tail:
        report.dropped.append(
            (series.records[tail[0]].timestamp, series.records[tail[-1]].timestamp)
        )

    return TimeSeries(records=tuple(out), cadence=series.cadence), report


def aggregate_hourly(series: TimeSeries) -> TimeSeries:
    """Collapse sub-hourly records to one per hour by mean power/temperature."""
    buckets: dict[datetime, list[ConsumptionRecord]] = {}
    for r in series.records:
        key = r.timestamp.replace(minute=0, second=0, microsecond=0)
        buckets.setdefault(key, []).append(r)
    records = []
    for key in sorted(buckets):
        group = buckets[key]
        powers = [r.power for r in group if r.power is not None]
        temps = [r.temperature for r in group if r.temperature is not None]
        occs = [r.occupancy for r in group if r.occupancy is not None]
        records.append(
            ConsumptionRecord(
                timestamp=key,
                power=sum(powers) / len(powers) if powers else None,
                temperature=sum(temps) / len(temps) if temps else None,
                occupancy=round(sum(occs) / len(occs)) if occs else None,
                appliance_id=group[0].appliance_id,
                working_day=group[0].working_day,
            )
        )
    return TimeSeries(records=tuple(records), cadence=timedelta(hours=1))
