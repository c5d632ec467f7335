"""Daily consumption and weather series: parsing, joining, splitting, synthesis.

CSV formats (UTF-8, comma separated, ISO-8601 dates, decimal point):

    consumption: date,energy_kwh,occupancy_rate[,guests]
    weather:     date,temp_mean,temp_max,temp_min[,humidity,<extras...>]

Optional values are blank cells, never sentinel numbers. Unknown weather
columns are kept as named extras; the consumption format is closed.
All rows describe whole calendar days, so there is no timezone handling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date as Date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArgumentError, GenerationError, JoinError, ParseError
from .features import cdd, rdd

CONSUMPTION_COLUMNS = ("date", "energy_kwh", "occupancy_rate")
WEATHER_COLUMNS = ("date", "temp_mean", "temp_max", "temp_min")


@dataclass(frozen=True)
class ConsumptionRecord:
    """One day of metered consumption plus occupancy."""

    date: Date
    energy_kwh: float
    occupancy_rate: float
    guests: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.energy_kwh) and self.energy_kwh > 0):
            raise ArgumentError(f"energy_kwh must be positive, got {self.energy_kwh}")
        if not 0.0 <= self.occupancy_rate <= 1.0:
            raise ArgumentError(
                f"occupancy_rate must be in [0, 1], got {self.occupancy_rate}"
            )
        if self.guests is not None and self.guests < 0:
            raise ArgumentError(f"guests must be nonnegative, got {self.guests}")


@dataclass(frozen=True)
class WeatherRecord:
    """One day of climatological observations, temperatures in deg C."""

    date: Date
    temp_mean: float
    temp_max: float
    temp_min: float
    humidity: float | None = None
    extras: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.temp_min <= self.temp_mean <= self.temp_max):
            raise ArgumentError(
                f"need temp_min <= temp_mean <= temp_max, got "
                f"{self.temp_min}/{self.temp_mean}/{self.temp_max}"
            )
        if self.humidity is not None and not 0.0 <= self.humidity <= 100.0:
            raise ArgumentError(f"humidity must be in [0, 100], got {self.humidity}")


@dataclass(frozen=True)
class DailyRecord:
    """Joined consumption + weather observations for one day."""

    date: Date
    energy_kwh: float
    occupancy_rate: float
    guests: int | None
    temp_mean: float
    temp_max: float
    temp_min: float
    humidity: float | None
    extras: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    """Chronologically ordered daily records for one hotel."""

    records: tuple[DailyRecord, ...]
    hotel_id: str = "hotel"

    def __post_init__(self):
        if not self.records:
            raise ArgumentError("dataset must be nonempty")
        dates = [r.date for r in self.records]
        for earlier, later in zip(dates, dates[1:]):
            if earlier >= later:
                raise ArgumentError(f"dates must be strictly increasing, saw {earlier} then {later}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dates(self) -> tuple[Date, ...]:
        return tuple(r.date for r in self.records)


@dataclass(frozen=True)
class JoinStats:
    """How many rows each side lost to the inner join."""

    dropped_consumption: int
    dropped_weather: int


def _rows(text: str) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise ParseError("document is empty, expected a header row")
    return rows[0], rows[1:]


def _parse_date(cell: str, row: int, column: str) -> Date:
    try:
        return Date.fromisoformat(cell.strip())
    except ValueError:
        raise ParseError(f"row {row}, column {column}: malformed date {cell!r}") from None


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}, column {column}: non-numeric value {cell!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {column}: non-finite value {cell!r}")
    return value


def _reject_duplicate_dates(dates: Sequence[Date]) -> None:
    seen: dict[Date, int] = {}
    for i, day in enumerate(dates, start=1):
        if day in seen:
            raise ParseError(f"duplicate date {day} at rows {seen[day]} and {i}")
        seen[day] = i


def parse_consumption_csv(text: str) -> tuple[ConsumptionRecord, ...]:
    """Parse and validate a consumption document; rows come back date-sorted."""
    header, data = _rows(text)
    header = [h.strip() for h in header]
    for required in CONSUMPTION_COLUMNS:
        if required not in header:
            raise ParseError(f"missing required column: {required}")
    known = set(CONSUMPTION_COLUMNS) | {"guests"}
    for name in header:
        if name not in known:
            raise ParseError(f"unknown consumption column: {name}")
    idx = {name: header.index(name) for name in header}

    records = []
    for row_no, row in enumerate(data, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        day = _parse_date(row[idx["date"]], row_no, "date")
        energy = _parse_float(row[idx["energy_kwh"]], row_no, "energy_kwh")
        if energy <= 0:
            raise ParseError(f"row {row_no}, column energy_kwh: must be positive, got {energy}")
        occupancy = _parse_float(row[idx["occupancy_rate"]], row_no, "occupancy_rate")
        if not 0.0 <= occupancy <= 1.0:
            raise ParseError(
                f"row {row_no}, column occupancy_rate: must be in [0, 1], got {occupancy}"
            )
        guests = None
        if "guests" in idx and row[idx["guests"]].strip() != "":
            raw = _parse_float(row[idx["guests"]], row_no, "guests")
            if raw != int(raw) or raw < 0:
                raise ParseError(
                    f"row {row_no}, column guests: must be a nonnegative count, got {row[idx['guests']]!r}"
                )
            guests = int(raw)
        records.append(ConsumptionRecord(day, energy, occupancy, guests))

    records.sort(key=lambda r: r.date)
    _reject_duplicate_dates([r.date for r in records])
    return tuple(records)


def parse_weather_csv(text: str) -> tuple[WeatherRecord, ...]:
    """Parse a weather document; unknown columns are kept as named extras."""
    header, data = _rows(text)
    header = [h.strip() for h in header]
    for required in WEATHER_COLUMNS:
        if required not in header:
            raise ParseError(f"missing required column: {required}")
    idx = {name: header.index(name) for name in header}
    extra_names = [h for h in header if h not in WEATHER_COLUMNS and h != "humidity"]

    records = []
    for row_no, row in enumerate(data, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        day = _parse_date(row[idx["date"]], row_no, "date")
        t_mean = _parse_float(row[idx["temp_mean"]], row_no, "temp_mean")
        t_max = _parse_float(row[idx["temp_max"]], row_no, "temp_max")
        t_min = _parse_float(row[idx["temp_min"]], row_no, "temp_min")
        if not (t_min <= t_mean <= t_max):
            raise ParseError(
                f"row {row_no}: inconsistent temperatures, "
                f"need temp_min <= temp_mean <= temp_max, got {t_min}/{t_mean}/{t_max}"
            )
        humidity = None
        if "humidity" in idx and row[idx["humidity"]].strip() != "":
            humidity = _parse_float(row[idx["humidity"]], row_no, "humidity")
            if not 0.0 <= humidity <= 100.0:
                raise ParseError(
                    f"row {row_no}, column humidity: must be in [0, 100], got {humidity}"
                )
        extras = {}
        for name in extra_names:
            cell = row[idx[name]]
            if cell.strip() != "":
                extras[name] = _parse_float(cell, row_no, name)
        records.append(WeatherRecord(day, t_mean, t_max, t_min, humidity, extras))

    records.sort(key=lambda r: r.date)
    _reject_duplicate_dates([r.date for r in records])
    return tuple(records)


def _fmt(value: float) -> str:
    # repr of a Python float round-trips bit-exactly
    return repr(float(value))


def consumption_to_csv(records: Iterable[ConsumptionRecord]) -> str:
    records = list(records)
    with_guests = any(r.guests is not None for r in records)
    header = "date,energy_kwh,occupancy_rate" + (",guests" if with_guests else "")
    lines = [header]
    for r in records:
        cells = [r.date.isoformat(), _fmt(r.energy_kwh), _fmt(r.occupancy_rate)]
        if with_guests:
            cells.append("" if r.guests is None else str(r.guests))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def weather_to_csv(records: Iterable[WeatherRecord]) -> str:
    records = list(records)
    with_humidity = any(r.humidity is not None for r in records)
    extra_names = sorted({name for r in records for name in r.extras})
    header = list(WEATHER_COLUMNS)
    if with_humidity:
        header.append("humidity")
    header += extra_names
    lines = [",".join(header)]
    for r in records:
        cells = [r.date.isoformat(), _fmt(r.temp_mean), _fmt(r.temp_max), _fmt(r.temp_min)]
        if with_humidity:
            cells.append("" if r.humidity is None else _fmt(r.humidity))
        for name in extra_names:
            cells.append(_fmt(r.extras[name]) if name in r.extras else "")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def dataset_to_csv(dataset: Dataset) -> str:
    """Joined export: union of both column sets, one row per day."""
    records = dataset.records
    with_guests = any(r.guests is not None for r in records)
    with_humidity = any(r.humidity is not None for r in records)
    extra_names = sorted({name for r in records for name in r.extras})
    header = ["date", "energy_kwh", "occupancy_rate"]
    if with_guests:
        header.append("guests")
    header += ["temp_mean", "temp_max", "temp_min"]
    if with_humidity:
        header.append("humidity")
    header += extra_names
    lines = [",".join(header)]
    for r in records:
        cells = [r.date.isoformat(), _fmt(r.energy_kwh), _fmt(r.occupancy_rate)]
        if with_guests:
            cells.append("" if r.guests is None else str(r.guests))
        cells += [_fmt(r.temp_mean), _fmt(r.temp_max), _fmt(r.temp_min)]
        if with_humidity:
            cells.append("" if r.humidity is None else _fmt(r.humidity))
        for name in extra_names:
            cells.append(_fmt(r.extras[name]) if name in r.extras else "")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def join_on_date(
    consumption: Sequence[ConsumptionRecord],
    weather: Sequence[WeatherRecord],
    hotel_id: str = "hotel",
) -> tuple[Dataset, JoinStats]:
    """Inner join on date; unmatched days on either side are dropped."""
    if not consumption or not weather:
        raise ArgumentError("join requires nonempty consumption and weather series")
    weather_by_date = {w.date: w for w in weather}
    shared = [c for c in consumption if c.date in weather_by_date]
    if not shared:
        raise JoinError("consumption and weather series share no dates")
    records = tuple(
        DailyRecord(
            date=c.date,
            energy_kwh=c.energy_kwh,
            occupancy_rate=c.occupancy_rate,
            guests=c.guests,
            temp_mean=weather_by_date[c.date].temp_mean,
            temp_max=weather_by_date[c.date].temp_max,
            temp_min=weather_by_date[c.date].temp_min,
            humidity=weather_by_date[c.date].humidity,
            extras=weather_by_date[c.date].extras,
        )
        for c in sorted(shared, key=lambda r: r.date)
    )
    stats = JoinStats(
        dropped_consumption=len(consumption) - len(records),
        dropped_weather=len(weather) - len(records),
    )
    return Dataset(records=records, hotel_id=hotel_id), stats


def chronological_split(dataset: Dataset, train_fraction: float) -> tuple[Dataset, Dataset]:
    """Earlier train part, later test part; no shuffling, no overlap."""
    if not 0.0 < train_fraction < 1.0:
        raise ArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(dataset)
    if n < 2:
        raise ArgumentError("need at least 2 records to split")
    n_train = int(math.floor(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ArgumentError(
            f"train_fraction {train_fraction} leaves an empty partition for {n} records"
        )
    train = Dataset(records=dataset.records[:n_train], hotel_id=dataset.hotel_id)
    test = Dataset(records=dataset.records[n_train:], hotel_id=dataset.hotel_id)
    return train, test


@dataclass(frozen=True)
class SyntheticParams:
    """Coefficients of the synthetic generator.

    Daily energy is ``base_load_kwh + rdd_coeff * RDD + temp_coeff * temp_mean``
    plus Gaussian noise; mean temperature follows a yearly sinusoid inside
    ``temp_range`` and occupancy is uniform inside ``occupancy_range``.
    """

    base_load_kwh: float = 500.0
    rdd_coeff: float = 12.0
    temp_coeff: float = 3.0
    noise_std: float = 10.0
    base_temp_c: float = 24.0
    clip_negative_cdd: bool = True
    temp_range: tuple[float, float] = (20.0, 32.0)
    occupancy_range: tuple[float, float] = (0.3, 0.95)
    humidity_range: tuple[float, float] = (40.0, 90.0)
    start_date: Date = Date(2011, 1, 1)
    hotel_id: str = "synthetic"

    def __post_init__(self):
        if self.noise_std < 0:
            raise ArgumentError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.temp_range[0] > self.temp_range[1]:
            raise ArgumentError(f"invalid temp_range {self.temp_range}")
        if not (0.0 <= self.occupancy_range[0] <= self.occupancy_range[1] <= 1.0):
            raise ArgumentError(f"invalid occupancy_range {self.occupancy_range}")


MIN_SYNTHETIC_DAYS = 30


def generate_synthetic(days: int, params: SyntheticParams, seed: int) -> Dataset:
    """Deterministic synthetic hotel: fixed seed, bit-identical output."""
    if days < MIN_SYNTHETIC_DAYS:
        raise ArgumentError(f"days must be >= {MIN_SYNTHETIC_DAYS}, got {days}")
    rng = np.random.default_rng(seed)
    t_lo, t_hi = params.temp_range
    mid = (t_lo + t_hi) / 2.0
    amp = (t_hi - t_lo) / 2.0

    records = []
    for i in range(days):
        day = params.start_date + timedelta(days=i)
        season = math.sin(2.0 * math.pi * i / 365.25)
        jitter = float(rng.normal(0.0, amp * 0.15))
        temp_mean = float(np.clip(mid + amp * 0.85 * season + jitter, t_lo, t_hi))
        temp_max = temp_mean + float(rng.uniform(1.0, 4.0))
        temp_min = temp_mean - float(rng.uniform(1.0, 4.0))
        occupancy = float(rng.uniform(*params.occupancy_range))
        humidity = float(rng.uniform(*params.humidity_range))
        noise = float(rng.normal(0.0, params.noise_std))

        day_rdd = rdd(cdd(temp_mean, params.base_temp_c, params.clip_negative_cdd), occupancy)
        energy = params.base_load_kwh + params.rdd_coeff * day_rdd + params.temp_coeff * temp_mean + noise
        if energy <= 0:
            raise GenerationError(
                f"coefficients produced nonpositive energy {energy:.3f} kWh on {day}"
            )
        records.append(
            DailyRecord(
                date=day,
                energy_kwh=energy,
                occupancy_rate=occupancy,
                guests=None,
                temp_mean=temp_mean,
                temp_max=temp_max,
                temp_min=temp_min,
                humidity=humidity,
                extras={},
            )
        )
    return Dataset(records=tuple(records), hotel_id=params.hotel_id)


def split_synthetic(dataset: Dataset) -> tuple[tuple[ConsumptionRecord, ...], tuple[WeatherRecord, ...]]:
    """Project a joined dataset back onto the two source CSV formats."""
    consumption = tuple(
        ConsumptionRecord(r.date, r.energy_kwh, r.occupancy_rate, r.guests)
        for r in dataset.records
    )
    weather = tuple(
        WeatherRecord(r.date, r.temp_mean, r.temp_max, r.temp_min, r.humidity, r.extras)
        for r in dataset.records
    )
    return consumption, weather
