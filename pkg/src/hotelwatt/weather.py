"""Daily weather history from an HTTP provider, with a CSV disk cache.

The provider is expected to answer
``GET {base_url}/{location}/{start}/{end}?unitGroup=metric&key=...&include=days``
with a JSON body holding a ``days`` array, one entry per calendar day
(the Visual Crossing timeline layout). Field names are translated through
``ProviderConfig.field_map`` so other providers with the same shape can
be plugged in; unknown provider fields are ignored.

Cached responses live under ``{cache_dir}/{key-hash}.csv`` in the normal
weather CSV format, so cached files are directly ingestible. Cache writes
go through a temp file and an atomic rename: concurrent fetches of the
same query can race but never leave a partial file behind.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from datetime import date as Date, timedelta
from pathlib import Path
from typing import Mapping

import requests

from .dataset import WeatherRecord, parse_weather_csv, weather_to_csv
from .errors import (
    ArgumentError,
    IncompleteDataError,
    MissingApiKeyError,
    ProviderError,
    TransportError,
)

API_KEY_ENV = "HOTELWATT_WEATHER_KEY"
DEFAULT_BASE_URL = "https://weather.visualcrossing.com/VisualCrossingWebServices/rest/services/timeline"

#: our field name -> provider field name
DEFAULT_FIELD_MAP: Mapping[str, str] = {
    "date": "datetime",
    "temp_mean": "temp",
    "temp_max": "tempmax",
    "temp_min": "tempmin",
    "humidity": "humidity",
}


@dataclass(frozen=True)
class WeatherQuery:
    """A place and an inclusive date range, metric units."""

    location: str
    start_date: Date
    end_date: Date
    units: str = "metric"

    def __post_init__(self):
        if not self.location.strip():
            raise ArgumentError("location must be nonempty")
        if self.start_date > self.end_date:
            raise ArgumentError(
                f"start_date {self.start_date} is after end_date {self.end_date}"
            )
        if self.units != "metric":
            raise ArgumentError(f"only metric units are supported, got {self.units!r}")

    def days(self) -> list[Date]:
        n = (self.end_date - self.start_date).days + 1
        return [self.start_date + timedelta(days=i) for i in range(n)]


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = DEFAULT_BASE_URL
    api_key: str | None = None
    timeout_s: float = 30.0
    cache_dir: Path = Path("~/.cache/hotelwatt")
    field_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ArgumentError(f"timeout_s must be > 0, got {self.timeout_s}")
        object.__setattr__(self, "cache_dir", Path(self.cache_dir).expanduser())


def cache_key(query: WeatherQuery) -> str:
    raw = "|".join((query.location, query.start_date.isoformat(), query.end_date.isoformat(), query.units))
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


def cache_path(config: ProviderConfig, query: WeatherQuery) -> Path:
    return config.cache_dir / f"{cache_key(query)}.csv"


def _write_cache(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _map_day(entry: dict, field_map: Mapping[str, str], query: WeatherQuery) -> WeatherRecord:
    def grab(name: str):
        return entry.get(field_map[name])

    raw_date = grab("date")
    try:
        day = Date.fromisoformat(str(raw_date))
    except (TypeError, ValueError):
        raise ProviderError(f"provider returned an unparseable day stamp: {raw_date!r}") from None
    values = {}
    for ours in ("temp_mean", "temp_max", "temp_min"):
        raw = grab(ours)
        if raw is None:
            raise ProviderError(f"provider response for {day} lacks {field_map[ours]!r}")
        values[ours] = float(raw)
    humidity = grab("humidity")
    return WeatherRecord(
        date=day,
        temp_mean=values["temp_mean"],
        temp_max=values["temp_max"],
        temp_min=values["temp_min"],
        humidity=None if humidity is None else float(humidity),
    )


def fetch_remote(query: WeatherQuery, config: ProviderConfig) -> tuple[WeatherRecord, ...]:
    """Daily records for the query range, served from cache when possible.

    A cache hit performs no network I/O. On a miss the full response is
    validated (every day in the range must be present) and persisted to
    the cache before anything is returned.
    """
    path = cache_path(config, query)
    if path.exists():
        return parse_weather_csv(path.read_text(encoding="utf-8"))

    if not config.api_key:
        raise MissingApiKeyError(
            f"no weather API key: set the {API_KEY_ENV} environment variable"
        )

    url = f"{config.base_url}/{query.location}/{query.start_date.isoformat()}/{query.end_date.isoformat()}"
    params = {"unitGroup": query.units, "key": config.api_key, "include": "days"}
    try:
        response = requests.get(url, params=params, timeout=config.timeout_s)
    except requests.Timeout as exc:
        raise TransportError(f"weather provider timed out after {config.timeout_s}s") from exc
    except requests.RequestException as exc:
        raise TransportError(f"could not reach weather provider: {exc}") from exc
    if not response.ok:
        raise ProviderError(f"weather provider returned HTTP {response.status_code}")
    try:
        payload = response.json()
    except ValueError as exc:
        raise ProviderError(f"weather provider returned invalid JSON: {exc}") from None
    days = payload.get("days") if isinstance(payload, dict) else None
    if not isinstance(days, list):
        raise ProviderError("weather provider response lacks a 'days' array")

    records = sorted(
        (_map_day(entry, config.field_map, query) for entry in days),
        key=lambda r: r.date,
    )
    got = {r.date for r in records}
    if len(got) != len(records):
        raise ProviderError("provider response repeats a day")
    missing = [d for d in query.days() if d not in got]
    if missing:
        listed = ", ".join(d.isoformat() for d in missing)
        raise IncompleteDataError(f"provider response is missing {len(missing)} day(s): {listed}")
    records = tuple(r for r in records if query.start_date <= r.date <= query.end_date)

    _write_cache(path, weather_to_csv(records))
    return records


def fetch_file(path) -> tuple[WeatherRecord, ...]:
    """Read a weather CSV from disk; same validation as the parser."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_weather_csv(text)
