"""Degree-day features, feature matrix assembly, and min-max normalization.

Feature names understood by :func:`build_features`:

- ``temp_mean``, ``temp_max``, ``temp_min``: weather fields, deg C
- ``humidity``, ``guests``: optional fields, error if absent on any day
- ``ORD``: daily occupancy rate in [0, 1]
- ``CDD``: cooling degree days, ``max(temp_mean - base_temp_c, 0)`` per day
  (the clip is optional, see :class:`FeatureSpec`)
- ``RDD``: room degree days, ``CDD * ORD``
- anything else is looked up among the named extra weather columns
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    ArgumentError,
    DataError,
    MissingFeatureError,
    ShapeError,
    UndefinedCorrelationError,
)

if TYPE_CHECKING:
    from .dataset import DailyRecord, Dataset

#: conventional cooling base temperature for warm-climate comfort analyses
DEFAULT_BASE_TEMP_C = 24.0

_DIRECT_FIELDS = ("temp_mean", "temp_max", "temp_min")
_OPTIONAL_FIELDS = ("humidity", "guests")


def cdd(temp_mean: float, base_temp_c: float, clip: bool = True) -> float:
    """Daily cooling degree days: excess of mean temperature over the base.

    With ``clip`` the negative excess is zeroed (standard degree-day
    practice); without it the signed difference is returned.
    """
    if not (math.isfinite(temp_mean) and math.isfinite(base_temp_c)):
        raise ArgumentError("cdd requires finite temperatures")
    excess = temp_mean - base_temp_c
    if clip and excess < 0:
        return 0.0
    return excess


def rdd(cdd_value: float, occupancy_rate: float) -> float:
    """Room degree days: cooling degree days weighted by occupancy."""
    if not 0.0 <= occupancy_rate <= 1.0:
        raise ArgumentError(
            f"occupancy_rate must be in [0, 1], got {occupancy_rate}"
        )
    return cdd_value * occupancy_rate


@dataclass(frozen=True)
class FeatureSpec:
    """Which columns go into the model, in which order."""

    selected_features: tuple[str, ...]
    base_temp_c: float = DEFAULT_BASE_TEMP_C
    clip_negative_cdd: bool = True

    def __post_init__(self):
        if not self.selected_features:
            raise ArgumentError("selected_features must be nonempty")
        if len(set(self.selected_features)) != len(self.selected_features):
            raise ArgumentError("selected_features contains duplicates")
        if not math.isfinite(self.base_temp_c):
            raise ArgumentError("base_temp_c must be finite")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Model-ready rows: one per day, columns in FeatureSpec order."""

    dates: tuple[Date, ...]
    feature_names: tuple[str, ...]
    features: np.ndarray  # (n_days, n_features)
    target: np.ndarray  # (n_days,) energy in kWh

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        n = len(self.dates)
        if self.features.shape != (n, len(self.feature_names)):
            raise ShapeError(
                f"feature block is {self.features.shape}, expected "
                f"({n}, {len(self.feature_names)})"
            )
        if self.target.shape != (n,):
            raise ShapeError(f"target is {self.target.shape}, expected ({n},)")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.target)):
            raise DataError("feature matrix contains non-finite entries")

    def __len__(self) -> int:
        return len(self.dates)

    def rows(self, selector) -> "FeatureMatrix":
        """Row subset (slice or index array), keeping column structure."""
        dates = tuple(np.asarray(self.dates, dtype=object)[selector])
        return FeatureMatrix(
            dates=dates,
            feature_names=self.feature_names,
            features=self.features[selector],
            target=self.target[selector],
        )


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    """Per-column extrema (original units) for invertible [0, 1] scaling.

    Learned from training rows only; the target column is scaled too so
    predictions come back through :func:`denormalize_target`.
    """

    feature_names: tuple[str, ...]
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self):
        object.__setattr__(self, "feature_min", np.asarray(self.feature_min, dtype=float))
        object.__setattr__(self, "feature_max", np.asarray(self.feature_max, dtype=float))
        k = len(self.feature_names)
        if self.feature_min.shape != (k,) or self.feature_max.shape != (k,):
            raise ShapeError("normalization extrema do not match feature names")
        if np.any(self.feature_min > self.feature_max) or self.target_min > self.target_max:
            raise ArgumentError("normalization requires min <= max per column")


def _resolve_feature(record: "DailyRecord", name: str, spec: FeatureSpec) -> float:
    key = name.lower()
    if key == "ord":
        return record.occupancy_rate
    if key == "cdd":
        return cdd(record.temp_mean, spec.base_temp_c, spec.clip_negative_cdd)
    if key == "rdd":
        day_cdd = cdd(record.temp_mean, spec.base_temp_c, spec.clip_negative_cdd)
        return rdd(day_cdd, record.occupancy_rate)
    if name in _DIRECT_FIELDS:
        return getattr(record, name)
    if name in _OPTIONAL_FIELDS:
        value = getattr(record, name)
        if value is None:
            raise MissingFeatureError(f"feature '{name}' is missing on {record.date}")
        return float(value)
    if name in record.extras:
        return record.extras[name]
    raise MissingFeatureError(f"feature '{name}' is missing on {record.date}")


def build_features(dataset: "Dataset", spec: FeatureSpec) -> FeatureMatrix:
    """Assemble the feature matrix and kWh target for every day."""
    rows = [
        [_resolve_feature(record, name, spec) for name in spec.selected_features]
        for record in dataset.records
    ]
    return FeatureMatrix(
        dates=tuple(record.date for record in dataset.records),
        feature_names=spec.selected_features,
        features=np.asarray(rows, dtype=float),
        target=np.asarray([record.energy_kwh for record in dataset.records], dtype=float),
    )


def fit_normalization(matrix: FeatureMatrix) -> NormalizationParams:
    """Per-column min/max over the given (training) rows, target included."""
    if len(matrix) == 0:
        raise ArgumentError("cannot fit normalization on an empty matrix")
    return NormalizationParams(
        feature_names=matrix.feature_names,
        feature_min=matrix.features.min(axis=0),
        feature_max=matrix.features.max(axis=0),
        target_min=float(matrix.target.min()),
        target_max=float(matrix.target.max()),
    )


def _check_compatible(matrix: FeatureMatrix, params: NormalizationParams) -> None:
    if matrix.feature_names != params.feature_names:
        raise ShapeError(
            f"normalization fitted on columns {params.feature_names}, "
            f"matrix has {matrix.feature_names}"
        )


def _scale(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    safe = np.where(span == 0, 1.0, span)
    # constant columns map to 0 rather than erroring out
    return np.where(span == 0, 0.0, (values - lo) / safe)


def apply_normalization(matrix: FeatureMatrix, params: NormalizationParams) -> FeatureMatrix:
    """Affine map of every column into [0, 1] over the training range.

    Out-of-range values extend past [0, 1] instead of being clamped, so
    hotter-than-training days keep their information.
    """
    _check_compatible(matrix, params)
    return FeatureMatrix(
        dates=matrix.dates,
        feature_names=matrix.feature_names,
        features=_scale(matrix.features, params.feature_min, params.feature_max),
        target=_scale(matrix.target, params.target_min, params.target_max),
    )


def invert_normalization(matrix: FeatureMatrix, params: NormalizationParams) -> FeatureMatrix:
    """Inverse of :func:`apply_normalization`; constant columns recover their constant."""
    _check_compatible(matrix, params)
    return FeatureMatrix(
        dates=matrix.dates,
        feature_names=matrix.feature_names,
        features=matrix.features * (params.feature_max - params.feature_min)
        + params.feature_min,
        target=matrix.target * (params.target_max - params.target_min) + params.target_min,
    )


def denormalize_target(values, params: NormalizationParams) -> np.ndarray:
    """Map normalized predictions back to kWh."""
    values = np.asarray(values, dtype=float)
    return values * (params.target_max - params.target_min) + params.target_min


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient, clipped into [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ArgumentError("pearson needs at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(np.dot(xc, xc)))
    sy = math.sqrt(float(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant input")
    r = float(np.dot(xc, yc)) / (sx * sy)
    return max(-1.0, min(1.0, r))


def matrix_to_csv(matrix: FeatureMatrix) -> str:
    """Feature matrix export: date, one column per feature, energy_kwh."""
    lines = [",".join(("date", *matrix.feature_names, "energy_kwh"))]
    for i, day in enumerate(matrix.dates):
        cells = [day.isoformat()]
        cells += [repr(float(v)) for v in matrix.features[i]]
        cells.append(repr(float(matrix.target[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
