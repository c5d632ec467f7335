"""Daily hotel electricity forecasting from occupancy and weather series."""

from .dataset import (
    ConsumptionRecord,
    DailyRecord,
    Dataset,
    JoinStats,
    SyntheticParams,
    WeatherRecord,
    chronological_split,
    generate_synthetic,
    join_on_date,
    parse_consumption_csv,
    parse_weather_csv,
)
from .evaluation import EvalReport, SearchSpace, TrialRecord, evaluate, mape, rmse, search
from .features import (
    FeatureMatrix,
    FeatureSpec,
    NormalizationParams,
    apply_normalization,
    build_features,
    cdd,
    denormalize_target,
    fit_normalization,
    invert_normalization,
    pearson,
    rdd,
)
from .network import (
    LayerParams,
    ModelBundle,
    NetworkParams,
    TrainConfig,
    TrainResult,
    forward,
    forward_batch,
    gradients,
    init_params,
    layer_forward,
    load_model,
    mse,
    predict,
    relu,
    save_model,
    train,
)
from .weather import ProviderConfig, WeatherQuery, fetch_file, fetch_remote

__version__ = "0.1.0"
