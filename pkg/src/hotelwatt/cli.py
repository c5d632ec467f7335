"""Command line entry point.

Subcommands: fetch-weather, synth, features, train, search, predict,
evaluate. Every flag can also come from a JSON config file (--config);
explicit flags win on conflict. Identical inputs, flags, and seed produce
byte-identical output files.

Exit codes: 0 success, 1 usage/argument error, 2 data/parse error,
3 training/search failure, 4 provider/transport error.
"""

from __future__ import annotations

import json
import os
from dataclasses import replace
from datetime import date as Date
from pathlib import Path

import click

from . import dataset as ds_mod
from . import evaluation as eval_mod
from . import network as net_mod
from .errors import ArgumentError, DataError, ProviderError, TrainingError
from .features import (
    FeatureSpec,
    apply_normalization,
    build_features,
    fit_normalization,
    matrix_to_csv,
    pearson,
)
from .errors import UndefinedCorrelationError
from .plotting import save_forecast_chart
from .weather import API_KEY_ENV, DEFAULT_BASE_URL, ProviderConfig, WeatherQuery, fetch_remote

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3
EXIT_PROVIDER = 4


def _apply_config(ctx, param, value):
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"config file {value} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise click.UsageError(f"config file {value} must hold a JSON object")
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return value


def config_option(fn):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_apply_config,
        is_eager=True,
        expose_value=False,
        help="JSON object with defaults for this command's flags "
        "(underscored keys, e.g. {\"learning_rate\": 0.05}); explicit flags win.",
    )(fn)


def _date_flag(ctx, param, value):
    if value is None or isinstance(value, Date):
        return value
    try:
        return Date.fromisoformat(value)
    except ValueError:
        raise click.BadParameter(f"expected YYYY-MM-DD, got {value!r}")


def _int_list(ctx, param, value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        items = tuple(int(v) for v in value)
    else:
        try:
            items = tuple(int(part) for part in str(value).replace(" ", "").split(",") if part)
        except ValueError:
            raise click.BadParameter(f"expected comma-separated integers, got {value!r}")
    if not items:
        raise click.BadParameter("expected at least one integer")
    return items


def _str_list(ctx, param, value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        items = tuple(str(v) for v in value)
    else:
        items = tuple(part.strip() for part in str(value).split(",") if part.strip())
    if not items:
        raise click.BadParameter("expected at least one name")
    return items


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _read_joined(consumption_path, weather_path, hotel_id) -> tuple[ds_mod.Dataset, ds_mod.JoinStats]:
    consumption = ds_mod.parse_consumption_csv(Path(consumption_path).read_text(encoding="utf-8"))
    weather = ds_mod.parse_weather_csv(Path(weather_path).read_text(encoding="utf-8"))
    return ds_mod.join_on_date(consumption, weather, hotel_id=hotel_id)


def data_options(fn):
    fn = click.option("--consumption", "consumption_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="Consumption CSV (date,energy_kwh,occupancy_rate[,guests]).")(fn)
    fn = click.option("--weather", "weather_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="Weather CSV (date,temp_mean,temp_max,temp_min[,humidity,...]).")(fn)
    fn = click.option("--hotel-id", default="hotel", show_default=True,
                      help="Label carried through reports.")(fn)
    return fn


def feature_options(fn):
    fn = click.option("--features", callback=_str_list, default="RDD,temp_mean",
                      show_default=True, help="Comma-separated model inputs "
                      "(temp_mean, temp_max, temp_min, humidity, guests, ORD, CDD, RDD, extras).")(fn)
    fn = click.option("--base-temp", type=float, default=24.0, show_default=True,
                      help="Degree-day base temperature in deg C.")(fn)
    fn = click.option("--clip-cdd/--no-clip-cdd", "clip_cdd", default=True, show_default=True,
                      help="Clip negative degree-day values at zero.")(fn)
    return fn


def train_options(fn):
    fn = click.option("--hidden", callback=_int_list, default="32,16,8", show_default=True,
                      help="Three hidden layer widths, e.g. 32,16,8.")(fn)
    fn = click.option("--learning-rate", type=float, default=0.01, show_default=True)(fn)
    fn = click.option("--epochs", type=int, default=2000, show_default=True)(fn)
    fn = click.option("--batch-size", type=int, default=32, show_default=True)(fn)
    fn = click.option("--momentum", type=float, default=0.9, show_default=True)(fn)
    fn = click.option("--init", "init_scheme", type=click.Choice(net_mod.INIT_SCHEMES),
                      default="he", show_default=True)(fn)
    fn = click.option("--patience", type=int, default=50, show_default=True,
                      help="Early-stopping patience in epochs; 0 disables early stopping.")(fn)
    fn = click.option("--shuffle/--no-shuffle", "shuffle", default=True, show_default=True,
                      help="Reshuffle batches every epoch (seed-driven).")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--train-fraction", type=float, default=0.9, show_default=True,
                      help="Leading fraction of days used for training.")(fn)
    return fn


def _spec_from_flags(features, base_temp, clip_cdd) -> FeatureSpec:
    return FeatureSpec(selected_features=features, base_temp_c=base_temp, clip_negative_cdd=clip_cdd)


def _config_from_flags(learning_rate, epochs, batch_size, momentum, init_scheme,
                       patience, shuffle, seed) -> net_mod.TrainConfig:
    return net_mod.TrainConfig(
        learning_rate=learning_rate,
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        init_scheme=init_scheme,
        momentum=momentum,
        early_stop_patience=None if patience == 0 else patience,
        shuffle_each_epoch=shuffle,
    )


def _widths_brackets(widths) -> str:
    return "[" + "; ".join(str(w) for w in widths) + "]"


def _correlation_lines(correlations) -> list[str]:
    width = max(len("feature"), *(len(name) for name in correlations))
    lines = [f"{'feature':<{width}}  r_vs_energy"]
    for name, r in correlations.items():
        lines.append(f"{name:<{width}}  " + ("n/a" if r is None else f"{r:.6f}"))
    return lines


@click.group()
@click.version_option("0.1.0", prog_name="hotelwatt")
def cli():
    """Forecast daily hotel electricity consumption from occupancy and weather."""


@cli.command("fetch-weather")
@config_option
@click.option("--location", required=True, help="Place name or 'lat,lon'.")
@click.option("--start", callback=_date_flag, required=True, help="First day, YYYY-MM-DD.")
@click.option("--end", callback=_date_flag, required=True, help="Last day, YYYY-MM-DD.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, writable=True))
@click.option("--base-url", default=DEFAULT_BASE_URL, help="Weather history endpoint.")
@click.option("--cache-dir", default="~/.cache/hotelwatt", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--timeout", type=float, default=30.0, show_default=True)
def cmd_fetch_weather(location, start, end, out_path, base_url, cache_dir, timeout):
    """Download (or reuse cached) daily weather history as a weather CSV."""
    query = WeatherQuery(location=location, start_date=start, end_date=end)
    provider = ProviderConfig(
        base_url=base_url,
        api_key=os.environ.get(API_KEY_ENV),
        timeout_s=timeout,
        cache_dir=Path(cache_dir),
    )
    records = fetch_remote(query, provider)
    _write_text(out_path, ds_mod.weather_to_csv(records))
    click.echo(f"{len(records)} day(s) written to {out_path}")


@cli.command("synth")
@config_option
@click.option("--days", type=int, default=365, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--base-load", type=float, default=500.0, show_default=True,
              help="Constant daily load in kWh.")
@click.option("--rdd-coeff", type=float, default=12.0, show_default=True,
              help="kWh per room degree day.")
@click.option("--temp-coeff", type=float, default=3.0, show_default=True,
              help="kWh per deg C of mean temperature.")
@click.option("--noise-std", type=float, default=10.0, show_default=True,
              help="Gaussian noise standard deviation in kWh.")
@click.option("--base-temp", type=float, default=24.0, show_default=True)
@click.option("--temp-low", type=float, default=20.0, show_default=True)
@click.option("--temp-high", type=float, default=32.0, show_default=True)
@click.option("--occupancy-low", type=float, default=0.3, show_default=True)
@click.option("--occupancy-high", type=float, default=0.95, show_default=True)
@click.option("--start-date", callback=_date_flag, default="2011-01-01", show_default=True)
@click.option("--hotel-id", default="synthetic", show_default=True)
def cmd_synth(days, seed, out_dir, base_load, rdd_coeff, temp_coeff, noise_std, base_temp,
              temp_low, temp_high, occupancy_low, occupancy_high, start_date, hotel_id):
    """Generate a deterministic synthetic consumption + weather CSV pair."""
    params = ds_mod.SyntheticParams(
        base_load_kwh=base_load,
        rdd_coeff=rdd_coeff,
        temp_coeff=temp_coeff,
        noise_std=noise_std,
        base_temp_c=base_temp,
        temp_range=(temp_low, temp_high),
        occupancy_range=(occupancy_low, occupancy_high),
        start_date=start_date,
        hotel_id=hotel_id,
    )
    generated = ds_mod.generate_synthetic(days, params, seed)
    consumption, weather = ds_mod.split_synthetic(generated)
    out = Path(out_dir)
    _write_text(out / "consumption.csv", ds_mod.consumption_to_csv(consumption))
    _write_text(out / "weather.csv", ds_mod.weather_to_csv(weather))
    click.echo(f"{days} day(s) written to {out / 'consumption.csv'} and {out / 'weather.csv'}")


@cli.command("features")
@config_option
@data_options
@feature_options
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Feature matrix CSV destination.")
@click.option("--joined-out", type=click.Path(dir_okay=False), default=None,
              help="Optionally export the joined daily rows (column union).")
def cmd_features(consumption_path, weather_path, hotel_id, features, base_temp, clip_cdd,
                 out_path, joined_out):
    """Export the feature matrix and print per-feature correlations with energy."""
    spec = _spec_from_flags(features, base_temp, clip_cdd)
    joined, stats = _read_joined(consumption_path, weather_path, hotel_id)
    matrix = build_features(joined, spec)
    _write_text(out_path, matrix_to_csv(matrix))
    if joined_out:
        _write_text(joined_out, ds_mod.dataset_to_csv(joined))

    correlations = {}
    for j, name in enumerate(matrix.feature_names):
        try:
            correlations[name] = pearson(matrix.features[:, j], matrix.target)
        except UndefinedCorrelationError:
            correlations[name] = None

    click.echo(
        f"joined {len(joined)} day(s); dropped {stats.dropped_consumption} consumption "
        f"and {stats.dropped_weather} weather row(s)"
    )
    for line in _correlation_lines(correlations):
        click.echo(line)
    click.echo(f"feature matrix written to {out_path}")


@cli.command("train")
@config_option
@data_options
@feature_options
@train_options
@click.option("--model-out", required=True, type=click.Path(dir_okay=False))
@click.option("--loss-out", type=click.Path(dir_okay=False), default=None,
              help="Loss history CSV (default: <model-out stem>_loss.csv).")
def cmd_train(consumption_path, weather_path, hotel_id, features, base_temp, clip_cdd,
              hidden, learning_rate, epochs, batch_size, momentum, init_scheme, patience,
              shuffle, seed, train_fraction, model_out, loss_out):
    """Train a model on the leading split and report fit/forecast accuracy."""
    if len(hidden) != 3:
        raise click.BadParameter("--hidden needs exactly three widths, e.g. 32,16,8")
    spec = _spec_from_flags(features, base_temp, clip_cdd)
    config = _config_from_flags(learning_rate, epochs, batch_size, momentum, init_scheme,
                                patience, shuffle, seed)
    joined, _ = _read_joined(consumption_path, weather_path, hotel_id)
    train_ds, test_ds = ds_mod.chronological_split(joined, train_fraction)

    fm_train = build_features(train_ds, spec)
    fm_test = build_features(test_ds, spec)
    norm = fit_normalization(fm_train)
    fm_train_scaled = apply_normalization(fm_train, norm)

    initial = net_mod.init_params(len(spec.selected_features), hidden, config.init_scheme, config.seed)
    result = net_mod.train(initial, fm_train_scaled, config)

    pred_train = net_mod.predict(result.params, fm_train_scaled, norm)
    pred_test = net_mod.predict(result.params, apply_normalization(fm_test, norm), norm)
    fit_rmse = eval_mod.rmse(pred_train, fm_train.target)
    holdout_mape = eval_mod.mape(pred_test, fm_test.target)

    _write_text(model_out, net_mod.save_model(result.params, norm, spec, config))
    if loss_out is None:
        loss_out = str(Path(model_out).with_name(Path(model_out).stem + "_loss.csv"))
    loss_lines = ["epoch,train_mse"]
    loss_lines += [f"{i},{repr(v)}" for i, v in enumerate(result.loss_history, start=1)]
    _write_text(loss_out, "\n".join(loss_lines) + "\n")

    click.echo(f"trained {_widths_brackets(hidden)} for {result.epochs_run} epoch(s)")
    click.echo(f"fit RMSE (train): {fit_rmse:.4f} kWh")
    click.echo(f"forecast MAPE (holdout): {holdout_mape:.4f}%")
    click.echo(f"model written to {model_out}")


@cli.command("search")
@config_option
@data_options
@feature_options
@train_options
@click.option("--widths1", callback=_int_list, default="8,16,32,64,128,256", show_default=True,
              help="Candidate widths for the first hidden layer.")
@click.option("--widths2", callback=_int_list, default="8,16,32,64,128,256", show_default=True)
@click.option("--widths3", callback=_int_list, default="8,16,32,64,128,256", show_default=True)
@click.option("--trials", type=int, default=eval_mod.DEFAULT_SEARCH_TRIALS, show_default=True,
              help="Random combinations to try (ignored with --exhaustive).")
@click.option("--exhaustive", is_flag=True, default=False,
              help="Try every width combination instead of sampling.")
@click.option("--jobs", type=int, default=None,
              help="Parallel trial workers (default: machine parallelism).")
@click.option("--trial-log", required=True, type=click.Path(dir_okay=False))
@click.option("--model-out", required=True, type=click.Path(dir_okay=False))
def cmd_search(consumption_path, weather_path, hotel_id, features, base_temp, clip_cdd,
               hidden, learning_rate, epochs, batch_size, momentum, init_scheme, patience,
               shuffle, seed, train_fraction, widths1, widths2, widths3, trials, exhaustive,
               jobs, trial_log, model_out):
    """Search hidden-layer widths; write the ranked trial log and best model."""
    spec = _spec_from_flags(features, base_temp, clip_cdd)
    base_config = _config_from_flags(learning_rate, epochs, batch_size, momentum, init_scheme,
                                     patience, shuffle, seed)
    space = eval_mod.SearchSpace(
        candidates=(widths1, widths2, widths3),
        base_config=base_config,
        trials=None if exhaustive else trials,
        seed=seed,
    )
    joined, _ = _read_joined(consumption_path, weather_path, hotel_id)
    train_ds, _test_ds = ds_mod.chronological_split(joined, train_fraction)

    fm_train = build_features(train_ds, spec)
    norm = fit_normalization(fm_train)
    fm_scaled = apply_normalization(fm_train, norm)

    if jobs is None:
        jobs = os.cpu_count() or 1
    result = eval_mod.search(space, fm_scaled, jobs=jobs)

    best_config = replace(base_config, seed=result.trials[0].seed)
    _write_text(trial_log, eval_mod.trials_to_csv(result.trials))
    _write_text(model_out, net_mod.save_model(result.best.params, norm, spec, best_config))

    click.echo(f"ran {len(result.trials)} trial(s)")
    click.echo(f"best widths: {_widths_brackets(result.best_widths)} "
               f"(validation MSE {result.trials[0].val_mse:.6g})")
    click.echo(f"trial log written to {trial_log}")
    click.echo(f"model written to {model_out}")


@cli.command("predict")
@config_option
@data_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_predict(consumption_path, weather_path, hotel_id, model_path, out_path):
    """Predict daily kWh for every joined day in the given files."""
    bundle = net_mod.load_model(Path(model_path).read_text(encoding="utf-8"))
    joined, _ = _read_joined(consumption_path, weather_path, hotel_id)
    matrix = build_features(joined, bundle.feature_spec)
    scaled = apply_normalization(matrix, bundle.normalization)
    predictions = net_mod.predict(bundle.network, scaled, bundle.normalization)

    lines = ["date,predicted_kwh"]
    lines += [f"{d.isoformat()},{repr(float(p))}" for d, p in zip(matrix.dates, predictions)]
    _write_text(out_path, "\n".join(lines) + "\n")
    click.echo(f"{len(predictions)} prediction(s) written to {out_path}")


@cli.command("evaluate")
@config_option
@data_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-fraction", type=float, default=0.9, show_default=True,
              help="Split used when the model was trained.")
@click.option("--report-out", required=True, type=click.Path(dir_okay=False))
@click.option("--pred-out", required=True, type=click.Path(dir_okay=False),
              help="CSV of (date, actual, predicted) over the test split.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), default=None,
              help="Also render the actual-vs-predicted chart to this SVG file.")
def cmd_evaluate(consumption_path, weather_path, hotel_id, model_path, train_fraction,
                 report_out, pred_out, svg_path):
    """Score a saved model and export the report, per-day CSV, and chart."""
    bundle = net_mod.load_model(Path(model_path).read_text(encoding="utf-8"))
    joined, _ = _read_joined(consumption_path, weather_path, hotel_id)
    train_ds, test_ds = ds_mod.chronological_split(joined, train_fraction)
    report = eval_mod.evaluate(bundle, train_ds, test_ds)

    fm_test = build_features(test_ds, bundle.feature_spec)
    pred_test = net_mod.predict(
        bundle.network, apply_normalization(fm_test, bundle.normalization), bundle.normalization
    )

    _write_text(report_out, json.dumps(eval_mod.report_to_dict(report), indent=2, sort_keys=True) + "\n")
    lines = ["date,actual_kwh,predicted_kwh"]
    lines += [
        f"{d.isoformat()},{repr(float(a))},{repr(float(p))}"
        for d, a, p in zip(fm_test.dates, fm_test.target, pred_test)
    ]
    _write_text(pred_out, "\n".join(lines) + "\n")
    if svg_path:
        save_forecast_chart(
            fm_test.dates, fm_test.target, pred_test, svg_path,
            title=f"{report.hotel_id}: actual vs predicted",
        )

    click.echo(f"fit RMSE (train): {report.fit_rmse_kwh:.4f} kWh")
    click.echo(f"forecast MAPE (holdout): {report.forecast_mape_pct:.4f}%")
    for line in _correlation_lines(report.correlations):
        click.echo(line)
    click.echo(f"report written to {report_out}")


def main(argv=None) -> int:
    """Run the CLI and map errors onto the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except ArgumentError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except TrainingError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_TRAINING
    except ProviderError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PROVIDER
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
