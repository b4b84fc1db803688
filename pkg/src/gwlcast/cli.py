"""Command-line interface.

    gwlcast synth     write a synthetic well CSV
    gwlcast storms    detect storm events and export them as CSV
    gwlcast train     train a full-series or storm-only model
    gwlcast evaluate  rolling-origin forecasts of one model on the test period
    gwlcast compare   full vs storm model: metric table, summary and SVG plot
    gwlcast gradcheck BPTT vs finite differences for RNN and LSTM

Exit codes: 0 success, 1 validation error, 2 numerical failure.
Output directory precedence: --output-dir, then $GWLCAST_OUTPUT_DIR, then
the config's ``output_dir``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import backend
from .config import ConfigError, RunConfig, load_run_config
from .data import IngestError, Regime, TimeSeriesFrame, ingest_csv, segment_gaps, write_csv
from .evaluation import compare_models, mae, nse, rmse, rolling_forecast
from .models import InputWindow, SequenceModel, gradient_check
from .numerics import Prng
from .pipeline import Forecaster, prepare, fit_regime
from .plotting import plot_comparison
from .storms import detect_storms_all, write_events_csv
from .synth import HydroConfig, generate_frame
from .training import ModelSizes, TrainingDiverged, chronological_split

log = logging.getLogger("gwlcast")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
OUTPUT_ENV = "GWLCAST_OUTPUT_DIR"


class ValidationError(Exception):
    pass


def _output_dir(args, cfg: RunConfig) -> Path:
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {path}: {exc}") from None
    return path


def _config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    train = cfg.train
    if getattr(args, "seed", None) is not None and args.command != "synth":
        train = dataclasses.replace(train, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        train = dataclasses.replace(train, max_epochs=args.epochs)
    return cfg.replace(train=train)


def _load_frame(args, cfg: RunConfig) -> TimeSeriesFrame:
    path = getattr(args, "data", None) or cfg.data.csv
    if path:
        return ingest_csv(path)
    return generate_frame(cfg.data.synthetic or HydroConfig())


def _prepare(args, cfg: RunConfig, need_storms: bool = False):
    frame = _load_frame(args, cfg)
    if need_storms:
        # checked before normalizer fitting, which rejects rainless records too
        train, _, _ = chronological_split(frame, cfg.split)
        if not detect_storms_all(segment_gaps(train, cfg.data.max_fill), cfg.storms):
            raise ValidationError("no storm events detected in the training period")
    return prepare(frame, cfg.split, cfg.window.lookback, cfg.window.horizon,
                   cfg.data.max_fill, cfg.storms)


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config)
    hydro = cfg.data.synthetic or HydroConfig()
    if args.seed is not None:
        hydro = hydro.with_(seed=args.seed)
    if args.hours is not None:
        hydro = hydro.with_(n_hours=args.hours)
    frame = generate_frame(hydro)
    out = Path(args.out) if args.out else _output_dir(args, cfg) / f"{hydro.well_id}.csv"
    try:
        write_csv(frame, out)
    except OSError as exc:
        raise ValidationError(f"cannot write {out}: {exc}") from None
    print(f"wrote {len(frame)} rows to {out}")
    return EXIT_OK


def cmd_storms(args) -> int:
    cfg = _config(args)
    frame = _load_frame(args, cfg)
    segments = segment_gaps(frame, cfg.data.max_fill)
    events = detect_storms_all(segments, cfg.storms)
    out = Path(args.out) if args.out else _output_dir(args, cfg) / "storms.csv"
    write_events_csv(segments, events, out)
    print(f"{len(events)} storm events in {len(segments)} segment(s); wrote {out}")
    return EXIT_OK


def _train_job(prep, regime: Regime, cfg: RunConfig, out_dir: Path):
    sizes = ModelSizes(cfg.model.hidden_size, cfg.model.n_layers)
    forecaster, report = fit_regime(prep, regime, cfg.model.kind, sizes, cfg.train)
    model_path = out_dir / f"model_{regime.value}.json"
    forecaster.save(model_path)
    report.to_csv(out_dir / f"history_{regime.value}.csv")
    return regime, model_path, report


def cmd_train(args) -> int:
    cfg = _config(args)
    out_dir = _output_dir(args, cfg)
    regimes = [Regime.FULL, Regime.STORM] if args.regime == "both" else [Regime(args.regime)]
    prep = _prepare(args, cfg, need_storms=Regime.STORM in regimes)
    if args.jobs > 1 and len(regimes) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_train_job, prep, r, cfg, out_dir) for r in regimes]
            results = [f.result() for f in futures]
    else:
        results = [_train_job(prep, r, cfg, out_dir) for r in regimes]
    for regime, path, report in results:
        print(
            f"{regime.value}: {len(report.val_losses)} epochs, best epoch {report.best_epoch} "
            f"(val loss {report.best_val_loss:.6g}){', stopped early' if report.stopped_early else ''}; "
            f"wrote {path}"
        )
    return EXIT_OK


def _load_forecaster(path) -> Forecaster:
    try:
        return Forecaster.load(path)
    except (OSError, KeyError, ValueError) as exc:
        raise ValidationError(f"cannot load model {path}: {exc}") from None


def _check_model(f: Forecaster, prep) -> None:
    if f.normalizer != prep.normalizer or (f.lookback, f.horizon) != (prep.lookback, prep.horizon):
        raise ValidationError(
            "model was trained with a different normalizer or window; "
            "use the same data and config it was trained with"
        )


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out_dir = _output_dir(args, cfg)
    prep = _prepare(args, cfg)
    f = _load_forecaster(args.model)
    _check_model(f, prep)
    result = rolling_forecast(f, prep.test_segments, f.lookback, f.horizon, f.normalizer)
    out = out_dir / f"forecast_{f.provenance.value}.csv"
    result.to_csv(out)
    if len(result):
        print(f"{len(result)} origins; RMSE {rmse(result.pred, result.obs):.4f} m, "
              f"MAE {mae(result.pred, result.obs):.4f} m, NSE {nse(result.pred, result.obs):.4f}")
    else:
        print("no test origins")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    out_dir = _output_dir(args, cfg)
    prep = _prepare(args, cfg)
    full, storm = _load_forecaster(args.full), _load_forecaster(args.storm)
    if not full.compatible(storm):
        raise ValidationError("models are incompatible (normalizer, lookback or horizon differ)")
    _check_model(full, prep)
    results = tuple(
        rolling_forecast(f, prep.test_segments, f.lookback, f.horizon, f.normalizer)
        for f in (full, storm)
    )
    report = compare_models(full, storm, prep.test_segments, prep.storm_params, results)
    report.to_csv(out_dir / "comparison.csv")
    summary = report.summary()
    (out_dir / "comparison.txt").write_text(summary, encoding="utf-8")
    step = cfg.compare.plot_step or full.horizon
    if not 1 <= step <= full.horizon:
        raise ValidationError(f"compare.plot_step must lie in [1, {full.horizon}]")
    plot_comparison(out_dir / "comparison.svg", results[0], results[1],
                    prep.events("test"), prep.test_segments, step, cfg.compare.plot_hours,
                    title=f"well {prep.well_id}")
    print(summary, end="")
    print(f"wrote {out_dir / 'comparison.csv'}, comparison.txt, comparison.svg")
    return EXIT_OK


def _gradcheck_instance(kind: str, hidden: int, seed: int, lookback: int, horizon: int):
    prng = Prng(seed)
    model = SequenceModel.initialize(kind, prng, hidden)
    p = np.array([prng.uniform(-0.5, 0.5) for _ in range(model.n_params)])
    model = model.with_params(model.params + p)
    past = np.array([prng.random() for _ in range(lookback * 3)]).reshape(lookback, 3)
    future = np.array([prng.random() for _ in range(horizon * 2)]).reshape(horizon, 2)
    target = np.array([prng.random() for _ in range(horizon)])
    return model, InputWindow(past, future), target


def cmd_gradcheck(args) -> int:
    worst = 0.0
    for kind in ("rnn", "lstm"):
        errs = []
        for k in range(args.instances):
            model, window, target = _gradcheck_instance(
                kind, args.hidden, args.seed + k, args.lookback, args.horizon
            )
            errs.append(gradient_check(model, window, target, args.eps, mutate=args.mutate))
        e = max(errs)
        worst = max(worst, e)
        print(f"{kind}: {args.instances} instances, max_rel_error {e:.3e}")
    ok = worst < 1e-4
    print(f"{'PASS' if ok else 'FAIL'} max_rel_error {worst:.3e} (threshold 1e-04, backend {backend.NAME})")
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwlcast", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--output-dir", help="overrides config output_dir and $" + OUTPUT_ENV)
        if data:
            p.add_argument("--data", help="well CSV (overrides config data section)")

    p = sub.add_parser("synth", help="write a synthetic well CSV")
    common(p, data=False)
    p.add_argument("--seed", type=int)
    p.add_argument("--hours", type=int)
    p.add_argument("--out", help="CSV path (default: <output-dir>/<well_id>.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("storms", help="detect storm events")
    common(p)
    p.add_argument("--out", help="events CSV path (default: <output-dir>/storms.csv)")
    p.set_defaults(func=cmd_storms)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--regime", choices=("full", "storm", "both"), default="full")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--epochs", type=int, help="max epochs")
    p.add_argument("--jobs", type=int, default=1, help="parallel jobs for --regime both")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="rolling-origin forecasts on the test period")
    common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare full- and storm-trained models")
    common(p)
    p.add_argument("--full", required=True, help="full-regime model file")
    p.add_argument("--storm", required=True, help="storm-regime model file")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="check BPTT against finite differences")
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--lookback", type=int, default=6)
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--mutate", action="store_true", help="corrupt one gradient (harness self-test)")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ConfigError, IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
