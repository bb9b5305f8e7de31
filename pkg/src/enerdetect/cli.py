"""Command-line surface: generate | train | detect | sweep | evaluate | compare.

Artifacts are CSV (plot-ready) and JSON (machine-ready); every file starts
with a metadata header carrying the tool version, seed, and a config hash so
seeded runs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from datetime import datetime

import numpy as np

from . import anomaly, crossfit, dataset, features, metrics, synth
from .baseline_knn import KnnConfig
from .dfnn import MlpConfig, MlpModel, fit as mlp_fit
from .errors import DivergenceError, EnerdetectError

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:12]


def _header(seed: int, payload: dict) -> str:
    return f"# tool=enerdetect version={VERSION} seed={seed} config={_config_hash(payload)}\n"


def _write_csv(path, header: str, columns: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def _write_json(path, header_meta: dict, body: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"meta": header_meta, **body}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_series(args) -> dataset.TimeSeries:
    schema = {}
    for name in ("power", "timestamp", "temperature", "occupancy", "working_day"):
        value = getattr(args, f"col_{name}", None)
        if value:
            schema[name] = value
    series, _missing = dataset.load_csv(args.data, schema=schema or None)
    series, _report = dataset.fill_missing(series, max_gap=args.max_gap)
    return series


def _parse_synth_config(path) -> tuple[synth.SynthConfig, synth.InjectionSpec]:
    """Key-value config: one `key = value` per line, # comments allowed."""
    values: dict[str, str] = {}
    if path:
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, raw = line.partition("=")
                values[key.strip()] = raw.strip()

    cfg_kwargs = {}
    spec_kwargs = {}
    simple = {
        "length_hours": int, "base_load": float, "occupancy_coeff": float,
        "thermal_coeff": float, "temp_mean": float, "temp_annual_amp": float,
        "temp_daily_amp": float, "noise_std": float,
    }
    for key, cast in simple.items():
        if key in values:
            cfg_kwargs[key] = cast(values[key])
    if "start" in values:
        cfg_kwargs["start"] = datetime.fromisoformat(values["start"])
    if "rate" in values:
        spec_kwargs["rate"] = float(values["rate"])
    if "magnitude_range" in values:
        lo, hi = values["magnitude_range"].split(",")
        spec_kwargs["magnitude_range"] = (float(lo), float(hi))
    mix = {k.removeprefix("mix_").replace("_", "-"): float(v)
           for k, v in values.items() if k.startswith("mix_")}
    if mix:
        spec_kwargs["mix"] = mix
    return synth.SynthConfig(**cfg_kwargs), synth.InjectionSpec(**spec_kwargs)


def cmd_generate(args) -> int:
    config, spec = _parse_synth_config(args.config)
    spec.seed = args.seed
    series, clean = synth.generate(config, seed=args.seed)
    result = synth.inject_anomalies(series, spec) if spec.rate > 0 else None
    out_series = result.series if result else series

    meta = {"config": asdict(config), "spec": asdict(spec)}
    dataset.write_csv(out_series, args.out)
    if args.labels:
        rows = []
        for i, r in enumerate(out_series.records):
            flag = int(result.labels[i]) if result else 0
            tag = result.types[i] if result else ""
            rows.append([r.timestamp.isoformat(), flag, tag])
        _write_csv(args.labels, _header(args.seed, meta),
                   ["timestamp", "is_anomaly", "type"], rows)
    if args.clean_out:
        rows = [[r.timestamp.isoformat(), repr(float(c))]
                for r, c in zip(out_series.records, clean)]
        _write_csv(args.clean_out, _header(args.seed, meta), ["timestamp", "clean_power"], rows)
    return EXIT_OK


def _mlp_config(args) -> MlpConfig:
    return MlpConfig(
        hidden_layers=[int(w) for w in args.layers.split(",")],
        dropout_p=args.dropout,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    series = _load_series(args)
    matrix, targets, _cases = features.build_features(series)
    scaler = features.fit_scaler(matrix)
    scaled = scaler.transform(matrix)
    config = _mlp_config(args)
    y_mean, y_std = float(targets.mean()), float(targets.std(ddof=1)) or 1.0
    model, report = mlp_fit(config, scaled.values, (targets - y_mean) / y_std)
    payload = json.loads(model.to_json())
    payload["scaler"] = {
        "mean": scaler.mean.tolist(), "std": scaler.std.tolist(),
        "apply_mask": scaler.apply_mask.tolist(), "columns": scaled.columns,
        "y_mean": y_mean, "y_std": y_std,
    }
    with open(args.model_out, "w") as fh:
        json.dump(payload, fh)
    print(f"trained: final MAE {report.final_loss:.6f} (scaled units), {report.steps} steps")
    return EXIT_OK


def _predict_with_saved_model(path, matrix, targets):
    """Score a series with a model saved by `train` (no retraining)."""
    with open(path) as fh:
        payload = json.load(fh)
    sc = payload.pop("scaler")
    model = MlpModel.from_json(json.dumps(payload))
    scaler = features.Scaler(
        mean=np.array(sc["mean"]), std=np.array(sc["std"]),
        apply_mask=np.array(sc["apply_mask"], dtype=bool), fitted=True,
    )
    if sc["columns"] != matrix.columns:
        raise EnerdetectError("model was trained on a different feature layout")
    scaled = scaler.transform(matrix)
    return model.predict_batch(scaled.values) * sc["y_std"] + sc["y_mean"]


def _detect(args):
    """Shared detect/sweep/compare core; returns per-model results."""
    series = _load_series(args)
    matrix, targets, cases = features.build_features(series)
    n = len(series)
    if getattr(args, "dump_features", None):
        _write_csv(args.dump_features, _header(args.seed, _run_meta(args)),
                   matrix.columns + ["power"],
                   [[repr(float(v)) for v in row] + [repr(float(t))]
                    for row, t in zip(matrix.values, targets)])
    if args.split:
        plan = crossfit.split_plan(n, args.split)
    else:
        plan = crossfit.plan_folds(n, args.folds, mode=args.fold_mode, seed=args.seed)

    model_names = ["dfnn", "knn"] if args.model == "both" else [args.model]
    results = {}
    for name in model_names:
        if name == "dfnn" and getattr(args, "model_in", None):
            predicted = _predict_with_saved_model(args.model_in, matrix, targets)
        elif name == "dfnn":
            predicted = crossfit.out_of_fold_predict(
                matrix, targets, plan, crossfit.mlp_trainer(_mlp_config(args)),
                scale_targets=True,
            )
        else:
            predicted = crossfit.out_of_fold_predict(
                matrix, targets, plan, crossfit.knn_trainer(KnnConfig(k=args.k)),
            )
        delta = anomaly.residuals(predicted, targets)
        grid = np.round(np.arange(args.grid_min, args.grid_max + 1e-9, args.grid_step), 10)
        timestamps = [r.timestamp for r in series.records]

        if args.global_scores:
            groups = [np.arange(n)]
        else:
            groups = [np.nonzero(cases == c)[0] for c in (1, 2, 3, 4)]
            groups = [g for g in groups if g.size >= 2]
        flags = np.zeros(n, dtype=bool)
        epsilon = np.zeros(n)
        thr_used = np.zeros(n)
        for g in groups:
            scores = anomaly.normalize_scores(delta[g])
            curve = anomaly.sweep_thresholds(scores, grid)
            thr, at_target = anomaly.select_threshold(curve, args.target_rate)
            report = anomaly.flag_anomalies(scores, thr, at_target)
            flags[g[report.flagged]] = True
            epsilon[g] = scores.epsilon
            thr_used[g] = thr

        global_scores = anomaly.normalize_scores(delta, timestamps=timestamps)
        curve = anomaly.sweep_thresholds(global_scores, grid)
        flag_idx = np.nonzero(flags)[0]
        order = np.argsort(-epsilon[flag_idx], kind="stable")
        report = anomaly.AnomalyReport(
            flagged=flag_idx[order],
            epsilon=epsilon[flag_idx[order]],
            threshold=float(thr_used[flag_idx[0]]) if flag_idx.size else float(grid[-1]),
        )
        score_view = anomaly.ScoreSeries(
            delta=delta, delta_mean=global_scores.delta_mean,
            delta_std=global_scores.delta_std, epsilon=epsilon, timestamps=timestamps,
        )
        report = anomaly.tag_taxonomy(report, series, score_view)
        results[name] = {
            "series": series, "predicted": predicted, "epsilon": epsilon,
            "flags": flags, "report": report, "curve": curve, "thr_used": thr_used,
        }
    return results


def _run_meta(args) -> dict:
    skip = {"func", "out", "data", "labels", "report", "curve_out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and not callable(v)}


def cmd_detect(args) -> int:
    results = _detect(args)
    name = args.model
    res = results[name]
    series, report = res["series"], res["report"]
    header = _header(args.seed, _run_meta(args))
    tag_of = dict(zip((int(i) for i in report.flagged), report.tags))
    rows = []
    for i, r in enumerate(series.records):
        rows.append([
            r.timestamp.isoformat(),
            repr(float(r.power)),
            repr(float(res["predicted"][i])),
            repr(float(res["epsilon"][i])),
            repr(float(res["thr_used"][i])),
            int(res["flags"][i]),
            tag_of.get(i, ""),
        ])
    _write_csv(args.out, header,
               ["timestamp", "power", "predicted", "epsilon", "threshold", "flagged", "tag"],
               rows)
    if args.json_out:
        body = {
            "model": name,
            "threshold": report.threshold,
            "anomalies": [
                {
                    "timestamp": series.records[int(i)].timestamp.isoformat(),
                    "epsilon": float(e),
                    "tag": t,
                }
                for i, e, t in zip(report.flagged, report.epsilon, report.tags)
            ],
        }
        _write_json(args.json_out, {"seed": args.seed, "config": _config_hash(_run_meta(args))}, body)
    print(f"flagged {int(res['flags'].sum())} of {len(series)} samples")
    return EXIT_OK


def cmd_sweep(args) -> int:
    results = _detect(args)
    curve = results[args.model]["curve"]
    rows = [[repr(float(t)), repr(float(r))]
            for t, r in zip(curve.thresholds, curve.anomaly_rates)]
    _write_csv(args.out, _header(args.seed, _run_meta(args)),
               ["threshold", "anomaly_rate"], rows)
    return EXIT_OK


def _read_labels(path) -> dict[str, int]:
    labels = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("timestamp"):
                continue
            parts = line.rstrip("\n").split(",")
            labels[parts[0]] = int(parts[1])
    return labels


def _read_report(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("timestamp"):
                continue
            rows.append(line.rstrip("\n").split(","))
    return rows


def cmd_evaluate(args) -> int:
    rows = _read_report(args.report)
    truth_map = _read_labels(args.labels)
    flags = np.array([int(r[5]) for r in rows], dtype=bool)
    truth = np.array([truth_map.get(r[0], 0) for r in rows], dtype=bool)
    cls = metrics.classification_metrics(flags, truth)
    predicted = np.array([float(r[2]) for r in rows])
    observed = np.array([float(r[1]) for r in rows])
    reg = metrics.regression_metrics(predicted, observed)
    body = {"classification": asdict(cls), "regression": asdict(reg), "f1": cls.f1}
    _write_json(args.out, {"seed": args.seed}, body)
    print(f"accuracy {cls.accuracy:.4f}  precision {cls.precision:.4f}  "
          f"recall {cls.recall:.4f}  f1 {cls.f1:.4f}  mape {reg.mape:.2f}%")
    return EXIT_OK


def cmd_compare(args) -> int:
    args.model = "both"
    results = _detect(args)
    truth_map = _read_labels(args.labels)
    rows = []
    for name in ("dfnn", "knn"):
        res = results[name]
        truth = np.array(
            [truth_map.get(r.timestamp.isoformat(), 0) for r in res["series"].records],
            dtype=bool,
        )
        cls = metrics.classification_metrics(res["flags"], truth)
        rows.append([name, f"{cls.accuracy:.6f}", f"{cls.f1:.6f}"])
    _write_csv(args.out, _header(args.seed, _run_meta(args)),
               ["model", "accuracy", "f1"], rows)
    for name, acc, f1 in rows:
        print(f"{name}\taccuracy={acc}\tf1={f1}")
    return EXIT_OK


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="input meter CSV")
    p.add_argument("--max-gap", type=int, default=3, help="longest gap to interpolate")
    for name in ("timestamp", "power", "temperature", "occupancy", "working-day"):
        p.add_argument(f"--col-{name}", dest=f"col_{name.replace('-', '_')}",
                       help=f"column name for {name}")


def _add_model_flags(p):
    p.add_argument("--model", choices=["dfnn", "knn"], default="dfnn")
    p.add_argument("--layers", default="128,128,128", help="hidden widths, comma separated")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--k", type=int, default=5, help="neighbor count for knn")


def _add_detect_flags(p):
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fold-mode", choices=["contiguous", "shuffle"], default="contiguous")
    p.add_argument("--split", type=float, help="single train fraction instead of folds")
    p.add_argument("--grid-min", type=float, default=2.5)
    p.add_argument("--grid-max", type=float, default=4.5)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--target-rate", type=float, default=anomaly.DEFAULT_TARGET_RATE)
    p.add_argument("--global-scores", action="store_true",
                   help="fit residual statistics globally instead of per case label")
    p.add_argument("--dump-features", help="also write the feature matrix to this CSV")
    p.add_argument("--model-in", help="saved dfnn model file; skips out-of-fold retraining")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enerdetect")
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled benchmark series")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--out", required=True)
    p.add_argument("--labels")
    p.add_argument("--clean-out", help="write the noise-free signal too")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a regressor on the whole series")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="out-of-fold scoring and anomaly flags")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_detect_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="anomaly-rate vs threshold curve")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_detect_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="score a detect report against labels")
    p.add_argument("--report", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="dfnn vs knn on identical folds")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_detect_flags(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (EnerdetectError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
