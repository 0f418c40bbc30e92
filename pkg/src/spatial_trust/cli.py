"""Command-line pipeline: gen, train, eval, scenegraph, ablate.

Every command reads an optional flat-key JSON config (--config); explicit
flags override config values. Outputs are deterministic for a fixed seed,
except the report timestamp, which --no-timestamp removes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evalkit, gbdt, geometry, scenegraph, synthgen
from .records import DatasetParseError, SplitSpec, parse_dataset, write_dataset

log = logging.getLogger("spatial_trust")

DEFAULT_TARGETS = (0.5, 0.6, 0.7, 0.8)
DEFAULT_TAUS = "0.0..1.0:0.05"

ABLATION_CONFIGS = (
    ("full", (0, 1, 2, 3)),
    ("wo_alpha_geo", (1, 2, 3)),
    ("wo_alpha_sep", (0, 2, 3)),
    ("wo_detection_quality", (0, 1, 3)),
    ("wo_token_confidence", (0, 1, 2)),
)


def parse_float_list(text: str) -> list[float]:
    """Parse '0.1,0.5,0.9' or a range spec 'start..stop:step' (inclusive)."""
    text = text.strip()
    if ".." in text:
        span, _, step_text = text.partition(":")
        start_text, _, stop_text = span.partition("..")
        if not step_text:
            raise ValueError(f"range spec needs a step: {text!r}")
        start, stop, step = float(start_text), float(stop_text), float(step_text)
        if step <= 0:
            raise ValueError("range step must be positive")
        values = []
        k = 0
        while True:
            value = start + k * step
            if value > stop + 1e-9:
                break
            values.append(round(value, 10))
            k += 1
        return values
    return [float(part) for part in text.split(",") if part.strip()]


def load_run_config(path: str | None) -> dict:
    if path is None:
        return {}
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, dict):
        raise ValueError("config file must hold a JSON object of flat keys")
    return obj


def _merged(config: dict, args: argparse.Namespace, flag_names: Sequence[str]) -> dict:
    """Config values overlaid with any explicitly provided CLI flags."""
    merged = dict(config)
    for name in flag_names:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


def _build_from_fields(cls, options: dict, **overrides):
    known = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in options.items() if k in known}
    kwargs.update(overrides)
    return cls(**kwargs)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _timestamp(args: argparse.Namespace) -> str | None:
    if getattr(args, "no_timestamp", False):
        return None
    return datetime.now(timezone.utc).isoformat()


def cmd_gen(args: argparse.Namespace) -> int:
    options = _merged(load_run_config(args.config), args, ["seed"])
    if args.n is not None:
        options["n_samples"] = args.n
    config = _build_from_fields(synthgen.SynthConfig, options)
    out = _out_dir(args)
    samples, truths = synthgen.generate(config)
    write_dataset(samples, out / "data.jsonl")
    synthgen.write_truth_sidecar(truths, out / "data.truth.jsonl")
    log.info("wrote %d samples to %s", len(samples), out / "data.jsonl")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    options = _merged(load_run_config(args.config), args, ["seed"])
    split_spec = _build_from_fields(SplitSpec, options)
    train_config = _build_from_fields(gbdt.TrainConfig, options)
    out = _out_dir(args)

    samples = parse_dataset(args.data)
    train_samples, val_samples, _ = split_dataset_or_all(samples, split_spec)
    geo_config = geometry_config_from(options)
    X_train = geometry.feature_matrix(train_samples, geo_config)
    y_train = [s.label for s in train_samples]
    eval_set = None
    if val_samples:
        eval_set = (geometry.feature_matrix(val_samples, geo_config), [s.label for s in val_samples])

    model = gbdt.train(X_train, y_train, train_config, eval_set=eval_set)
    gbdt.save_model(model, out / "model.json")
    _write_training_log(model, out / "training_log.csv")

    if val_samples and len({s.label for s in val_samples}) == 2:
        val_scores = gbdt.predict_proba_batch(model, geometry.feature_matrix(val_samples, geo_config))
        theta = evalkit.youden_threshold(val_scores, [s.label for s in val_samples])
        (out / "threshold.json").write_text(
            json.dumps({"threshold": theta, "source": "validation"}, indent=2) + "\n",
            encoding="utf-8",
        )
    if args.dump_features:
        geometry.write_feature_csv(samples, out / "features.csv", geo_config)
    log.info("model written to %s", out / "model.json")
    return 0


def split_dataset_or_all(samples, spec: SplitSpec):
    from .records import split_dataset

    if len(samples) < 3:
        return list(samples), [], []
    return split_dataset(samples, spec)


def geometry_config_from(options: dict) -> geometry.GeometryConfig:
    return _build_from_fields(geometry.GeometryConfig, options)


def _write_training_log(model: gbdt.GBDTModel, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "train_loss", "validation_loss"])
        for iteration, train_loss, val_loss in model.history:
            writer.writerow([iteration, train_loss, "" if val_loss is None else val_loss])


def _resolve_scores(args: argparse.Namespace, samples, options: dict) -> np.ndarray:
    """Model scores by default; --scores-csv substitutes an external column."""
    if args.scores_csv:
        by_id = {}
        with Path(args.scores_csv).open("r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                by_id[row["sample_id"]] = float(row["score"])
        missing = [s.sample_id for s in samples if s.sample_id not in by_id]
        if missing:
            raise ValueError(f"scores file lacks {len(missing)} sample ids (first: {missing[0]})")
        return np.array([by_id[s.sample_id] for s in samples])
    if not args.model:
        raise ValueError("either --model or --scores-csv is required")
    model = gbdt.load_model(args.model)
    X = geometry.feature_matrix(samples, geometry_config_from(options))
    if X.shape[0] and X.shape[1] != model.n_features:
        raise ValueError(
            f"feature/model mismatch: model expects {model.n_features} features, got {X.shape[1]}"
        )
    return gbdt.predict_proba_batch(model, X)


def _resolve_threshold(args: argparse.Namespace, scores, labels) -> float:
    if args.threshold is not None:
        return args.threshold
    if args.threshold_file:
        payload = json.loads(Path(args.threshold_file).read_text(encoding="utf-8"))
        return float(payload["threshold"])
    return evalkit.youden_threshold(scores, labels)


def cmd_eval(args: argparse.Namespace) -> int:
    options = _merged(load_run_config(args.config), args, [])
    out = _out_dir(args)
    samples = parse_dataset(args.data)
    labels = [s.label for s in samples]
    scores = _resolve_scores(args, samples, options)
    targets = parse_float_list(args.targets) if args.targets else list(DEFAULT_TARGETS)

    threshold = _resolve_threshold(args, scores, labels)
    report = evalkit.evaluate(scores, labels, targets, threshold=threshold)
    evalkit.write_report_json(report, out / "report.json", timestamp=_timestamp(args))
    evalkit.write_roc_csv(evalkit.roc_points(scores, labels), out / "roc.csv")
    evalkit.write_coverage_csv(report.coverage_curve, out / "coverage.csv")
    if args.dump_features:
        geometry.write_feature_csv(samples, out / "features.csv", geometry_config_from(options))
    log.info("AUROC %.4f on %d samples", report.auroc, report.n)
    return 0


def cmd_scenegraph(args: argparse.Namespace) -> int:
    options = _merged(load_run_config(args.config), args, [])
    out = _out_dir(args)
    samples = parse_dataset(args.data)
    if samples:
        model = gbdt.load_model(args.model)
        X = geometry.feature_matrix(samples, geometry_config_from(options))
        confidences = gbdt.predict_proba_batch(model, X)
    else:
        confidences = np.zeros(0)

    taus = parse_float_list(args.taus if args.taus else DEFAULT_TAUS)
    metrics = scenegraph.sweep_tau(samples, confidences, taus)
    scenegraph.write_metrics_csv(metrics, out / "graph_metrics.csv")
    graphs = scenegraph.build_graphs(samples, confidences, args.graph_tau)
    scenegraph.write_graphs_json(graphs, out / "graphs.json")

    if args.targets:
        # Target-accuracy mode: reuse the selective-prediction machinery to
        # find, per target, the retention threshold and the edge metrics there.
        targets = parse_float_list(args.targets)
        rows = []
        labels = [s.label for s in samples]
        for target in targets:
            point = evalkit.coverage_at_accuracy(confidences, labels, target) if samples else None
            if point is None or point.retained == 0:
                rows.append((target, "", 0.0, 0.0, 0.0, 0, len(samples)))
                continue
            ranked = sorted(confidences, reverse=True)
            cut = ranked[point.retained - 1]
            retained_metrics = scenegraph.sweep_tau(samples, confidences, [cut])[0]
            rows.append(
                (
                    target,
                    cut,
                    retained_metrics.precision,
                    retained_metrics.edge_coverage,
                    retained_metrics.f1,
                    retained_metrics.retained,
                    retained_metrics.total,
                )
            )
        with (out / "graph_targets.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target", "threshold", "precision", "coverage", "f1", "retained", "total"])
            writer.writerows(rows)
    return 0


def _ablation_rows(
    X_train: np.ndarray,
    y_train: list[bool],
    X_test: np.ndarray,
    y_test: list[bool],
    train_config: gbdt.TrainConfig,
    mode: str,
    target: float,
) -> list[tuple[str, float, float]]:
    rows = []
    for name, columns in ABLATION_CONFIGS:
        if mode == "drop" or name == "full":
            model = gbdt.train(X_train[:, columns], y_train, train_config)
            scores = gbdt.predict_proba_batch(model, X_test[:, columns])
        else:  # mask: hold the removed feature at its training-set mean
            masked_out = [i for i in range(X_train.shape[1]) if i not in columns]
            Xm_train = X_train.copy()
            Xm_test = X_test.copy()
            for column in masked_out:
                mean = X_train[:, column].mean()
                Xm_train[:, column] = mean
                Xm_test[:, column] = mean
            model = gbdt.train(Xm_train, y_train, train_config)
            scores = gbdt.predict_proba_batch(model, Xm_test)
        rows.append(
            (
                name,
                evalkit.auroc(scores, y_test),
                evalkit.coverage_at_accuracy(scores, y_test, target).coverage,
            )
        )
    # No-fusion baseline: the raw geometric alignment score alone.
    geo_scores = X_test[:, 0]
    rows.append(
        (
            "geometric_only",
            evalkit.auroc(geo_scores, y_test),
            evalkit.coverage_at_accuracy(geo_scores, y_test, target).coverage,
        )
    )
    return rows


def cmd_ablate(args: argparse.Namespace) -> int:
    options = _merged(load_run_config(args.config), args, ["seed"])
    train_config = _build_from_fields(gbdt.TrainConfig, options)
    geo_config = geometry_config_from(options)
    out = _out_dir(args)

    train_samples = parse_dataset(args.train_data)
    test_samples = parse_dataset(args.test_data)
    X_train = geometry.feature_matrix(train_samples, geo_config)
    X_test = geometry.feature_matrix(test_samples, geo_config)
    rows = _ablation_rows(
        X_train,
        [s.label for s in train_samples],
        X_test,
        [s.label for s in test_samples],
        train_config,
        args.ablate_mode,
        args.target,
    )
    with (out / "ablation.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["configuration", "auroc", "coverage_at_target", "target"])
        for name, score, coverage in rows:
            writer.writerow([name, score, coverage, args.target])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatial-trust",
        description="Confidence estimation pipeline for VLM spatial predictions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat-key JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset with truth sidecar")
    common(p_gen)
    p_gen.add_argument("--n", type=int, default=None, help="number of samples")
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train the fusion model")
    common(p_train)
    p_train.add_argument("--data", required=True, help="training JSONL")
    p_train.add_argument("--dump-features", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate scores against labels")
    common(p_eval)
    p_eval.add_argument("--data", required=True, help="evaluation JSONL")
    p_eval.add_argument("--model", help="model JSON file")
    p_eval.add_argument("--scores-csv", help="external sample_id,score column instead of a model")
    p_eval.add_argument("--targets", help="comma list of coverage targets")
    p_eval.add_argument("--threshold", type=float, default=None)
    p_eval.add_argument("--threshold-file", help="JSON file holding {'threshold': x}")
    p_eval.add_argument("--no-timestamp", action="store_true")
    p_eval.add_argument("--dump-features", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_graph = sub.add_parser("scenegraph", help="build graphs and sweep pruning thresholds")
    common(p_graph)
    p_graph.add_argument("--data", required=True)
    p_graph.add_argument("--model", required=True)
    p_graph.add_argument("--taus", help="comma list or start..stop:step range")
    p_graph.add_argument("--graph-tau", type=float, default=0.5, help="cutoff for exported graphs")
    p_graph.add_argument("--targets", help="also emit target-accuracy operating points")
    p_graph.set_defaults(func=cmd_scenegraph)

    p_ablate = sub.add_parser("ablate", help="feature ablation table")
    common(p_ablate)
    p_ablate.add_argument("--train-data", required=True)
    p_ablate.add_argument("--test-data", required=True)
    p_ablate.add_argument("--ablate-mode", choices=("mask", "drop"), default="drop")
    p_ablate.add_argument("--target", type=float, default=0.6, help="coverage target accuracy")
    p_ablate.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SPATIAL_TRUST_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetParseError as exc:
        print(f"dataset error:\n{exc}", file=sys.stderr)
        return 1
    except (ValueError, gbdt.ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
