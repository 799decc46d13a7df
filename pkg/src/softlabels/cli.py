"""Command-line entry point tying the library together.

Exit codes: 0 success, 2 usage errors (unknown flags, bad values), 3 a
required input file is missing, 4 a config file violates its schema, 5 the
inputs are readable but invalid. Every subcommand writes byte-identical
artifacts given identical inputs, flags, and seeds.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import datafiles, ingest, metrics, simulate
from .labels import (
    LabelSpace,
    LabelVariety,
    RedistributionMode,
    RedistributionPolicy,
)
from .training import (
    AttackSpec,
    ExperimentConfig,
    LabelRegime,
    MicroModel,
    RegimeMode,
    TrainSchedule,
    forward,
    fgsm_attack,
    run_experiment,
    train,
)

EXIT_MISSING_INPUT = 3
EXIT_BAD_CONFIG = 4
EXIT_BAD_DATA = 5

GAMMA_GRID = (0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4)


def _fail(code: int, message: str) -> None:
    click.echo(json.dumps({"error": message, "exit_code": code}), err=True)
    sys.exit(code)


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        _fail(EXIT_MISSING_INPUT, f"input file not found: {path}")
    return p


def _space_from_options(classes: str | None, k: int | None) -> LabelSpace:
    if classes:
        names = tuple(name.strip() for name in classes.split(",") if name.strip())
        try:
            return LabelSpace(names=names)
        except ValueError as exc:
            _fail(EXIT_BAD_DATA, str(exc))
    if k:
        return LabelSpace(names=tuple(f"c{i}" for i in range(k)))
    _fail(EXIT_BAD_DATA, "provide --classes or --k to define the label space")


def _parse_variety(name: str) -> LabelVariety:
    try:
        return LabelVariety.from_string(name)
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))


def _parse_m_list(raw: str) -> list[int]:
    try:
        values = [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        _fail(EXIT_BAD_DATA, f"--M must be a comma-separated integer list: {raw!r}")
    if not values or any(v < 1 for v in values):
        _fail(EXIT_BAD_DATA, "--M values must be positive integers")
    return values


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        _fail(EXIT_BAD_DATA, f"--seeds must be a comma-separated integer list: {raw!r}")
    if not seeds:
        _fail(EXIT_BAD_DATA, "--seeds must contain at least one seed")
    return seeds


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = _need_file(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        _fail(EXIT_BAD_CONFIG, f"config is not valid JSON: {exc}")
    if not isinstance(data, dict):
        _fail(EXIT_BAD_CONFIG, "config must be a JSON object")
    allowed = {
        "mode",
        "variety",
        "M",
        "baseline",
        "beta",
        "gamma",
        "epsilon",
        "seeds",
        "epochs",
        "batch_size",
        "hidden1",
        "hidden2",
        "bin_size",
        "holdout_fraction",
        "lr0",
        "weight_decay",
    }
    unknown = set(data) - allowed
    if unknown:
        _fail(EXIT_BAD_CONFIG, f"config has unknown keys: {sorted(unknown)}")
    return data


@click.group()
def main():
    """Soft-label toolkit: elicit, construct, aggregate, train, simulate."""


# -- ingest ---------------------------------------------------------------


@main.command("ingest")
@click.argument("annotations", type=str)
@click.option("--classes", default=None, help="Comma-separated class names.")
@click.option("--k", type=int, default=None, help="Class count (names c0..cK-1).")
@click.option("--reference", default=None, help="Reference hard-label CSV for QC.")
@click.option("--variety", default="t2-clamp", show_default=True)
@click.option("--gamma", type=float, default=0.1, show_default=True)
@click.option("--out", required=True, help="Label-matrix CSV to write.")
@click.option("--qc-report", default=None, help="Optional QC verdict JSON path.")
def ingest_cmd(annotations, classes, k, reference, variety, gamma, out, qc_report):
    """Parse annotation JSONL, apply QC, and write pooled label matrices."""
    path = _need_file(annotations)
    space = _space_from_options(classes, k)
    var = _parse_variety(variety)
    try:
        policy = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=gamma)
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))

    result = ingest.parse_annotations(path, space)
    if not result.submissions:
        detail = f"; first error: {result.errors[0].message}" if result.errors else ""
        _fail(EXIT_BAD_DATA, f"no parseable submissions in {annotations}{detail}")
    refs = (
        ingest.load_reference_csv(_need_file(reference), space)
        if reference
        else ingest.ReferenceLabels(hard={}, counts={})
    )
    kept, verdicts = ingest.apply_qc(result.submissions, refs)
    pools = ingest.build_pools(kept, space, var, policy)
    if not pools:
        _fail(EXIT_BAD_DATA, "every record was excluded; nothing to write")
    ordered = [pools[i] for i in sorted(pools)]
    datafiles.write_label_matrix(out, ordered, space)

    consistency = ingest.consistency_stats(result.submissions)
    if qc_report:
        Path(qc_report).write_text(
            json.dumps(
                {
                    "parse_errors": [
                        {"line": e.line, "message": e.message} for e in result.errors
                    ],
                    "verdicts": [
                        {
                            "annotator_id": v.annotator_id,
                            "kept": v.kept,
                            "error_counts": v.error_counts,
                            "accuracy": v.accuracy,
                            "reasons": list(v.reasons),
                            "notes": list(v.notes),
                        }
                        for v in verdicts
                    ],
                    "consistency": {
                        "n_annotators": consistency.n_annotators,
                        "n_pairs": consistency.n_pairs,
                        "change_fraction": consistency.change_fraction,
                        "mean_abs_p1_change": consistency.mean_abs_p1_change,
                    },
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    n_excluded = sum(1 for v in verdicts if not v.kept)
    click.echo(
        f"ingested {len(result.submissions)} sessions "
        f"({n_excluded} excluded, {len(result.errors)} parse errors), "
        f"{len(ordered)} images -> {out}"
    )


# -- build-labels ---------------------------------------------------------


@main.command("build-labels")
@click.argument("annotations", type=str)
@click.option("--classes", default=None)
@click.option("--k", type=int, default=None)
@click.option("--variety", default="t2-clamp", show_default=True)
@click.option(
    "--redistribution",
    type=click.Choice(["clamp", "uniform"]),
    default="clamp",
    show_default=True,
)
@click.option("--gamma", type=float, default=0.1, show_default=True)
@click.option("--out", required=True)
def build_labels_cmd(annotations, classes, k, variety, redistribution, gamma, out):
    """Construct per-annotator labels (no QC) and write the matrix CSV."""
    path = _need_file(annotations)
    space = _space_from_options(classes, k)
    var = _parse_variety(variety)
    try:
        policy = RedistributionPolicy(
            mode=RedistributionMode(redistribution), gamma=gamma
        )
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))
    result = ingest.parse_annotations(path, space)
    if not result.submissions:
        _fail(EXIT_BAD_DATA, f"no parseable submissions in {annotations}")
    pools = ingest.build_pools(result.submissions, space, var, policy)
    if not pools:
        _fail(EXIT_BAD_DATA, "no rule-clean records to build labels from")
    ordered = [pools[i] for i in sorted(pools)]
    datafiles.write_label_matrix(out, ordered, space)
    click.echo(f"built {var.value} labels for {len(ordered)} images -> {out}")


# -- compare --------------------------------------------------------------


@main.command("compare")
@click.argument("file_a", type=str)
@click.argument("file_b", type=str)
@click.option("--out", default=None, help="Optional JSON report path.")
def compare_cmd(file_a, file_b, out):
    """Compare the aggregate labels of two label-matrix CSVs."""
    a = datafiles.read_label_matrix(_need_file(file_a)).aggregates()
    b = datafiles.read_label_matrix(_need_file(file_b)).aggregates()
    try:
        report = metrics.compare_label_sets(a, b)
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    r_text = "n/a" if report.entropy_pearson_r is None else f"{report.entropy_pearson_r:.4f}"
    click.echo(
        f"{report.n_images} images: mean distance {report.mean_distance:.6f}, "
        f"entropy r {r_text}"
    )


# -- train ----------------------------------------------------------------


def _load_train_material(features, labels):
    ids, matrix, lo, hi = datafiles.read_features(_need_file(features))
    pools = datafiles.read_label_matrix(_need_file(labels)).pools()
    missing = [i for i in ids if i not in pools]
    if missing:
        _fail(
            EXIT_BAD_DATA,
            f"{len(missing)} feature rows lack label pools, e.g. {missing[:3]}",
        )
    return ids, matrix, lo, hi, pools


@main.command("train")
@click.option("--features", required=True, help="Feature matrix (.npy + manifest).")
@click.option("--labels", required=True, help="Label-matrix CSV with member rows.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--mode", type=click.Choice(["agg", "deagg"]), default=None)
@click.option("--variety", default=None)
@click.option("--m", "--M", "m_subsample", type=int, default=None)
@click.option(
    "--baseline",
    type=click.Choice(["hard", "uniform", "random", "smoothed", "select-top2"]),
    default=None,
)
@click.option("--beta", type=float, default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--seeds", default=None, help="Comma-separated seed list.")
@click.option("--epochs", type=int, default=None)
@click.option("--holdout-fraction", type=float, default=None)
@click.option("--out", required=True, help="Report basename (.json/.csv added).")
@click.option("--model-out", default=None, help="Save the first seed's model (.npz).")
def train_cmd(
    features,
    labels,
    config_path,
    mode,
    variety,
    m_subsample,
    baseline,
    beta,
    epsilon,
    seeds,
    epochs,
    holdout_fraction,
    out,
    model_out,
):
    """Train under a label regime and report eval metrics across seeds."""
    cfg = _load_config_file(config_path)

    def pick(flag, key, fallback):
        if flag is not None:
            return flag
        return cfg.get(key, fallback)

    mode = pick(mode, "mode", "deagg")
    variety = pick(variety, "variety", "t2-clamp")
    m_subsample = pick(m_subsample, "M", None)
    baseline = pick(baseline, "baseline", None)
    beta = pick(beta, "beta", 0.05)
    epsilon = pick(epsilon, "epsilon", 4.0 / 255.0)
    seeds = _parse_seeds(seeds) if seeds else tuple(cfg.get("seeds", (0, 1, 2, 3, 4)))
    epochs = pick(epochs, "epochs", 65)
    holdout_fraction = pick(holdout_fraction, "holdout_fraction", 0.1)

    ids, matrix, lo, hi, pools = _load_train_material(features, labels)
    if not 0.0 < holdout_fraction < 1.0:
        _fail(EXIT_BAD_DATA, "--holdout-fraction must lie strictly between 0 and 1")

    order = sorted(ids)
    rng = np.random.default_rng(seeds[0])
    rng.shuffle(order)
    n_eval = max(1, int(round(holdout_fraction * len(order))))
    if n_eval >= len(order):
        _fail(EXIT_BAD_DATA, "holdout would consume the whole dataset")
    eval_ids = set(order[:n_eval])
    row_of = {image_id: i for i, image_id in enumerate(ids)}

    train_set = [
        (matrix[row_of[i]], pools[i]) for i in ids if i not in eval_ids
    ]
    eval_entries = [
        (i, matrix[row_of[i]], pools[i].aggregate) for i in ids if i in eval_ids
    ]

    try:
        regime = LabelRegime(
            mode=RegimeMode.AGGREGATED if mode == "agg" else RegimeMode.DEAGGREGATED,
            variety=_parse_variety(variety),
            m_subsample=m_subsample,
            baseline=_parse_variety(baseline) if baseline else None,
            beta=beta,
        )
        config = ExperimentConfig(
            regime=regime,
            sched=TrainSchedule(
                epochs=epochs,
                lr0=cfg.get("lr0", 0.1),
                weight_decay=cfg.get("weight_decay", 1e-4),
                batch_size=cfg.get("batch_size", 32),
            ),
            seeds=seeds,
            hidden1=cfg.get("hidden1", 32),
            hidden2=cfg.get("hidden2", 32),
            attack=AttackSpec(epsilon=epsilon, feature_low=lo, feature_high=hi),
            bin_size=cfg.get("bin_size", 100),
        )
        report = run_experiment(
            config,
            train_set,
            [metrics.EvalSet(name="heldout", entries=tuple(eval_entries))],
        )
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))

    report.write_json(f"{out}.json")
    report.write_csv(f"{out}.csv")
    if model_out:
        model = MicroModel.init(
            matrix.shape[1], config.hidden1, config.hidden2,
            train_set[0][1].aggregate.k, seed=seeds[0],
        )
        trained, _ = train(model, train_set, regime, config.sched.with_seed(seeds[0]))
        trained.save(model_out)
    ce_row = next(r for r in report.rows if r.metric == "soft_ce")
    click.echo(
        f"trained {len(seeds)} seed(s): heldout soft CE {ce_row.value:.4f} "
        f"-> {out}.json, {out}.csv"
    )


# -- evaluate -------------------------------------------------------------


@main.command("evaluate")
@click.option("--model", "model_path", required=True, help="Saved model (.npz).")
@click.option("--features", required=True)
@click.option("--labels", required=True, help="Label CSV; aggregate rows are used.")
@click.option("--epsilon", type=float, default=4.0 / 255.0, show_default=True)
@click.option("--bin-size", type=int, default=100, show_default=True)
@click.option("--out", default=None, help="Optional JSON report path.")
def evaluate_cmd(model_path, features, labels, epsilon, bin_size, out):
    """Score a saved model on a labeled feature set."""
    model = MicroModel.load(_need_file(model_path))
    ids, matrix, lo, hi = datafiles.read_features(_need_file(features))
    aggregates = datafiles.read_label_matrix(_need_file(labels)).aggregates()
    missing = [i for i in ids if i not in aggregates]
    if missing:
        _fail(EXIT_BAD_DATA, f"{len(missing)} feature rows lack labels, e.g. {missing[:3]}")
    evals = [aggregates[i] for i in ids]
    try:
        preds = forward(model, matrix)
        spec = AttackSpec(epsilon=epsilon, feature_low=lo, feature_high=hi)
        adv = fgsm_attack(model, matrix, np.stack([e.probs for e in evals]), spec)
        result = {
            "n_examples": len(ids),
            "soft_ce": metrics.soft_cross_entropy(preds, evals),
            "calibration_rmse": metrics.calibration_rmse(
                preds, evals, min(bin_size, len(ids))
            ),
            "fgsm_loss": metrics.soft_cross_entropy(forward(model, adv), evals),
            "epsilon": epsilon,
        }
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))
    if out:
        Path(out).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    click.echo(
        f"{result['n_examples']} examples: soft CE {result['soft_ce']:.4f}, "
        f"calibration RMSE {result['calibration_rmse']:.4f}, "
        f"FGSM loss {result['fgsm_loss']:.4f}"
    )


# -- sweep-gamma ----------------------------------------------------------


@main.command("sweep-gamma")
@click.argument("annotations", type=str)
@click.option("--classes", default=None)
@click.option("--k", type=int, default=None)
@click.option("--against", required=True, help="Reference label-matrix CSV.")
@click.option("--variety", default="t2-clamp", show_default=True)
@click.option("--out", required=True, help="CSV of per-gamma comparison stats.")
def sweep_gamma_cmd(annotations, classes, k, against, variety, out):
    """Evaluate the gamma grid by distance to a reference label set."""
    path = _need_file(annotations)
    space = _space_from_options(classes, k)
    var = _parse_variety(variety)
    reference = datafiles.read_label_matrix(_need_file(against)).aggregates()
    result = ingest.parse_annotations(path, space)
    if not result.submissions:
        _fail(EXIT_BAD_DATA, f"no parseable submissions in {annotations}")

    rows = []
    for gamma in GAMMA_GRID:
        policy = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=gamma)
        pools = ingest.build_pools(result.submissions, space, var, policy)
        ours = {image_id: pool.aggregate for image_id, pool in pools.items()}
        try:
            report = metrics.compare_label_sets(ours, reference)
        except ValueError as exc:
            _fail(EXIT_BAD_DATA, str(exc))
        rows.append((gamma, report.mean_distance, report.entropy_pearson_r))

    with open(out, "w", newline="") as fh:
        fh.write("gamma,mean_distance,entropy_pearson_r\n")
        for gamma, dist, r in rows:
            r_text = "" if r is None else repr(r)
            fh.write(f"{gamma},{dist!r},{r_text}\n")
    best = min(rows, key=lambda row: row[1])
    click.echo(f"best gamma {best[0]} (mean distance {best[1]:.6f}) -> {out}")


# -- simulate -------------------------------------------------------------


@main.command("simulate")
@click.option("--m", "--M", "m_list", default="1,2,4,8,16,32,51", show_default=True)
@click.option(
    "--agg",
    type=click.Choice(["multi", "ours", "both"]),
    default="both",
    show_default=True,
)
@click.option("--worlds", type=int, default=50, show_default=True)
@click.option("--images", type=int, default=200, show_default=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--pool-size", type=int, default=None, help="Default: max M.")
@click.option("--noise", type=float, default=50.0, show_default=True)
@click.option("--quantization", type=int, default=5, show_default=True)
@click.option("--tau", type=float, default=0.03, show_default=True)
@click.option("--gamma", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="Efficiency-curve CSV.")
def simulate_cmd(
    m_list, agg, worlds, images, k, pool_size, noise, quantization, tau, gamma,
    seed, out,
):
    """Run annotator-efficiency curves on simulated worlds."""
    m_values = _parse_m_list(m_list)
    try:
        model = simulate.AnnotatorModel(
            percept_noise=noise, quantization=quantization, exclusion_threshold=tau
        )
        pool = simulate.AnnotatorPool(
            model=model, size=pool_size or max(m_values)
        )
        spec = simulate.WorldSpec(n_images=images, k=k, seed=seed)
        policy = RedistributionPolicy(mode=RedistributionMode.CLAMP, gamma=gamma)
        result = simulate.efficiency_sweep(
            spec, pool, m_values, n_worlds=worlds, policy=policy
        )
    except ValueError as exc:
        _fail(EXIT_BAD_DATA, str(exc))

    rows = result.rows()
    if agg != "both":
        rows = [row for row in rows if row["aggregation"] == agg]
    with open(out, "w", newline="") as fh:
        fh.write("M,aggregation,mean_distance,ci_low,ci_high\n")
        for row in rows:
            lo_text = "" if row["ci_low"] is None else repr(row["ci_low"])
            hi_text = "" if row["ci_high"] is None else repr(row["ci_high"])
            fh.write(
                f"{row['M']},{row['aggregation']},{row['mean_distance']!r},"
                f"{lo_text},{hi_text}\n"
            )
    click.echo(f"{len(rows)} curve points over {worlds} world(s) -> {out}")


# -- serve ----------------------------------------------------------------


@main.command("serve")
@click.option("--plans", required=True, help="Batch-plan JSON file.")
@click.option("--classes", default=None)
@click.option("--k", type=int, default=None)
@click.option("--data-dir", required=True)
@click.option("--images-dir", default=None)
@click.option("--ui-dir", default=None, help="Built web UI to host at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ttl-minutes", type=float, default=60.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def serve_cmd(plans, classes, k, data_dir, images_dir, ui_dir, host, port, ttl_minutes, seed):
    """Start the elicitation HTTP service."""
    import uvicorn

    from .service import build_service

    space = _space_from_options(classes, k)
    try:
        app, _ = build_service(
            space=space,
            batch_plan_path=_need_file(plans),
            data_dir=data_dir,
            seed=seed,
            ttl_minutes=ttl_minutes,
            images_dir=images_dir,
            ui_dir=ui_dir,
        )
    except (ValueError, KeyError) as exc:
        _fail(EXIT_BAD_CONFIG, f"bad batch plan: {exc}")
    uvicorn.run(app, host=host, port=port)


# -- export-report --------------------------------------------------------


@main.command("export-report")
@click.argument("artifacts", nargs=-1, required=True)
@click.option("--out", required=True, help="Combined JSON document.")
def export_report_cmd(artifacts, out):
    """Bundle JSON/CSV artifacts into one report document.

    The timestamp lives only in the metadata header, so the body is
    byte-stable across runs on identical inputs.
    """
    from datetime import datetime, timezone

    body = {}
    for artifact in artifacts:
        path = _need_file(artifact)
        if path.suffix == ".json":
            try:
                body[path.name] = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                _fail(EXIT_BAD_DATA, f"{artifact}: invalid JSON: {exc}")
        else:
            body[path.name] = path.read_text()
    document = {
        "meta": {"generated_at": datetime.now(timezone.utc).isoformat()},
        "artifacts": body,
    }
    Path(out).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    click.echo(f"bundled {len(body)} artifact(s) -> {out}")


if __name__ == "__main__":
    main()
