import numpy as np
import pandas as pd
import pytest
import torch
from sklearn.metrics import (
    accuracy_score,
    balanced_accuracy_score,
    confusion_matrix,
    recall_score,
)

from city2scene.base import VocabularyMismatchError
from city2scene.evaluation import (
    Metrics,
    RunDirectory,
    SweepResult,
    SweepRow,
    classwise_report,
    metrics_from_predictions,
    parse_lambda_range,
    plot_sweeps,
    read_sweep_csv,
    write_sweep_csv,
)
from city2scene.features import SpectrogramConfig
from city2scene.models import (
    Checkpoint,
    CheckpointRole,
    EncoderSpec,
    build_model,
    load_checkpoint,
)

Table = {
    "Airport": (45.1, 58.8),
    "Bus": (91.7, 89.9),
    "Metro": (71.8, 76.2),
    "Metro Station": (62.6, 75.4),
    "Park": (84.7, 81.0),
    "Public Square": (58.5, 63.7),
    "Shopping Mall": (78.6, 65.9),
    "Street Pedestrian": (50.9, 53.6),
    "Street Traffic": (83.8, 81.2),
    "Tram": (72.8, 77.3),
}


def _table_metrics(column: int, overall: float) -> Metrics:
    return Metrics(
        overall_accuracy=overall,
        per_class_accuracy={k: v[column] / 100.0 for k, v in Table.items()},
    )


def test_oracle_and_constant_predictors():
    classes = ["a", "b", "c"]
    targets = np.array([0, 0, 1, 1, 2, 2, 2, 2])
    cities = ["x", "y"] * 4

    oracle = metrics_from_predictions(targets, targets, classes, cities)
    assert oracle.overall_accuracy == 1.0
    assert oracle.per_class_accuracy == {"a": 1.0, "b": 1.0, "c": 1.0}
    assert oracle.per_city_accuracy == {"x": 1.0, "y": 1.0}
    assert np.array_equal(oracle.confusion, np.diag([2, 2, 4]))

    constant = metrics_from_predictions(np.full(8, 2), targets, classes, cities)
    assert constant.overall_accuracy == pytest.approx(0.5)
    assert constant.per_class_accuracy == {"a": 0.0, "b": 0.0, "c": 1.0}
    assert constant.class_mean_accuracy() == pytest.approx(1 / 3)
    assert constant.confusion[:, 2].tolist() == [2, 2, 4]
    assert constant.n_eval == 8


def test_metrics_agree_with_sklearn():
    rng = np.random.default_rng(11)
    classes = ["a", "b", "c", "d"]
    targets = rng.integers(0, 4, size=200)
    predicted = np.where(rng.random(200) < 0.6, targets, rng.integers(0, 4, 200))

    metrics = metrics_from_predictions(predicted, targets, classes)

    assert metrics.overall_accuracy == pytest.approx(
        accuracy_score(targets, predicted)
    )
    recall = recall_score(targets, predicted, labels=[0, 1, 2, 3], average=None)
    assert list(metrics.per_class_accuracy.values()) == pytest.approx(recall)
    assert metrics.class_mean_accuracy() == pytest.approx(
        balanced_accuracy_score(targets, predicted)
    )
    assert np.array_equal(
        metrics.confusion, confusion_matrix(targets, predicted, labels=[0, 1, 2, 3])
    )


def test_metrics_errors():
    with pytest.raises(ValueError):
        metrics_from_predictions(np.array([0, 1]), np.array([0]), ["a", "b"])
    with pytest.raises(ValueError):
        metrics_from_predictions(np.array([]), np.array([]), ["a"])
    with pytest.raises(ValueError):
        Metrics(overall_accuracy=1.0, confusion=np.eye(2), n_eval=3)


def test_metrics_json(tmp_path):
    metrics = metrics_from_predictions(
        torch.tensor([0, 1, 1]), torch.tensor([0, 1, 0]), ["a", "b"], ["p", "p", "q"]
    )
    metrics.to_json(tmp_path / "metrics.json", extra={"run": {"lambda": 0.5}})
    restored = Metrics.from_json(tmp_path / "metrics.json")

    assert restored.to_dict() == metrics.to_dict()
    assert restored.per_city_accuracy == {"p": 1.0, "q": 0.0}


def test_classwise_report():
    report = classwise_report(
        _table_metrics(0, overall=0.701), _table_metrics(1, overall=0.722)
    )

    assert len(report.rows) == 10
    assert report.row("Airport").diff == pytest.approx(13.7)
    assert report.row("Shopping Mall").diff == pytest.approx(-12.7)
    assert report.row("Bus").baseline == pytest.approx(91.7)
    assert report.average.baseline == pytest.approx(70.1)
    assert report.average.treated == pytest.approx(72.2)
    assert report.average.diff == pytest.approx(2.1)
    assert report.class_mean.treated == pytest.approx(72.3)
    assert report.class_mean.baseline == pytest.approx(70.05, abs=0.06)

    text = report.to_text()
    assert "+13.7" in text and "-12.7" in text and "+2.1" in text
    assert text.splitlines()[0].startswith("Class")


def test_classwise_report_csv(tmp_path):
    report = classwise_report(
        _table_metrics(0, overall=0.701), _table_metrics(1, overall=0.722)
    )
    report.to_csv(tmp_path / "report.csv")
    table = pd.read_csv(tmp_path / "report.csv")

    assert list(table.columns) == ["class", "baseline", "treated", "diff"]
    assert table["class"].tolist()[-2:] == ["Average", "Class mean"]
    assert table.loc[table["class"] == "Airport", "diff"].item() == pytest.approx(13.7)


def test_classwise_report_vocabulary_mismatch():
    other = Metrics(overall_accuracy=0.5, per_class_accuracy={"Bus": 0.5})
    with pytest.raises(VocabularyMismatchError):
        classwise_report(_table_metrics(0, overall=0.701), other)


def test_parse_lambda_range():
    values = parse_lambda_range("0.1:0.9:0.1")
    assert len(values) == 9
    assert values[0] == pytest.approx(0.1) and values[-1] == pytest.approx(0.9)
    assert parse_lambda_range("0:1:0.5") == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        parse_lambda_range("0.1:0.9")
    with pytest.raises(ValueError):
        parse_lambda_range("0.9:0.1:0.1")


def _sweep() -> SweepResult:
    rows = []
    for value, accuracies in ((0.1, (0.5, 0.7)), (0.5, (0.8, 0.9)), (0.9, (0.6,))):
        for seed, accuracy in enumerate(accuracies):
            rows.append(SweepRow(lambda_weight=value, seed=seed, accuracy=accuracy))
    rows.append(SweepRow(lambda_weight=0.9, seed=1, error="RuntimeError: boom"))
    return SweepResult(rows=rows)


def test_sweep_aggregate():
    result = _sweep()
    aggregate = result.aggregate()

    assert result.lambdas() == [0.1, 0.5, 0.9]
    assert aggregate[0.1] == pytest.approx((0.6, 0.1))
    assert aggregate[0.9] == pytest.approx((0.6, 0.0))
    assert result.best_lambda() == 0.5
    assert len(result.failures()) == 1
    assert SweepResult().best_lambda() is None


def test_sweep_csv(tmp_path):
    result = _sweep()
    write_sweep_csv(result, tmp_path / "sweep.csv")
    restored = read_sweep_csv(tmp_path / "sweep.csv")

    assert restored.rows == result.rows
    assert list(pd.read_csv(tmp_path / "sweep.csv").columns) == [
        "lambda",
        "seed",
        "accuracy",
        "error",
    ]

    clean = SweepResult(rows=[r for r in result.rows if r.succeeded()])
    write_sweep_csv(clean, tmp_path / "clean.csv")
    assert "error" not in pd.read_csv(tmp_path / "clean.csv").columns
    assert read_sweep_csv(tmp_path / "clean.csv").rows == clean.rows


def test_plot_sweeps(tmp_path):
    plot_sweeps({"distilled": _sweep()}, tmp_path / "plots" / "sweep.svg", "test")
    content = (tmp_path / "plots" / "sweep.svg").read_text(encoding="utf-8")
    assert "<svg" in content


def test_run_directory(tmp_path):
    spec = EncoderSpec(n_mels=16, embedding_dim=8, channel_widths=(4,), stem_width=4)
    history = [
        {"epoch": 0, "lr": 0.1, "loss_total": 1.0, "loss_label": 1.0},
        {"epoch": 1, "lr": 0.05, "loss_total": 0.5, "loss_label": 0.5},
    ]
    checkpoint = Checkpoint(
        model=build_model(spec, n_classes=2),
        role=CheckpointRole.city_model,
        encoder_spec=spec,
        preprocessing=SpectrogramConfig(n_mels=16),
        scene_vocab=["bus", "park"],
        city_vocab=["lyon", "paris"],
        metrics={"history": history, "test_accuracy": 0.75},
    )
    run = RunDirectory(tmp_path / "run")
    run.write(checkpoint, {"stage": 1})

    log = pd.read_csv(tmp_path / "run" / "train_log.csv")
    assert "loss_city" in log.columns and len(log) == 2
    assert (tmp_path / "run" / "config.json").is_file()
    assert load_checkpoint(run.checkpoint_path).metrics["test_accuracy"] == 0.75
