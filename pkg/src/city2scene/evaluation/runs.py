import dataclasses
import logging
import pathlib
from typing import Callable

import numpy as np
import pandas as pd

from city2scene.base.settings import save_json
from city2scene.data.manifest import Manifest, Split
from city2scene.evaluation.metrics import Metrics, evaluate
from city2scene.models.checkpoint import Checkpoint, CheckpointRole, save_checkpoint
from city2scene.pipeline.settings import StageConfig

ConfigFileName = "config.json"
CheckpointFileName = "checkpoint.c2s"
MetricsFileName = "metrics.json"
TrainLogFileName = "train_log.csv"
SummaryFileName = "summary.json"

RunMetricKeys = ("train_accuracy", "test_accuracy", "validation_accuracy", "lambda")


@dataclasses.dataclass
class RunDirectory:
    """Artifacts of one training run."""

    path: pathlib.Path = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        self.path = pathlib.Path(self.path)

    @property
    def checkpoint_path(self) -> pathlib.Path:
        return self.path / CheckpointFileName

    @property
    def metrics_path(self) -> pathlib.Path:
        return self.path / MetricsFileName

    def write_config(self, cfg: StageConfig | dict) -> None:
        data = cfg.to_dict() if isinstance(cfg, StageConfig) else cfg
        save_json(data, self.path / ConfigFileName)

    def write_train_log(self, checkpoint: Checkpoint) -> None:
        label_column = (
            "loss_city"
            if checkpoint.role is CheckpointRole.city_model
            else "loss_scene"
        )
        table = pd.DataFrame(checkpoint.metrics.get("history", []))
        table = table.rename(
            columns={
                "loss_label": label_column,
                "loss_distillation": "loss_city2scene",
            }
        )
        self.path.mkdir(parents=True, exist_ok=True)
        table.to_csv(self.path / TrainLogFileName, index=False)

    def write(
        self,
        checkpoint: Checkpoint,
        cfg: StageConfig | dict,
        metrics: Metrics | None = None,
    ) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        self.write_config(cfg)
        save_checkpoint(checkpoint, self.checkpoint_path)
        self.write_train_log(checkpoint)
        run = {
            k: checkpoint.metrics[k] for k in RunMetricKeys if k in checkpoint.metrics
        }
        if metrics is not None:
            metrics.to_json(self.metrics_path, extra={"run": run})
        else:
            save_json({"run": run}, self.metrics_path)
        logging.getLogger("[city2scene::RunDirectory]").info(
            f"Wrote the run artifacts to {self.path}."
        )


def summarize(values: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    return {
        key: {
            "mean": float(np.mean(v)),
            "std": float(np.std(v)),
            "values": [float(x) for x in v],
        }
        for key, v in values.items()
        if len(v) > 0
    }


def run_seeds(
    cfg: StageConfig,
    seeds: list[int],
    out_dir: str | pathlib.Path,
    train: Callable[[StageConfig], Checkpoint],
    manifest: Manifest,
) -> tuple[list[Checkpoint], dict]:
    """
    Runs train once per seed. A single seed writes straight into out_dir, several
    seeds write seed_<s> sub-directories and a summary.json with mean and std.
    """
    logger = logging.getLogger("[city2scene::run_seeds]")
    out_dir = pathlib.Path(out_dir)
    evaluation_split = (
        Split.test if len(manifest.records_in(Split.test)) > 0 else Split.train
    )

    checkpoints = []
    collected: dict[str, list[float]] = {}
    for seed in seeds:
        seeded = dataclasses.replace(cfg, seed=seed)
        run_directory = RunDirectory(
            out_dir if len(seeds) == 1 else out_dir / f"seed_{seed}"
        )
        logger.info(f"Seed {seed}: training into {run_directory.path}.")
        checkpoint = train(seeded)
        metrics = evaluate(checkpoint, manifest, evaluation_split)
        run_directory.write(checkpoint, seeded, metrics)
        checkpoints.append(checkpoint)

        collected.setdefault("overall", []).append(metrics.overall_accuracy)
        collected.setdefault("class_mean", []).append(metrics.class_mean_accuracy())
        for key in RunMetricKeys:
            if key in checkpoint.metrics:
                collected.setdefault(key, []).append(checkpoint.metrics[key])

    summary = {"seeds": list(seeds), "metrics": summarize(collected)}
    if len(seeds) > 1:
        save_json(summary, out_dir / SummaryFileName)
    return checkpoints, summary
