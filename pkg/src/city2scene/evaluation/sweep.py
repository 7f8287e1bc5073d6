import copy
import dataclasses
import logging
import math
import multiprocessing
import pathlib

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from city2scene.evaluation.runs import RunDirectory
from city2scene.losses.distillation import KDConfig
from city2scene.models.checkpoint import load_checkpoint
from city2scene.pipeline.data import load_manifest
from city2scene.pipeline.settings import StageConfig
from city2scene.pipeline.stages import train_stage3

SweepColumns = ["lambda", "seed", "accuracy"]


@dataclasses.dataclass
class SweepRow:
    lambda_weight: float = dataclasses.field(default=None)
    seed: int = dataclasses.field(default=None)
    accuracy: float | None = dataclasses.field(default=None)
    error: str | None = dataclasses.field(default=None)

    def succeeded(self) -> bool:
        return self.accuracy is not None


@dataclasses.dataclass
class SweepResult:
    rows: list[SweepRow] = dataclasses.field(default_factory=list)

    def lambdas(self) -> list[float]:
        return sorted({r.lambda_weight for r in self.rows})

    def aggregate(self) -> dict[float, tuple[float, float]]:
        """Mean and standard deviation over the successful seeds of every lambda."""
        output = {}
        for value in self.lambdas():
            accuracies = [
                r.accuracy
                for r in self.rows
                if r.lambda_weight == value and r.succeeded()
            ]
            if len(accuracies) > 0:
                output[value] = (
                    float(np.mean(accuracies)),
                    float(np.std(accuracies)),
                )
        return output

    def best_lambda(self) -> float | None:
        aggregate = self.aggregate()
        if len(aggregate) == 0:
            return None
        return max(aggregate, key=lambda value: aggregate[value][0])

    def failures(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.succeeded()]


def write_sweep_csv(result: SweepResult, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = SweepColumns + (["error"] if len(result.failures()) > 0 else [])
    table = pd.DataFrame(
        [
            [r.lambda_weight, r.seed, r.accuracy, r.error][: len(columns)]
            for r in result.rows
        ],
        columns=columns,
    )
    table.to_csv(path, index=False)


def read_sweep_csv(path: str | pathlib.Path) -> SweepResult:
    table = pd.read_csv(path)
    rows = []
    for record in table.to_dict(orient="records"):
        accuracy = record["accuracy"]
        error = record.get("error")
        rows.append(
            SweepRow(
                lambda_weight=float(record["lambda"]),
                seed=int(record["seed"]),
                accuracy=None if pd.isna(accuracy) else float(accuracy),
                error=None if error is None or pd.isna(error) else str(error),
            )
        )
    return SweepResult(rows=rows)


def plot_sweeps(
    results: dict[str, SweepResult], path: str | pathlib.Path, title: str = None
) -> None:
    """Accuracy against lambda, one line per label, standard deviation as bars."""
    figure, axes = plt.subplots(nrows=1, ncols=1, figsize=(6, 4))
    for label, result in results.items():
        aggregate = result.aggregate()
        lambdas = sorted(aggregate)
        axes.errorbar(
            lambdas,
            [100.0 * aggregate[v][0] for v in lambdas],
            yerr=[100.0 * aggregate[v][1] for v in lambdas],
            marker="o",
            capsize=3,
            label=label,
        )
    axes.set_xlabel("lambda")
    axes.set_ylabel("accuracy (%)")
    axes.grid(True, alpha=0.3)
    if title is not None:
        axes.set_title(title)
    if len(results) > 0:
        axes.legend()
    figure.tight_layout()
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg")
    plt.close(figure)


def _sweep_run(
    cfg_data: dict,
    teacher_paths: list[str],
    lambda_weight: float,
    seed: int,
    out_dir: str | None,
) -> SweepRow:
    logger = logging.getLogger("[city2scene::lambda_sweep]")
    try:
        cfg = StageConfig.from_dict(cfg_data)
        cfg.kd.lambda_weight = lambda_weight
        cfg.seed = seed
        cfg.validate()
        manifest = load_manifest(cfg.dataset)
        teachers = [load_checkpoint(p) for p in teacher_paths]
        checkpoint = train_stage3(cfg, teachers, manifest)
        if out_dir is not None:
            RunDirectory(
                pathlib.Path(out_dir) / f"lambda_{lambda_weight:g}" / f"seed_{seed}"
            ).write(checkpoint, cfg)
        accuracy = checkpoint.metrics.get(
            "validation_accuracy", checkpoint.metrics.get("test_accuracy")
        )
        return SweepRow(lambda_weight=lambda_weight, seed=seed, accuracy=accuracy)
    except Exception as err:
        logger.error(f"lambda={lambda_weight}, seed={seed} failed: {err}")
        return SweepRow(
            lambda_weight=lambda_weight,
            seed=seed,
            error=f"{type(err).__name__}: {err}",
        )


def lambda_sweep(
    base_cfg: StageConfig,
    teachers: list[str | pathlib.Path],
    lambda_values: list[float],
    seeds: list[int],
    out_dir: str | pathlib.Path | None = None,
    jobs: int = 1,
) -> SweepResult:
    """
    Trains one stage-3 student per (lambda, seed). Runs are independent and may
    execute in up to `jobs` processes. A run is scored on the validation split
    when the dataset has one, otherwise on the test split.
    :param teachers: Paths of the teacher checkpoints.
    :param out_dir: When given, every run writes its artifacts under
     lambda_<value>/seed_<seed>, and sweep.csv plus sweep.svg are written there.
    """
    if any(not 0.0 <= v <= 1.0 for v in lambda_values):
        raise ValueError(f"Every lambda must be in [0, 1] (got {lambda_values}).")
    if len(seeds) == 0:
        raise ValueError("A sweep needs at least one seed.")

    base = copy.deepcopy(base_cfg)
    base.stage = 3
    if base.kd is None:
        base.kd = KDConfig()
    base.validate()
    cfg_data = base.to_dict()
    teacher_paths = [str(p) for p in teachers]
    out = str(out_dir) if out_dir is not None else None
    arguments = [
        (cfg_data, teacher_paths, float(v), int(s), out)
        for v in lambda_values
        for s in seeds
    ]

    if jobs > 1 and len(arguments) > 1:
        context = multiprocessing.get_context("spawn")
        with context.Pool(processes=min(jobs, len(arguments))) as pool:
            rows = pool.starmap(_sweep_run, arguments)
    else:
        rows = [_sweep_run(*a) for a in arguments]

    result = SweepResult(rows=rows)
    if out_dir is not None:
        write_sweep_csv(result, pathlib.Path(out_dir) / "sweep.csv")
        plot_sweeps({"City2Scene": result}, pathlib.Path(out_dir) / "sweep.svg")

    logger = logging.getLogger("[city2scene::lambda_sweep]")
    for value, (mean, std) in result.aggregate().items():
        logger.info(f"lambda={value:g}: {100 * mean:.1f} +- {100 * std:.1f}")
    if len(result.failures()) > 0:
        logger.warning(f"{len(result.failures())} run(s) failed.")
    return result


def parse_lambda_range(text: str) -> list[float]:
    """'start:stop:step' with an inclusive stop, e.g. 0.1:0.9:0.1."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValueError(f"'{text}' is not in start:stop:step form.") from None
    if step <= 0 or stop < start:
        raise ValueError(f"'{text}' does not describe an increasing range.")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]
