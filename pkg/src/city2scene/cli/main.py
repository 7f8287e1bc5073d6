import argparse
import logging
import pathlib
import sys

from city2scene.base.settings import (
    ConfigurationError,
    apply_overrides,
    load_json,
    save_json,
)
from city2scene.data.manifest import Split
from city2scene.data.synthetic import SyntheticConfig, generate_synthetic
from city2scene.evaluation.embeddings import export_embeddings
from city2scene.evaluation.metrics import Metrics, evaluate
from city2scene.evaluation.report import classwise_report
from city2scene.evaluation.runs import MetricsFileName, run_seeds
from city2scene.evaluation.sweep import lambda_sweep, parse_lambda_range
from city2scene.models.checkpoint import CheckpointLoadError, load_checkpoint
from city2scene.pipeline.data import load_manifest
from city2scene.pipeline.settings import DatasetSettings, StageConfig
from city2scene.pipeline.stages import (
    train_baseline,
    train_stage1,
    train_stage2,
    train_stage3,
)
from city2scene.pipeline.teachers import MissingTeachersError

ProgramName = "city2scene"


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"'{text}' is not a comma separated list of integers"
        ) from None


def _lambda_list(text: str) -> list[float]:
    try:
        if ":" in text:
            return parse_lambda_range(text)
        return [float(v) for v in text.split(",")]
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=pathlib.Path, help="JSON configuration file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration value, e.g. kd.temperature=4 (repeatable)",
    )
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )

    seeds = argparse.ArgumentParser(add_help=False)
    group = seeds.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int, help="single run seed")
    group.add_argument(
        "--seeds", type=_seed_list, help="comma separated seeds, e.g. 1,2,3"
    )

    parser = argparse.ArgumentParser(
        prog=ProgramName,
        description="City-feature distillation for acoustic scene classification.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    synth = commands.add_parser(
        "synth", parents=[common], help="generate the synthetic city/scene corpus"
    )
    synth.add_argument("--out", type=pathlib.Path, required=True)
    synth.add_argument("--seed", type=int)

    for name, text in (
        ("stage1", "train the city encoder and city classifier"),
        ("baseline", "train a scene model on labels only"),
    ):
        stage = commands.add_parser(name, parents=[common, seeds], help=text)
        stage.add_argument("--out", type=pathlib.Path, required=True)

    stage2 = commands.add_parser(
        "stage2",
        parents=[common, seeds],
        help="train a scene classifier on the frozen city encoder (teacher)",
    )
    stage2.add_argument("--city-checkpoint", type=pathlib.Path, required=True)
    stage2.add_argument("--out", type=pathlib.Path, required=True)

    for name, text in (
        ("stage3", "distill the teachers into a scene student"),
        ("sweep", "train stage-3 students over a grid of lambda values"),
    ):
        stage = commands.add_parser(name, parents=[common, seeds], help=text)
        stage.add_argument(
            "--teachers",
            type=pathlib.Path,
            action="append",
            default=[],
            help="teacher checkpoint produced by stage2 (repeatable)",
        )
        stage.add_argument("--out", type=pathlib.Path, required=True)
        if name == "stage3":
            stage.add_argument("--lambda", dest="lambda_weight", type=float)
        else:
            stage.add_argument(
                "--lambdas",
                type=_lambda_list,
                default=parse_lambda_range("0.1:0.9:0.1"),
                help="start:stop:step (inclusive) or a comma separated list",
            )
            stage.add_argument("--jobs", type=int, default=1)

    evaluate_parser = commands.add_parser(
        "eval", parents=[common], help="evaluate a checkpoint on one split"
    )
    evaluate_parser.add_argument("--checkpoint", type=pathlib.Path, required=True)
    evaluate_parser.add_argument(
        "--split", choices=[s.value for s in Split], default=Split.test.value
    )
    evaluate_parser.add_argument("--out", type=pathlib.Path)

    export = commands.add_parser(
        "export-embeddings",
        parents=[common],
        help="write the encoder embeddings of every clip to CSV",
    )
    export.add_argument("--checkpoint", type=pathlib.Path, required=True)
    export.add_argument("--split", choices=[s.value for s in Split])
    export.add_argument("--out", type=pathlib.Path, required=True)

    report = commands.add_parser(
        "report", parents=[common], help="class-wise comparison of two metrics.json"
    )
    report.add_argument("--baseline", type=pathlib.Path, required=True)
    report.add_argument("--treated", type=pathlib.Path, required=True)
    report.add_argument("--out", type=pathlib.Path, help="CSV output")
    return parser


def _source(args: argparse.Namespace) -> str | None:
    return str(args.config) if args.config is not None else None


def _config_data(args: argparse.Namespace) -> dict:
    data = load_json(args.config) if args.config is not None else {}
    return apply_overrides(data, args.overrides)


def _stage_config(args: argparse.Namespace, stage: int) -> StageConfig:
    data = _config_data(args)
    data.setdefault("stage", stage)
    if data["stage"] != stage:
        raise ConfigurationError(
            [f"stage is {data['stage']} but the {args.command} command was run"],
            source=_source(args),
        )
    cfg = StageConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "teachers", None):
        cfg.teacher_checkpoints = [str(p) for p in args.teachers]
    if args.command in ("stage3", "sweep") and len(cfg.teacher_checkpoints) == 0:
        raise MissingTeachersError()
    if getattr(args, "lambda_weight", None) is not None:
        cfg.kd.lambda_weight = args.lambda_weight
    problems = cfg.problems()
    if len(problems) > 0:
        raise ConfigurationError(problems, source=_source(args))
    return cfg


def _seeds(args: argparse.Namespace, cfg: StageConfig) -> list[int]:
    return args.seeds if args.seeds else [cfg.seed]


def _synth(args: argparse.Namespace) -> None:
    cfg = SyntheticConfig.from_dict(_config_data(args))
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    manifest = generate_synthetic(cfg, args.out)
    save_json(cfg.to_dict(), args.out / "config.json")
    print(f"Wrote {len(manifest)} clips to {args.out}")


def _train(args: argparse.Namespace) -> None:
    match args.command:
        case "stage1":
            cfg = _stage_config(args, 1)
            manifest = load_manifest(cfg.dataset)

            def train(c):
                return train_stage1(c, manifest)

        case "stage2":
            cfg = _stage_config(args, 2)
            manifest = load_manifest(cfg.dataset)
            city_checkpoint = load_checkpoint(args.city_checkpoint)

            def train(c):
                return train_stage2(city_checkpoint, c, manifest)

        case "stage3":
            cfg = _stage_config(args, 3)
            manifest = load_manifest(cfg.dataset)
            teachers = [load_checkpoint(p) for p in cfg.teacher_checkpoints]

            def train(c):
                return train_stage3(c, teachers, manifest)

        case "baseline":
            cfg = _stage_config(args, 3)
            manifest = load_manifest(cfg.dataset)

            def train(c):
                return train_baseline(c, manifest)

        case _:
            raise ValueError(f"Unknown command {args.command}.")

    _, summary = run_seeds(cfg, _seeds(args, cfg), args.out, train, manifest)
    for key, values in summary["metrics"].items():
        print(f"{key}: {values['mean']:.4f} +- {values['std']:.4f}")


def _sweep(args: argparse.Namespace) -> None:
    cfg = _stage_config(args, 3)
    result = lambda_sweep(
        cfg,
        cfg.teacher_checkpoints,
        args.lambdas,
        _seeds(args, cfg),
        out_dir=args.out,
        jobs=args.jobs,
    )
    save_json(cfg.to_dict(), args.out / "config.json")
    for value, (mean, std) in result.aggregate().items():
        print(f"lambda={value:g}: {100 * mean:.1f} +- {100 * std:.1f}")
    if len(result.failures()) > 0:
        raise RuntimeError(f"{len(result.failures())} sweep run(s) failed")


def _dataset_for(args: argparse.Namespace, snapshot: dict) -> DatasetSettings:
    if args.config is not None or len(args.overrides) > 0:
        return StageConfig.from_dict(_config_data(args)).dataset
    return DatasetSettings.from_dict(snapshot.get("dataset", {}))


def _echo_config(
    args: argparse.Namespace, path: pathlib.Path, **resolved: object
) -> None:
    """
    Record what a read-only command actually ran with next to its output. The
    dataset entry is the one after --config and --set were applied.
    """
    data = {"command": args.command}
    data.update({key: value for key, value in resolved.items() if value is not None})
    data["overrides"] = list(args.overrides)
    save_json(data, path)


def _sibling_config(out: pathlib.Path) -> pathlib.Path:
    return out.with_name(f"{out.stem}.config.json")


def _evaluate(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = _dataset_for(args, checkpoint.config_snapshot)
    manifest = load_manifest(dataset)
    metrics = evaluate(checkpoint, manifest, Split(args.split))
    if args.out is not None:
        if args.out.suffix == "":
            out, echo = args.out / MetricsFileName, args.out / "config.json"
        else:
            out, echo = args.out, _sibling_config(args.out)
        metrics.to_json(out)
        _echo_config(
            args,
            echo,
            checkpoint=str(args.checkpoint),
            split=args.split,
            dataset=dataset.to_dict(),
        )
    print(f"overall accuracy: {100 * metrics.overall_accuracy:.1f}%")
    print(f"class mean accuracy: {100 * metrics.class_mean_accuracy():.1f}%")
    for label, value in metrics.per_class_accuracy.items():
        print(f"  {label}: {100 * value:.1f}%")


def _export(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = _dataset_for(args, checkpoint.config_snapshot)
    manifest = load_manifest(dataset)
    export_embeddings(checkpoint, manifest, args.out, split=args.split)
    _echo_config(
        args,
        _sibling_config(args.out),
        checkpoint=str(args.checkpoint),
        split=args.split,
        dataset=dataset.to_dict(),
    )


def _report(args: argparse.Namespace) -> None:
    report = classwise_report(
        Metrics.from_json(args.baseline), Metrics.from_json(args.treated)
    )
    print(report.to_text())
    if args.out is not None:
        report.to_csv(args.out)
        _echo_config(
            args,
            _sibling_config(args.out),
            baseline=str(args.baseline),
            treated=str(args.treated),
        )


def run(argv: list[str] | None = None) -> int:
    """Parses argv, runs one command and returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code) if err.code is not None else 0

    logging.basicConfig(level=args.log_level)
    try:
        match args.command:
            case "synth":
                _synth(args)
            case "stage1" | "stage2" | "stage3" | "baseline":
                _train(args)
            case "sweep":
                _sweep(args)
            case "eval":
                _evaluate(args)
            case "export-embeddings":
                _export(args)
            case "report":
                _report(args)
    except (
        ConfigurationError,
        CheckpointLoadError,
        AssertionError,
        RuntimeError,
        ValueError,
        KeyError,
        OSError,
    ) as err:
        message = str(err).splitlines()[0] if str(err) else type(err).__name__
        print(f"{ProgramName}: error: {message}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
