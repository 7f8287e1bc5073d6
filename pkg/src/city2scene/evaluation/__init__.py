from . import embeddings, metrics, report, runs, sweep
from .embeddings import compute_embeddings, export_embeddings
from .metrics import Metrics, evaluate, metrics_from_predictions
from .report import ClasswiseReport, ClasswiseRow, classwise_report
from .runs import RunDirectory, run_seeds
from .sweep import (
    SweepResult,
    SweepRow,
    lambda_sweep,
    parse_lambda_range,
    plot_sweeps,
    read_sweep_csv,
    write_sweep_csv,
)
