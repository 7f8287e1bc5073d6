import dataclasses
import pathlib

import pandas as pd

from city2scene.base.errors import VocabularyMismatchError
from city2scene.evaluation.metrics import Metrics

AverageLabel = "Average"
ClassMeanLabel = "Class mean"


def _percent(fraction: float) -> float:
    return round(100.0 * fraction, 1)


@dataclasses.dataclass
class ClasswiseRow:
    label: str = dataclasses.field(default=None)
    baseline: float = dataclasses.field(default=None)
    treated: float = dataclasses.field(default=None)
    diff: float = dataclasses.field(default=None)

    @classmethod
    def compare(cls, label: str, baseline: float, treated: float) -> "ClasswiseRow":
        """Percentages rounded to one decimal; the diff is taken on the rounded
        values so that it matches the printed columns."""
        baseline = _percent(baseline)
        treated = _percent(treated)
        return cls(
            label=label,
            baseline=baseline,
            treated=treated,
            diff=round(treated - baseline, 1),
        )


@dataclasses.dataclass
class ClasswiseReport:
    rows: list[ClasswiseRow] = dataclasses.field(default_factory=list)
    average: ClasswiseRow = dataclasses.field(default=None)
    class_mean: ClasswiseRow = dataclasses.field(default=None)

    def row(self, label: str) -> ClasswiseRow:
        for row in self.all_rows():
            if row.label == label:
                return row
        raise KeyError(label)

    def all_rows(self) -> list[ClasswiseRow]:
        return self.rows + [self.average, self.class_mean]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [dataclasses.astuple(r) for r in self.all_rows()],
            columns=["class", "baseline", "treated", "diff"],
        )

    def to_text(self) -> str:
        width = max(len(r.label) for r in self.all_rows())
        width = max(width, len("Class"))
        lines = [f"{'Class':<{width}}  {'Baseline':>8}  {'Treated':>8}  {'Diff':>6}"]
        separator = "-" * len(lines[0])
        lines.append(separator)
        for i, row in enumerate(self.all_rows()):
            if i == len(self.rows):
                lines.append(separator)
            lines.append(
                f"{row.label:<{width}}  {row.baseline:>8.1f}  {row.treated:>8.1f}"
                f"  {row.diff:>+6.1f}"
            )
        return "\n".join(lines)

    def to_csv(self, path: str | pathlib.Path) -> None:
        path = pathlib.Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.1f")


def classwise_report(baseline: Metrics, treated: Metrics) -> ClasswiseReport:
    """
    One row per class, then the overall (clip-level) accuracy as Average and the
    unweighted class mean.
    """
    if list(baseline.per_class_accuracy) != list(treated.per_class_accuracy):
        raise VocabularyMismatchError(
            "class-wise report",
            list(baseline.per_class_accuracy),
            list(treated.per_class_accuracy),
        )

    rows = [
        ClasswiseRow.compare(label, value, treated.per_class_accuracy[label])
        for label, value in baseline.per_class_accuracy.items()
    ]
    return ClasswiseReport(
        rows=rows,
        average=ClasswiseRow.compare(
            AverageLabel, baseline.overall_accuracy, treated.overall_accuracy
        ),
        class_mean=ClasswiseRow.compare(
            ClassMeanLabel,
            baseline.class_mean_accuracy(),
            treated.class_mean_accuracy(),
        ),
    )
