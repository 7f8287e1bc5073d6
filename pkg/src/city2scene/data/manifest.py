import dataclasses
import logging
import pathlib
from enum import Enum

import pandas as pd
import soundfile as sf

MetaColumns = ["filename", "scene_label", "identifier", "source_label"]
MetaHeader = "\t".join(MetaColumns)
TrainSplitColumns = ["filename", "scene_label"]
TestSplitColumns = ["filename"]
TrainSplitFileName = "fold1_train.csv"
TestSplitFileName = "fold1_evaluate.csv"


class Split(Enum):
    train = "train"
    validation = "validation"
    test = "test"
    unused = "unused"


class ManifestParseError(ValueError):
    def __init__(self, source: str | pathlib.Path, line: int, reason: str):
        super().__init__(f"{source}, line {line}: {reason}")
        self.line = line


class SplitAssignmentError(ValueError):
    def __init__(self, source: str | pathlib.Path, filename: str):
        super().__init__(
            f"{source} lists {filename}, which is not part of the meta file."
        )


@dataclasses.dataclass
class ClipRecord:
    clip_id: str = dataclasses.field(default=None)
    scene_label: str = dataclasses.field(default=None)
    city_label: str = dataclasses.field(default=None)
    device_id: str = dataclasses.field(default=None)
    duration_s: float = dataclasses.field(default=None)
    path: pathlib.Path = dataclasses.field(default=None)
    identifier: str = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.path is not None:
            self.path = pathlib.Path(self.path)
        if self.identifier is None and self.city_label is not None:
            self.identifier = self.city_label
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValueError(
                f"Clip {self.clip_id} has a non-positive duration ({self.duration_s})."
            )

    @staticmethod
    def parse_filename(filename: str) -> tuple[str, str, str, str, str]:
        """
        Split a TAU file name into its tokens.
        :param filename: [scene]-[city]-[location]-[segment]-[device].wav, possibly
         preceded by a directory.
        :return: scene, city, location, segment and device tokens.
        """
        stem = pathlib.PurePosixPath(filename.replace("\\", "/")).stem
        tokens = stem.split("-")
        if len(tokens) != 5 or any(len(t) == 0 for t in tokens):
            raise ValueError(
                f"'{filename}' does not follow the"
                " [scene]-[city]-[location]-[segment]-[device].wav convention"
            )
        scene, city, location, segment, device = tokens
        return scene, city, location, segment, device


@dataclasses.dataclass
class Manifest:
    records: list[ClipRecord] = dataclasses.field(default_factory=list)
    scene_vocab: list[str] = dataclasses.field(default_factory=list)
    city_vocab: list[str] = dataclasses.field(default_factory=list)
    split_assignment: dict[str, Split] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [r.clip_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("The manifest contains duplicated clip ids.")

        scenes = set(self.scene_vocab)
        cities = set(self.city_vocab)
        for record in self.records:
            if record.scene_label not in scenes:
                raise ValueError(
                    f"Scene label {record.scene_label} of {record.clip_id}"
                    " is not in the scene vocabulary."
                )
            if record.city_label not in cities:
                raise ValueError(
                    f"City label {record.city_label} of {record.clip_id}"
                    " is not in the city vocabulary."
                )
            if record.clip_id not in self.split_assignment:
                self.split_assignment[record.clip_id] = Split.train

    @classmethod
    def from_records(
        cls,
        records: list[ClipRecord],
        split_assignment: dict[str, Split] | None = None,
    ) -> "Manifest":
        return cls(
            records=list(records),
            scene_vocab=sorted({r.scene_label for r in records}),
            city_vocab=sorted({r.city_label for r in records}),
            split_assignment=dict(split_assignment) if split_assignment else {},
        )

    def scene_index(self, label: str) -> int:
        return self.scene_vocab.index(label)

    def city_index(self, label: str) -> int:
        return self.city_vocab.index(label)

    def split_of(self, clip_id: str) -> Split:
        return self.split_assignment[clip_id]

    def records_in(self, split: Split | str) -> list[ClipRecord]:
        split = Split(split)
        return [r for r in self.records if self.split_assignment[r.clip_id] is split]

    def with_splits(self, split_assignment: dict[str, Split]) -> "Manifest":
        return dataclasses.replace(
            self,
            records=list(self.records),
            split_assignment=dict(split_assignment),
        )

    def pairs(self) -> dict[tuple[str, str], list[ClipRecord]]:
        output = {}
        for record in self.records:
            output.setdefault((record.scene_label, record.city_label), []).append(
                record
            )
        return output

    def __len__(self) -> int:
        return len(self.records)


def _read_tsv(path: pathlib.Path) -> pd.DataFrame:
    return pd.read_csv(
        path,
        sep="\t",
        dtype=str,
        keep_default_na=False,
        encoding="utf-8",
        quoting=3,  # csv.QUOTE_NONE
        skip_blank_lines=True,
    )


def _read_duration(path: pathlib.Path, default_duration_s: float) -> float:
    if path.is_file():
        return float(sf.info(str(path)).duration)
    return default_duration_s


def parse_manifest(
    meta_file: str | pathlib.Path,
    split_files: (
        tuple[str | pathlib.Path | None, str | pathlib.Path | None] | None
    ) = None,
    default_duration_s: float = 10.0,
) -> Manifest:
    """
    Parse a TAU-convention meta file.
    :param meta_file: Tab-separated file with the header
     filename, scene_label, identifier, source_label.
    :param split_files: Optional (train, test) split files. The train file has the
     header filename, scene_label, the test file the header filename. Records listed
     in neither file are marked as unused.
    :param default_duration_s: Duration given to records whose audio is not on disk.
    :return: The manifest, with vocabularies sorted alphabetically.
    """
    logger = logging.getLogger("[city2scene::parse_manifest]")
    meta_file = pathlib.Path(meta_file)
    root = meta_file.parent

    with open(meta_file, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()

    if len(lines) == 0 or lines[0].split("\t") != MetaColumns:
        raise ManifestParseError(
            meta_file, 1, f"expected the header {MetaHeader!r}"
        )

    records = []
    filenames = {}
    for line_number, line in enumerate(lines[1:], start=2):
        if line.strip() == "":
            continue
        columns = line.split("\t")
        if len(columns) != len(MetaColumns):
            raise ManifestParseError(
                meta_file,
                line_number,
                f"expected {len(MetaColumns)} tab-separated columns,"
                f" found {len(columns)}",
            )
        filename, scene_label, identifier, source_label = columns
        try:
            scene, city, _, _, device = ClipRecord.parse_filename(filename)
        except ValueError as err:
            raise ManifestParseError(meta_file, line_number, str(err)) from err

        if scene != scene_label:
            raise ManifestParseError(
                meta_file,
                line_number,
                f"scene label '{scene_label}' does not match the file name"
                f" token '{scene}'",
            )

        clip_id = pathlib.PurePosixPath(filename).stem
        if clip_id in filenames:
            raise ManifestParseError(
                meta_file, line_number, f"duplicated clip {clip_id}"
            )
        path = root / filename
        records.append(
            ClipRecord(
                clip_id=clip_id,
                scene_label=scene_label,
                city_label=city,
                device_id=source_label if source_label else device,
                duration_s=_read_duration(path, default_duration_s),
                path=path,
                identifier=identifier,
            )
        )
        filenames[filename] = clip_id

    split_assignment = {}
    train_file, test_file = split_files if split_files is not None else (None, None)
    if train_file is not None or test_file is not None:
        split_assignment = {r.clip_id: Split.unused for r in records}
        for split_file, split, header in (
            (train_file, Split.train, TrainSplitColumns),
            (test_file, Split.test, TestSplitColumns),
        ):
            if split_file is None:
                continue
            table = _read_tsv(pathlib.Path(split_file))
            if list(table.columns)[: len(header)] != header:
                header_text = "\t".join(header)
                raise ManifestParseError(
                    split_file, 1, f"expected the header {header_text!r}"
                )
            for filename in table["filename"]:
                if filename not in filenames:
                    raise SplitAssignmentError(split_file, filename)
                split_assignment[filenames[filename]] = split

        unused = sum(1 for s in split_assignment.values() if s is Split.unused)
        if unused > 0:
            logger.info(f"{unused} records are listed in no split file.")

    manifest = Manifest.from_records(records, split_assignment=split_assignment)
    logger.debug(
        f"Parsed {len(manifest)} records, {len(manifest.scene_vocab)} scenes,"
        f" {len(manifest.city_vocab)} cities from {meta_file}."
    )
    return manifest


def _relative_filename(path: pathlib.Path, root: pathlib.Path) -> str:
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return path.as_posix()


def write_manifest(
    manifest: Manifest,
    meta_file: str | pathlib.Path,
    split_dir: str | pathlib.Path | None = None,
) -> None:
    """
    Write the manifest in TAU convention. When split_dir is given, the train and
    test split files are written there as fold1_train.csv and fold1_evaluate.csv.
    Validation clips are written to the train split file.
    """
    meta_file = pathlib.Path(meta_file)
    meta_file.parent.mkdir(parents=True, exist_ok=True)
    root = meta_file.parent

    rows = []
    for record in manifest.records:
        rows.append(
            [
                _relative_filename(record.path, root),
                record.scene_label,
                record.identifier,
                record.device_id,
            ]
        )
    pd.DataFrame(rows, columns=MetaColumns).to_csv(
        meta_file, sep="\t", index=False, encoding="utf-8", lineterminator="\n"
    )

    if split_dir is None:
        return

    split_dir = pathlib.Path(split_dir)
    split_dir.mkdir(parents=True, exist_ok=True)
    train_rows = []
    test_rows = []
    for record, row in zip(manifest.records, rows):
        match manifest.split_assignment[record.clip_id]:
            case Split.train | Split.validation:
                train_rows.append([row[0], record.scene_label])
            case Split.test:
                test_rows.append([row[0]])
            case _:
                pass
    pd.DataFrame(train_rows, columns=TrainSplitColumns).to_csv(
        split_dir / TrainSplitFileName, sep="\t", index=False, lineterminator="\n"
    )
    pd.DataFrame(test_rows, columns=TestSplitColumns).to_csv(
        split_dir / TestSplitFileName, sep="\t", index=False, lineterminator="\n"
    )

    folded = len(manifest.records_in(Split.validation))
    if folded > 0:
        logging.getLogger("[city2scene::write_manifest]").info(
            f"{folded} validation clips were written to {TrainSplitFileName}."
        )
