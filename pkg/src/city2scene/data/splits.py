import logging

import numpy as np

from city2scene.data.manifest import ClipRecord, Manifest, Split


def _stratified_assignment(
    groups: dict[tuple[str, str], list[ClipRecord]],
    fraction: float,
    held_out: Split,
    seed: int,
    logger: logging.Logger,
) -> dict[str, Split]:
    rng = np.random.default_rng(seed)
    assignment = {}
    for pair in sorted(groups):
        records = groups[pair]
        if len(records) < 2:
            logger.warning(
                f"Pair {pair} has {len(records)} clip(s); it is kept in the"
                f" train split and is not represented in the {held_out.value} split."
            )
            continue

        number_held_out = int(
            np.clip(round(len(records) * fraction), 1, len(records) - 1)
        )
        order = rng.permutation(len(records))
        for i in order[:number_held_out]:
            assignment[records[i].clip_id] = held_out

    return assignment


def stratified_split(manifest: Manifest, test_fraction: float, seed: int) -> Manifest:
    """
    Assign clips to the train and test splits so that every (scene, city) pair with
    at least two clips appears in both.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}.")

    logger = logging.getLogger("[city2scene::stratified_split]")
    assignment = {r.clip_id: Split.train for r in manifest.records}
    assignment.update(
        _stratified_assignment(
            groups=manifest.pairs(),
            fraction=test_fraction,
            held_out=Split.test,
            seed=seed,
            logger=logger,
        )
    )
    return manifest.with_splits(assignment)


def carve_validation(manifest: Manifest, fraction: float, seed: int) -> Manifest:
    """
    Move a stratified fraction of the train clips to the validation split.
    """
    if fraction == 0.0:
        return manifest
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"The validation fraction must be in [0, 1), got {fraction}.")

    logger = logging.getLogger("[city2scene::carve_validation]")
    groups = {}
    for record in manifest.records_in(Split.train):
        groups.setdefault((record.scene_label, record.city_label), []).append(record)

    assignment = dict(manifest.split_assignment)
    assignment.update(
        _stratified_assignment(
            groups=groups,
            fraction=fraction,
            held_out=Split.validation,
            seed=seed,
            logger=logger,
        )
    )
    return manifest.with_splits(assignment)
