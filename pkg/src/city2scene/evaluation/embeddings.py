import logging
import pathlib

import pandas as pd
import torch

from city2scene.data.manifest import Manifest, Split
from city2scene.models.checkpoint import Checkpoint
from city2scene.pipeline.data import ClipFeatureStore


def compute_embeddings(
    checkpoint: Checkpoint, store: ClipFeatureStore, batch_size: int = 64
) -> torch.Tensor:
    """(M, D) inference-mode encoder outputs."""
    model = checkpoint.model
    model.eval()
    device = next(model.parameters()).device
    features = store.features(checkpoint.preprocessing)
    outputs = []
    with torch.no_grad():
        for start in range(0, features.shape[0], batch_size):
            batch = features[start : start + batch_size].to(device)
            outputs.append(model.encode(batch).cpu())
    return torch.cat(outputs)


def export_embeddings(
    checkpoint: Checkpoint,
    manifest: Manifest,
    out_path: str | pathlib.Path,
    split: Split | str | None = None,
) -> pd.DataFrame:
    """
    Writes one CSV row per clip: clip_id, city_label, scene_label and the
    embedding as columns e0..e{D-1}. Every clip is exported unless a split is given.
    """
    if not checkpoint.frozen_encoder:
        logging.getLogger("[city2scene::export_embeddings]").warning(
            f"Exporting the embeddings of a {checkpoint.role.value} checkpoint whose"
            " encoder is not frozen."
        )
    store = ClipFeatureStore.load(
        manifest, split, checkpoint.preprocessing.sample_rate_hz
    )
    embeddings = compute_embeddings(checkpoint, store).numpy()

    table = pd.DataFrame(
        {
            "clip_id": [r.clip_id for r in store.records],
            "city_label": [r.city_label for r in store.records],
            "scene_label": [r.scene_label for r in store.records],
        }
    )
    columns = pd.DataFrame(
        embeddings, columns=[f"e{i}" for i in range(embeddings.shape[1])]
    )
    table = pd.concat([table, columns], axis=1)

    out_path = pathlib.Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_path, index=False, float_format="%.8g")
    logging.getLogger("[city2scene::export_embeddings]").info(
        f"Wrote {len(table)} embeddings of dimension {embeddings.shape[1]} to"
        f" {out_path}."
    )
    return table
