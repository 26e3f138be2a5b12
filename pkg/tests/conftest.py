"""Shared test helpers: tiny corpora on disk and in memory."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from streambatch import BatchProfile, ExampleMeta, Modality


def make_example(
    id: str,
    input_length: float,
    output_length: int,
    source: str = "src",
    modality: Modality = Modality.AUDIO,
) -> ExampleMeta:
    return ExampleMeta(
        id=id,
        source_id=source,
        modality=modality,
        input_length=input_length,
        output_length=output_length,
    )


def write_shard(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record, sort_keys=True) for record in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_corpus(root: Path, datasets: list[dict]) -> Path:
    """Write shards plus a manifest for the given datasets.

    Each dataset dict: source_id, modality, examples (list of
    (input_length, output_length)), and optional num_shards / weight / seed.
    """
    entries = []
    for dataset in datasets:
        source_id = dataset["source_id"]
        modality = dataset["modality"]
        examples = dataset["examples"]
        num_shards = dataset.get("num_shards", 1)
        per_shard = (len(examples) + num_shards - 1) // num_shards
        for shard_index in range(num_shards):
            chunk = examples[shard_index * per_shard : (shard_index + 1) * per_shard]
            records = [
                {
                    "id": f"{source_id}-{shard_index * per_shard + k:06d}",
                    "modality": modality,
                    "input_length": inp,
                    "output_length": out,
                }
                for k, (inp, out) in enumerate(chunk)
            ]
            write_shard(root / "shards" / f"{source_id}-{shard_index:04d}.jsonl", records)
        entry = {
            "source_id": source_id,
            "modality": modality,
            "shards": [f"shards/{source_id}-*.jsonl"],
        }
        for key in ("weight", "seed"):
            if key in dataset:
                entry[key] = dataset[key]
        entries.append(entry)
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"version": 1, "datasets": entries}, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest


def ones_profile(num_buckets: int, num_subbuckets: int) -> BatchProfile:
    return BatchProfile(
        grid=tuple(tuple(1 for _ in range(num_subbuckets)) for _ in range(num_buckets))
    )


def lognormal_sample(n, seed, mu=3.0, sigma=0.5, out_slope=0.5, out_noise=50):
    import numpy as np

    rng = np.random.default_rng(seed)
    inputs = rng.lognormal(mu, sigma, n)
    outputs = np.rint(out_slope * inputs).astype(int) + rng.integers(0, out_noise + 1, n)
    return [
        make_example(f"e{k:07d}", float(inputs[k]), int(outputs[k])) for k in range(n)
    ]


@pytest.fixture
def simple_manifest(tmp_path: Path) -> Path:
    """One audio dataset, 10 examples across 2 shards, no explicit weight."""
    examples = [(float(k + 1), 2 * (k + 1)) for k in range(10)]
    return write_corpus(
        tmp_path,
        [
            {
                "source_id": "audio_a",
                "modality": "audio",
                "examples": examples,
                "num_shards": 2,
            }
        ],
    )
