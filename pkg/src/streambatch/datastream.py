"""Manifest-described datasets as infinitely repeating, shard-shuffled streams.

A corpus is described by a top-level JSON manifest listing datasets, each of
which points at one or more JSONL shard files. The stream layer never touches
payloads (audio, text); it deals exclusively in per-example sampling metadata.

Manifest format (``manifest.json``)::

    {
      "version": 1,
      "datasets": [
        {
          "source_id": "audio_clean",
          "modality": "audio",
          "shards": ["shards/audio_clean-*.jsonl"],
          "weight": 123.0,        // optional; defaults to the example count
          "seed": 7               // optional; defaults to a seed derived from
                                  // (default_seed, source_id)
        }
      ]
    }

Shard globs are resolved relative to the manifest's directory and sorted, so
a manifest names the same shard sequence on every filesystem.

Shard format: UTF-8 JSON lines, one example per line::

    {"id": "audio_clean-000001", "modality": "audio",
     "input_length": 3.25, "output_length": 17}

``input_length`` is seconds for audio and a token count for text;
``output_length`` is the target token count.
"""

from __future__ import annotations

import glob as globlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator

from .errors import ConfigurationError, ManifestError, ShardReadError
from .seeding import derive_seed

MANIFEST_VERSION = 1

_EXAMPLE_FIELDS = ("id", "modality", "input_length", "output_length")


class Modality(str, Enum):
    AUDIO = "audio"
    TEXT = "text"


@dataclass(frozen=True, slots=True)
class ExampleMeta:
    """Sampling-relevant metadata for one training example."""

    id: str
    source_id: str
    modality: Modality
    input_length: float
    output_length: int

    def __post_init__(self):
        if self.input_length < 0:
            raise ValueError(f"input_length must be >= 0, got {self.input_length}")
        if self.output_length < 0:
            raise ValueError(f"output_length must be >= 0, got {self.output_length}")


@dataclass(frozen=True)
class StreamSpec:
    """One dataset viewed as an infinite sequential stream."""

    source_id: str
    shard_paths: tuple[str, ...]
    weight: float
    seed: int
    modality: Modality

    def __post_init__(self):
        if self.weight <= 0:
            raise ConfigurationError(
                f"dataset {self.source_id!r}: weight must be > 0, got {self.weight}"
            )
        if not self.shard_paths:
            raise ConfigurationError(f"dataset {self.source_id!r}: no shard files")


@dataclass(frozen=True)
class Shard:
    path: str
    examples: tuple[ExampleMeta, ...]


def _parse_example(record: dict, source_id: str, path: str, lineno: int) -> ExampleMeta:
    for name in _EXAMPLE_FIELDS:
        if name not in record:
            raise ManifestError(f"{path}:{lineno}: missing field {name!r}")
    try:
        modality = Modality(record["modality"])
    except ValueError:
        raise ManifestError(
            f"{path}:{lineno}: modality must be 'audio' or 'text', got {record['modality']!r}"
        ) from None
    try:
        example = ExampleMeta(
            id=str(record["id"]),
            source_id=source_id,
            modality=modality,
            input_length=float(record["input_length"]),
            output_length=int(record["output_length"]),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{path}:{lineno}: {exc}") from None
    return example


def read_shard(path: str | Path, source_id: str) -> Shard:
    """Load and validate one shard file (strict: any bad line is an error)."""
    path = str(path)
    examples: list[ExampleMeta] = []
    seen_ids: set[str] = set()
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
                if not isinstance(record, dict):
                    raise ManifestError(f"{path}:{lineno}: expected a JSON object")
                example = _parse_example(record, source_id, path, lineno)
                if example.id in seen_ids:
                    raise ManifestError(f"{path}:{lineno}: duplicate id {example.id!r}")
                seen_ids.add(example.id)
                examples.append(example)
    except OSError as exc:
        raise ShardReadError(path, exc) from exc
    return Shard(path=path, examples=tuple(examples))


def load_manifest(path: str | Path, *, default_seed: int = 0) -> list[StreamSpec]:
    """Parse a top-level manifest into one StreamSpec per declared dataset.

    When a dataset omits ``weight``, its natural weight is the dataset's total
    example count, which requires one validating pass over its shards.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None

    if not isinstance(payload, dict) or "datasets" not in payload:
        raise ManifestError(f"{path}: manifest must be an object with a 'datasets' list")
    datasets = payload["datasets"]
    if not isinstance(datasets, list) or not datasets:
        raise ConfigurationError(f"{path}: manifest declares no datasets")

    specs: list[StreamSpec] = []
    seen_sources: set[str] = set()
    for entry in datasets:
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}: dataset entries must be JSON objects")
        for name in ("source_id", "modality", "shards"):
            if name not in entry:
                raise ManifestError(f"{path}: dataset entry missing field {name!r}")
        source_id = str(entry["source_id"])
        if source_id in seen_sources:
            raise ConfigurationError(f"{path}: duplicate source_id {source_id!r}")
        seen_sources.add(source_id)
        try:
            modality = Modality(entry["modality"])
        except ValueError:
            raise ManifestError(
                f"{path}: dataset {source_id!r}: bad modality {entry['modality']!r}"
            ) from None

        patterns = entry["shards"]
        if isinstance(patterns, str):
            patterns = [patterns]
        shard_paths: list[str] = []
        for pattern in patterns:
            resolved = str(path.parent / pattern)
            shard_paths.extend(sorted(globlib.glob(resolved)))
        if not shard_paths:
            raise ConfigurationError(
                f"{path}: dataset {source_id!r}: no shard files match {patterns!r}"
            )

        weight = entry.get("weight")
        if weight is None:
            weight = float(
                sum(len(read_shard(p, source_id).examples) for p in shard_paths)
            )
            if weight == 0:
                raise ConfigurationError(f"{path}: dataset {source_id!r} is empty")
        else:
            weight = float(weight)

        seed = entry.get("seed")
        if seed is None:
            seed = derive_seed(default_seed, "stream", source_id)

        specs.append(
            StreamSpec(
                source_id=source_id,
                shard_paths=tuple(shard_paths),
                weight=weight,
                seed=int(seed),
                modality=modality,
            )
        )
    return specs


def shard_visit_order(seed: int, pass_index: int, num_shards: int) -> list[int]:
    """Shard visitation order for one pass: a seeded shuffle of (seed, pass).

    Exposed so the reshuffling contract can be checked by direct recomputation.
    """
    order = list(range(num_shards))
    random.Random(derive_seed(seed, "shard-order", pass_index)).shuffle(order)
    return order


def open_stream(spec: StreamSpec) -> Iterator[ExampleMeta]:
    """Yield the dataset's examples indefinitely.

    Within each pass, shards are visited in the order given by
    :func:`shard_visit_order` and each shard's examples are yielded in a
    seeded-shuffled order; both orders are reshuffled at every pass boundary.
    Every example appears exactly once per pass. Shards are re-read from disk
    when visited, so memory stays bounded by the largest shard.

    The returned iterator is single-consumer: hand it off between threads if
    you like, but never share it between two simultaneous consumers.
    """
    pass_index = 0
    while True:
        for shard_pos in shard_visit_order(spec.seed, pass_index, len(spec.shard_paths)):
            shard = read_shard(spec.shard_paths[shard_pos], spec.source_id)
            indices = list(range(len(shard.examples)))
            random.Random(
                derive_seed(spec.seed, "shard", pass_index, shard_pos)
            ).shuffle(indices)
            for i in indices:
                yield shard.examples[i]
        pass_index += 1


def count_dataset(spec: StreamSpec) -> tuple[int, float, float]:
    """Exact (num_examples, total input mass, total output mass) over one pass."""
    num = 0
    input_mass = 0.0
    output_mass = 0.0
    for path in spec.shard_paths:
        shard = read_shard(path, spec.source_id)
        num += len(shard.examples)
        input_mass += sum(ex.input_length for ex in shard.examples)
        output_mass += sum(ex.output_length for ex in shard.examples)
    return num, input_mass, output_mass
