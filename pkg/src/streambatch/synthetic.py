"""Deterministic synthetic corpora for profiling and simulation runs.

A corpus config describes, per dataset: an input-length distribution, a
linear input-to-output relation with additive uniform noise (weak length
correlation), and an output-length outlier rate/scale (rare examples whose
targets are several times longer than usual, the case that starves 1D
bucketing). Generation is a pure function of the config, including its seed.

Draw order per dataset is fixed: input lengths, then output noise, then the
outlier mask, each from one generator seeded by (corpus seed, source_id).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datastream import Modality
from .errors import ConfigurationError
from .seeding import derive_seed


@dataclass(frozen=True)
class LengthDistribution:
    kind: str = "lognormal"  # "lognormal" (mu/sigma of log) or "uniform" (low/high)
    mu: float = 3.0
    sigma: float = 0.5
    low: float = 1.0
    high: float = 10.0

    def __post_init__(self):
        if self.kind not in ("lognormal", "uniform"):
            raise ConfigurationError(f"unknown length distribution {self.kind!r}")
        if self.kind == "lognormal" and self.sigma <= 0:
            raise ConfigurationError("lognormal sigma must be > 0")
        if self.kind == "uniform" and not 0 <= self.low <= self.high:
            raise ConfigurationError("uniform needs 0 <= low <= high")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "lognormal":
            return rng.lognormal(self.mu, self.sigma, n)
        return rng.uniform(self.low, self.high, n)

    def to_json_dict(self) -> dict:
        if self.kind == "lognormal":
            return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}
        return {"kind": self.kind, "low": self.low, "high": self.high}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "LengthDistribution":
        return cls(**payload)


@dataclass(frozen=True)
class OutputLengthModel:
    """output = round(slope * input + offset) + U{0..noise}, outliers scaled up."""

    slope: float = 0.5
    offset: float = 0.0
    noise: int = 50
    outlier_rate: float = 0.0
    outlier_scale: float = 10.0

    def __post_init__(self):
        if self.noise < 0:
            raise ConfigurationError("noise must be >= 0")
        if not 0 <= self.outlier_rate <= 1:
            raise ConfigurationError("outlier_rate must be in [0, 1]")
        if self.outlier_scale < 1:
            raise ConfigurationError("outlier_scale must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "slope": self.slope,
            "offset": self.offset,
            "noise": self.noise,
            "outlier_rate": self.outlier_rate,
            "outlier_scale": self.outlier_scale,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "OutputLengthModel":
        return cls(**payload)


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    source_id: str
    modality: Modality
    num_examples: int
    input_length: LengthDistribution = LengthDistribution()
    output_length: OutputLengthModel = OutputLengthModel()
    num_shards: int = 1
    weight: float | None = None

    def __post_init__(self):
        if self.num_examples < 1:
            raise ConfigurationError("num_examples must be >= 1")
        if not 1 <= self.num_shards <= self.num_examples:
            raise ConfigurationError("num_shards must be in [1, num_examples]")

    def to_json_dict(self) -> dict:
        payload = {
            "source_id": self.source_id,
            "modality": self.modality.value,
            "num_examples": self.num_examples,
            "num_shards": self.num_shards,
            "input_length": self.input_length.to_json_dict(),
            "output_length": self.output_length.to_json_dict(),
        }
        if self.weight is not None:
            payload["weight"] = self.weight
        return payload

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SyntheticDatasetConfig":
        return cls(
            source_id=str(payload["source_id"]),
            modality=Modality(payload["modality"]),
            num_examples=int(payload["num_examples"]),
            num_shards=int(payload.get("num_shards", 1)),
            input_length=LengthDistribution.from_json_dict(
                payload.get("input_length", {})
            ),
            output_length=OutputLengthModel.from_json_dict(
                payload.get("output_length", {})
            ),
            weight=payload.get("weight"),
        )


@dataclass(frozen=True)
class CorpusConfig:
    seed: int
    datasets: tuple[SyntheticDatasetConfig, ...]

    def __post_init__(self):
        if not self.datasets:
            raise ConfigurationError("corpus config declares no datasets")
        ids = [ds.source_id for ds in self.datasets]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate source_id in corpus config")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "datasets": [ds.to_json_dict() for ds in self.datasets],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "CorpusConfig":
        return cls(
            seed=int(payload["seed"]),
            datasets=tuple(
                SyntheticDatasetConfig.from_json_dict(entry)
                for entry in payload["datasets"]
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> "CorpusConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _generate_dataset(
    config: SyntheticDatasetConfig, corpus_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(derive_seed(corpus_seed, "dataset", config.source_id))
    n = config.num_examples
    inputs = config.input_length.sample(rng, n)
    if config.modality is Modality.TEXT:
        inputs = np.maximum(1, np.rint(inputs))
    else:
        inputs = np.round(inputs, 3)
    out_model = config.output_length
    outputs = np.rint(out_model.slope * inputs + out_model.offset)
    outputs = outputs + rng.integers(0, out_model.noise + 1, n)
    outlier_mask = rng.random(n) < out_model.outlier_rate
    outputs[outlier_mask] = np.rint(outputs[outlier_mask] * out_model.outlier_scale)
    outputs = np.maximum(outputs, 0).astype(np.int64)
    return inputs, outputs


def generate_corpus(config: CorpusConfig, out_dir: str | Path) -> Path:
    """Write shard files plus a manifest under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    shard_dir = out_dir / "shards"
    shard_dir.mkdir(parents=True, exist_ok=True)

    manifest_entries = []
    for dataset in config.datasets:
        inputs, outputs = _generate_dataset(dataset, config.seed)
        is_text = dataset.modality is Modality.TEXT
        bounds = np.linspace(0, dataset.num_examples, dataset.num_shards + 1).astype(int)
        for shard_index in range(dataset.num_shards):
            start, stop = bounds[shard_index], bounds[shard_index + 1]
            lines = []
            for k in range(start, stop):
                record = {
                    "id": f"{dataset.source_id}-{k:08d}",
                    "modality": dataset.modality.value,
                    "input_length": int(inputs[k]) if is_text else float(inputs[k]),
                    "output_length": int(outputs[k]),
                }
                lines.append(json.dumps(record, sort_keys=True))
            shard_path = shard_dir / f"{dataset.source_id}-{shard_index:05d}.jsonl"
            shard_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        entry = {
            "source_id": dataset.source_id,
            "modality": dataset.modality.value,
            "shards": [f"shards/{dataset.source_id}-*.jsonl"],
        }
        if dataset.weight is not None:
            entry["weight"] = dataset.weight
        manifest_entries.append(entry)

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps({"version": 1, "datasets": manifest_entries}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    return manifest_path


# Ready-made corpora. "demo" is a small three-dataset mix for smoke runs;
# "profiling" is the corpus the profiling comparisons are tuned on: weakly
# length-correlated outputs with 2% heavy output-length outliers, the regime
# where output-length stratification pays off.
PRESETS: dict[str, CorpusConfig] = {
    "demo": CorpusConfig(
        seed=2024,
        datasets=(
            SyntheticDatasetConfig(
                source_id="audio_a",
                modality=Modality.AUDIO,
                num_examples=300,
                num_shards=2,
                input_length=LengthDistribution(kind="lognormal", mu=2.5, sigma=0.5),
                output_length=OutputLengthModel(slope=0.8, noise=20),
            ),
            SyntheticDatasetConfig(
                source_id="audio_b",
                modality=Modality.AUDIO,
                num_examples=700,
                num_shards=2,
                input_length=LengthDistribution(kind="lognormal", mu=3.0, sigma=0.4),
                output_length=OutputLengthModel(slope=0.6, noise=30),
            ),
            SyntheticDatasetConfig(
                source_id="text_a",
                modality=Modality.TEXT,
                num_examples=1000,
                num_shards=2,
                input_length=LengthDistribution(kind="lognormal", mu=4.0, sigma=0.6),
                output_length=OutputLengthModel(slope=1.0, offset=2, noise=40),
            ),
        ),
    ),
    "profiling": CorpusConfig(
        seed=31415,
        datasets=(
            SyntheticDatasetConfig(
                source_id="audio_main",
                modality=Modality.AUDIO,
                num_examples=20_000,
                num_shards=4,
                input_length=LengthDistribution(kind="lognormal", mu=3.0, sigma=0.5),
                output_length=OutputLengthModel(
                    slope=0.5, noise=50, outlier_rate=0.02, outlier_scale=5.0
                ),
            ),
        ),
    ),
}
