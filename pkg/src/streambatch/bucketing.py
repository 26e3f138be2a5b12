"""Equal-mass 1D/2D bucketing and the dynamic bucketing batch sampler.

Buckets stratify a stream by input length; each bucket optionally carries
sub-buckets that stratify further by output length, so examples grouped into
one mini-batch have similar lengths on both axes and padding stays small.
Bin edges are estimated from a sample so that every bucket (and sub-bucket)
holds approximately the same total mass, which evens out how often each
bucket fills despite long-sequence buckets using smaller batch sizes.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterator, NamedTuple, Sequence

from .datastream import ExampleMeta, Modality
from .errors import ConfigurationError

if TYPE_CHECKING:  # avoid an import cycle; the sampler only touches .grid
    from .oomptimizer import BatchProfile

TREE_FORMAT_VERSION = 1


class MassMeasure(str, Enum):
    """What "equal mass" means: summed lengths, or plain example counts."""

    INPUT_MASS = "input_mass"
    EXAMPLE_COUNT = "example_count"


@dataclass(frozen=True)
class BucketConfig:
    num_buckets: int = 10
    num_subbuckets: int = 10  # 1 means plain 1D bucketing
    sample_size: int = 500_000
    mass_measure: MassMeasure = MassMeasure.INPUT_MASS

    def __post_init__(self):
        if self.num_buckets < 1 or self.num_subbuckets < 1:
            raise ConfigurationError("bucket counts must be >= 1")
        if self.sample_size < self.num_buckets * self.num_subbuckets:
            raise ConfigurationError(
                f"sample_size {self.sample_size} smaller than the "
                f"{self.num_buckets}x{self.num_subbuckets} bucket grid"
            )


@dataclass(frozen=True)
class BucketTree:
    """Bucket upper bounds: ``input_edges[i]`` and, per bucket, ``output_edges[i][j]``.

    ``degenerate`` flags the all-equal-lengths case where every input edge
    collapsed to the same value.
    """

    input_edges: tuple[float, ...]
    output_edges: tuple[tuple[int, ...], ...]
    degenerate: bool = False

    def __post_init__(self):
        if not self.input_edges:
            raise ConfigurationError("tree needs at least one input edge")
        if len(self.output_edges) != len(self.input_edges):
            raise ConfigurationError("one output-edge list required per input bucket")
        if any(a > b for a, b in zip(self.input_edges, self.input_edges[1:])):
            raise ConfigurationError("input edges must be non-decreasing")
        width = len(self.output_edges[0])
        for row in self.output_edges:
            if len(row) != width or not row:
                raise ConfigurationError("output-edge lists must be non-empty and equal-length")
            if any(a > b for a, b in zip(row, row[1:])):
                raise ConfigurationError("output edges must be non-decreasing")

    @property
    def num_buckets(self) -> int:
        return len(self.input_edges)

    @property
    def num_subbuckets(self) -> int:
        return len(self.output_edges[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_buckets, self.num_subbuckets)

    def to_json_dict(self) -> dict:
        return {
            "format_version": TREE_FORMAT_VERSION,
            "num_buckets": self.num_buckets,
            "num_subbuckets": self.num_subbuckets,
            "input_edges": list(self.input_edges),
            "output_edges": [list(row) for row in self.output_edges],
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "BucketTree":
        version = payload.get("format_version")
        if version != TREE_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported tree format_version {version!r}")
        return cls(
            input_edges=tuple(float(e) for e in payload["input_edges"]),
            output_edges=tuple(
                tuple(int(e) for e in row) for row in payload["output_edges"]
            ),
            degenerate=bool(payload.get("degenerate", False)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "BucketTree":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class BucketIndex(NamedTuple):
    i: int
    j: int
    outlier: bool


@dataclass(frozen=True)
class MiniBatch:
    """A sampled batch: examples plus the padding-relevant maxima."""

    examples: tuple[ExampleMeta, ...]
    modality: Modality
    bucket_index: tuple[int, int]
    max_input_length: float
    max_output_length: int
    outlier_flags: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.examples)


def _greedy_cuts(masses: Sequence[float], num_bins: int) -> list[int]:
    """Inclusive end positions of each bin under the greedy equal-mass rule.

    Bin k ends at the first element where cumulative mass reaches
    k * total / num_bins; a single heavy element may close several bins at
    once, leaving the intermediate bins empty.
    """
    total = sum(masses)
    targets = [k * total / num_bins for k in range(1, num_bins + 1)]
    cuts: list[int] = []
    cumulative = 0.0
    for position, mass in enumerate(masses):
        cumulative += mass
        while len(cuts) < num_bins and cumulative >= targets[len(cuts)]:
            cuts.append(position)
    # Float summation can leave the last target a hair out of reach.
    while len(cuts) < num_bins:
        cuts.append(len(masses) - 1)
    cuts[-1] = len(masses) - 1
    return cuts


def estimate_bins(sample: Sequence[ExampleMeta], config: BucketConfig) -> BucketTree:
    """Estimate equal-mass bucket edges from a sample.

    Sort by input length (ties broken by id), accumulate mass (input length
    under INPUT_MASS, 1 per example under EXAMPLE_COUNT) and cut bucket k at
    the first example where the running mass reaches k/num_buckets of the
    total; the cut example's length becomes the bucket's upper edge. Each
    bucket's members are then partitioned the same way on output length
    (output-token mass under INPUT_MASS). Every bucket's realized mass lands
    within one maximal element of its target share.
    """
    if len(sample) < config.num_buckets * config.num_subbuckets:
        raise ConfigurationError(
            f"sample of {len(sample)} examples cannot fill a "
            f"{config.num_buckets}x{config.num_subbuckets} bucket grid"
        )
    by_input = sorted(sample, key=lambda ex: (ex.input_length, ex.id))
    use_length_mass = config.mass_measure is MassMeasure.INPUT_MASS
    input_masses = [
        ex.input_length if use_length_mass else 1.0 for ex in by_input
    ]
    cuts = _greedy_cuts(input_masses, config.num_buckets)
    input_edges = tuple(by_input[c].input_length for c in cuts)

    output_edges: list[tuple[int, ...]] = []
    start = 0
    for bucket, cut in enumerate(cuts):
        members = by_input[start : cut + 1]
        start = cut + 1
        if not members:
            # Unreachable bucket (its edge equals the previous bucket's);
            # reuse the neighbor's sub-edges to keep probe lengths monotone.
            output_edges.append(output_edges[bucket - 1])
            continue
        by_output = sorted(members, key=lambda ex: (ex.output_length, ex.id))
        out_masses = [
            float(ex.output_length) if use_length_mass else 1.0 for ex in by_output
        ]
        sub_cuts = _greedy_cuts(out_masses, config.num_subbuckets)
        output_edges.append(tuple(by_output[c].output_length for c in sub_cuts))

    degenerate = config.num_buckets > 1 and len(set(input_edges)) == 1
    return BucketTree(
        input_edges=input_edges,
        output_edges=tuple(output_edges),
        degenerate=degenerate,
    )


def route(example: ExampleMeta, tree: BucketTree) -> BucketIndex:
    """Bucket assignment: smallest bucket whose edge admits the example.

    Boundary values belong to the lower bucket. Examples longer than the last
    edge (either axis) land in the last bucket with the outlier flag set, so
    routing is total and outlier impact stays observable.
    """
    outlier = False
    i = bisect_left(tree.input_edges, example.input_length)
    if i == len(tree.input_edges):
        i -= 1
        outlier = True
    row = tree.output_edges[i]
    j = bisect_left(row, example.output_length)
    if j == len(row):
        j -= 1
        outlier = True
    return BucketIndex(i, j, outlier)


def padding_stats(batch: MiniBatch) -> tuple[float, float]:
    """(input, output) padding ratios of the batch padded to its maxima.

    A ratio is the fraction of padded-tensor cells that are padding:
    1 - sum(lengths) / (batch_size * max_length), and 0 by convention when
    the max length is 0.
    """
    if not batch.examples:
        raise ValueError("padding_stats needs a non-empty batch")
    n = len(batch.examples)

    def ratio(total: float, maximum: float) -> float:
        if maximum == 0:
            return 0.0
        return 1.0 - total / (n * maximum)

    return (
        ratio(sum(ex.input_length for ex in batch.examples), batch.max_input_length),
        ratio(sum(ex.output_length for ex in batch.examples), batch.max_output_length),
    )


class DynamicBucketingSampler:
    """Group a routed example stream into minimally-padded mini-batches.

    One buffer per (bucket, sub-bucket); an incoming example joins its
    bucket's buffer and a MiniBatch is emitted the moment a buffer reaches
    the batch size the profile allows for that cell. Buffers never flush
    partially on their own; call :meth:`drain` at shutdown to emit leftovers.

    Single-consumer: iterate the sampler from one place only. ``seed`` is
    accepted for interface symmetry with the rest of the pipeline; batching
    itself is deterministic given the input order.
    """

    def __init__(
        self,
        examples: Iterator[ExampleMeta],
        tree: BucketTree,
        profile: "BatchProfile",
        seed: int = 0,
    ):
        if tuple(profile.shape) != tree.shape:
            raise ConfigurationError(
                f"profile shape {profile.shape} does not match tree shape {tree.shape}"
            )
        for i, row in enumerate(profile.grid):
            for j, size in enumerate(row):
                if size < 1:
                    raise ConfigurationError(
                        f"profile cell ({i}, {j}) has non-positive batch size {size}"
                    )
        self._source = examples
        self._tree = tree
        self._grid = [list(row) for row in profile.grid]
        self._seed = seed
        self._buffers: dict[tuple[int, int], list[tuple[ExampleMeta, bool]]] = {}
        self._modality: Modality | None = None
        self.consumed = 0

    def _make_batch(self, cell: tuple[int, int]) -> MiniBatch:
        entries = self._buffers.pop(cell)
        examples = tuple(ex for ex, _ in entries)
        return MiniBatch(
            examples=examples,
            modality=examples[0].modality,
            bucket_index=cell,
            max_input_length=max(ex.input_length for ex in examples),
            max_output_length=max(ex.output_length for ex in examples),
            outlier_flags=tuple(flag for _, flag in entries),
        )

    def __iter__(self) -> Iterator[MiniBatch]:
        for example in self._source:
            if self._modality is None:
                self._modality = example.modality
            elif example.modality is not self._modality:
                raise ConfigurationError(
                    "mixed modalities in one sampler; build one sampler per modality"
                )
            self.consumed += 1
            i, j, outlier = route(example, self._tree)
            buffer = self._buffers.setdefault((i, j), [])
            buffer.append((example, outlier))
            if len(buffer) >= self._grid[i][j]:
                yield self._make_batch((i, j))

    def drain(self) -> list[MiniBatch]:
        """Emit all partially filled buffers (ascending bucket order) and clear them."""
        return [self._make_batch(cell) for cell in sorted(self._buffers)]
