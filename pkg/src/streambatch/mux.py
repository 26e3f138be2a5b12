"""Stochastic weighted multiplexer: blend infinite streams into one.

At every step the mux draws a stream index from the multinomial given by the
(normalized-at-draw-time) stream weights and yields that stream's next
example, so the source mixture of any window of the output matches the
weights in expectation and never drifts over time.

Draw rule, fixed so it can be replayed outside this module: one
``random.Random(seed).random()`` call per step, mapped to a stream index via
``bisect_right`` over the cumulative normalized weights.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from typing import Iterable, Iterator, Mapping

from .datastream import ExampleMeta
from .errors import ConfigurationError


@dataclass(frozen=True)
class MuxConfig:
    """Weights are stored as given (human-auditable); normalization happens per draw."""

    stream_weights: Mapping[str, float]
    seed: int

    def __post_init__(self):
        if not self.stream_weights:
            raise ConfigurationError("mux needs at least one stream")
        for source_id, weight in self.stream_weights.items():
            if weight <= 0:
                raise ConfigurationError(
                    f"stream {source_id!r}: weight must be > 0, got {weight}"
                )


def mux(
    streams: list[Iterator[ExampleMeta]], config: MuxConfig
) -> Iterator[ExampleMeta]:
    """Interleave ``streams`` (one per weight entry, in weight insertion order).

    Single-consumer, like the input iterators. Examples from stream i appear
    in the output in their original order.
    """
    if len(streams) != len(config.stream_weights):
        raise ConfigurationError(
            f"{len(config.stream_weights)} weights but {len(streams)} streams"
        )
    weights = list(config.stream_weights.values())
    total = sum(weights)
    cumulative = [w / total for w in accumulate(weights)]
    cumulative[-1] = 1.0  # guard against float summation drift; random() < 1.0

    def generate() -> Iterator[ExampleMeta]:
        rng = random.Random(config.seed)
        while True:
            index = bisect_right(cumulative, rng.random())
            yield next(streams[index])

    return generate()


def empirical_mixture(window: Iterable[ExampleMeta]) -> dict[str, float]:
    """Source-frequency map of a window; frequencies sum to 1."""
    counts: dict[str, int] = {}
    n = 0
    for example in window:
        counts[example.source_id] = counts.get(example.source_id, 0) + 1
        n += 1
    if n == 0:
        raise ValueError("empirical_mixture needs a non-empty window")
    return {source_id: count / n for source_id, count in counts.items()}
