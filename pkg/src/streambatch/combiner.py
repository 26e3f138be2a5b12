"""Combine per-modality mini-batch samplers into one training stream.

Two strategies: round-robin draws one modality per step from a seeded
multinomial, so each step carries a single-modality batch; zip pulls one
batch from every modality per step, and the consumer treats the sub-batches
as gradient-accumulation micro-steps. Sub-batches are never merged: each
keeps its own modality tag and example list.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from itertools import accumulate
from typing import Iterator, Mapping

from .bucketing import MiniBatch
from .datastream import Modality
from .errors import ConfigurationError


class CombinerStrategy(str, Enum):
    ROUND_ROBIN = "round_robin"
    ZIP = "zip"


@dataclass(frozen=True)
class ModalityStep:
    """One training step: a single batch, or one batch per modality when zipped."""

    batches: tuple[MiniBatch, ...]
    zipped: bool = False

    def __post_init__(self):
        if not self.batches:
            raise ConfigurationError("a step needs at least one batch")
        if self.zipped and len(self.batches) < 2:
            raise ConfigurationError("a zipped step needs one batch per modality")
        if not self.zipped and len(self.batches) != 1:
            raise ConfigurationError("a non-zipped step carries exactly one batch")
        if any(len(batch) == 0 for batch in self.batches):
            raise ConfigurationError("steps must not carry empty batches")


@dataclass(frozen=True)
class CombinerConfig:
    strategy: CombinerStrategy = CombinerStrategy.ROUND_ROBIN
    modality_probs: Mapping[Modality, float] | None = None  # round-robin only; None = equal
    seed: int = 0

    def __post_init__(self):
        if self.modality_probs is not None:
            if any(p <= 0 for p in self.modality_probs.values()):
                raise ConfigurationError("modality probabilities must be positive")
            total = sum(self.modality_probs.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigurationError(
                    f"modality probabilities must sum to 1, got {total}"
                )


def round_robin(
    samplers: Mapping[Modality, Iterator[MiniBatch]], config: CombinerConfig
) -> Iterator[ModalityStep]:
    """Each step draws one modality from the configured multinomial.

    Untouched samplers advance nothing on that step. Probabilities default to
    equal; when given they must cover exactly the sampler keys. The draw rule
    matches the mux: one ``random.Random(seed).random()`` per step, mapped
    through ``bisect_right`` over cumulative probabilities in sorted modality
    order.
    """
    if not samplers:
        raise ConfigurationError("round_robin needs at least one sampler")
    modalities = sorted(samplers, key=lambda m: m.value)
    if config.modality_probs is None:
        probs = [1.0 / len(modalities)] * len(modalities)
    else:
        if set(config.modality_probs) != set(modalities):
            raise ConfigurationError(
                f"modality_probs keys {sorted(m.value for m in config.modality_probs)} "
                f"do not match sampler keys {[m.value for m in modalities]}"
            )
        probs = [config.modality_probs[m] for m in modalities]
    cumulative = list(accumulate(probs))
    cumulative[-1] = 1.0

    def generate() -> Iterator[ModalityStep]:
        rng = random.Random(config.seed)
        while True:
            modality = modalities[bisect_right(cumulative, rng.random())]
            yield ModalityStep(batches=(next(samplers[modality]),))

    return generate()


def zip_samplers(
    samplers: Mapping[Modality, Iterator[MiniBatch]]
) -> Iterator[ModalityStep]:
    """Each step carries one batch from every sampler, in sorted modality order.

    All samplers advance exactly once per step, so their consumption rates
    stay identical by construction.
    """
    if len(samplers) < 2:
        raise ConfigurationError("zip needs at least two samplers")
    modalities = sorted(samplers, key=lambda m: m.value)

    def generate() -> Iterator[ModalityStep]:
        while True:
            yield ModalityStep(
                batches=tuple(next(samplers[m]) for m in modalities), zipped=True
            )

    return generate()
