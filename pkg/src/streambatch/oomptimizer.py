"""Automatic per-bucket batch-size search against a pluggable step runner.

The search probes a full training step at candidate batch sizes and converges
on the largest size that does not exhaust memory: double while steps succeed,
halve while they fail, then bisect the bracket until the surviving valid size
is within the configured tolerance of the smallest known invalid size.

Probe lengths for a bucket grid are each cell's edge lengths, the worst case
the router admits into that cell, so any batch the sampler assembles is
covered by the profile. No real GPU probing lives in this package; the
synthetic memory model stands in for one at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Protocol, runtime_checkable

from .bucketing import BucketTree
from .errors import (
    ConfigurationError,
    ContractViolationError,
    UnsatisfiableBatchSizeError,
)

PROFILE_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1

# Filled in after SyntheticMemoryModel is defined; named models the CLI can
# use without a config file.
MODEL_PRESETS: dict[str, "SyntheticMemoryModel"] = {}


class StepOutcome(str, Enum):
    SUCCESS = "success"
    OOM = "oom"


class Probe(NamedTuple):
    batch_size: int
    outcome: StepOutcome


@runtime_checkable
class StepRunner(Protocol):
    """One probed training step (forward, backward, parameter update).

    Implementations must be monotone in batch size for fixed lengths: once a
    size fails, every larger size fails. ``reentrant`` declares whether
    concurrent probes are safe; a synthetic model is, a real GPU step is not,
    and :func:`build_profile` probes strictly serially either way.
    """

    reentrant: bool

    def run(
        self, batch_size: int, input_length: float, output_length: int
    ) -> StepOutcome: ...


@dataclass(frozen=True)
class SyntheticMemoryModel:
    """Desk-scale stand-in for a GPU memory ceiling.

    mem(b, in, out) = c0 + b*(c1*in + c2*out + c3*in^2 + c4*out^2 + c5*in*out);
    the quadratic terms mirror attention's memory growth with sequence length.
    A step fails iff mem exceeds ``capacity_bytes``.
    """

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    capacity_bytes: float = 1.0
    reentrant: bool = True

    def __post_init__(self):
        coeffs = (self.c0, self.c1, self.c2, self.c3, self.c4, self.c5)
        if any(c < 0 for c in coeffs):
            raise ConfigurationError("memory model coefficients must be non-negative")
        if self.capacity_bytes <= 0:
            raise ConfigurationError("capacity_bytes must be > 0")

    def mem(self, batch_size: int, input_length: float, output_length: int) -> float:
        per_example = (
            self.c1 * input_length
            + self.c2 * output_length
            + self.c3 * input_length**2
            + self.c4 * output_length**2
            + self.c5 * input_length * output_length
        )
        return self.c0 + batch_size * per_example

    def run(
        self, batch_size: int, input_length: float, output_length: int
    ) -> StepOutcome:
        if self.mem(batch_size, input_length, output_length) > self.capacity_bytes:
            return StepOutcome.OOM
        return StepOutcome.SUCCESS

    def to_json_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "coefficients": [self.c0, self.c1, self.c2, self.c3, self.c4, self.c5],
            "capacity_bytes": self.capacity_bytes,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SyntheticMemoryModel":
        version = payload.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported model format_version {version!r}")
        coeffs = payload.get("coefficients")
        if not isinstance(coeffs, list) or len(coeffs) != 6:
            raise ConfigurationError("model needs a 6-element 'coefficients' list")
        return cls(*(float(c) for c in coeffs), capacity_bytes=float(payload["capacity_bytes"]))

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticMemoryModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


# An 80 GB card in spirit: dominant quadratic output-length term, so long
# targets are what throttle batch sizes.
MODEL_PRESETS["quadratic"] = SyntheticMemoryModel(
    c0=1e10,
    c1=1e6,
    c2=1e6,
    c3=1e5,
    c4=2e4,
    c5=1e4,
    capacity_bytes=8e10,
)


@dataclass(frozen=True)
class SearchConfig:
    initial_batch_size: int = 32
    tolerance: float = 0.05
    max_batch_size_cap: int = 4096

    def __post_init__(self):
        if self.initial_batch_size < 1:
            raise ConfigurationError("initial_batch_size must be >= 1")
        if not 0 < self.tolerance < 1:
            raise ConfigurationError("tolerance must be in (0, 1)")
        if self.max_batch_size_cap < 1:
            raise ConfigurationError("max_batch_size_cap must be >= 1")


@dataclass(frozen=True)
class BatchProfile:
    """Maximum safe batch size per (bucket, sub-bucket), plus the probe trail."""

    grid: tuple[tuple[int, ...], ...]
    probe_logs: tuple[tuple[tuple[Probe, ...], ...], ...] = ()

    def __post_init__(self):
        if not self.grid or not self.grid[0]:
            raise ConfigurationError("profile grid must be non-empty")
        width = len(self.grid[0])
        if any(len(row) != width for row in self.grid):
            raise ConfigurationError("profile grid rows must have equal length")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.grid), len(self.grid[0]))

    def mean_batch_size(self) -> float:
        cells = [size for row in self.grid for size in row]
        return sum(cells) / len(cells)

    def to_json_dict(self) -> dict:
        payload = {
            "format_version": PROFILE_FORMAT_VERSION,
            "grid": [list(row) for row in self.grid],
        }
        if self.probe_logs:
            payload["probe_logs"] = [
                [[[size, outcome.value] for size, outcome in cell] for cell in row]
                for row in self.probe_logs
            ]
        return payload

    @classmethod
    def from_json_dict(cls, payload: dict) -> "BatchProfile":
        version = payload.get("format_version")
        if version != PROFILE_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported profile format_version {version!r}")
        logs = payload.get("probe_logs", [])
        return cls(
            grid=tuple(tuple(int(size) for size in row) for row in payload["grid"]),
            probe_logs=tuple(
                tuple(
                    tuple(Probe(int(size), StepOutcome(outcome)) for size, outcome in cell)
                    for cell in row
                )
                for row in logs
            ),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "BatchProfile":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def search_batch_size(
    runner: StepRunner,
    input_length: float,
    output_length: int,
    config: SearchConfig = SearchConfig(),
) -> tuple[int, list[Probe]]:
    """Find the largest batch size that survives a step at the given lengths.

    Returns (batch_size, probe log). The result was itself probed successful
    and, unless the cap was reached without any failure, sits within
    ``config.tolerance`` of the smallest probed-invalid size, i.e.
    (invalid - valid) / invalid <= tolerance. Adjacent integer bounds count
    as converged: the bracket cannot shrink further and the valid bound is
    exactly the maximum.
    """
    probes: list[Probe] = []
    best_valid: int | None = None
    worst_invalid: int | None = None

    def probe(size: int) -> bool:
        nonlocal best_valid, worst_invalid
        outcome = runner.run(size, input_length, output_length)
        probes.append(Probe(size, outcome))
        if outcome is StepOutcome.SUCCESS:
            best_valid = size if best_valid is None else max(best_valid, size)
        else:
            worst_invalid = size if worst_invalid is None else min(worst_invalid, size)
        if (
            best_valid is not None
            and worst_invalid is not None
            and best_valid >= worst_invalid
        ):
            raise ContractViolationError(
                f"runner succeeded at batch size {best_valid} after failing at "
                f"{worst_invalid}; outcomes must be monotone in batch size"
            )
        return outcome is StepOutcome.SUCCESS

    size = min(config.initial_batch_size, config.max_batch_size_cap)
    while not probe(size):
        if size == 1:
            raise UnsatisfiableBatchSizeError(
                f"even batch size 1 fails at lengths "
                f"({input_length}, {output_length})"
            )
        size //= 2

    while worst_invalid is None and best_valid < config.max_batch_size_cap:
        probe(min(best_valid * 2, config.max_batch_size_cap))
    if worst_invalid is None:
        return best_valid, probes

    while (
        worst_invalid - best_valid > 1
        and (worst_invalid - best_valid) / worst_invalid > config.tolerance
    ):
        probe((best_valid + worst_invalid) // 2)
    return best_valid, probes


def build_profile(
    runner: StepRunner,
    tree: BucketTree,
    config: SearchConfig = SearchConfig(),
) -> BatchProfile:
    """Search every (bucket, sub-bucket) cell at its edge lengths.

    Cells are solved from the longest bucket to the shortest, and each cell's
    initial guess is the best result among already-solved cells whose probe
    lengths dominate it on both axes. That guess is guaranteed valid for a
    monotone runner, which keeps the finished grid non-increasing along any
    axis of non-decreasing probe lengths; it also trims probes, but the
    per-cell tolerance guarantee never depends on it.
    """
    num_buckets, num_subbuckets = tree.shape
    results: dict[tuple[int, int], int] = {}
    logs: dict[tuple[int, int], tuple[Probe, ...]] = {}
    lengths = {
        (i, j): (tree.input_edges[i], tree.output_edges[i][j])
        for i in range(num_buckets)
        for j in range(num_subbuckets)
    }
    for i in reversed(range(num_buckets)):
        for j in reversed(range(num_subbuckets)):
            lin, lout = lengths[(i, j)]
            guess = max(
                (
                    results[cell]
                    for cell in results
                    if lengths[cell][0] >= lin and lengths[cell][1] >= lout
                ),
                default=config.initial_batch_size,
            )
            cell_config = replace(config, initial_batch_size=guess)
            try:
                results[(i, j)], log = search_batch_size(runner, lin, lout, cell_config)
            except UnsatisfiableBatchSizeError as exc:
                raise UnsatisfiableBatchSizeError(
                    f"bucket ({i}, {j}) at lengths ({lin}, {lout}): {exc}",
                    cell=(i, j),
                ) from None
            logs[(i, j)] = tuple(log)
    return BatchProfile(
        grid=tuple(
            tuple(results[(i, j)] for j in range(num_subbuckets))
            for i in range(num_buckets)
        ),
        probe_logs=tuple(
            tuple(logs[(i, j)] for j in range(num_subbuckets))
            for i in range(num_buckets)
        ),
    )


def baseline_heuristic_profile(
    tree: BucketTree, max_total_length: float, quadratic_penalty: float
) -> BatchProfile:
    """Total-length batch-size heuristic with a quadratic length penalty.

    grid[i][j] = floor(max_total_length / (L + penalty * L^2)) clamped to at
    least 1, with L the bucket's input edge. Output length is ignored, which
    is exactly the weakness the searched profile fixes.
    """
    if max_total_length <= 0:
        raise ConfigurationError("max_total_length must be > 0")
    if quadratic_penalty < 0:
        raise ConfigurationError("quadratic_penalty must be >= 0")
    grid = []
    for edge in tree.input_edges:
        denominator = edge + quadratic_penalty * edge**2
        if denominator <= 0:
            # A zero-length edge costs nothing under the heuristic; charge
            # one length unit so the entry stays finite.
            denominator = 1.0
        size = max(1, int(max_total_length / denominator))
        grid.append(tuple([size] * tree.num_subbuckets))
    return BatchProfile(grid=tuple(grid))
