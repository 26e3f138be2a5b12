"""Pipeline-quality diagnostics.

Everything here is pure aggregation over a consumed stream: padding ratios,
batch-size summaries per modality, the stationarity of the source mixture
over disjoint aligned windows, and the per-bucket source skew that length
stratification can introduce (different sources have different length
distributions, so single buckets may over-represent a source even though the
overall mixture is stationary). Total-variation distance is the mixture
metric throughout: bounded in [0, 1], zero exactly on equal distributions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Mapping

from .combiner import ModalityStep
from .errors import ConfigurationError, StreamBatchError
from .bucketing import padding_stats
from .oomptimizer import BatchProfile

COMPARISON_THRESHOLDS = (1.0, 1.5, 2.0, 3.0, 4.0)


def tv_distance(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Total-variation distance: half the L1 distance over the key union.

    Summation runs in sorted key order so the result is exactly symmetric.
    """
    keys = sorted(set(p) | set(q))
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _normalize(weights: Mapping[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    if total <= 0:
        raise ConfigurationError("mixture weights must have positive total")
    return {key: value / total for key, value in weights.items()}


@dataclass(frozen=True)
class SimulationReport:
    steps_simulated: int
    mean_batch_size_per_modality: dict[str, float]
    mean_input_padding: float
    mean_output_padding: float
    mixture_tv_distance_series: tuple[tuple[int, float], ...]
    per_bucket_source_skew: tuple[tuple[float | None, ...], ...]
    batches_per_modality: dict[str, int]
    examples_consumed: int
    reference_mixture: dict[str, float]

    @property
    def max_window_tv(self) -> float | None:
        if not self.mixture_tv_distance_series:
            return None
        return max(tv for _, tv in self.mixture_tv_distance_series)

    def to_json_dict(self) -> dict:
        return {
            "steps_simulated": self.steps_simulated,
            "mean_batch_size_per_modality": dict(self.mean_batch_size_per_modality),
            "mean_input_padding": self.mean_input_padding,
            "mean_output_padding": self.mean_output_padding,
            "mixture_tv_distance_series": [
                [start, tv] for start, tv in self.mixture_tv_distance_series
            ],
            "per_bucket_source_skew": [list(row) for row in self.per_bucket_source_skew],
            "batches_per_modality": dict(self.batches_per_modality),
            "examples_consumed": self.examples_consumed,
            "reference_mixture": dict(self.reference_mixture),
        }

    def render_table(self) -> str:
        rows: list[tuple[str, str]] = [("steps_simulated", str(self.steps_simulated))]
        for modality in sorted(self.mean_batch_size_per_modality):
            rows.append(
                (
                    f"mean_batch_size[{modality}]",
                    f"{self.mean_batch_size_per_modality[modality]:.2f}",
                )
            )
            rows.append(
                (f"batches[{modality}]", str(self.batches_per_modality[modality]))
            )
        rows.append(("mean_input_padding", f"{self.mean_input_padding:.4f}"))
        rows.append(("mean_output_padding", f"{self.mean_output_padding:.4f}"))
        rows.append(("examples_consumed", str(self.examples_consumed)))
        if self.max_window_tv is not None:
            rows.append(("max_window_tv", f"{self.max_window_tv:.4f}"))
            rows.append(("windows", str(len(self.mixture_tv_distance_series))))
        skews = [tv for row in self.per_bucket_source_skew for tv in row if tv is not None]
        if skews:
            rows.append(("max_bucket_source_skew", f"{max(skews):.4f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def simulate(
    pipeline: Iterator[ModalityStep],
    steps: int,
    window: int,
    *,
    expected_mixture: Mapping[str, float] | None = None,
    grid_shape: tuple[int, int] | None = None,
) -> SimulationReport:
    """Consume exactly ``steps`` steps and aggregate the diagnostics.

    ``expected_mixture`` holds the configured stream weights (normalization
    happens here); without it, windows and bucket skews are measured against
    the run's own global source mixture. Window mixtures are computed over
    disjoint step-aligned windows of ``window`` steps; a trailing incomplete
    window is not reported. ``grid_shape`` sizes the skew matrix; by default
    it spans the observed bucket indices.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    if window < 1:
        raise ConfigurationError("window must be >= 1")

    batch_count: Counter[str] = Counter()
    batch_size_sum: Counter[str] = Counter()
    padding_in_sum = 0.0
    padding_out_sum = 0.0
    total_batches = 0
    examples_consumed = 0
    global_sources: Counter[str] = Counter()
    window_counters: list[Counter[str]] = []
    current_window: Counter[str] = Counter()
    cell_sources: dict[tuple[int, int], Counter[str]] = {}

    for index in range(steps):
        try:
            step = next(pipeline)
        except StopIteration:
            raise ConfigurationError(
                f"pipeline ended at step {index} before the requested {steps}"
            ) from None
        except Exception as exc:
            raise StreamBatchError(f"pipeline failed at step {index}: {exc}") from exc
        for batch in step.batches:
            modality = batch.modality.value
            batch_count[modality] += 1
            batch_size_sum[modality] += len(batch)
            pad_in, pad_out = padding_stats(batch)
            padding_in_sum += pad_in
            padding_out_sum += pad_out
            total_batches += 1
            cell = tuple(batch.bucket_index)
            counter = cell_sources.setdefault(cell, Counter())
            for example in batch.examples:
                global_sources[example.source_id] += 1
                current_window[example.source_id] += 1
                counter[example.source_id] += 1
                examples_consumed += 1
        if (index + 1) % window == 0:
            window_counters.append(current_window)
            current_window = Counter()

    if expected_mixture is not None:
        reference = _normalize(expected_mixture)
    else:
        reference = _normalize(global_sources)

    series = []
    for k, counter in enumerate(window_counters):
        total = sum(counter.values())
        mixture = {s: c / total for s, c in counter.items()} if total else {}
        series.append((k * window, tv_distance(mixture, reference)))

    if grid_shape is None:
        max_i = max((cell[0] for cell in cell_sources), default=-1)
        max_j = max((cell[1] for cell in cell_sources), default=-1)
        grid_shape = (max_i + 1, max_j + 1)
    skew: list[tuple[float | None, ...]] = []
    for i in range(grid_shape[0]):
        row: list[float | None] = []
        for j in range(grid_shape[1]):
            counter = cell_sources.get((i, j))
            if counter is None:
                row.append(None)
            else:
                total = sum(counter.values())
                row.append(tv_distance({s: c / total for s, c in counter.items()}, reference))
        skew.append(tuple(row))

    return SimulationReport(
        steps_simulated=steps,
        mean_batch_size_per_modality={
            m: batch_size_sum[m] / batch_count[m] for m in sorted(batch_count)
        },
        mean_input_padding=padding_in_sum / total_batches if total_batches else 0.0,
        mean_output_padding=padding_out_sum / total_batches if total_batches else 0.0,
        mixture_tv_distance_series=tuple(series),
        per_bucket_source_skew=tuple(skew),
        batches_per_modality={m: batch_count[m] for m in sorted(batch_count)},
        examples_consumed=examples_consumed,
        reference_mixture=reference,
    )


@dataclass(frozen=True)
class ProfileComparison:
    """Per-cell batch-size ratios of two profiles, plus band fractions."""

    ratios: tuple[tuple[float, ...], ...]
    fraction_at_least: dict[float, float]
    mean_ratio: float

    def to_json_dict(self) -> dict:
        return {
            "ratios": [list(row) for row in self.ratios],
            "fraction_at_least": {
                f"{threshold:g}": fraction
                for threshold, fraction in self.fraction_at_least.items()
            },
            "mean_ratio": self.mean_ratio,
        }


def compare_profiles(
    a: BatchProfile,
    b: BatchProfile,
    thresholds: tuple[float, ...] = COMPARISON_THRESHOLDS,
) -> ProfileComparison:
    """Cellwise ratios b/a and the fraction of cells at or above each threshold."""
    if a.shape != b.shape:
        raise ConfigurationError(f"profile shapes differ: {a.shape} vs {b.shape}")
    ratios = tuple(
        tuple(b_size / a_size for a_size, b_size in zip(row_a, row_b))
        for row_a, row_b in zip(a.grid, b.grid)
    )
    cells = [value for row in ratios for value in row]
    return ProfileComparison(
        ratios=ratios,
        fraction_at_least={
            threshold: sum(value >= threshold for value in cells) / len(cells)
            for threshold in thresholds
        },
        mean_ratio=sum(cells) / len(cells),
    )
