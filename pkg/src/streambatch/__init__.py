"""Streaming sampler toolkit for variable-length multimodal corpora.

Building blocks, in pipeline order: manifest-described datasets become
infinite shard-shuffled streams (:mod:`.datastream`), a weighted multiplexer
blends them with a stationary source mixture (:mod:`.mux`), equal-mass 2D
bucketing groups examples by input/output length (:mod:`.bucketing`), a
batch-size search finds each bucket's memory limit (:mod:`.oomptimizer`),
and per-modality samplers combine into one training stream
(:mod:`.combiner`). :mod:`.metrics` measures the result.
"""

from .bucketing import (
    BucketConfig,
    BucketIndex,
    BucketTree,
    DynamicBucketingSampler,
    MassMeasure,
    MiniBatch,
    estimate_bins,
    padding_stats,
    route,
)
from .combiner import (
    CombinerConfig,
    CombinerStrategy,
    ModalityStep,
    round_robin,
    zip_samplers,
)
from .datastream import (
    ExampleMeta,
    Modality,
    Shard,
    StreamSpec,
    count_dataset,
    load_manifest,
    open_stream,
    read_shard,
    shard_visit_order,
)
from .errors import (
    ConfigurationError,
    ContractViolationError,
    ManifestError,
    ShardReadError,
    StreamBatchError,
    UnsatisfiableBatchSizeError,
)
from .metrics import (
    ProfileComparison,
    SimulationReport,
    compare_profiles,
    simulate,
    tv_distance,
)
from .mux import MuxConfig, empirical_mixture, mux
from .oomptimizer import (
    MODEL_PRESETS,
    BatchProfile,
    Probe,
    SearchConfig,
    StepOutcome,
    StepRunner,
    SyntheticMemoryModel,
    baseline_heuristic_profile,
    build_profile,
    search_batch_size,
)
from .seeding import derive_seed
from .synthetic import (
    PRESETS,
    CorpusConfig,
    LengthDistribution,
    OutputLengthModel,
    SyntheticDatasetConfig,
    generate_corpus,
)

__version__ = "0.1.0"
