"""Command-line entry point.

Four file-mediated commands chain into an offline profiling workflow::

    streambatch gen-synthetic --preset demo --out corpus/
    streambatch estimate-buckets --manifest corpus/manifest.json --out tree.json
    streambatch oomptimize --tree tree.json --model-preset quadratic --out profile.json
    streambatch simulate --manifest corpus/manifest.json --tree tree.json \\
        --profile profile.json --steps 1000 --out-dir run/

Every command's outputs are a pure function of its inputs, flags, and seed.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from itertools import islice
from pathlib import Path

from .bucketing import (
    BucketConfig,
    BucketTree,
    DynamicBucketingSampler,
    MassMeasure,
    estimate_bins,
)
from .combiner import CombinerConfig, CombinerStrategy, round_robin, zip_samplers
from .datastream import Modality, StreamSpec, count_dataset, load_manifest, open_stream
from .errors import ConfigurationError, StreamBatchError
from .metrics import simulate
from .mux import MuxConfig, mux
from .oomptimizer import (
    MODEL_PRESETS,
    BatchProfile,
    SearchConfig,
    SyntheticMemoryModel,
    build_profile,
)
from .report import write_all
from .seeding import derive_seed
from .synthetic import PRESETS, CorpusConfig, generate_corpus


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this toolkit reserves 2 for
    # runtime failures and uses 1 for usage.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="streambatch",
        description="Bin estimation, batch-size profiling, and sampling simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic manifest corpus")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(PRESETS), help="named built-in corpus")
    source.add_argument("--config", type=Path, help="corpus config JSON")
    gen.add_argument("--out", type=Path, required=True, help="output corpus directory")

    est = sub.add_parser("estimate-buckets", help="estimate equal-mass bucket bins")
    est.add_argument("--manifest", type=Path, required=True)
    est.add_argument("--out", type=Path, required=True, help="bucket tree JSON path")
    est.add_argument("--num-buckets", type=int, default=10)
    est.add_argument("--num-subbuckets", type=int, default=10)
    est.add_argument("--sample-size", type=int, default=500_000)
    est.add_argument(
        "--mass-measure",
        choices=[m.value for m in MassMeasure],
        default=MassMeasure.INPUT_MASS.value,
    )
    est.add_argument(
        "--modality",
        choices=[m.value for m in Modality],
        help="restrict the sample to one modality",
    )
    est.add_argument("--seed", type=int, default=0)

    oom = sub.add_parser("oomptimize", help="search per-bucket maximum batch sizes")
    oom.add_argument("--tree", type=Path, required=True)
    oom.add_argument("--out", type=Path, required=True, help="batch profile JSON path")
    model = oom.add_mutually_exclusive_group(required=True)
    model.add_argument("--model", type=Path, help="synthetic memory model JSON")
    model.add_argument("--model-preset", choices=sorted(MODEL_PRESETS))
    oom.add_argument("--initial-batch-size", type=int, default=32)
    oom.add_argument("--tolerance", type=float, default=0.05)
    oom.add_argument("--max-batch-size", type=int, default=4096)

    sim = sub.add_parser("simulate", help="run the sampling pipeline and report")
    sim.add_argument("--manifest", type=Path, required=True)
    sim.add_argument("--tree", type=Path, required=True)
    sim.add_argument("--profile", type=Path, required=True)
    sim.add_argument("--steps", type=int, required=True)
    sim.add_argument("--window", type=int, default=100)
    sim.add_argument(
        "--strategy",
        choices=[s.value for s in CombinerStrategy],
        default=CombinerStrategy.ROUND_ROBIN.value,
    )
    sim.add_argument(
        "--modality-probs",
        help="round-robin selection probabilities, e.g. audio=0.25,text=0.75",
    )
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out-dir", type=Path, required=True)
    return parser


def _parse_modality_probs(text: str) -> dict[Modality, float]:
    probs: dict[Modality, float] = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not value:
            raise ConfigurationError(
                f"bad --modality-probs entry {part!r}; expected modality=prob"
            )
        probs[Modality(name.strip())] = float(value)
    return probs


def cmd_gen_synthetic(args) -> int:
    if args.preset is not None:
        config = PRESETS[args.preset]
    else:
        config = CorpusConfig.load(args.config)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "corpus_config.json").write_text(
        json.dumps(config.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    manifest = generate_corpus(config, args.out)
    print(f"wrote {manifest}")
    return 0


def _select_specs(manifest: Path, seed: int, modality: str | None) -> list[StreamSpec]:
    specs = load_manifest(manifest, default_seed=seed)
    if modality is not None:
        wanted = Modality(modality)
        specs = [spec for spec in specs if spec.modality is wanted]
        if not specs:
            raise ConfigurationError(f"manifest has no {wanted.value!r} datasets")
    return specs


def cmd_estimate_buckets(args) -> int:
    specs = _select_specs(args.manifest, args.seed, args.modality)
    corpus_size = sum(count_dataset(spec)[0] for spec in specs)
    if args.sample_size > corpus_size:
        print(
            f"warning: sample size {args.sample_size} exceeds corpus size "
            f"{corpus_size}; examples will repeat",
            file=sys.stderr,
        )
    blended = mux(
        [open_stream(spec) for spec in specs],
        MuxConfig(
            stream_weights={spec.source_id: spec.weight for spec in specs},
            seed=derive_seed(args.seed, "estimate-buckets"),
        ),
    )
    sample = list(islice(blended, args.sample_size))
    config = BucketConfig(
        num_buckets=args.num_buckets,
        num_subbuckets=args.num_subbuckets,
        sample_size=args.sample_size,
        mass_measure=MassMeasure(args.mass_measure),
    )
    tree = estimate_bins(sample, config)
    if tree.degenerate:
        print("warning: degenerate tree (all input edges equal)", file=sys.stderr)
    tree.save(args.out)
    print(f"wrote {args.out} ({tree.num_buckets}x{tree.num_subbuckets} buckets)")
    return 0


def cmd_oomptimize(args) -> int:
    tree = BucketTree.load(args.tree)
    if args.model is not None:
        model = SyntheticMemoryModel.load(args.model)
    else:
        model = MODEL_PRESETS[args.model_preset]
    config = SearchConfig(
        initial_batch_size=args.initial_batch_size,
        tolerance=args.tolerance,
        max_batch_size_cap=args.max_batch_size,
    )
    profile = build_profile(model, tree, config)
    profile.save(args.out)
    print(f"wrote {args.out} (mean batch size {profile.mean_batch_size():.1f})")
    return 0


def cmd_simulate(args) -> int:
    specs = load_manifest(args.manifest, default_seed=args.seed)
    tree = BucketTree.load(args.tree)
    profile = BatchProfile.load(args.profile)
    strategy = CombinerStrategy(args.strategy)
    probs = _parse_modality_probs(args.modality_probs) if args.modality_probs else None

    by_modality: dict[Modality, list[StreamSpec]] = {}
    for spec in specs:
        by_modality.setdefault(spec.modality, []).append(spec)

    samplers = {}
    for modality, modality_specs in sorted(by_modality.items(), key=lambda kv: kv[0].value):
        blended = mux(
            [open_stream(spec) for spec in modality_specs],
            MuxConfig(
                stream_weights={s.source_id: s.weight for s in modality_specs},
                seed=derive_seed(args.seed, "mux", modality.value),
            ),
        )
        samplers[modality] = iter(
            DynamicBucketingSampler(
                blended, tree, profile, seed=derive_seed(args.seed, "sampler", modality.value)
            )
        )

    if strategy is CombinerStrategy.ZIP:
        pipeline = zip_samplers(samplers)
        step_share = {modality: 1.0 for modality in samplers}
    else:
        config = CombinerConfig(
            strategy=strategy,
            modality_probs=probs,
            seed=derive_seed(args.seed, "combiner"),
        )
        pipeline = round_robin(samplers, config)
        if probs is None:
            step_share = {modality: 1.0 / len(samplers) for modality in samplers}
        else:
            step_share = dict(probs)

    # Step-level approximation of the stationary mixture: modality share times
    # the modality's normalized stream weights. Exact for a single modality.
    expected_mixture: dict[str, float] = {}
    for modality, modality_specs in by_modality.items():
        total = sum(spec.weight for spec in modality_specs)
        for spec in modality_specs:
            expected_mixture[spec.source_id] = step_share[modality] * spec.weight / total

    report = simulate(
        pipeline,
        args.steps,
        args.window,
        expected_mixture=expected_mixture,
        grid_shape=tree.shape,
    )
    paths = write_all(report, args.out_dir)
    print(report.render_table())
    print()
    for path in paths:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "estimate-buckets": cmd_estimate_buckets,
    "oomptimize": cmd_oomptimize,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (StreamBatchError, OSError, ValueError) as exc:
        print(f"streambatch {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
