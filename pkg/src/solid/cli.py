"""
Command-line entry point.

Every mutating subcommand writes a run manifest next to its output:
command, config snapshot, input/output digests, counts, wall time, and the
backend identity. Logs go to stderr; data goes to files or stdout.
Configuration precedence is flags > config file > built-in defaults, with
the config file in simple `key = value` lines.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import random
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

from . import enrich, generator, ipeval, preference, sampler, seeder, taxonomy
from .backend import ChatBackend, GenerationParams, HttpBackend, MockBackend
from .instructor import InstructionCache
from .jsonl import file_digest, write_jsonl

log = logging.getLogger("solid")

DEFAULT_API_KEY_ENV = "SOLID_API_KEY"

DEFAULTS = {
    "endpoint": "http://localhost:8000/v1",
    "model": "zephyr-7b-beta",
    "temperature": 0.7,
    "max_tokens": 512,
    "max_in_flight": 8,
    "k1": 1.2,
    "b": 0.75,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config_file(path: str) -> dict[str, str]:
    """`key = value` lines; '#' starts a comment; blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip().strip('"')
    return values


@dataclass
class Settings:
    """Flags > config file > DEFAULTS."""

    flags: argparse.Namespace
    config: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, cast=str):
        flag = getattr(self.flags, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        if key in self.config:
            return cast(self.config[key])
        return DEFAULTS.get(key)


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    backend: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def add_input(self, path) -> None:
        if path and os.path.exists(path):
            self.inputs[str(path)] = file_digest(path)

    def add_output(self, path) -> None:
        if path and os.path.exists(path):
            self.outputs[str(path)] = file_digest(path)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "command": self.command,
                    "argv": self.argv,
                    "config": self.config,
                    "backend": self.backend,
                    "inputs": self.inputs,
                    "outputs": self.outputs,
                    "counts": self.counts,
                    "wall_time_s": self.wall_time_s,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def build_backend(settings: Settings) -> ChatBackend:
    kind = settings.get("backend")
    max_in_flight = int(settings.get("max_in_flight", int))
    if kind == "mock":
        return MockBackend(max_in_flight=max_in_flight)
    if kind == "http":
        env_var = getattr(settings.flags, "api_key_env", None) or DEFAULT_API_KEY_ENV
        return HttpBackend(
            endpoint=str(settings.get("endpoint")),
            model=str(settings.get("model")),
            api_key=os.environ.get(env_var),
            max_in_flight=max_in_flight,
        )
    raise UsageError(f"unknown backend {kind!r}")


def build_params(settings: Settings, request_seed: int | None = None) -> GenerationParams:
    return GenerationParams(
        model=str(settings.get("model")),
        temperature=float(settings.get("temperature", float)),
        max_tokens=int(settings.get("max_tokens", int)),
        request_seed=request_seed,
    )


def fixture_corpus_path() -> str:
    return str(resources.files("solid").joinpath("data/fixture_sequences.txt"))


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["mock", "http"], default=None,
                   help="text backend (default mock)")
    p.add_argument("--endpoint", default=None, help="chat-completions endpoint base URL")
    p.add_argument("--model", default=None)
    p.add_argument("--api-key-env", default=None,
                   help=f"env var holding the API key (default {DEFAULT_API_KEY_ENV})")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--config", default=None, help="key = value config file")


def make_parser() -> _Parser:
    parser = _Parser(prog="solid", description=__doc__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("seed", parents=[], help="build dialog seeds")
    p.add_argument("--corpus", default=None, help="intent-sequence corpus (default: bundled fixture)")
    p.add_argument("--format", choices=["canonical", "msdialog"], default="canonical")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_backend_flags(p)

    p = sub.add_parser("generate", help="generate dialogs from seeds")
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["turnwise", "singlepass"], default="turnwise")
    p.add_argument("--max-parallel", type=int, default=None)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--instruction-cache", default=None, help="sidecar JSONL for merged instructions")
    p.add_argument("--no-instruction-cache", action="store_true")
    p.add_argument("--rule-based-merge", action="store_true",
                   help="join multi-intent instructions with ' and ' instead of merging via the backend")
    _add_backend_flags(p)

    p = sub.add_parser("build-dpo", help="emit preference pairs")
    p.add_argument("--chosen", required=True)
    p.add_argument("--rejected", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-lmq", action="store_true")

    p = sub.add_parser("sample", help="build a training subset")
    p.add_argument("--strategy", required=True,
                   choices=["bm25", "embed", "seqint-bal", "int-bal", "random-eq"])
    p.add_argument("--human", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--min-count", type=int, default=1000)
    p.add_argument("--rng-seed", type=int, default=0)
    _add_backend_flags(p)

    p = sub.add_parser("train-ip", help="train the native intent predictor")
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=2.0)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--rng-seed", type=int, default=0)

    p = sub.add_parser("eval-ip", help="evaluate a trained predictor")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("stats", help="corpus statistics to stdout")
    p.add_argument("--in", dest="input", required=True)

    p = sub.add_parser("filter-entities", help="flag probably-hallucinated entities")
    p.add_argument("--seeds", required=True)
    p.add_argument("--mode", choices=["live", "fixture"], default="fixture")
    p.add_argument("--fixture", default=None, help="JSON map title -> exists")
    p.add_argument("--partition", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("pipeline", help="seed -> generate -> pairs -> sample, end to end")
    p.add_argument("--corpus", default=None)
    p.add_argument("--format", choices=["canonical", "msdialog"], default="canonical")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-parallel", type=int, default=None)
    p.add_argument("--k", type=int, default=15)
    _add_backend_flags(p)

    return parser


def _settings(args: argparse.Namespace) -> Settings:
    config = parse_config_file(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "backend", None) is None and hasattr(args, "backend"):
        args.backend = config.get("backend", "mock")
    return Settings(flags=args, config=config)


def _max_parallel(args, backend: ChatBackend) -> int:
    wanted = getattr(args, "max_parallel", None) or os.cpu_count() or 1
    return max(1, min(wanted, backend.max_in_flight))


# --- subcommand implementations -----------------------------------------------


def cmd_seed(args) -> int:
    settings = _settings(args)
    backend = build_backend(settings)
    corpus_path = args.corpus or fixture_corpus_path()
    corpus = seeder.import_sequence_corpus(corpus_path, args.format)
    rng = random.Random(args.rng_seed)
    params = build_params(settings, request_seed=args.rng_seed)
    started = time.monotonic()
    seeds = list(seeder.build_seeds(backend, corpus, args.budget, rng, params))
    n = seeder.write_seeds(args.out, seeds)
    manifest = RunManifest(
        command="seed",
        argv=sys.argv[1:],
        config={"budget": args.budget, "rng_seed": args.rng_seed, "format": args.format},
        backend=backend.identity(),
        counts={"requested": args.budget, "generated": n,
                "failed": args.budget - n, "sequences_dropped": corpus.dropped},
    )
    manifest.add_input(corpus_path)
    manifest.add_output(args.out)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.out}.manifest.json")
    log.info("wrote %d seeds to %s", n, args.out)
    return 0


def _generate_one(backend, seed, params, mode, cache, rule_based):
    if mode == "turnwise":
        return generator.generate_dialog(backend, seed, params, cache=cache,
                                         rule_based_merge=rule_based)
    return generator.generate_dialog_single_pass(backend, seed, params)


def generate_dialogs(backend, seeds, params, mode, cache=None, rule_based=False,
                     max_parallel=1):
    """Generate per-seed dialogs with bounded workers; output order follows
    seed order regardless of completion order. Returns (dialogs, failures)."""
    dialogs: list = []
    failures = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures = [
            pool.submit(_generate_one, backend, seed, params, mode, cache, rule_based)
            for seed in seeds
        ]
        for seed, fut in zip(seeds, futures):
            try:
                dialogs.append(fut.result())
            except Exception as exc:
                failures += 1
                log.warning("dialog for seed %s failed: %s", seed.id, exc)
    return dialogs, failures


def cmd_generate(args) -> int:
    settings = _settings(args)
    backend = build_backend(settings)
    seeds = seeder.read_seeds(args.seeds)
    params = build_params(settings, request_seed=args.rng_seed)
    cache = None
    if not args.no_instruction_cache:
        cache = InstructionCache(args.instruction_cache)
    started = time.monotonic()
    dialogs, failures = generate_dialogs(
        backend, seeds, params, args.mode, cache=cache,
        rule_based=args.rule_based_merge, max_parallel=_max_parallel(args, backend),
    )
    n = taxonomy.write_dialogs(args.out, dialogs)
    mismatches = sum(1 for d in dialogs if d.length_mismatch)
    manifest = RunManifest(
        command="generate",
        argv=sys.argv[1:],
        config={"mode": args.mode, "rng_seed": args.rng_seed,
                "rule_based_merge": args.rule_based_merge,
                "instruction_cache": bool(cache)},
        backend=backend.identity(),
        counts={"seeds": len(seeds), "generated": n, "failed": failures,
                "length_mismatches": mismatches},
    )
    manifest.add_input(args.seeds)
    manifest.add_output(args.out)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.out}.manifest.json")
    log.info("wrote %d dialogs to %s (%d failures)", n, args.out, failures)
    return 0


def cmd_build_dpo(args) -> int:
    started = time.monotonic()
    seeds = seeder.read_seeds(args.seeds)
    chosen = taxonomy.read_dialogs(args.chosen)
    rejected = taxonomy.read_dialogs(args.rejected)
    pairs, skipped = preference.build_pairs(seeds, chosen, rejected, use_lmq=not args.no_lmq)
    n = write_jsonl(args.out, (p.to_dict() for p in pairs))
    manifest = RunManifest(
        command="build-dpo",
        argv=sys.argv[1:],
        config={"use_lmq": not args.no_lmq},
        backend="none",
        counts={"seeds": len(seeds), "pairs": n, "skipped": skipped},
    )
    for path in (args.seeds, args.chosen, args.rejected):
        manifest.add_input(path)
    manifest.add_output(args.out)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.out}.manifest.json")
    log.info("wrote %d preference pairs to %s (%d skipped)", n, args.out, skipped)
    return 0


def cmd_sample(args) -> int:
    settings = _settings(args)
    started = time.monotonic()
    human = taxonomy.read_dialogs(args.human)
    synthetic = taxonomy.read_dialogs(args.synthetic)
    rng = random.Random(args.rng_seed)
    counts: dict[str, int] = {"human": len(human), "synthetic": len(synthetic)}
    extra: dict = {}

    if args.strategy in ("bm25", "embed"):
        backend = build_backend(settings) if args.strategy == "embed" else None
        subset, report = sampler.retrieve_subset(
            human, synthetic, args.k, method=args.strategy, backend=backend,
            k1=float(settings.get("k1", float)), b=float(settings.get("b", float)),
        )
        counts.update(pre_dedup=report["pre_dedup"], post_dedup=report["post_dedup"])
    elif args.strategy == "seqint-bal":
        subset, shortfalls = sampler.seqint_bal(human, synthetic, args.min_count, rng)
        counts["sampled"] = len(subset)
        counts["signatures_short"] = len(shortfalls)
        extra["shortfalls"] = shortfalls
    elif args.strategy == "int-bal":
        subset = sampler.int_bal(human, synthetic, rng)
        counts["sampled"] = len(subset)
    else:
        subset = sampler.random_eq(human, synthetic, rng)
        counts["sampled"] = len(subset)

    n = taxonomy.write_dialogs(args.out, subset)
    manifest = RunManifest(
        command="sample",
        argv=sys.argv[1:],
        config={"strategy": args.strategy, "k": args.k,
                "min_count": args.min_count, "rng_seed": args.rng_seed, **extra},
        backend="none",
        counts={**counts, "written": n},
    )
    manifest.add_input(args.human)
    manifest.add_input(args.synthetic)
    manifest.add_output(args.out)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.out}.manifest.json")
    log.info("wrote %d dialogs to %s", n, args.out)
    return 0


def cmd_train_ip(args) -> int:
    started = time.monotonic()
    train = taxonomy.read_dialogs(args.train)
    config = ipeval.TrainConfig(
        learning_rate=args.learning_rate, l2=args.l2,
        epochs=args.epochs, rng_seed=args.rng_seed,
    )
    model = ipeval.train_ip(train, config)
    ipeval.save_model(model, args.model_out)
    manifest = RunManifest(
        command="train-ip",
        argv=sys.argv[1:],
        config={"epochs": args.epochs, "learning_rate": args.learning_rate,
                "l2": args.l2, "rng_seed": args.rng_seed},
        backend="none",
        counts={"dialogs": len(train),
                "utterances": sum(len(d.utterances) for d in train),
                "features": len(model.vocab)},
    )
    manifest.add_input(args.train)
    manifest.add_output(args.model_out)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.model_out}.manifest.json")
    log.info("trained on %d dialogs; final loss %.4f", len(train), model.epoch_losses[-1])
    return 0


def cmd_eval_ip(args) -> int:
    started = time.monotonic()
    model = ipeval.load_model(args.model)
    test = taxonomy.read_dialogs(args.test)
    golds, preds = ipeval.predict_corpus(model, test)
    report = ipeval.evaluate(golds, preds)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    manifest = RunManifest(
        command="eval-ip",
        argv=sys.argv[1:],
        config={},
        backend="none",
        counts={"dialogs": len(test), "samples": report.n_samples},
    )
    manifest.add_input(args.model)
    manifest.add_input(args.test)
    manifest.add_output(args.report)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{args.report}.manifest.json")
    log.info("precision %.4f f1_micro %.4f f1_macro %.4f",
             report.precision, report.f1_micro, report.f1_macro)
    return 0


def cmd_stats(args) -> int:
    corpus = taxonomy.read_dialogs(args.input)
    print(json.dumps(ipeval.corpus_stats(corpus).to_dict(), indent=2))
    return 0


def cmd_filter_entities(args) -> int:
    started = time.monotonic()
    seeds = seeder.read_seeds(args.seeds)
    if args.mode == "fixture":
        fixture = {}
        if args.fixture:
            with open(args.fixture, "r", encoding="utf-8") as fh:
                fixture = json.load(fh)
        client = enrich.WikiClient(mode="fixture", fixture=fixture)
    else:
        client = enrich.WikiClient(mode="live")
    marked = list(enrich.mark_hallucinated(client, seeds))
    out = args.out or f"{args.seeds}.marked.jsonl"
    seeder.write_seeds(out, marked)
    counts = {"seeds": len(seeds), "check_failures": client.check_failures}
    outputs = [out]
    if args.partition:
        yes, no, _unknown = enrich.partition_seeds(marked)
        stem = out[:-6] if out.endswith(".jsonl") else out
        yes_path, no_path = f"{stem}.hallucinated.jsonl", f"{stem}.non_hallucinated.jsonl"
        seeder.write_seeds(yes_path, yes)
        seeder.write_seeds(no_path, no)
        counts.update(hallucinated=len(yes), non_hallucinated=len(no))
        outputs += [yes_path, no_path]
    manifest = RunManifest(
        command="filter-entities",
        argv=sys.argv[1:],
        config={"mode": args.mode, "partition": args.partition},
        backend="none" if args.mode == "fixture" else enrich.WIKIPEDIA_API,
        counts=counts,
    )
    manifest.add_input(args.seeds)
    if args.fixture:
        manifest.add_input(args.fixture)
    for path in outputs:
        manifest.add_output(path)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(f"{out}.manifest.json")
    return 0


def cmd_pipeline(args) -> int:
    settings = _settings(args)
    backend = build_backend(settings)
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.monotonic()

    corpus_path = args.corpus or fixture_corpus_path()
    corpus = seeder.import_sequence_corpus(corpus_path, args.format)
    rng = random.Random(args.rng_seed)
    params = build_params(settings, request_seed=args.rng_seed)
    seeds = list(seeder.build_seeds(backend, corpus, args.budget, rng, params))
    seeds_path = os.path.join(args.out_dir, "seeds.jsonl")
    seeder.write_seeds(seeds_path, seeds)

    cache = InstructionCache()
    parallel = _max_parallel(args, backend)
    chosen, chosen_failed = generate_dialogs(
        backend, seeds, params, "turnwise", cache=cache, max_parallel=parallel)
    rejected, rejected_failed = generate_dialogs(
        backend, seeds, params, "singlepass", max_parallel=parallel)
    dialogs_path = os.path.join(args.out_dir, "dialogs.jsonl")
    rejected_path = os.path.join(args.out_dir, "rejected.jsonl")
    taxonomy.write_dialogs(dialogs_path, chosen)
    taxonomy.write_dialogs(rejected_path, rejected)

    pairs, skipped = preference.build_pairs(seeds, chosen, rejected)
    pairs_path = os.path.join(args.out_dir, "pairs.jsonl")
    write_jsonl(pairs_path, (p.to_dict() for p in pairs))

    # Retrieval demo: the first tenth of the corpus plays the query side.
    n_queries = max(1, len(chosen) // 10)
    queries, collection = chosen[:n_queries], chosen[n_queries:]
    subset_path = os.path.join(args.out_dir, "subset.jsonl")
    if collection:
        subset, report = sampler.retrieve_subset(queries, collection, args.k, method="bm25")
        taxonomy.write_dialogs(subset_path, subset)
    else:
        report = {"pre_dedup": 0, "post_dedup": 0}
        taxonomy.write_dialogs(subset_path, [])

    manifest = RunManifest(
        command="pipeline",
        argv=sys.argv[1:],
        config={"budget": args.budget, "rng_seed": args.rng_seed, "k": args.k},
        backend=backend.identity(),
        counts={
            "seeds": len(seeds),
            "dialogs": len(chosen),
            "dialog_failures": chosen_failed,
            "rejected": len(rejected),
            "rejected_failures": rejected_failed,
            "pairs": len(pairs),
            "pairs_skipped": skipped,
            "subset_pre_dedup": report["pre_dedup"],
            "subset_post_dedup": report["post_dedup"],
        },
    )
    manifest.add_input(corpus_path)
    for path in (seeds_path, dialogs_path, rejected_path, pairs_path, subset_path):
        manifest.add_output(path)
    manifest.wall_time_s = time.monotonic() - started
    manifest.write(os.path.join(args.out_dir, "manifest.json"))
    log.info("pipeline complete: %d seeds -> %d dialogs, %d pairs", len(seeds), len(chosen), len(pairs))
    return 0


_COMMANDS = {
    "seed": cmd_seed,
    "generate": cmd_generate,
    "build-dpo": cmd_build_dpo,
    "sample": cmd_sample,
    "train-ip": cmd_train_ip,
    "eval-ip": cmd_eval_ip,
    "stats": cmd_stats,
    "filter-entities": cmd_filter_entities,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.error("%s", exc)
        if args.verbose:
            raise
        return 2


if __name__ == "__main__":
    sys.exit(main())
