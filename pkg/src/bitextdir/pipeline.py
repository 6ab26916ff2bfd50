"""The forging pipeline: balanced sampling, direction filtering, pseudo-QE
record generation, and real/synthetic mixing.

Every stage is seeded and deterministic; a full run writes its outputs to a
scratch directory first and renames them into place only on success, plus a
JSON run manifest recording seeds, input hashes, and per-stage counts.
"""

from __future__ import annotations

import configparser
import enum
import hashlib
import json
import logging
import random
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .corpus import (
    CorpusManifest,
    SentencePair,
    StreamStats,
    TokenizerConfig,
    TokenizerMode,
    TRUECASE_TOKENIZER,
    count_lines,
    load_manifest,
    read_lines,
    stream_pairs,
)
from .direction import (
    Decision,
    EnsembleScore,
    classify_pair,
    load_model,
    read_scores_tsv,
    write_scores_tsv,
)
from .errors import (
    BitextDirError,
    EmptyInputError,
    InsufficientSyntheticError,
    LineCountMismatchError,
    MissingFileError,
    MissingMtLineError,
    MissingScoreError,
    ShortfallError,
)
from .pseudoqe import (
    DEFAULT_MAX_SHIFT_DISTANCE,
    DEFAULT_MAX_SHIFT_SIZE,
    PseudoQERecord,
    make_pseudo_record,
)
from .qedata import write_dataset, write_meta_tsv

log = logging.getLogger(__name__)


class ShortfallPolicy(enum.Enum):
    TAKE_ALL = "take-all"
    ERROR = "error"


class KeepPartition(enum.Enum):
    SOURCE_ORIGINAL = "source-original"
    TARGET_ORIGINAL = "target-original"
    MIXED = "mixed"


@dataclass(frozen=True)
class SamplingPlan:
    per_corpus_n: int
    seed: int = 42
    shortfall_policy: ShortfallPolicy = ShortfallPolicy.TAKE_ALL

    def __post_init__(self):
        if self.per_corpus_n < 1:
            raise ValueError(f"per_corpus_n must be >= 1, got {self.per_corpus_n}")


@dataclass(frozen=True)
class MixSpec:
    """Emit all real records plus ratio_synth/ratio_real times as many
    synthetic ones."""

    ratio_real: int
    ratio_synth: int
    seed: int = 42

    def __post_init__(self):
        if self.ratio_real < 1 or self.ratio_synth < 1:
            raise ValueError(
                f"mix ratio parts must be positive, got {self.ratio_real}:{self.ratio_synth}"
            )


def balanced_sample(
    manifest: CorpusManifest, plan: SamplingPlan, stats: StreamStats | None = None
) -> list[SentencePair]:
    """Draw per_corpus_n pairs from each sub-corpus, uniformly without
    replacement, seeded per sub-corpus name. Output keeps manifest order and
    ascending line index within each sub-corpus."""
    pools: dict[str, list[SentencePair]] = {e.name: [] for e in manifest.entries}
    for pair in stream_pairs(manifest, stats):
        pools[pair.sub_corpus].append(pair)
    sampled: list[SentencePair] = []
    for entry in manifest.entries:
        pool = pools[entry.name]
        if len(pool) < plan.per_corpus_n:
            if plan.shortfall_policy is ShortfallPolicy.ERROR:
                raise ShortfallError(entry.name, len(pool), plan.per_corpus_n)
            log.warning(
                "sub-corpus %s has %d pairs, wanted %d: taking all",
                entry.name,
                len(pool),
                plan.per_corpus_n,
            )
            sampled.extend(pool)
            continue
        rng = random.Random(f"{plan.seed}:{entry.name}")
        indices = sorted(rng.sample(range(len(pool)), plan.per_corpus_n))
        sampled.extend(pool[i] for i in indices)
    return sampled


ScoredPair = tuple[SentencePair, EnsembleScore]


def filter_by_direction(
    scored_pairs: Iterable[ScoredPair],
    keep: KeepPartition,
    tau: float = 0.5,
) -> list[ScoredPair]:
    """Select pairs by ensemble probability.

    source-original keeps p >= tau, target-original keeps p <= 1 - tau;
    a pair at exactly tau counts as source-original, so at tau = 0.5 the two
    partitions split the input exactly. mixed keeps everything.
    """
    kept = []
    for pair, score in scored_pairs:
        p = score.p_ensemble
        if keep is KeepPartition.MIXED:
            take = True
        elif keep is KeepPartition.SOURCE_ORIGINAL:
            take = p >= tau
        else:
            take = p <= 1.0 - tau and p != tau
        if take:
            kept.append((pair, score))
    if not kept:
        log.warning("direction filter kept no pairs (keep=%s, tau=%s)", keep.value, tau)
    return kept


def mix_datasets(
    real: Sequence[PseudoQERecord],
    synth: Sequence[PseudoQERecord],
    spec: MixSpec,
) -> list[PseudoQERecord]:
    """All real records plus floor(len(real) * ratio_synth / ratio_real)
    synthetic ones, drawn without replacement and shuffled, all seeded."""
    if not real:
        raise EmptyInputError("real record stream is empty")
    if not synth:
        raise EmptyInputError("synthetic record stream is empty")
    need = len(real) * spec.ratio_synth // spec.ratio_real
    if need > len(synth):
        raise InsufficientSyntheticError(need, len(synth))
    rng = random.Random(f"{spec.seed}:mix")
    chosen = sorted(rng.sample(range(len(synth)), need))
    combined = list(real) + [synth[i] for i in chosen]
    rng.shuffle(combined)
    return combined


@dataclass
class ForgeConfig:
    """Everything one forging run needs. ``mt_paths`` maps each sub-corpus
    name to a hypothesis file line-aligned with that sub-corpus."""

    manifest_path: Path
    mt_paths: dict[str, Path]
    out_prefix: Path
    per_corpus_n: int = 100
    seed: int = 42
    shortfall_policy: ShortfallPolicy = ShortfallPolicy.TAKE_ALL
    keep: KeepPartition = KeepPartition.SOURCE_ORIGINAL
    tau: float = 0.5
    abstain_band: float = 0.0
    model_src_path: Path | None = None
    model_tgt_path: Path | None = None
    scores_path: Path | None = None
    tok_cfg: TokenizerConfig = TRUECASE_TOKENIZER
    include_gap_tags: bool = False
    max_shift_distance: int = DEFAULT_MAX_SHIFT_DISTANCE
    max_shift_size: int = DEFAULT_MAX_SHIFT_SIZE
    threads: int = 1

    @classmethod
    def from_ini(cls, path: str | Path, overrides: Mapping[str, str] | None = None) -> "ForgeConfig":
        """Load an INI run config; ``overrides`` maps ``section.key`` to a
        replacement value, so every key is reachable from the command line.

        Sections: [corpus] manifest; [mt] one ``name = path`` per sub-corpus;
        [sample] n, seed, shortfall; [direction] keep, tau, band, model_src,
        model_tgt, scores; [output] prefix, gap_tags; [tokenizer] mode,
        lowercase; [ter] max_shift_distance, max_shift_size.
        """
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(path)
        parser = configparser.ConfigParser()
        parser.optionxform = str  # sub-corpus names are case-sensitive
        parser.read(path, encoding="utf-8")
        for key, value in (overrides or {}).items():
            section, _, option = key.partition(".")
            if not option:
                raise BitextDirError(f"override key must look like section.key: {key!r}")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option, value)
        base = path.parent

        def _path(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else (base / p)

        if not parser.has_option("corpus", "manifest"):
            raise BitextDirError(f"{path}: missing [corpus] manifest entry")
        if not parser.has_option("output", "prefix"):
            raise BitextDirError(f"{path}: missing [output] prefix entry")
        mt_paths = {
            name: _path(value) for name, value in (parser.items("mt") if parser.has_section("mt") else [])
        }
        sample = parser["sample"] if parser.has_section("sample") else {}
        direction = parser["direction"] if parser.has_section("direction") else {}
        output = parser["output"]
        tok = parser["tokenizer"] if parser.has_section("tokenizer") else {}
        ter_opts = parser["ter"] if parser.has_section("ter") else {}
        return cls(
            manifest_path=_path(parser.get("corpus", "manifest")),
            mt_paths=mt_paths,
            out_prefix=_path(output.get("prefix")),
            per_corpus_n=int(sample.get("n", "100")),
            seed=int(sample.get("seed", "42")),
            shortfall_policy=ShortfallPolicy(sample.get("shortfall", "take-all")),
            keep=KeepPartition(direction.get("keep", "source-original")),
            tau=float(direction.get("tau", "0.5")),
            abstain_band=float(direction.get("band", "0.0")),
            model_src_path=_path(direction["model_src"]) if "model_src" in direction else None,
            model_tgt_path=_path(direction["model_tgt"]) if "model_tgt" in direction else None,
            scores_path=_path(direction["scores"]) if "scores" in direction else None,
            tok_cfg=TokenizerConfig(
                mode=TokenizerMode(tok.get("mode", "char-cjk")),
                lowercase=tok.get("lowercase", "false").lower() in ("1", "true", "yes"),
            ),
            include_gap_tags=output.get("gap_tags", "false").lower() in ("1", "true", "yes"),
            max_shift_distance=int(ter_opts.get("max_shift_distance", str(DEFAULT_MAX_SHIFT_DISTANCE))),
            max_shift_size=int(ter_opts.get("max_shift_size", str(DEFAULT_MAX_SHIFT_SIZE))),
        )


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _score_sampled(
    config: ForgeConfig, sampled: Sequence[SentencePair]
) -> list[ScoredPair]:
    if config.scores_path is not None:
        table = read_scores_tsv(config.scores_path)
        scored = []
        for pair in sampled:
            score = table.get((pair.sub_corpus, pair.id))
            if score is None:
                raise MissingScoreError(pair.sub_corpus, pair.id)
            scored.append((pair, score))
        return scored
    if config.model_src_path is None or config.model_tgt_path is None:
        raise BitextDirError(
            "forge needs either a scores file or both direction models"
        )
    model_src = load_model(config.model_src_path)
    model_tgt = load_model(config.model_tgt_path)
    return [
        (pair, classify_pair(model_src, model_tgt, pair, config.abstain_band))
        for pair in sampled
    ]


def run_forge(config: ForgeConfig) -> dict:
    """Execute sample -> score -> filter -> record -> emit and return the run
    manifest (also written as ``<prefix>.run.json``)."""
    manifest = load_manifest(config.manifest_path)
    needed = {e.name for e in manifest.entries}
    for name in sorted(needed):
        if name not in config.mt_paths:
            raise MissingMtLineError(name, 0)
    for entry in manifest.entries:
        mt_path = config.mt_paths[entry.name]
        if not mt_path.is_file():
            raise MissingFileError(mt_path)
        n_mt = count_lines(mt_path)
        if n_mt != entry.n_lines:
            raise LineCountMismatchError(f"{entry.name} (mt)", entry.n_lines, n_mt)

    stats = StreamStats()
    plan = SamplingPlan(
        per_corpus_n=config.per_corpus_n,
        seed=config.seed,
        shortfall_policy=config.shortfall_policy,
    )
    sampled = balanced_sample(manifest, plan, stats)
    scored = _score_sampled(config, sampled)
    abstained = [sp for sp in scored if sp[1].decision is Decision.ABSTAIN]
    decided = [sp for sp in scored if sp[1].decision is not Decision.ABSTAIN]
    kept = filter_by_direction(decided, config.keep, config.tau)

    mt_lines: dict[str, list[str]] = {}
    for entry in manifest.entries:
        if any(pair.sub_corpus == entry.name for pair, _ in kept):
            mt_lines[entry.name] = list(read_lines(config.mt_paths[entry.name]))

    def _record(scored_pair: ScoredPair) -> PseudoQERecord:
        pair, _ = scored_pair
        lines = mt_lines[pair.sub_corpus]
        mt_line = lines[pair.id] if pair.id < len(lines) else None
        return make_pseudo_record(
            pair,
            mt_line,
            tok_cfg=config.tok_cfg,
            include_gap_tags=config.include_gap_tags,
            max_shift_distance=config.max_shift_distance,
            max_shift_size=config.max_shift_size,
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(_record, kept))
    else:
        records = [_record(sp) for sp in kept]

    out_prefix = Path(config.out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    input_hashes = {str(config.manifest_path): _sha256(config.manifest_path)}
    for entry in manifest.entries:
        input_hashes[str(entry.src_path)] = _sha256(entry.src_path)
        input_hashes[str(entry.tgt_path)] = _sha256(entry.tgt_path)
        input_hashes[str(config.mt_paths[entry.name])] = _sha256(config.mt_paths[entry.name])
    for extra in (config.scores_path, config.model_src_path, config.model_tgt_path):
        if extra is not None:
            input_hashes[str(extra)] = _sha256(extra)

    tmp_dir = Path(tempfile.mkdtemp(prefix=".forge-", dir=out_prefix.parent))
    try:
        tmp_prefix = tmp_dir / out_prefix.name
        written = write_dataset(records, tmp_prefix, include_gap_tags=config.include_gap_tags)
        write_meta_tsv(
            ((pair.sub_corpus, pair.id) for pair, _ in kept),
            tmp_prefix.with_name(tmp_prefix.name + ".meta.tsv"),
        )
        written.append(tmp_prefix.with_name(tmp_prefix.name + ".meta.tsv"))
        write_scores_tsv(scored, tmp_prefix.with_name(tmp_prefix.name + ".scores.tsv"))
        written.append(tmp_prefix.with_name(tmp_prefix.name + ".scores.tsv"))
        run_manifest = {
            "version": __version__,
            "seeds": {"sample": config.seed},
            "input_hashes": input_hashes,
            "stage_counts": {
                "sampled": len(sampled),
                "abstained": len(abstained),
                "kept": len(kept),
                "filtered_out": len(decided) - len(kept),
                "records": len(records),
                "skipped_blank": sum(stats.skipped.values()),
            },
            "config": {
                "keep": config.keep.value,
                "tau": config.tau,
                "abstain_band": config.abstain_band,
                "per_corpus_n": config.per_corpus_n,
                "tokenizer_mode": config.tok_cfg.mode.value,
                "tokenizer_lowercase": config.tok_cfg.lowercase,
                "gap_tags": config.include_gap_tags,
            },
            "output_files": [out_prefix.name + p.name[len(tmp_prefix.name):] for p in written]
            + [out_prefix.name + ".run.json"],
        }
        manifest_path = tmp_prefix.with_name(tmp_prefix.name + ".run.json")
        with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(run_manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(manifest_path)
        for tmp_file in written:
            final = out_prefix.with_name(out_prefix.name + tmp_file.name[len(tmp_prefix.name):])
            tmp_file.replace(final)
    finally:
        shutil.rmtree(tmp_dir, ignore_errors=True)
    return run_manifest
