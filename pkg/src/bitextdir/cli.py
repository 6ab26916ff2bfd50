"""Command-line interface: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 data error. Data errors print one
machine-readable ``error: ...`` line on stderr. Randomized subcommands honor
``--seed`` (fallback: the BITEXTDIR_SEED environment variable, then 42), so
identical flags and inputs give byte-identical outputs. ``--threads 1`` is
the reference behavior; parallel runs produce the same bytes.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    SentencePair,
    Side,
    TokenizerConfig,
    TokenizerMode,
    load_manifest,
    read_lines,
    stream_pairs,
    tokenize,
)
from .direction import (
    FeatureConfig,
    classify_pair,
    evaluate_decision_labels,
    load_model,
    read_scores_tsv,
    save_model,
    train_side_classifier,
    write_scores_tsv,
)
from .errors import BitextDirError, FormatError
from .evalmetrics import mcc, pearson
from .pipeline import (
    ForgeConfig,
    MixSpec,
    SamplingPlan,
    ShortfallPolicy,
    balanced_sample,
    mix_datasets,
    run_forge,
)
from .pseudoqe import make_pseudo_record, ter, word_tags
from .qedata import read_dataset, validate_dataset, write_dataset, write_meta_tsv
from .textstats import (
    corpus_style_report,
    js_csv,
    js_divergence,
    load_function_words,
    profiles_csv,
    read_corpus_file_tokens,
    vocab_distribution,
)

log = logging.getLogger("bitextdir")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _default_seed() -> int:
    env = os.environ.get("BITEXTDIR_SEED")
    try:
        return int(env) if env else 42
    except ValueError:
        return 42


def _add_tokenizer_flags(parser: argparse.ArgumentParser, lowercase_default: bool) -> None:
    parser.add_argument(
        "--tok-mode",
        choices=[m.value for m in TokenizerMode],
        default=TokenizerMode.CHAR_CJK.value,
        help="tokenization mode (default: %(default)s)",
    )
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--lowercase",
        dest="lowercase",
        action="store_true",
        default=lowercase_default,
        help="lowercase before tokenizing" + (" (default)" if lowercase_default else ""),
    )
    group.add_argument(
        "--no-lowercase",
        dest="lowercase",
        action="store_false",
        help="keep case" + ("" if lowercase_default else " (default)"),
    )


def _tok_cfg(args) -> TokenizerConfig:
    return TokenizerConfig(mode=TokenizerMode(args.tok_mode), lowercase=args.lowercase)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="bitextdir",
        description="Tag parallel corpora by translation direction and forge pseudo-QE data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--seed",
        type=int,
        default=_default_seed(),
        help="seed for every randomized step (default: $BITEXTDIR_SEED or 42)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for per-sentence stages (default: available parallelism)",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only errors")
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("stats", help="style profiles (TTR, lexical density) and JS divergences")
    p.add_argument("--manifest", required=True, help="corpus manifest (name<TAB>src<TAB>tgt)")
    p.add_argument("--scores", help="scores TSV from classify; partitions pairs by direction")
    p.add_argument("--tau", type=float, default=0.5, help="direction threshold (default: %(default)s)")
    p.add_argument("--ref-src", help="reference-set source file (adds a partition)")
    p.add_argument("--ref-tgt", help="reference-set target file (adds a partition)")
    p.add_argument("--fw-src", default="en", help="function words for the source side: en, zh, or a file (default: %(default)s)")
    p.add_argument("--fw-tgt", default="zh", help="function words for the target side (default: %(default)s)")
    p.add_argument("--ttr-budget", type=int, default=100_000, help="token budget per partition for TTR (default: %(default)s)")
    p.add_argument("--max-types", type=int, default=50_000, help="types kept per distribution for JS (default: %(default)s)")
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.profiles.csv and <prefix>.js.csv")
    _add_tokenizer_flags(p, lowercase_default=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("jsdiv", help="JS divergence between the vocabularies of two text files")
    p.add_argument("--a", required=True, help="first text file")
    p.add_argument("--b", required=True, help="second text file")
    p.add_argument("--max-types", type=int, default=50_000)
    _add_tokenizer_flags(p, lowercase_default=True)
    p.set_defaults(func=_cmd_jsdiv)

    p = sub.add_parser("train-direction", help="train one side's original-vs-translationese model")
    p.add_argument("--original", required=True, help="original text, one sentence per line")
    p.add_argument("--translated", required=True, help="translationese text, one sentence per line")
    p.add_argument("--side", required=True, choices=[s.value for s in Side])
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--alpha", type=float, default=1.0, help="additive smoothing (default: %(default)s)")
    p.add_argument("--buckets", type=int, default=1 << 20, help="hash buckets, power of two (default: %(default)s)")
    p.add_argument("--word-orders", default="1,2", help="word n-gram orders (default: %(default)s)")
    p.add_argument("--char-orders", default="2,3", help="character n-gram orders (default: %(default)s)")
    p.add_argument("--hash-seed", type=int, default=0, help="feature hash seed (default: %(default)s)")
    _add_tokenizer_flags(p, lowercase_default=True)
    p.set_defaults(func=_cmd_train_direction)

    p = sub.add_parser("classify", help="score every pair of a corpus with two direction models")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-src", required=True)
    p.add_argument("--model-tgt", required=True)
    p.add_argument("--band", type=float, default=0.0, help="abstain band around 0.5 (default: %(default)s)")
    p.add_argument("--out", required=True, help="scores TSV to write")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("ter", help="edit-rate scores and OK/BAD tags for hypothesis vs reference files")
    p.add_argument("--hyp", required=True, help="hypothesis file, line-aligned with --ref")
    p.add_argument("--ref", required=True, help="reference file")
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.hter and <prefix>.tags")
    p.add_argument("--gap-tags", action="store_true", help="also write <prefix>.gap_tags")
    p.add_argument("--max-shift-distance", type=int, default=10)
    p.add_argument("--max-shift-size", type=int, default=10)
    _add_tokenizer_flags(p, lowercase_default=False)
    p.set_defaults(func=_cmd_ter)

    p = sub.add_parser("make-pseudo", help="build a full QE dataset from src/mt/ref files")
    p.add_argument("--src", required=True, help="source file")
    p.add_argument("--mt", required=True, help="MT hypothesis file, line-aligned")
    p.add_argument("--ref", required=True, help="reference file, line-aligned")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--gap-tags", action="store_true")
    p.add_argument("--max-shift-distance", type=int, default=10)
    p.add_argument("--max-shift-size", type=int, default=10)
    _add_tokenizer_flags(p, lowercase_default=False)
    p.set_defaults(func=_cmd_make_pseudo)

    p = sub.add_parser("sample", help="balanced per-sub-corpus sample of a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--n", type=int, required=True, help="pairs per sub-corpus")
    p.add_argument("--shortfall", choices=[s.value for s in ShortfallPolicy], default="take-all")
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.src, <prefix>.tgt, <prefix>.meta.tsv")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("mix", help="combine real and synthetic QE datasets at a ratio")
    p.add_argument("--real", required=True, help="prefix of the real dataset")
    p.add_argument("--synth", required=True, help="prefix of the synthetic dataset")
    p.add_argument("--ratio", default="1:1", help="real:synth ratio, e.g. 1:10 (default: %(default)s)")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("forge", help="run the whole pipeline from an INI config")
    p.add_argument("--config", required=True, help="INI run config")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config key (repeatable)",
    )
    p.set_defaults(func=_cmd_forge)

    p = sub.add_parser("eval", help="score predictions against gold files")
    p.add_argument("--task", required=True, choices=["sentence", "word", "direction"])
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("validate-format", help="check a QE dataset against the WMT layout")
    p.add_argument("--prefix", required=True)
    p.set_defaults(func=_cmd_validate_format)

    return parser


def _cmd_stats(args) -> int:
    tok_cfg = _tok_cfg(args)
    fw_src = load_function_words(args.fw_src)
    fw_tgt = load_function_words(args.fw_tgt)
    manifest = load_manifest(args.manifest)
    pairs = list(stream_pairs(manifest))
    partitions: dict[str, list] = {}
    if args.scores:
        table = read_scores_tsv(args.scores)
        so, to = [], []
        for pair in pairs:
            score = table.get((pair.sub_corpus, pair.id))
            if score is None:
                raise FormatError(args.scores, f"no score for {pair.sub_corpus}:{pair.id}")
            (so if score.p_ensemble >= args.tau else to).append(pair)
        partitions["source-original"] = so
        partitions["target-original"] = to
        partitions["mixed"] = pairs
    else:
        partitions["all"] = pairs
    if args.ref_src or args.ref_tgt:
        if not (args.ref_src and args.ref_tgt):
            raise BitextDirError("--ref-src and --ref-tgt must be given together")
        ref_pairs = [
            SentencePair(id=i, sub_corpus="reference", src=s, tgt=t)
            for i, (s, t) in enumerate(zip(read_lines(Path(args.ref_src)), read_lines(Path(args.ref_tgt))))
            if s.strip() and t.strip()
        ]
        partitions["reference"] = ref_pairs
    report = corpus_style_report(
        partitions,
        fw_src,
        fw_tgt,
        tok_cfg=tok_cfg,
        ttr_budget=args.ttr_budget,
        max_types=args.max_types,
        seed=args.seed,
    )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    profiles_path = prefix.with_name(prefix.name + ".profiles.csv")
    js_path = prefix.with_name(prefix.name + ".js.csv")
    profiles_path.write_text(profiles_csv(report), encoding="utf-8")
    js_path.write_text(js_csv(report), encoding="utf-8")
    log.info("wrote %s and %s", profiles_path, js_path)
    return 0


def _cmd_jsdiv(args) -> int:
    tok_cfg = _tok_cfg(args)
    dist_a = vocab_distribution(read_corpus_file_tokens(args.a, tok_cfg), max_types=args.max_types)
    dist_b = vocab_distribution(read_corpus_file_tokens(args.b, tok_cfg), max_types=args.max_types)
    print(f"{js_divergence(dist_a, dist_b):.6f}")
    return 0


def _parse_orders(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text or text == "none":
        return ()
    return tuple(int(p) for p in text.split(","))


def _cmd_train_direction(args) -> int:
    cfg = FeatureConfig(
        word_ngram_orders=_parse_orders(args.word_orders),
        char_ngram_orders=_parse_orders(args.char_orders),
        hash_buckets=args.buckets,
        hash_seed=args.hash_seed,
    )
    model = train_side_classifier(
        read_lines(Path(args.original)),
        read_lines(Path(args.translated)),
        side=Side(args.side),
        cfg=cfg,
        alpha=args.alpha,
        tok_cfg=_tok_cfg(args),
    )
    save_model(model, args.out)
    log.info("wrote %s", args.out)
    return 0


def _cmd_classify(args) -> int:
    model_src = load_model(args.model_src)
    model_tgt = load_model(args.model_tgt)
    manifest = load_manifest(args.manifest)
    rows = (
        (pair, classify_pair(model_src, model_tgt, pair, args.band))
        for pair in stream_pairs(manifest)
    )
    n = write_scores_tsv(rows, args.out)
    log.info("scored %d pairs into %s", n, args.out)
    return 0


def _read_aligned(path_a: str, path_b: str) -> list[tuple[str, str]]:
    lines_a = list(read_lines(Path(path_a)))
    lines_b = list(read_lines(Path(path_b)))
    if len(lines_a) != len(lines_b):
        raise FormatError(path_b, f"line count {len(lines_b)} != {len(lines_a)} in {path_a}")
    return list(zip(lines_a, lines_b))


def _cmd_ter(args) -> int:
    tok_cfg = _tok_cfg(args)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    hter_path = prefix.with_name(prefix.name + ".hter")
    tags_path = prefix.with_name(prefix.name + ".tags")
    gaps_path = prefix.with_name(prefix.name + ".gap_tags")
    pairs = _read_aligned(args.hyp, args.ref)
    with open(hter_path, "w", encoding="utf-8", newline="\n") as hter_fh, open(
        tags_path, "w", encoding="utf-8", newline="\n"
    ) as tags_fh:
        gaps_fh = open(gaps_path, "w", encoding="utf-8", newline="\n") if args.gap_tags else None
        try:
            for hyp_line, ref_line in pairs:
                hyp = tokenize(hyp_line, tok_cfg)
                ref = tokenize(ref_line, tok_cfg)
                result, script = ter(
                    hyp,
                    ref,
                    max_shift_distance=args.max_shift_distance,
                    max_shift_size=args.max_shift_size,
                )
                tags, gaps = word_tags(script, len(hyp))
                hter_fh.write(f"{result.score:.6f}\n")
                tags_fh.write(" ".join(tags) + "\n")
                if gaps_fh is not None:
                    gaps_fh.write(" ".join(gaps) + "\n")
        finally:
            if gaps_fh is not None:
                gaps_fh.close()
    log.info("wrote %s and %s", hter_path, tags_path)
    return 0


def _cmd_make_pseudo(args) -> int:
    tok_cfg = _tok_cfg(args)
    src_lines = list(read_lines(Path(args.src)))
    mt_ref = _read_aligned(args.mt, args.ref)
    if len(src_lines) != len(mt_ref):
        raise FormatError(args.src, f"line count {len(src_lines)} != {len(mt_ref)} in {args.mt}")
    records = []
    for i, (src, (mt, ref)) in enumerate(zip(src_lines, mt_ref)):
        pair = SentencePair(id=i, sub_corpus="cli", src=src, tgt=ref)
        records.append(
            make_pseudo_record(
                pair,
                mt,
                tok_cfg=tok_cfg,
                include_gap_tags=args.gap_tags,
                max_shift_distance=args.max_shift_distance,
                max_shift_size=args.max_shift_size,
            )
        )
    paths = write_dataset(records, args.out_prefix, include_gap_tags=args.gap_tags)
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return 0


def _cmd_sample(args) -> int:
    manifest = load_manifest(args.manifest)
    plan = SamplingPlan(
        per_corpus_n=args.n,
        seed=args.seed,
        shortfall_policy=ShortfallPolicy(args.shortfall),
    )
    sampled = balanced_sample(manifest, plan)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(prefix.with_name(prefix.name + ".src"), "w", encoding="utf-8", newline="\n") as src_fh, open(
        prefix.with_name(prefix.name + ".tgt"), "w", encoding="utf-8", newline="\n"
    ) as tgt_fh:
        for pair in sampled:
            src_fh.write(pair.src + "\n")
            tgt_fh.write(pair.tgt + "\n")
    write_meta_tsv(
        ((p.sub_corpus, p.id) for p in sampled),
        prefix.with_name(prefix.name + ".meta.tsv"),
    )
    log.info("sampled %d pairs", len(sampled))
    return 0


def _cmd_mix(args) -> int:
    try:
        ratio_real, ratio_synth = (int(p) for p in args.ratio.split(":"))
    except ValueError:
        raise BitextDirError(f"ratio must look like R:S, got {args.ratio!r}") from None
    spec = MixSpec(ratio_real=ratio_real, ratio_synth=ratio_synth, seed=args.seed)
    real = read_dataset(args.real)
    synth = read_dataset(args.synth)
    combined = mix_datasets(real, synth, spec)
    include_gaps = all(r.gap_tags is not None for r in combined)
    write_dataset(combined, args.out_prefix, include_gap_tags=include_gaps)
    log.info("mixed %d real + %d synthetic records", len(real), len(combined) - len(real))
    return 0


def _cmd_forge(args) -> int:
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise BitextDirError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    config = ForgeConfig.from_ini(args.config, overrides)
    config.threads = args.threads
    run_manifest = run_forge(config)
    counts = run_manifest["stage_counts"]
    log.info(
        "forged %d records (sampled %d, filtered out %d, abstained %d)",
        counts["records"],
        counts["sampled"],
        counts["filtered_out"],
        counts["abstained"],
    )
    return 0


def _read_float_column(path: str) -> list[float]:
    values = []
    for line_no, line in enumerate(read_lines(Path(path)), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise FormatError(path, f"unparsable number {line!r}", line_no) from None
    return values


def _read_tag_stream(path: str) -> list[str]:
    tags = []
    for line in read_lines(Path(path)):
        tags.extend(line.split())
    return tags


def _read_decision_column(path: str) -> list[str]:
    """Accept either a scores TSV (decision in the last column) or a plain
    one-label-per-line file."""
    labels = []
    for line in read_lines(Path(path)):
        line = line.rstrip()
        if not line or line.startswith("#"):
            continue
        labels.append(line.split("\t")[-1])
    return labels


def _cmd_eval(args) -> int:
    print("metric,value")
    if args.task == "sentence":
        value = pearson(_read_float_column(args.pred), _read_float_column(args.gold))
        print(f"pearson,{value:.6f}")
    elif args.task == "word":
        value = mcc(_read_tag_stream(args.pred), _read_tag_stream(args.gold))
        print(f"mcc,{value:.6f}")
    else:
        report = evaluate_decision_labels(
            _read_decision_column(args.pred), _read_decision_column(args.gold)
        )
        print(f"macro_f1,{report.macro_f1:.6f}")
        for decision, scores in report.per_class.items():
            print(f"f1_{decision.value},{scores.f1:.6f}")
    return 0


def _cmd_validate_format(args) -> int:
    problems = validate_dataset(args.prefix)
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    log.info("dataset at %s is well-formed", args.prefix)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except BitextDirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
