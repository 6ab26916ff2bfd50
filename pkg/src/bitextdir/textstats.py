"""Translationese diagnostics over token streams.

Lexical variety is the token-type ratio (distinct / total tokens); lexical
density is the fraction of tokens that are not function words. Vocabulary
distributions are compared with KL and Jensen-Shannon divergence, always in
nats. Lower variety and density indicate a higher degree of translationese.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import SentencePair, Side, TokenizerConfig, DEFAULT_TOKENIZER, read_lines, tokenize
from .errors import (
    EmptyInputError,
    EmptyPartitionError,
    InvalidEpsilonError,
    MissingFileError,
)

LN2 = math.log(2.0)

# Types kept per distribution when truncating for JS at corpus scale; the
# remainder's mass is pooled into one overflow bucket.
DEFAULT_MAX_TYPES = 50_000
OOV_TOKEN = "<other>"

# Token budget for TTR in corpus reports: TTR is length-sensitive, so
# partitions are compared on an equal-sized sample of tokens taken after a
# seeded shuffle of the pairs.
DEFAULT_TTR_BUDGET = 100_000


@dataclass(frozen=True)
class StyleProfile:
    side: Side
    ttr: float
    lexical_density: float
    n_tokens: int
    n_types: int


@dataclass(frozen=True)
class VocabDistribution:
    """Normalized token frequencies. Probabilities are strictly positive and
    sum to 1 (within 1e-9)."""

    probs: Mapping[str, float]
    n_tokens: int


@dataclass(frozen=True)
class FunctionWordList:
    language: str
    words: frozenset[str]


def load_function_words(source: str | Path) -> FunctionWordList:
    """Load a function-word list.

    ``source`` is either a bundled language tag (``en``, ``zh``) or a path to
    a plain-text file with one token per line. Entries are lowercased; blank
    lines and ``#`` comments are ignored.
    """
    if isinstance(source, str) and source.isalpha() and len(source) <= 3:
        ref = resources.files("bitextdir").joinpath(f"data/function_words_{source}.txt")
        if not ref.is_file():
            raise MissingFileError(f"bundled function-word list {source!r}")
        text = ref.read_text(encoding="utf-8")
        words = _parse_word_lines(text.splitlines())
        language = source
    else:
        path = Path(source)
        if not path.is_file():
            raise MissingFileError(path)
        words = _parse_word_lines(read_lines(path))
        language = path.stem
    if not words:
        raise EmptyInputError(f"function-word list {source!r} is empty")
    return FunctionWordList(language=language, words=frozenset(words))


def _parse_word_lines(lines: Iterable[str]) -> set[str]:
    out = set()
    for line in lines:
        word = line.strip().lower()
        if word and not word.startswith("#"):
            out.add(word)
    return out


def compute_ttr(tokens: Sequence[str]) -> float:
    if not tokens:
        raise EmptyInputError("cannot compute token-type ratio of an empty sequence")
    return len(set(tokens)) / len(tokens)


def compute_lexical_density(tokens: Sequence[str], fw: FunctionWordList) -> float:
    """Fraction of tokens that are content words, i.e. not in ``fw``.
    Membership is tested on the lowercased token (the list is lowercase)."""
    if not tokens:
        raise EmptyInputError("cannot compute lexical density of an empty sequence")
    content = sum(1 for t in tokens if t.lower() not in fw.words)
    return content / len(tokens)


def vocab_distribution(
    tokens: Iterable[str],
    max_types: int | None = None,
    oov_token: str = OOV_TOKEN,
) -> VocabDistribution:
    """Relative token frequencies, unsmoothed.

    With ``max_types``, only the most frequent types are kept (ties broken
    alphabetically for determinism) and the remaining mass is pooled under
    ``oov_token``.
    """
    counts = Counter(tokens)
    total = sum(counts.values())
    if total == 0:
        raise EmptyInputError("cannot build a distribution from an empty token sequence")
    if max_types is not None and len(counts) > max_types:
        kept = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_types]
        pooled = total - sum(c for _, c in kept)
        counts = Counter(dict(kept))
        counts[oov_token] += pooled
    return VocabDistribution(
        probs={t: c / total for t, c in counts.items()}, n_tokens=total
    )


def kl_divergence(p: VocabDistribution, q: VocabDistribution, smoothing: float) -> float:
    """KL(p || q) in nats after additive smoothing.

    ``smoothing`` is added to every probability over the union support of the
    two distributions, then both are renormalized, which makes the result
    finite even for disjoint supports.
    """
    if not smoothing > 0:
        raise InvalidEpsilonError(smoothing)
    support = sorted(set(p.probs) | set(q.probs))
    pz = sum(p.probs.get(t, 0.0) + smoothing for t in support)
    qz = sum(q.probs.get(t, 0.0) + smoothing for t in support)
    terms = []
    for t in support:
        pi = (p.probs.get(t, 0.0) + smoothing) / pz
        qi = (q.probs.get(t, 0.0) + smoothing) / qz
        terms.append(pi * math.log(pi / qi))
    return math.fsum(terms)


def js_divergence(p: VocabDistribution, q: VocabDistribution) -> float:
    """Jensen-Shannon divergence in nats: the mean of the KL divergences of
    each distribution against their mixture. Symmetric, bounded by ln 2, and
    needing no smoothing because the mixture covers the union support."""
    support = sorted(set(p.probs) | set(q.probs))
    terms_p = []
    terms_q = []
    for t in support:
        pi = p.probs.get(t, 0.0)
        qi = q.probs.get(t, 0.0)
        mi = 0.5 * (pi + qi)
        if pi > 0.0:
            terms_p.append(pi * math.log(pi / mi))
        if qi > 0.0:
            terms_q.append(qi * math.log(qi / mi))
    return 0.5 * (math.fsum(terms_p) + math.fsum(terms_q))


@dataclass(frozen=True)
class StyleReport:
    """Per-partition style profiles plus pairwise target-side JS divergences.

    ``profiles`` maps partition name to a (source profile, target profile)
    pair; ``js_pairs`` holds (partition_a, partition_b, js_nats) rows in
    stable input order.
    """

    profiles: dict[str, tuple[StyleProfile, StyleProfile]]
    js_pairs: list[tuple[str, str, float]]


def _budgeted_tokens(
    token_lists: Sequence[list[str]], budget: int | None, rng: random.Random
) -> list[str]:
    order = list(range(len(token_lists)))
    rng.shuffle(order)
    out: list[str] = []
    for i in order:
        out.extend(token_lists[i])
        if budget is not None and len(out) >= budget:
            return out[:budget]
    return out


def corpus_style_report(
    partitions: Mapping[str, Sequence[SentencePair]],
    fw_src: FunctionWordList,
    fw_tgt: FunctionWordList,
    tok_cfg: TokenizerConfig = DEFAULT_TOKENIZER,
    ttr_budget: int | None = DEFAULT_TTR_BUDGET,
    max_types: int | None = DEFAULT_MAX_TYPES,
    seed: int = 42,
) -> StyleReport:
    """Profile each partition on both sides and compare target-side
    vocabulary distributions across all partition pairs.

    Partition insertion order fixes the row order of the output. The token
    budget makes TTR comparable across partitions of unequal size; the
    distributions for JS use all target tokens (truncated to ``max_types``).
    """
    profiles: dict[str, tuple[StyleProfile, StyleProfile]] = {}
    dists: dict[str, VocabDistribution] = {}
    for name, pairs in partitions.items():
        if not pairs:
            raise EmptyPartitionError(name)
        src_tok = [tokenize(p.src, tok_cfg) for p in pairs]
        tgt_tok = [tokenize(p.tgt, tok_cfg) for p in pairs]
        side_profiles = []
        for side, token_lists, fw in (
            (Side.SOURCE, src_tok, fw_src),
            (Side.TARGET, tgt_tok, fw_tgt),
        ):
            rng = random.Random(f"{seed}:{name}:{side.value}")
            sample = _budgeted_tokens(token_lists, ttr_budget, rng)
            side_profiles.append(
                StyleProfile(
                    side=side,
                    ttr=compute_ttr(sample),
                    lexical_density=compute_lexical_density(sample, fw),
                    n_tokens=len(sample),
                    n_types=len(set(sample)),
                )
            )
        profiles[name] = (side_profiles[0], side_profiles[1])
        all_tgt = [t for toks in tgt_tok for t in toks]
        dists[name] = vocab_distribution(all_tgt, max_types=max_types)
    names = list(partitions)
    js_pairs = [
        (a, b, js_divergence(dists[a], dists[b]))
        for i, a in enumerate(names)
        for b in names[i + 1 :]
    ]
    return StyleReport(profiles=profiles, js_pairs=js_pairs)


def profiles_csv(report: StyleReport) -> str:
    lines = ["partition,side,n_tokens,n_types,ttr,lexical_density"]
    for name, (src_prof, tgt_prof) in report.profiles.items():
        for prof in (src_prof, tgt_prof):
            lines.append(
                f"{name},{prof.side.value},{prof.n_tokens},{prof.n_types},"
                f"{prof.ttr:.6f},{prof.lexical_density:.6f}"
            )
    return "\n".join(lines) + "\n"


def js_csv(report: StyleReport) -> str:
    lines = ["partition_a,partition_b,js_nats"]
    for a, b, value in report.js_pairs:
        lines.append(f"{a},{b},{value:.6f}")
    return "\n".join(lines) + "\n"


def read_corpus_file_tokens(path: str | Path, tok_cfg: TokenizerConfig) -> list[str]:
    """All tokens of a one-sentence-per-line text file, in file order."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    tokens: list[str] = []
    for line in read_lines(path):
        tokens.extend(tokenize(line, tok_cfg))
    return tokens
