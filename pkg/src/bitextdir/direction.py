"""Translation-direction classification.

Two monolingual classifiers, one per language side, each scoring whether a
text is original or translationese; a pair-level decision averages the two
posteriors. Each side is a multinomial naive Bayes model over hashed word
and character n-grams: deterministic, order-free in its sufficient
statistics, and trainable in seconds from line-per-sentence text files.
"""

from __future__ import annotations

import enum
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping, Sequence

import hashlib
import math

import numpy as np

from .corpus import (
    DEFAULT_TOKENIZER,
    Direction,
    SentencePair,
    Side,
    TokenizerConfig,
    TokenizerMode,
    tokenize,
)
from .errors import (
    CorruptModelError,
    EmptyClassError,
    EmptyInputError,
    InvalidAlphaError,
    LengthMismatchError,
    SideMismatchError,
    VersionMismatchError,
)
from .evalmetrics import ClassScores, per_class_scores

MODEL_MAGIC = "BITEXTDIR"
MODEL_FORMAT_VERSION = "1"

# Class indexes in every per-class array.
ORIGINAL, TRANSLATIONESE = 0, 1


class Decision(enum.Enum):
    SOURCE_ORIGINAL = "source-original"
    TARGET_ORIGINAL = "target-original"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class FeatureConfig:
    """Hashed n-gram feature space.

    Word n-grams are drawn over the token sequence, character n-grams over
    the space-joined text; both are hashed into ``hash_buckets`` (a power of
    two) with a keyed 64-bit hash so extraction is deterministic for a fixed
    seed.
    """

    word_ngram_orders: tuple[int, ...] = (1, 2)
    char_ngram_orders: tuple[int, ...] = (2, 3)
    hash_buckets: int = 1 << 20
    hash_seed: int = 0

    def __post_init__(self):
        orders = (*self.word_ngram_orders, *self.char_ngram_orders)
        if any(n < 1 for n in orders):
            raise ValueError(f"n-gram orders must be >= 1, got {orders}")
        b = self.hash_buckets
        if b < (1 << 10) or b & (b - 1):
            raise ValueError(f"hash_buckets must be a power of two >= 1024, got {b}")


def _bucket(key: str, seed_key: bytes, mask: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8, key=seed_key).digest()
    return int.from_bytes(digest, "little") & mask


def extract_features(tokens: Sequence[str], cfg: FeatureConfig) -> Counter:
    """Sparse bucket -> count vector of all configured n-grams."""
    seed_key = cfg.hash_seed.to_bytes(8, "little", signed=True)
    mask = cfg.hash_buckets - 1
    counts: Counter = Counter()
    for n in cfg.word_ngram_orders:
        for i in range(len(tokens) - n + 1):
            key = "w%d:%s" % (n, "\x1f".join(tokens[i : i + n]))
            counts[_bucket(key, seed_key, mask)] += 1
    if cfg.char_ngram_orders:
        text = " ".join(tokens)
        for n in cfg.char_ngram_orders:
            for i in range(len(text) - n + 1):
                counts[_bucket("c%d:%s" % (n, text[i : i + n]), seed_key, mask)] += 1
    return counts


@dataclass
class DirectionModel:
    """One side's original-vs-translationese scorer.

    ``feature_log_likelihoods`` has shape (2, hash_buckets) with rows
    ORIGINAL and TRANSLATIONESE; each row's probabilities sum to 1.
    """

    side: Side
    feature_cfg: FeatureConfig
    tok_cfg: TokenizerConfig
    class_log_priors: np.ndarray
    feature_log_likelihoods: np.ndarray
    training_meta: dict[str, str] = field(default_factory=dict)

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text, self.tok_cfg)


@dataclass(frozen=True)
class EnsembleScore:
    """Pair-level direction score: the ensemble probability is the exact
    arithmetic mean of the two side probabilities."""

    p_src_side: float
    p_tgt_side: float
    p_ensemble: float
    decision: Decision


def _count_class(
    lines: Iterable[str], cfg: FeatureConfig, tok_cfg: TokenizerConfig
) -> tuple[Counter, int]:
    counts: Counter = Counter()
    n_lines = 0
    for line in lines:
        tokens = tokenize(line, tok_cfg)
        if not tokens:
            continue
        n_lines += 1
        counts.update(extract_features(tokens, cfg))
    return counts, n_lines


def train_side_classifier(
    original_texts: Iterable[str],
    translationese_texts: Iterable[str],
    side: Side,
    cfg: FeatureConfig = FeatureConfig(),
    alpha: float = 1.0,
    tok_cfg: TokenizerConfig = DEFAULT_TOKENIZER,
    version_tag: str = "1",
) -> DirectionModel:
    """Fit a multinomial naive Bayes model with additive smoothing ``alpha``.

    Class priors come from the empirical line proportions. Counting is
    order-free, so permuting either stream leaves the model bit-identical.
    """
    if not alpha > 0:
        raise InvalidAlphaError(alpha)
    orig_counts, n_orig = _count_class(original_texts, cfg, tok_cfg)
    trans_counts, n_trans = _count_class(translationese_texts, cfg, tok_cfg)
    if n_orig == 0:
        raise EmptyClassError("original")
    if n_trans == 0:
        raise EmptyClassError("translationese")
    b = cfg.hash_buckets
    counts = np.zeros((2, b), dtype=np.float64)
    for row, cls_counts in ((ORIGINAL, orig_counts), (TRANSLATIONESE, trans_counts)):
        if cls_counts:
            idx = np.fromiter(cls_counts.keys(), dtype=np.int64, count=len(cls_counts))
            val = np.fromiter(cls_counts.values(), dtype=np.float64, count=len(cls_counts))
            counts[row, idx] = val
    totals = counts.sum(axis=1, keepdims=True)
    loglik = np.log(counts + alpha) - np.log(totals + alpha * b)
    total_lines = n_orig + n_trans
    priors = np.array(
        [math.log(n_orig / total_lines), math.log(n_trans / total_lines)],
        dtype=np.float64,
    )
    meta = {
        "n_original": str(n_orig),
        "n_translationese": str(n_trans),
        "alpha": alpha.hex() if isinstance(alpha, float) else float(alpha).hex(),
        "version_tag": version_tag,
    }
    return DirectionModel(
        side=side,
        feature_cfg=cfg,
        tok_cfg=tok_cfg,
        class_log_priors=priors,
        feature_log_likelihoods=loglik,
        training_meta=meta,
    )


def predict_side(model: DirectionModel, tokens: Sequence[str]) -> float:
    """Posterior probability that ``tokens`` are original text, from the
    logistic of the two class log-joints. An empty feature vector falls back
    to the class priors."""
    feats = extract_features(tokens, model.feature_cfg)
    j_orig = float(model.class_log_priors[ORIGINAL])
    j_trans = float(model.class_log_priors[TRANSLATIONESE])
    ll = model.feature_log_likelihoods
    for bucket, count in feats.items():
        j_orig += count * float(ll[ORIGINAL, bucket])
        j_trans += count * float(ll[TRANSLATIONESE, bucket])
    m = max(j_orig, j_trans)
    eo = math.exp(j_orig - m)
    et = math.exp(j_trans - m)
    return eo / (eo + et)


def predict_text(model: DirectionModel, text: str) -> float:
    return predict_side(model, model.tokenize(text))


def ensemble_score(
    p_src_side: float, p_tgt_side: float, abstain_band: float = 0.0
) -> EnsembleScore:
    """Combine the two side probabilities: the ensemble probability is their
    arithmetic mean, and a value within ``abstain_band`` of 0.5 abstains
    (the boundary itself decides source-original)."""
    if not 0 <= abstain_band < 0.5:
        raise ValueError(f"abstain_band must be in [0, 0.5), got {abstain_band}")
    p_ensemble = (p_src_side + p_tgt_side) / 2
    if abs(p_ensemble - 0.5) < abstain_band:
        decision = Decision.ABSTAIN
    elif p_ensemble >= 0.5:
        decision = Decision.SOURCE_ORIGINAL
    else:
        decision = Decision.TARGET_ORIGINAL
    return EnsembleScore(
        p_src_side=p_src_side,
        p_tgt_side=p_tgt_side,
        p_ensemble=p_ensemble,
        decision=decision,
    )


def classify_pair(
    model_src: DirectionModel,
    model_tgt: DirectionModel,
    pair: SentencePair,
    abstain_band: float = 0.0,
) -> EnsembleScore:
    """Score one pair and set its direction.

    ``p_src_side`` is the probability the source text is original;
    ``p_tgt_side`` the probability the target text is translationese. Their
    mean is the probability the pair is source-original; abstentions leave
    the pair unlabeled.
    """
    if model_src.side is not Side.SOURCE:
        raise SideMismatchError(Side.SOURCE, model_src.side)
    if model_tgt.side is not Side.TARGET:
        raise SideMismatchError(Side.TARGET, model_tgt.side)
    score = ensemble_score(
        predict_text(model_src, pair.src),
        1.0 - predict_text(model_tgt, pair.tgt),
        abstain_band,
    )
    if score.decision is Decision.SOURCE_ORIGINAL:
        pair.direction = Direction.SOURCE_ORIGINAL
    elif score.decision is Decision.TARGET_ORIGINAL:
        pair.direction = Direction.TARGET_ORIGINAL
    return score


@dataclass(frozen=True)
class DirectionEvalReport:
    macro_f1: float
    per_class: Mapping[Decision, ClassScores]
    confusion: Mapping[tuple[Direction, Decision], int]
    n_abstained: int


def evaluate_classifier(
    predictions: Sequence[Decision], gold: Sequence[Direction]
) -> DirectionEvalReport:
    """Macro F1 with per-class precision/recall/F1 and a confusion table.

    Abstentions are counted as errors against both classes' recall: they are
    predictions of neither class, so they can never be true positives.
    """
    if len(predictions) != len(gold):
        raise LengthMismatchError(len(predictions), len(gold))
    if not predictions:
        raise EmptyInputError("cannot evaluate an empty prediction list")
    gold_as_decision = []
    for g in gold:
        if g is Direction.SOURCE_ORIGINAL:
            gold_as_decision.append(Decision.SOURCE_ORIGINAL)
        elif g is Direction.TARGET_ORIGINAL:
            gold_as_decision.append(Decision.TARGET_ORIGINAL)
        else:
            raise ValueError(f"gold labels must be directional, got {g}")
    classes = (Decision.SOURCE_ORIGINAL, Decision.TARGET_ORIGINAL)
    per_class = per_class_scores(predictions, gold_as_decision, classes)
    value = math.fsum(per_class[c].f1 for c in classes) / len(classes)
    conf: Counter = Counter()
    for p, g in zip(predictions, gold):
        conf[(g, p)] += 1
    n_abstained = sum(1 for p in predictions if p is Decision.ABSTAIN)
    return DirectionEvalReport(
        macro_f1=value,
        per_class=dict(per_class),
        confusion=dict(conf),
        n_abstained=n_abstained,
    )


def evaluate_decision_labels(
    predictions: Sequence[str], gold: Sequence[str]
) -> DirectionEvalReport:
    """String-label convenience wrapper around :func:`evaluate_classifier`."""
    preds = [Decision(p) for p in predictions]
    golds = [Direction(g) for g in gold]
    return evaluate_classifier(preds, golds)


# Model file layout (binary): a text header terminated by one blank line,
#   BITEXTDIR\t<format-version>\n
#   key\tvalue\n ...
# then a little-endian u64 count followed by that many little-endian float64
# values: the ORIGINAL row of the likelihood table, then the TRANSLATIONESE
# row. Floats that appear in the header are hex-encoded so the round trip is
# bit-exact.

_META_ORDER = (
    "side",
    "tok_mode",
    "tok_lowercase",
    "word_ngram_orders",
    "char_ngram_orders",
    "hash_buckets",
    "hash_seed",
    "prior_original",
    "prior_translationese",
)


def save_model(model: DirectionModel, path: str | Path) -> None:
    path = Path(path)
    meta = {
        "side": model.side.value,
        "tok_mode": model.tok_cfg.mode.value,
        "tok_lowercase": "1" if model.tok_cfg.lowercase else "0",
        "word_ngram_orders": ",".join(map(str, model.feature_cfg.word_ngram_orders)),
        "char_ngram_orders": ",".join(map(str, model.feature_cfg.char_ngram_orders)),
        "hash_buckets": str(model.feature_cfg.hash_buckets),
        "hash_seed": str(model.feature_cfg.hash_seed),
        "prior_original": float(model.class_log_priors[ORIGINAL]).hex(),
        "prior_translationese": float(model.class_log_priors[TRANSLATIONESE]).hex(),
    }
    with open(path, "wb") as fh:
        fh.write(f"{MODEL_MAGIC}\t{MODEL_FORMAT_VERSION}\n".encode("utf-8"))
        for key in _META_ORDER:
            fh.write(f"{key}\t{meta[key]}\n".encode("utf-8"))
        for key in sorted(model.training_meta):
            fh.write(f"meta.{key}\t{model.training_meta[key]}\n".encode("utf-8"))
        fh.write(b"\n")
        table = np.ascontiguousarray(model.feature_log_likelihoods, dtype="<f8")
        fh.write(struct.pack("<Q", table.size))
        fh.write(table.tobytes())


def _read_header_line(fh: BinaryIO) -> str:
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise CorruptModelError("truncated header")
    return raw[:-1].decode("utf-8")


def load_model(path: str | Path) -> DirectionModel:
    path = Path(path)
    with open(path, "rb") as fh:
        first = _read_header_line(fh)
        magic, _, version = first.partition("\t")
        if magic != MODEL_MAGIC:
            raise CorruptModelError(f"bad magic {magic!r}")
        if version != MODEL_FORMAT_VERSION:
            raise VersionMismatchError(MODEL_FORMAT_VERSION, version)
        fields: dict[str, str] = {}
        while True:
            line = _read_header_line(fh)
            if not line:
                break
            key, sep, value = line.partition("\t")
            if not sep:
                raise CorruptModelError(f"malformed header line {line!r}")
            fields[key] = value
        try:
            cfg = FeatureConfig(
                word_ngram_orders=_parse_orders(fields["word_ngram_orders"]),
                char_ngram_orders=_parse_orders(fields["char_ngram_orders"]),
                hash_buckets=int(fields["hash_buckets"]),
                hash_seed=int(fields["hash_seed"]),
            )
            tok_cfg = TokenizerConfig(
                mode=TokenizerMode(fields["tok_mode"]),
                lowercase=fields["tok_lowercase"] == "1",
            )
            side = Side(fields["side"])
            priors = np.array(
                [
                    float.fromhex(fields["prior_original"]),
                    float.fromhex(fields["prior_translationese"]),
                ],
                dtype=np.float64,
            )
        except (KeyError, ValueError) as exc:
            raise CorruptModelError(f"bad header field: {exc}") from None
        raw_count = fh.read(8)
        if len(raw_count) != 8:
            raise CorruptModelError("missing table length")
        (count,) = struct.unpack("<Q", raw_count)
        if count != 2 * cfg.hash_buckets:
            raise CorruptModelError(
                f"table length {count} does not match 2 x {cfg.hash_buckets} buckets"
            )
        raw = fh.read(count * 8)
        if len(raw) != count * 8:
            raise CorruptModelError("truncated likelihood table")
        if fh.read(1):
            raise CorruptModelError("trailing bytes after likelihood table")
        table = np.frombuffer(raw, dtype="<f8").reshape(2, cfg.hash_buckets).copy()
    meta = {k[len("meta."):]: v for k, v in fields.items() if k.startswith("meta.")}
    return DirectionModel(
        side=side,
        feature_cfg=cfg,
        tok_cfg=tok_cfg,
        class_log_priors=priors,
        feature_log_likelihoods=table,
        training_meta=meta,
    )


def _parse_orders(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(p) for p in text.split(","))


def write_scores_tsv(
    rows: Iterable[tuple[SentencePair, EnsembleScore]], path: str | Path
) -> int:
    """Write classification output: one TSV row per pair with probabilities
    at 6 decimals. Returns the number of rows written."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair, score in rows:
            fh.write(
                f"{pair.sub_corpus}\t{pair.id}\t{score.p_src_side:.6f}\t"
                f"{score.p_tgt_side:.6f}\t{score.p_ensemble:.6f}\t{score.decision.value}\n"
            )
            n += 1
    return n


def read_scores_tsv(path: str | Path) -> dict[tuple[str, int], EnsembleScore]:
    """Read a scores TSV back into a (sub_corpus, line) -> score mapping.
    Accepts files produced by :func:`write_scores_tsv` or by any external
    classifier emitting the same layout."""
    from .errors import FormatError

    path = Path(path)
    scores: dict[tuple[str, int], EnsembleScore] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise FormatError(path, "expected 6 tab-separated fields", line_no)
            name, idx, p_src, p_tgt, p_ens, decision = parts
            try:
                scores[(name, int(idx))] = EnsembleScore(
                    p_src_side=float(p_src),
                    p_tgt_side=float(p_tgt),
                    p_ensemble=float(p_ens),
                    decision=Decision(decision),
                )
            except ValueError as exc:
                raise FormatError(path, str(exc), line_no) from None
    return scores
