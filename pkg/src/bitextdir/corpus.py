"""Parallel corpus loading, streaming, and tokenization.

A corpus is described by a plain-text manifest: one sub-corpus per line,
``name<TAB>src_path<TAB>tgt_path``, with ``#`` comment lines ignored.
Relative paths are resolved against the manifest's directory. Corpus files
are UTF-8, one sentence per line; CRLF endings are accepted and normalized.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import (
    DuplicateNameError,
    InvalidEncodingError,
    LineCountMismatchError,
    ManifestSyntaxError,
    MissingFileError,
    OneSidedBlankLineError,
)

log = logging.getLogger(__name__)


class Direction(enum.Enum):
    """Provenance of a sentence pair: which side was written natively."""

    SOURCE_ORIGINAL = "source-original"
    TARGET_ORIGINAL = "target-original"
    UNKNOWN = "unknown"


class Side(enum.Enum):
    SOURCE = "source"
    TARGET = "target"


class TokenizerMode(enum.Enum):
    WHITESPACE = "whitespace"
    CHAR_CJK = "char-cjk"


@dataclass(frozen=True)
class TokenizerConfig:
    """Deterministic tokenization settings.

    ``CHAR_CJK`` splits every CJK codepoint into its own token and everything
    else on whitespace runs; it is the default because Chinese has no
    whitespace segmentation. ``lowercase`` applies Unicode lowercasing before
    splitting.
    """

    mode: TokenizerMode = TokenizerMode.CHAR_CJK
    lowercase: bool = True


# Default for corpus statistics; word tags are case-sensitive, so the QE
# record path uses TRUECASE_TOKENIZER instead.
DEFAULT_TOKENIZER = TokenizerConfig()
TRUECASE_TOKENIZER = TokenizerConfig(lowercase=False)


@dataclass
class SentencePair:
    """One aligned sentence pair. ``id`` is the zero-based line index within
    its sub-corpus file (skipped blank lines keep their index)."""

    id: int
    sub_corpus: str
    src: str
    tgt: str
    direction: Direction = Direction.UNKNOWN


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    src_path: Path
    tgt_path: Path
    n_lines: int


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]

    def entry(self, name: str) -> ManifestEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


@dataclass
class StreamStats:
    """Counts collected while streaming: emitted and skipped pairs per
    sub-corpus. Emitted + skipped equals the file's line count."""

    emitted: Counter = field(default_factory=Counter)
    skipped: Counter = field(default_factory=Counter)


# Codepoint ranges treated as CJK for CHAR_CJK mode: ideographs, kana,
# hangul, fullwidth forms, and the supplementary ideographic planes.
_CJK_RANGES = (
    (0x2E80, 0x303F),
    (0x3040, 0x30FF),
    (0x3130, 0x318F),
    (0x31F0, 0x31FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
    (0xFF00, 0xFFEF),
    (0x20000, 0x2FA1F),
    (0x30000, 0x3134F),
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    if cp < 0x2E80:
        return False
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> list[str]:
    """Split ``text`` into tokens. Identical input always yields identical
    output; there is no state and no randomness."""
    if cfg.lowercase:
        text = text.lower()
    if cfg.mode is TokenizerMode.WHITESPACE:
        return text.split()
    tokens: list[str] = []
    current: list[str] = []
    for ch in text:
        if ch.isspace():
            if current:
                tokens.append("".join(current))
                current = []
        elif _is_cjk(ch):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(ch)
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


def count_lines(path: Path) -> int:
    n = 0
    with open(path, "rb") as fh:
        for _ in fh:
            n += 1
    return n


def read_lines(path: Path) -> Iterator[str]:
    """Yield lines of a UTF-8 text file without terminators. Invalid bytes
    are a hard error naming the file and line; CRLF is normalized."""
    with open(path, "rb") as fh:
        for i, raw in enumerate(fh):
            raw = raw.rstrip(b"\r\n")
            try:
                yield raw.decode("utf-8")
            except UnicodeDecodeError:
                raise InvalidEncodingError(path, i + 1) from None


def load_manifest(path: str | Path) -> CorpusManifest:
    """Parse and validate a corpus manifest.

    Every referenced file must exist, and the two sides of each sub-corpus
    must have equal line counts. Sub-corpus names must be unique.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for line_no, line in enumerate(read_lines(path), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestSyntaxError(path, line_no, "expected name<TAB>src_path<TAB>tgt_path")
        name, src_rel, tgt_rel = (p.strip() for p in parts)
        if not name or not src_rel or not tgt_rel:
            raise ManifestSyntaxError(path, line_no, "empty field")
        if name in seen:
            raise DuplicateNameError(name)
        seen.add(name)
        src_path = (base / src_rel).resolve() if not Path(src_rel).is_absolute() else Path(src_rel)
        tgt_path = (base / tgt_rel).resolve() if not Path(tgt_rel).is_absolute() else Path(tgt_rel)
        for p in (src_path, tgt_path):
            if not p.is_file():
                raise MissingFileError(p)
        n_src = count_lines(src_path)
        n_tgt = count_lines(tgt_path)
        if n_src != n_tgt:
            raise LineCountMismatchError(name, n_src, n_tgt)
        entries.append(ManifestEntry(name, src_path, tgt_path, n_src))
    return CorpusManifest(tuple(entries))


def stream_pairs(
    manifest: CorpusManifest, stats: StreamStats | None = None
) -> Iterator[SentencePair]:
    """Stream sentence pairs in manifest order, then line order.

    Lines blank on both sides are skipped (counted in ``stats``); a line
    blank on exactly one side is an alignment error.
    """
    for entry in manifest.entries:
        src_lines = read_lines(entry.src_path)
        tgt_lines = read_lines(entry.tgt_path)
        n_skipped = 0
        for line_no, (src, tgt) in enumerate(zip(src_lines, tgt_lines)):
            src_blank = not src.strip()
            tgt_blank = not tgt.strip()
            if src_blank and tgt_blank:
                n_skipped += 1
                if stats is not None:
                    stats.skipped[entry.name] += 1
                continue
            if src_blank or tgt_blank:
                raise OneSidedBlankLineError(entry.name, line_no)
            if stats is not None:
                stats.emitted[entry.name] += 1
            yield SentencePair(id=line_no, sub_corpus=entry.name, src=src, tgt=tgt)
        if n_skipped:
            log.warning("sub-corpus %s: skipped %d blank pair(s)", entry.name, n_skipped)
