"""Shared fixtures: deterministic direction-marked toy corpora.

The toy corpus uses four disjoint vocabularies (original/translationese per
side) so that translation direction is recoverable by construction. Target
text is written in CJK characters without spaces to exercise the
per-character tokenizer; MT hypotheses are seeded noisy copies of the target
side.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

import pytest

SRC_ORIGINAL_VOCAB = [
    "orchard", "meadow", "lantern", "harbor", "pebble", "willow", "crisp",
    "amber", "thicket", "breeze", "saddle", "ember", "quarry", "bramble",
]
SRC_TRANSLATED_VOCAB = [
    "system", "process", "relation", "structure", "general", "element",
    "factor", "aspect", "context", "function", "method", "basis", "unit",
]
TGT_ORIGINAL_VOCAB = list("春夏秋冬山河湖海风花雪月松柏")
TGT_TRANSLATED_VOCAB = list("数据系统过程关系结构基础方法单元")


def _sentence(rng: random.Random, vocab: list[str], joiner: str) -> str:
    n = rng.randint(4, 9)
    return joiner.join(rng.choice(vocab) for _ in range(n))


def _noisy_copy(rng: random.Random, tokens: list[str], vocab: list[str]) -> list[str]:
    out: list[str] = []
    for tok in tokens:
        roll = rng.random()
        if roll < 0.10:
            continue  # drop
        if roll < 0.20:
            out.append(rng.choice(vocab))  # substitute
            continue
        out.append(tok)
    if len(out) >= 3 and rng.random() < 0.30:
        i = rng.randrange(len(out) - 1)
        out[i], out[i + 1] = out[i + 1], out[i]
    if not out and tokens:
        out = [tokens[0]]
    return out


@dataclass
class ToyCorpus:
    root: Path
    manifest_path: Path
    mt_paths: dict[str, Path]
    gold: dict[tuple[str, int], str] = field(default_factory=dict)
    sub_corpora: list[str] = field(default_factory=list)
    n_lines: dict[str, int] = field(default_factory=dict)
    # per-side monolingual training/test material
    mono: dict[str, Path] = field(default_factory=dict)


def build_toy_corpus(
    root: Path,
    n_sub: int = 3,
    pairs_per_sub: int = 200,
    seed: int = 7,
    blank_line_every: int | None = 97,
    mono_lines: int = 400,
) -> ToyCorpus:
    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    corpus = ToyCorpus(root=root, manifest_path=root / "manifest.tsv", mt_paths={})
    for k in range(n_sub):
        name = f"sub{k}"
        corpus.sub_corpora.append(name)
        src_lines: list[str] = []
        tgt_lines: list[str] = []
        mt_lines: list[str] = []
        for i in range(pairs_per_sub):
            if blank_line_every and i > 0 and i % blank_line_every == 0:
                src_lines.append("")
                tgt_lines.append("")
                mt_lines.append("")
                continue
            source_original = rng.random() < 0.5
            if source_original:
                src = _sentence(rng, SRC_ORIGINAL_VOCAB, " ")
                tgt = _sentence(rng, TGT_TRANSLATED_VOCAB, "")
                corpus.gold[(name, i)] = "source-original"
            else:
                src = _sentence(rng, SRC_TRANSLATED_VOCAB, " ")
                tgt = _sentence(rng, TGT_ORIGINAL_VOCAB, "")
                corpus.gold[(name, i)] = "target-original"
            src_lines.append(src)
            tgt_lines.append(tgt)
            tgt_vocab = TGT_TRANSLATED_VOCAB if source_original else TGT_ORIGINAL_VOCAB
            mt_lines.append("".join(_noisy_copy(rng, list(tgt), tgt_vocab)))
        src_path = root / f"{name}.src"
        tgt_path = root / f"{name}.tgt"
        mt_path = root / f"{name}.mt"
        src_path.write_text("\n".join(src_lines) + "\n", encoding="utf-8")
        tgt_path.write_text("\n".join(tgt_lines) + "\n", encoding="utf-8")
        mt_path.write_text("\n".join(mt_lines) + "\n", encoding="utf-8")
        corpus.mt_paths[name] = mt_path
        corpus.n_lines[name] = pairs_per_sub
        manifest_rows.append(f"{name}\t{name}.src\t{name}.tgt")
    corpus.manifest_path.write_text(
        "# toy corpus\n" + "\n".join(manifest_rows) + "\n", encoding="utf-8"
    )
    for key, vocab, joiner in (
        ("src_original", SRC_ORIGINAL_VOCAB, " "),
        ("src_translated", SRC_TRANSLATED_VOCAB, " "),
        ("tgt_original", TGT_ORIGINAL_VOCAB, ""),
        ("tgt_translated", TGT_TRANSLATED_VOCAB, ""),
    ):
        path = root / f"mono_{key}.txt"
        path.write_text(
            "\n".join(_sentence(rng, vocab, joiner) for _ in range(mono_lines)) + "\n",
            encoding="utf-8",
        )
        corpus.mono[key] = path
    return corpus


@pytest.fixture
def toy_corpus(tmp_path) -> ToyCorpus:
    return build_toy_corpus(tmp_path / "toy")


@pytest.fixture(scope="session")
def session_toy_corpus(tmp_path_factory) -> ToyCorpus:
    return build_toy_corpus(tmp_path_factory.mktemp("toy-session"))
