"""Reading, writing, and validating QE datasets in the WMT layout.

A dataset is a family of line-aligned files sharing one prefix:

    <prefix>.src    source sentences
    <prefix>.mt     MT hypotheses, whitespace-tokenized
    <prefix>.pe     references (the parallel target side)
    <prefix>.hter   one sentence score per line, 6 decimals
    <prefix>.tags   space-separated OK/BAD, one tag per mt token
    <prefix>.gap_tags   optional, one tag per mt gap (tokens + 1)

Source-side tags are never produced. The ``.tags`` entries align with
``mt.split()``, so validation needs no tokenizer.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError, MissingFileError
from .pseudoqe import BAD, OK, PseudoQERecord

REQUIRED_SUFFIXES = (".src", ".mt", ".pe", ".hter", ".tags")
GAP_SUFFIX = ".gap_tags"


def dataset_paths(prefix: str | Path, include_gap_tags: bool) -> list[Path]:
    prefix = Path(prefix)
    suffixes = REQUIRED_SUFFIXES + ((GAP_SUFFIX,) if include_gap_tags else ())
    return [prefix.with_name(prefix.name + s) for s in suffixes]


def write_dataset(
    records: Sequence[PseudoQERecord], prefix: str | Path, include_gap_tags: bool | None = None
) -> list[Path]:
    """Write records under ``prefix``. Gap tags are written when every record
    carries them (or when forced by ``include_gap_tags``)."""
    if include_gap_tags is None:
        include_gap_tags = bool(records) and all(r.gap_tags is not None for r in records)
    paths = dataset_paths(prefix, include_gap_tags)
    paths[0].parent.mkdir(parents=True, exist_ok=True)
    handles = [open(p, "w", encoding="utf-8", newline="\n") for p in paths]
    try:
        for rec in records:
            row = [
                rec.src,
                rec.mt,
                rec.ref,
                f"{rec.sentence_score:.6f}",
                " ".join(rec.tgt_tags),
            ]
            if include_gap_tags:
                if rec.gap_tags is None:
                    raise FormatError(paths[-1], "record lacks gap tags")
                row.append(" ".join(rec.gap_tags))
            for fh, field in zip(handles, row):
                fh.write(field + "\n")
    finally:
        for fh in handles:
            fh.close()
    return paths


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise MissingFileError(path)
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\r\n") for line in fh]


def read_dataset(prefix: str | Path) -> list[PseudoQERecord]:
    prefix = Path(prefix)
    src, mt, pe, hter, tags = (_read_lines(p) for p in dataset_paths(prefix, False))
    gap_path = prefix.with_name(prefix.name + GAP_SUFFIX)
    gaps = _read_lines(gap_path) if gap_path.is_file() else None
    counts = {len(src), len(mt), len(pe), len(hter), len(tags)}
    if gaps is not None:
        counts.add(len(gaps))
    if len(counts) != 1:
        raise FormatError(prefix, f"line counts differ across dataset files: {sorted(counts)}")
    records = []
    for i in range(len(src)):
        records.append(
            PseudoQERecord(
                src=src[i],
                mt=mt[i],
                ref=pe[i],
                sentence_score=float(hter[i]),
                tgt_tags=tuple(tags[i].split()),
                gap_tags=tuple(gaps[i].split()) if gaps is not None else None,
            )
        )
    return records


def validate_dataset(prefix: str | Path) -> list[str]:
    """Check the WMT QE layout; returns a list of problems, empty when valid.

    Checked: all required files exist, line counts agree, scores parse and
    lie in [0, 1], tags are OK/BAD and count one per mt token, and gap tags
    (when the file exists) count tokens + 1.
    """
    prefix = Path(prefix)
    problems: list[str] = []
    lines: dict[str, list[str]] = {}
    for path in dataset_paths(prefix, False):
        if not path.is_file():
            problems.append(f"missing file: {path}")
        else:
            lines[path.suffix] = _read_lines(path)
    gap_path = prefix.with_name(prefix.name + GAP_SUFFIX)
    has_gaps = gap_path.is_file()
    if has_gaps:
        lines[GAP_SUFFIX] = _read_lines(gap_path)
    if problems:
        return problems
    counts = {suffix: len(ls) for suffix, ls in lines.items()}
    if len(set(counts.values())) != 1:
        problems.append(f"line counts differ: {counts}")
        return problems
    n = counts[".mt"]
    for i in range(n):
        n_tokens = len(lines[".mt"][i].split())
        raw_score = lines[".hter"][i].strip()
        try:
            score = float(raw_score)
        except ValueError:
            problems.append(f"line {i + 1}: unparsable score {raw_score!r}")
            continue
        if not 0.0 <= score <= 1.0:
            problems.append(f"line {i + 1}: score {score} outside [0, 1]")
        tags = lines[".tags"][i].split()
        if len(tags) != n_tokens:
            problems.append(
                f"line {i + 1}: {len(tags)} tags for {n_tokens} mt tokens"
            )
        bad_values = {t for t in tags if t not in (OK, BAD)}
        if bad_values:
            problems.append(f"line {i + 1}: invalid tag values {sorted(bad_values)}")
        if has_gaps:
            gaps = lines[GAP_SUFFIX][i].split()
            if len(gaps) != n_tokens + 1:
                problems.append(
                    f"line {i + 1}: {len(gaps)} gap tags for {n_tokens} mt tokens"
                )
            bad_gaps = {t for t in gaps if t not in (OK, BAD)}
            if bad_gaps:
                problems.append(f"line {i + 1}: invalid gap tag values {sorted(bad_gaps)}")
    return problems


def write_meta_tsv(
    rows: Iterable[tuple[str, int]], path: str | Path
) -> None:
    """Provenance sidecar: one ``sub_corpus<TAB>line`` row per record."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, line_no in rows:
            fh.write(f"{name}\t{line_no}\n")
