"""Translation edit rate with shifts, word-level OK/BAD tags, and pseudo
quality-estimation records.

The sentence score is the number of edits (insert, delete, substitute, and
block shifts, one edit each) needed to turn the hypothesis into the
reference, divided by the reference length and capped at 1.0. The shift
sequence is chosen exactly for short sentences and greedily beyond a length
limit.
OK/BAD tags per hypothesis token fall out of the final alignment: a token is
OK exactly when it ends up matched, including tokens that were shifted and
then matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import SentencePair, TokenizerConfig, TRUECASE_TOKENIZER, tokenize
from .errors import InconsistentScriptError, MissingMtLineError

DEFAULT_MAX_SHIFT_DISTANCE = 10
DEFAULT_MAX_SHIFT_SIZE = 10

# Up to this many tokens per side the shift stage is solved exactly by
# exhaustive search; longer inputs fall back to the greedy loop, which may
# use more edits than the true minimum. Single-step greedy is provably
# suboptimal already at 4 tokens (equal-gain shifts can dead-end), so short
# sequences get the exact answer.
EXACT_SHIFT_SEARCH_LIMIT = 6

OK = "OK"
BAD = "BAD"


@dataclass(frozen=True, slots=True)
class Match:
    h: int
    r: int


@dataclass(frozen=True, slots=True)
class Substitute:
    h: int
    r: int
    token: str


@dataclass(frozen=True, slots=True)
class Insert:
    r: int
    token: str
    gap: int  # hypothesis gap (0..len) the missing reference token maps to


@dataclass(frozen=True, slots=True)
class Delete:
    h: int


@dataclass(frozen=True, slots=True)
class Shift:
    """Move ``length`` tokens starting at ``start`` so the span begins at
    ``dest`` after removal and reinsertion. Indices address the hypothesis as
    it stands when the shift is applied (shifts apply in op order, before the
    per-token edits)."""

    start: int
    length: int
    dest: int


@dataclass(frozen=True)
class EditScript:
    """Ordered edits aligning a hypothesis to a reference: all shifts first,
    then match/substitute/insert/delete ops in reference order. ``n_edits``
    counts non-match ops, one per shift."""

    ops: tuple
    n_edits: int
    n_shifts: int


@dataclass(frozen=True)
class TerResult:
    score: float
    n_edits: int
    n_shifts: int
    ref_len: int


@dataclass(frozen=True)
class PseudoQERecord:
    """One pseudo-QE training record in WMT layout. ``mt`` holds the
    space-joined hypothesis tokens, so ``mt.split()`` is always aligned with
    ``tgt_tags``; ``gap_tags`` has one entry per gap (len(tags) + 1)."""

    src: str
    mt: str
    ref: str
    sentence_score: float
    tgt_tags: tuple[str, ...]
    gap_tags: tuple[str, ...] | None = None


def levenshtein_distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Unit-cost edit distance (no shifts), two-row DP."""
    if len(hyp) < len(ref):
        # distance is symmetric; iterate over the longer side for a short row
        hyp, ref = ref, hyp
    prev = list(range(len(ref) + 1))
    for i, h_tok in enumerate(hyp, start=1):
        cur = [i]
        for j, r_tok in enumerate(ref, start=1):
            if h_tok == r_tok:
                cur.append(prev[j - 1])
            else:
                cur.append(1 + min(prev[j - 1], prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def levenshtein_script(hyp: Sequence[str], ref: Sequence[str]) -> EditScript:
    """Minimum-cost edit script without shifts.

    Backtrace ties prefer match over substitute over delete over insert, so
    the script is unique and deterministic.
    """
    n, m = len(hyp), len(ref)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        row = d[i]
        prev_row = d[i - 1]
        h_tok = hyp[i - 1]
        for j in range(1, m + 1):
            diag = prev_row[j - 1] + (0 if h_tok == ref[j - 1] else 1)
            row[j] = min(diag, prev_row[j] + 1, row[j - 1] + 1)
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        here = d[i][j]
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] and here == d[i - 1][j - 1]:
            ops.append(Match(h=i - 1, r=j - 1))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and hyp[i - 1] != ref[j - 1] and here == d[i - 1][j - 1] + 1:
            ops.append(Substitute(h=i - 1, r=j - 1, token=ref[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and here == d[i - 1][j] + 1:
            ops.append(Delete(h=i - 1))
            i -= 1
        else:
            ops.append(Insert(r=j - 1, token=ref[j - 1], gap=i))
            j -= 1
    ops.reverse()
    n_edits = sum(1 for op in ops if not isinstance(op, Match))
    return EditScript(ops=tuple(ops), n_edits=n_edits, n_shifts=0)


def _splice(seq: list, start: int, length: int, dest: int) -> list:
    span = seq[start : start + length]
    rest = seq[:start] + seq[start + length :]
    return rest[:dest] + span + rest[dest:]


def _ref_span_index(ref: list, max_size: int) -> dict[tuple, list[int]]:
    spans: dict[tuple, list[int]] = {}
    for length in range(1, min(max_size, len(ref)) + 1):
        for r in range(len(ref) - length + 1):
            spans.setdefault(tuple(ref[r : r + length]), []).append(r)
    return spans


def _greedy_shifts(
    hyp: list, ref: list, max_dist: int, max_size: int
) -> tuple[list[Shift], list]:
    """One shift per round: the spanwise move that most reduces the
    shift-free edit distance, preferring smaller spans, smaller
    displacements, leftmost spans, then leftmost destinations on ties. Only
    spans equal to some reference span that the current alignment has not
    already fully matched in place may move. Stops at the first round where
    no shift strictly reduces the distance."""
    cur = list(hyp)
    shifts: list[Shift] = []
    base = levenshtein_distance(cur, ref)
    ref_spans = _ref_span_index(ref, max_size)
    while base > 0:
        matched = {
            (op.h, op.r)
            for op in levenshtein_script(cur, ref).ops
            if isinstance(op, Match)
        }
        n = len(cur)
        best_key = None
        best_seq = None
        for length in range(1, min(max_size, n) + 1):
            for start in range(n - length + 1):
                positions = ref_spans.get(tuple(cur[start : start + length]))
                if not positions:
                    continue
                misaligned = any(
                    any((start + t, r + t) not in matched for t in range(length))
                    for r in positions
                )
                if not misaligned:
                    continue
                lo = max(0, start - max_dist)
                hi = min(n - length, start + max_dist)
                for dest in range(lo, hi + 1):
                    if dest == start:
                        continue
                    cand = _splice(cur, start, length, dest)
                    reduction = base - levenshtein_distance(cand, ref)
                    if reduction <= 0:
                        continue
                    key = (-reduction, length, abs(dest - start), start, dest)
                    if best_key is None or key < best_key:
                        best_key = key
                        best_seq = cand
        if best_key is None:
            break
        shifts.append(Shift(start=best_key[3], length=best_key[1], dest=best_key[4]))
        cur = best_seq
        base += best_key[0]
    return shifts, cur


def _optimal_shifts(
    hyp: list, ref: list, max_dist: int, max_size: int
) -> tuple[list[Shift], list]:
    """Exhaustive minimum over all shift sequences, breadth-first by shift
    count. A state reached with fewer shifts dominates any later visit, so
    each distinct token order is expanded once. Tractable only for short
    sequences."""
    ref_spans = _ref_span_index(ref, max_size)
    start_state = tuple(hyp)
    best_total = levenshtein_distance(hyp, ref)
    best_path: tuple[Shift, ...] = ()
    best_state = start_state
    seen = {start_state}
    frontier: list[tuple[tuple, tuple[Shift, ...]]] = [(start_state, ())]
    depth = 0
    while frontier and depth + 1 < best_total:
        depth += 1
        nxt: list[tuple[tuple, tuple[Shift, ...]]] = []
        for state, path in frontier:
            n = len(state)
            for length in range(1, min(max_size, n) + 1):
                for s0 in range(n - length + 1):
                    if state[s0 : s0 + length] not in ref_spans:
                        continue
                    lo = max(0, s0 - max_dist)
                    hi = min(n - length, s0 + max_dist)
                    for dest in range(lo, hi + 1):
                        if dest == s0:
                            continue
                        cand = tuple(_splice(list(state), s0, length, dest))
                        if cand in seen:
                            continue
                        seen.add(cand)
                        new_path = path + (Shift(start=s0, length=length, dest=dest),)
                        total = depth + levenshtein_distance(cand, ref)
                        if total < best_total:
                            best_total = total
                            best_path = new_path
                            best_state = cand
                        nxt.append((cand, new_path))
        frontier = nxt
    return list(best_path), list(best_state)


def ter(
    hyp: Sequence[str],
    ref: Sequence[str],
    max_shift_distance: int = DEFAULT_MAX_SHIFT_DISTANCE,
    max_shift_size: int = DEFAULT_MAX_SHIFT_SIZE,
    exact_search_limit: int = EXACT_SHIFT_SEARCH_LIMIT,
) -> tuple[TerResult, EditScript]:
    """Edit rate with block shifts.

    A shift moves a contiguous hypothesis span (size and displacement capped)
    whose tokens equal some reference span; each shift costs one edit and the
    remaining differences are charged as shift-free per-token edits. When
    both sides have at most ``exact_search_limit`` tokens the cheapest shift
    sequence is found exhaustively; longer inputs use the greedy
    one-shift-per-round loop, whose result never beats the exact minimum and
    never exceeds the shift-free edit distance.
    """
    hyp = list(hyp)
    ref = list(ref)
    ref_len = len(ref)
    if len(hyp) <= exact_search_limit and ref_len <= exact_search_limit:
        shifts, final_hyp = _optimal_shifts(hyp, ref, max_shift_distance, max_shift_size)
    else:
        shifts, final_hyp = _greedy_shifts(hyp, ref, max_shift_distance, max_shift_size)

    final = levenshtein_script(final_hyp, ref)
    n_edits = len(shifts) + final.n_edits
    script = EditScript(
        ops=(*shifts, *final.ops), n_edits=n_edits, n_shifts=len(shifts)
    )
    if ref_len == 0:
        score = 0.0 if not hyp else 1.0
    else:
        score = min(1.0, n_edits / ref_len)
    return (
        TerResult(score=score, n_edits=n_edits, n_shifts=len(shifts), ref_len=ref_len),
        script,
    )


def _replay_shifts(script: EditScript, hyp_len: int) -> list[int]:
    """Original hypothesis index at each post-shift position."""
    order = list(range(hyp_len))
    for op in script.ops:
        if not isinstance(op, Shift):
            continue
        if not (
            0 <= op.start
            and op.length >= 1
            and op.start + op.length <= len(order)
            and 0 <= op.dest <= len(order) - op.length
        ):
            raise InconsistentScriptError(f"shift {op} out of range for length {hyp_len}")
        order = _splice(order, op.start, op.length, op.dest)
    return order


def apply_script(script: EditScript, hyp: Sequence[str]) -> list[str]:
    """Execute the script: shifted hypothesis tokens fill the match slots,
    substituted and inserted reference tokens fill the rest."""
    order = _replay_shifts(script, len(hyp))
    seq = [hyp[i] for i in order]
    out: list[tuple[int, str]] = []
    for op in script.ops:
        if isinstance(op, Match):
            if op.h >= len(seq):
                raise InconsistentScriptError(f"match {op} out of range")
            out.append((op.r, seq[op.h]))
        elif isinstance(op, Substitute):
            out.append((op.r, op.token))
        elif isinstance(op, Insert):
            out.append((op.r, op.token))
    out.sort(key=lambda item: item[0])
    return [token for _, token in out]


def word_tags(script: EditScript, hyp_len: int) -> tuple[list[str], list[str]]:
    """Derive OK/BAD tags from an edit script.

    A hypothesis token is OK exactly when a match consumes it (shifted then
    matched counts as OK; the shift's cost belongs to no single token).
    ``gap_tags`` has hyp_len + 1 entries; a gap is BAD when at least one
    insert lands there. Inserts are located in the post-shift sequence and
    mapped back to the original token order.
    """
    order = _replay_shifts(script, hyp_len)
    tags = [BAD] * hyp_len
    gaps = [OK] * (hyp_len + 1)
    consumed_h: set[int] = set()
    consumed_r: set[int] = set()

    def _take_h(h: int) -> None:
        if not 0 <= h < hyp_len or h in consumed_h:
            raise InconsistentScriptError(f"hypothesis index {h} reused or out of range")
        consumed_h.add(h)

    def _take_r(r: int) -> None:
        if r < 0 or r in consumed_r:
            raise InconsistentScriptError(f"reference index {r} reused or out of range")
        consumed_r.add(r)

    for op in script.ops:
        if isinstance(op, Match):
            _take_h(op.h)
            _take_r(op.r)
            tags[order[op.h]] = OK
        elif isinstance(op, Substitute):
            _take_h(op.h)
            _take_r(op.r)
        elif isinstance(op, Delete):
            _take_h(op.h)
        elif isinstance(op, Insert):
            _take_r(op.r)
            if hyp_len == 0:
                gap = 0
            elif op.gap < hyp_len:
                gap = order[op.gap]
            else:
                gap = order[-1] + 1
            if not 0 <= gap <= hyp_len:
                raise InconsistentScriptError(f"insert gap {op.gap} out of range")
            gaps[gap] = BAD
    if len(consumed_h) != hyp_len:
        raise InconsistentScriptError(
            f"script consumes {len(consumed_h)} of {hyp_len} hypothesis tokens"
        )
    if consumed_r and consumed_r != set(range(max(consumed_r) + 1)):
        raise InconsistentScriptError("reference indices are not contiguous from 0")
    return tags, gaps


def make_pseudo_record(
    pair: SentencePair,
    mt_line: str | None,
    tok_cfg: TokenizerConfig = TRUECASE_TOKENIZER,
    include_gap_tags: bool = True,
    max_shift_distance: int = DEFAULT_MAX_SHIFT_DISTANCE,
    max_shift_size: int = DEFAULT_MAX_SHIFT_SIZE,
) -> PseudoQERecord:
    """Score one externally produced MT hypothesis against the pair's target
    side and assemble the QE record. Tags are case-sensitive by default."""
    if mt_line is None:
        raise MissingMtLineError(pair.sub_corpus, pair.id)
    mt_tokens = tokenize(mt_line, tok_cfg)
    ref_tokens = tokenize(pair.tgt, tok_cfg)
    result, script = ter(
        mt_tokens,
        ref_tokens,
        max_shift_distance=max_shift_distance,
        max_shift_size=max_shift_size,
    )
    tags, gaps = word_tags(script, len(mt_tokens))
    return PseudoQERecord(
        src=pair.src,
        mt=" ".join(mt_tokens),
        ref=pair.tgt,
        sentence_score=result.score,
        tgt_tags=tuple(tags),
        gap_tags=tuple(gaps) if include_gap_tags else None,
    )
