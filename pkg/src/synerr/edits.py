"""M2 edit files: reading, annotator selection, merging overlapping edits and applying them."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence, TextIO

NOOP_TYPES = {"noop"}


class M2Error(ValueError):
    pass


class MalformedAnnotation(M2Error):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


class SpanOutOfBounds(M2Error):
    def __init__(self, sentence_index: int, edit: "Edit"):
        super().__init__(f"sentence {sentence_index}: edit span ({edit.start},{edit.end}) out of bounds")
        self.sentence_index = sentence_index
        self.edit = edit


@dataclass(frozen=True)
class Edit:
    start: int
    end: int
    replacement: tuple[str, ...] = ()
    external_type: str | None = None
    annotator: int = 0

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span ({self.start},{self.end})")

    @property
    def is_insertion(self) -> bool:
        return self.start == self.end

    @property
    def width(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class EditedSentence:
    source_tokens: tuple[str, ...]
    edits: tuple[Edit, ...] = ()


def _split_correction(text: str) -> tuple[str, ...]:
    if text in ("", "-NONE-"):
        return ()
    return tuple(tok for tok in text.split(" ") if tok)


def _parse_a_line(line: str, lineno: int) -> Edit | None:
    fields = line[2:].split("|||")
    if len(fields) < 6:
        raise MalformedAnnotation(lineno, f"expected 6 '|||' fields, got {len(fields)}")
    try:
        start, end = (int(x) for x in fields[0].split())
        annotator = int(fields[5])
    except ValueError:
        raise MalformedAnnotation(lineno, "non-integer offsets or annotator") from None
    etype = fields[1]
    if etype in NOOP_TYPES or (start, end) == (-1, -1):
        return None
    replacement = _split_correction(fields[2])
    if start == end and not replacement:
        return None
    if start < 0 or end < start:
        raise MalformedAnnotation(lineno, f"bad span {start} {end}")
    return Edit(start, end, replacement, etype or None, annotator)


def read_m2(stream: TextIO | Iterable[str]) -> list[EditedSentence]:
    """Parse an M2 stream; noop edits are dropped."""
    sentences = []
    tokens: tuple[str, ...] | None = None
    edits: list[Edit] = []

    def flush():
        for e in edits:
            if e.end > len(tokens):
                raise SpanOutOfBounds(len(sentences), e)
        sentences.append(EditedSentence(tokens, tuple(edits)))

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if line.startswith("S ") or line == "S":
            if tokens is not None:
                flush()
            tokens = tuple(t for t in line[2:].split(" ") if t)
            edits = []
        elif line.startswith("A "):
            if tokens is None:
                raise MalformedAnnotation(lineno, "annotation before any S line")
            edit = _parse_a_line(line, lineno)
            if edit is not None:
                edits.append(edit)
        elif line.strip():
            raise MalformedAnnotation(lineno, "line is neither S nor A")
    if tokens is not None:
        flush()
    return sentences


def select_annotator(sentence: EditedSentence, annotator: int) -> EditedSentence:
    return replace(sentence, edits=tuple(e for e in sentence.edits if e.annotator == annotator))


def annotators(sentences: Iterable[EditedSentence]) -> list[int]:
    return sorted({e.annotator for s in sentences for e in s.edits})


def collide(a: Edit, b: Edit) -> bool:
    """Whether two edits must be merged into one."""
    if a.is_insertion and b.is_insertion:
        return a.start == b.start
    if a.is_insertion:
        return b.start <= a.start <= b.end
    if b.is_insertion:
        return a.start <= b.start <= a.end
    return a.start < b.end and b.start < a.end


def _splice_group(group: list[Edit], source: Sequence[str]) -> Edit:
    start = min(e.start for e in group)
    end = max(e.end for e in group)
    claimed = set()
    for e in group:
        claimed.update(range(e.start, e.end))
    out: list[str] = []
    for p in range(start, end + 1):
        for e in group:
            if e.is_insertion and e.start == p:
                out.extend(e.replacement)
        for e in sorted((e for e in group if not e.is_insertion and e.start == p), key=lambda e: e.end):
            out.extend(e.replacement)
        if p < end and p not in claimed:
            out.append(source[p])
    widest = max(group, key=lambda e: (e.width, -e.start))
    return Edit(start, end, tuple(out), widest.external_type, group[0].annotator)


def merge_overlapping(edits: Sequence[Edit], source: Sequence[str]) -> list[Edit]:
    """Merge colliding edits into non-overlapping edits sorted by (start, end).

    Unclaimed source tokens inside a merged span are kept in place; insertions at
    an offset come before replacements starting there, in input order.
    """
    edits = list(edits)
    parent = list(range(len(edits)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(edits)):
        for j in range(i + 1, len(edits)):
            if collide(edits[i], edits[j]):
                parent[find(i)] = find(j)
    groups: dict[int, list[Edit]] = {}
    for i, e in enumerate(edits):
        groups.setdefault(find(i), []).append(e)
    merged = [g[0] if len(g) == 1 else _splice_group(g, source) for g in groups.values()]
    return sorted(merged, key=lambda e: (e.start, e.end))


def apply_edits(source: Sequence[str], edits: Sequence[Edit]) -> tuple[list[str], list[tuple[int, int]]]:
    """Apply sorted non-overlapping edits; return corrected tokens and each edit's target span."""
    out: list[str] = []
    spans = []
    pos = 0
    for e in edits:
        if e.start < pos:
            raise ValueError("edits must be sorted and non-overlapping")
        out.extend(source[pos:e.start])
        t0 = len(out)
        out.extend(e.replacement)
        spans.append((t0, len(out)))
        pos = e.end
    out.extend(source[pos:])
    return out, spans


def uncovered_offsets(n: int, edits: Iterable[Edit]) -> list[int]:
    covered = set()
    for e in edits:
        covered.update(range(e.start, e.end))
    return [i for i in range(n) if i not in covered]
