"""Confusion matrices over SE types and the statistics computed from them."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .classify import (
    ALL_KINDS, UPOS, AlignmentError, ClassifiedEdit, CorpusBundle, Kind, Scheme,
    classify, label_of, prepare_sentence,
)
from .conllu import UPOS_TAGS
from .edits import uncovered_offsets

__all__ = [
    "ConfusionMatrix", "CorpusBundle", "build_matrix", "merge", "unchanged_fraction",
    "se_counts", "recall_bound", "cramers_v", "pearson", "entropy_effective",
    "taxonomy_overlap", "levels_matrix", "levels_table", "levels_table_from_matrices",
    "read_matrix", "write_matrix", "read_count_table", "tie_rate",
]

OTHER = "Other"
Label = str | None


class StatsError(ValueError):
    pass


class MixedSchemes(StatsError):
    pass


class DegenerateTable(StatsError):
    pass


class ZeroVariance(StatsError):
    pass


class MissingLevelTag(StatsError):
    pass


def default_universe(scheme: Scheme) -> tuple[str, ...] | None:
    return UPOS_TAGS if scheme.kind == "upos" else None


@dataclass
class ConfusionMatrix:
    """Counts keyed by (source label, target label); ``None`` is the empty side of an addition/deletion.

    With a closed ``label_universe`` any other label is counted under ``Other``;
    ``None`` means the universe is open (every observed label is kept).
    """

    scheme: Scheme = UPOS
    counts: dict[tuple[Label, Label], int] = field(default_factory=dict)
    label_universe: tuple[str, ...] | None = None

    @classmethod
    def empty(cls, scheme: Scheme = UPOS, label_universe: Sequence[str] | None | bool = True):
        """``label_universe=True`` picks the scheme default (UPOS tags for UPOS, open otherwise)."""
        if label_universe is True:
            label_universe = default_universe(scheme)
        return cls(scheme, {}, tuple(label_universe) if label_universe is not None else None)

    def bucket(self, label: Label) -> Label:
        if label is None or self.label_universe is None or label in self.label_universe:
            return label
        return OTHER

    def add(self, source: Label, target: Label, n: int = 1) -> None:
        if n < 0:
            raise ValueError("counts are non-negative")
        key = (self.bucket(source), self.bucket(target))
        self.counts[key] = self.counts.get(key, 0) + n

    def __getitem__(self, key: tuple[Label, Label]) -> int:
        return self.counts.get(key, 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def row(self, label: Label) -> dict[Label, int]:
        return {t: n for (s, t), n in self.counts.items() if s == label and n}

    def labels(self) -> list[Label]:
        """Row/column order used for output: universe (or sorted observed labels), None, Other."""
        if self.label_universe is not None:
            base = list(self.label_universe)
        else:
            seen = {l for key in self.counts for l in key if l is not None and l != OTHER}
            base = sorted(seen)
        return base + [None, OTHER]

    def to_array(self, labels: Sequence[Label] | None = None) -> np.ndarray:
        labels = self.labels() if labels is None else labels
        index = {l: i for i, l in enumerate(labels)}
        arr = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for (s, t), n in self.counts.items():
            arr[index[s], index[t]] += n
        return arr

    def same_shape(self, other: "ConfusionMatrix") -> bool:
        return self.scheme == other.scheme and self.label_universe == other.label_universe

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        nz = lambda m: {k: v for k, v in m.counts.items() if v}
        return self.same_shape(other) and nz(self) == nz(other)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    if not a.same_shape(b):
        raise MixedSchemes(f"cannot merge {a.scheme} matrix with {b.scheme} matrix")
    out = ConfusionMatrix(a.scheme, dict(a.counts), a.label_universe)
    for key, n in b.counts.items():
        out.counts[key] = out.counts.get(key, 0) + n
    return out


def build_matrix(
    edits: Iterable[ClassifiedEdit],
    kinds: Iterable[Kind] = ALL_KINDS,
    exclude_labels: Iterable[str] = (),
    scheme: Scheme | None = None,
    label_universe: Sequence[str] | None | bool = True,
) -> ConfusionMatrix:
    """Tally classified edits of the selected kinds.

    Edits the scheme does not apply to, and edits with an excluded label on
    either side, are skipped.
    """
    kinds = frozenset(kinds)
    excluded = frozenset(exclude_labels)
    edits = list(edits)
    schemes = {e.scheme for e in edits}
    if scheme is not None:
        schemes.add(scheme)
    if len(schemes) > 1:
        raise MixedSchemes(f"edits use several schemes: {sorted(map(str, schemes))}")
    matrix = ConfusionMatrix.empty(schemes.pop() if schemes else UPOS, label_universe)
    for e in edits:
        if e.se_type is None or e.kind not in kinds:
            continue
        s, t = e.se_type.source_label, e.se_type.target_label
        if s in excluded or t in excluded:
            continue
        matrix.add(s, t)
    return matrix


def unchanged_fraction(matrix: ConfusionMatrix) -> dict[str, float]:
    """Share of each source label's row that stays on the diagonal."""
    rows: dict[str, int] = defaultdict(int)
    for (s, _), n in matrix.counts.items():
        if s is not None:
            rows[s] += n
    return {l: matrix[(l, l)] / n for l, n in rows.items() if n}


def se_counts(matrix: ConfusionMatrix) -> dict[str, int]:
    """Off-diagonal row sums per source label, deletions included."""
    out: dict[str, int] = defaultdict(int)
    for (s, t), n in matrix.counts.items():
        if s is not None:
            out[s] += 0 if s == t else n
    return dict(out)


@dataclass(frozen=True)
class RecallRow:
    label: str
    system: int
    gold: int

    @property
    def ratio(self) -> float:
        return self.system / self.gold


@dataclass(frozen=True)
class RecallBound:
    rows: tuple[RecallRow, ...]
    system_total: int
    gold_total: int

    @property
    def overall(self) -> float:
        return self.system_total / self.gold_total if self.gold_total else math.nan

    def ratios(self) -> dict[str, float]:
        return {r.label: r.ratio for r in self.rows}


def recall_bound(system: ConfusionMatrix, gold: ConfusionMatrix,
                 exclude_labels: Iterable[str] = ()) -> RecallBound:
    """Upper bound on recall: system SE count over gold SE count, per source label and overall."""
    if system.scheme != gold.scheme:
        raise MixedSchemes(f"system uses {system.scheme}, gold uses {gold.scheme}")
    excluded = set(exclude_labels)
    sys_counts = {l: n for l, n in se_counts(system).items() if l not in excluded}
    gold_counts = {l: n for l, n in se_counts(gold).items() if l not in excluded}
    rows = [RecallRow(l, sys_counts.get(l, 0), g) for l, g in gold_counts.items() if g]
    rows.sort(key=lambda r: (r.ratio, r.label))
    return RecallBound(tuple(rows), sum(sys_counts.values()), sum(gold_counts.values()))


def _as_table(table) -> np.ndarray:
    if isinstance(table, ConfusionMatrix):
        table = table.to_array()
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2:
        raise ValueError("contingency table must be 2-D")
    if (arr < 0).any():
        raise ValueError("contingency table has negative cells")
    return arr


def chi_squared(table) -> float:
    """Pearson's chi-squared over the nonzero rows and columns of a contingency table."""
    arr = _as_table(table)
    arr = arr[arr.sum(axis=1) > 0][:, arr.sum(axis=0) > 0]
    n = arr.sum()
    expected = np.outer(arr.sum(axis=1), arr.sum(axis=0)) / n
    return float(((arr - expected) ** 2 / expected).sum())


def cramers_v(table) -> float:
    arr = _as_table(table)
    arr = arr[arr.sum(axis=1) > 0][:, arr.sum(axis=0) > 0]
    r, c = arr.shape
    if r < 2 or c < 2:
        raise DegenerateTable(f"need at least 2 nonzero rows and columns, got {r}x{c}")
    v = math.sqrt(chi_squared(arr) / (arr.sum() * (min(r, c) - 1)))
    return min(v, 1.0)


@dataclass(frozen=True)
class Correlation:
    r: float
    mean_abs_diff: float
    labels: tuple[str, ...]


def pearson(a: Mapping[str, float], b: Mapping[str, float]) -> Correlation:
    """Product-moment correlation of two label->frequency maps (missing labels count as 0)."""
    labels = tuple(sorted(set(a) | set(b)))
    if len(labels) < 2:
        raise ValueError("need at least two labels")
    x = np.array([a.get(l, 0.0) for l in labels], dtype=float)
    y = np.array([b.get(l, 0.0) for l in labels], dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt((dx * dx).sum()), math.sqrt((dy * dy).sum())
    if sx == 0 or sy == 0:
        raise ZeroVariance("a frequency vector is constant")
    r = float((dx * dy).sum() / (sx * sy))
    return Correlation(max(-1.0, min(1.0, r)), float(np.abs(x - y).mean()), labels)


def se_frequencies(matrix: ConfusionMatrix, normalize: str = "tokens") -> dict[str, float]:
    """Per-source-label SE frequency.

    ``tokens`` divides by the label's row total (meaningful for levels-mode
    matrices); ``ses`` divides by the number of SEs in the matrix.
    """
    counts = se_counts(matrix)
    if normalize == "tokens":
        rows: dict[str, int] = defaultdict(int)
        for (s, _), n in matrix.counts.items():
            if s is not None:
                rows[s] += n
        return {l: counts.get(l, 0) / n for l, n in rows.items() if n}
    if normalize == "ses":
        total = sum(counts.values())
        return {l: n / total for l, n in counts.items()} if total else {}
    raise ValueError(f"unknown normalization {normalize!r}")


def compare_distributions(a: ConfusionMatrix, b: ConfusionMatrix,
                          exclude_labels: Iterable[str] = ()) -> dict[str, Correlation]:
    """Correlate SE frequencies of two matrices under both normalizations."""
    excluded = set(exclude_labels)
    out = {}
    for norm in ("tokens", "ses"):
        fa = {l: v for l, v in se_frequencies(a, norm).items() if l not in excluded}
        fb = {l: v for l, v in se_frequencies(b, norm).items() if l not in excluded}
        out[norm] = pearson(fa, fb)
    return out


def entropy_effective(counts: Mapping[object, float]) -> tuple[float, float]:
    """Shannon entropy in nats and its exponent, the effective number of types."""
    values = [v for v in counts.values() if v > 0]
    total = sum(values)
    if total <= 0:
        raise ValueError("counts must sum to at least 1")
    h = -sum(v / total * math.log(v / total) for v in values)
    h = max(h, 0.0)
    return h, math.exp(h)


@dataclass(frozen=True)
class OverlapRow:
    se_type: str
    best: str
    top: tuple[int, ...]  # up to three largest external counts
    total: int

    @property
    def max_frac(self) -> float:
        return self.top[0] / self.total

    @property
    def top3_frac(self) -> float:
        return sum(self.top) / self.total


@dataclass(frozen=True)
class Overlap:
    rows: tuple[OverlapRow, ...]
    min_count: int

    @property
    def kept(self) -> tuple[OverlapRow, ...]:
        return tuple(r for r in self.rows if r.total >= self.min_count)

    @property
    def mean_max_frac(self) -> float:
        kept = self.kept
        return sum(r.max_frac for r in kept) / len(kept) if kept else math.nan

    @property
    def mean_top3_frac(self) -> float:
        kept = self.kept
        return sum(r.top3_frac for r in kept) / len(kept) if kept else math.nan


def taxonomy_overlap(joint: Mapping[tuple[str, str], int], min_count: int = 30) -> Overlap:
    """How concentrated each SE type is within an external taxonomy's categories."""
    by_type: dict[str, dict[str, int]] = defaultdict(dict)
    for (se, ext), n in joint.items():
        if n < 0:
            raise ValueError("joint counts must be non-negative")
        if n:
            by_type[se][ext] = by_type[se].get(ext, 0) + n
    rows = []
    for se, exts in by_type.items():
        ranked = sorted(exts.items(), key=lambda kv: (-kv[1], kv[0]))
        rows.append(OverlapRow(se, ranked[0][0], tuple(n for _, n in ranked[:3]), sum(exts.values())))
    rows.sort(key=lambda r: (-r.max_frac, r.se_type))
    return Overlap(tuple(rows), min_count)


def joint_counts(edits: Iterable[ClassifiedEdit], kinds: Iterable[Kind] = ALL_KINDS,
                 exclude_labels: Iterable[str] = ()) -> Counter:
    """(SE type, external type) tallies; edits without an external type are skipped."""
    kinds = frozenset(kinds)
    excluded = frozenset(exclude_labels)
    joint: Counter = Counter()
    for e in edits:
        if e.se_type is None or e.external_type is None or e.kind not in kinds:
            continue
        if {e.se_type.source_label, e.se_type.target_label} & excluded:
            continue
        joint[(str(e.se_type), e.external_type)] += 1
    return joint


def tie_rate(edits: Iterable[ClassifiedEdit]) -> float:
    """Fraction of edits whose representative needed the leftmost tie-break on either side."""
    edits = list(edits)
    return sum(e.tied for e in edits) / len(edits) if edits else 0.0


def levels_matrix(
    bundle: CorpusBundle,
    scheme: Scheme = UPOS,
    annotator: int = 0,
    kinds: Iterable[Kind] = (Kind.REPLACEMENT,),
    exclude_labels: Iterable[str] = (),
    errors: list[AlignmentError] | None = None,
) -> ConfusionMatrix:
    """Edit matrix plus one diagonal count per source token left untouched by every edit."""
    kinds = frozenset(kinds)
    excluded = frozenset(exclude_labels)
    matrix = ConfusionMatrix.empty(scheme)
    for i, (sent, src, cor) in enumerate(zip(bundle.m2, bundle.source_parses, bundle.corrected_parses)):
        try:
            edits, spans = prepare_sentence(i, sent, src, cor, annotator)
        except AlignmentError as exc:
            if errors is None:
                raise
            errors.append(exc)
            continue
        for j, (edit, span) in enumerate(zip(edits, spans)):
            ce = classify(edit, src, cor, span, scheme, sentence_index=i, edit_index=j)
            if ce.se_type is None or ce.kind not in kinds:
                continue
            if {ce.se_type.source_label, ce.se_type.target_label} & excluded:
                continue
            matrix.add(ce.se_type.source_label, ce.se_type.target_label)
        for off in uncovered_offsets(len(src), edits):
            label = label_of(src.tokens[off], scheme)
            if label is not None and label not in excluded:
                matrix.add(label, label)
    return matrix


@dataclass(frozen=True)
class LevelsTable:
    levels: tuple[str, ...]
    rows: tuple[tuple[str, dict[str, float]], ...]

    def get(self, label: str, level: str) -> float | None:
        for l, fracs in self.rows:
            if l == label:
                return fracs.get(level)
        raise KeyError(label)


def levels_table_from_matrices(
    matrices: Mapping[str, ConfusionMatrix] | Sequence[tuple[str, ConfusionMatrix]],
    native_levels: Iterable[str] = ("N",),
    exclude_labels: Iterable[str] = (),
) -> LevelsTable:
    """Unchanged fraction per label (rows) and level (columns).

    Rows are sorted by ascending mean over the learner (non-native) levels, or
    over all levels when every level is native.
    """
    items = list(matrices.items()) if isinstance(matrices, Mapping) else list(matrices)
    merged: dict[str, ConfusionMatrix] = {}
    for level, m in items:
        merged[level] = merge(merged[level], m) if level in merged else m
    levels = tuple(merged)
    excluded = set(exclude_labels)
    fracs = {level: unchanged_fraction(m) for level, m in merged.items()}
    native = set(native_levels)
    learner = [l for l in levels if l not in native] or list(levels)
    labels = sorted({l for f in fracs.values() for l in f} - excluded)

    def mean(label):
        vals = [fracs[lv][label] for lv in learner if label in fracs[lv]]
        return sum(vals) / len(vals) if vals else math.inf

    labels.sort(key=lambda l: (mean(l), l))
    rows = tuple((l, {lv: fracs[lv][l] for lv in levels if l in fracs[lv]}) for l in labels)
    return LevelsTable(levels, rows)


def levels_table(
    bundles: Iterable[CorpusBundle],
    scheme: Scheme = UPOS,
    annotator: int = 0,
    kinds: Iterable[Kind] = (Kind.REPLACEMENT,),
    exclude_labels: Iterable[str] = (),
    native_levels: Iterable[str] = ("N",),
) -> LevelsTable:
    pairs = []
    for k, b in enumerate(bundles):
        if not b.level_tag:
            raise MissingLevelTag(f"bundle {k} has no level tag")
        pairs.append((b.level_tag, levels_matrix(b, scheme, annotator, kinds)))
    return levels_table_from_matrices(pairs, native_levels, exclude_labels)


def read_count_table(stream: TextIO | Iterable[str]) -> tuple[list[str], list[str], dict[tuple[str, str], int]]:
    """Read a TAB-separated count table: header row of column labels, then ``label\\tn\\tn...`` rows."""
    lines = [l.rstrip("\r\n") for l in stream]
    lines = [l for l in lines if l.strip() and not l.startswith("#")]
    if not lines:
        return [], [], {}
    columns = [c.strip() for c in lines[0].split("\t")[1:]]
    rows, counts = [], {}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(columns) + 1:
            raise ValueError(f"table row {lineno}: expected {len(columns) + 1} cells, got {len(cells)}")
        label = cells[0].strip()
        rows.append(label)
        for col, cell in zip(columns, cells[1:]):
            try:
                n = int(cell)
            except ValueError:
                raise ValueError(f"table row {lineno}: non-integer cell {cell!r}") from None
            if n < 0:
                raise ValueError(f"table row {lineno}: negative count")
            if n:
                counts[(label, col)] = counts.get((label, col), 0) + n
    return rows, columns, counts


def _label_in(text: str) -> Label:
    return None if text == "None" else text


def _label_out(label: Label) -> str:
    return "None" if label is None else label


def read_matrix(stream: TextIO | Iterable[str], scheme: Scheme = UPOS,
                label_universe: Sequence[str] | None | bool = True) -> ConfusionMatrix:
    _, _, counts = read_count_table(stream)
    matrix = ConfusionMatrix.empty(scheme, label_universe)
    for (s, t), n in counts.items():
        matrix.add(_label_in(s), _label_in(t), n)
    return matrix


def format_matrix(matrix: ConfusionMatrix) -> str:
    labels = matrix.labels()
    arr = matrix.to_array(labels)
    names = [_label_out(l) for l in labels]
    lines = ["\t".join([""] + names)]
    for name, row in zip(names, arr):
        lines.append("\t".join([name] + [str(int(v)) for v in row]))
    return "\n".join(lines) + "\n"


def write_matrix(matrix: ConfusionMatrix, stream: TextIO) -> None:
    stream.write(format_matrix(matrix))
