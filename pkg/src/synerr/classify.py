"""Representative-token selection and syntactic-error (SE) typing of edits."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .conllu import ParsedSentence, Token
from .edits import Edit, EditedSentence, apply_edits, merge_overlapping, select_annotator


class ClassifyError(ValueError):
    pass


class FormMismatch(ClassifyError):
    pass


class AlignmentError(ClassifyError):
    def __init__(self, sentence_index: int, reason: str):
        super().__init__(f"sentence {sentence_index}: {reason}")
        self.sentence_index = sentence_index


class Kind(str, Enum):
    ADDITION = "Addition"
    DELETION = "Deletion"
    REPLACEMENT = "Replacement"

    @classmethod
    def parse(cls, text: str) -> "Kind":
        aliases = {"add": cls.ADDITION, "del": cls.DELETION, "rep": cls.REPLACEMENT}
        key = text.strip()
        if key.lower() in aliases:
            return aliases[key.lower()]
        return cls(key.capitalize())


ALL_KINDS = frozenset(Kind)


@dataclass(frozen=True)
class Scheme:
    kind: str  # "upos" | "deprel" | "feature"
    feature: str | None = None
    pos_filter: str | None = None

    def __post_init__(self):
        if self.kind not in ("upos", "deprel", "feature"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.kind == "feature" and not self.feature:
            raise ValueError("feature scheme needs a feature name")

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse ``upos``, ``deprel`` or ``feature:<Name>[:<UPOS>]``."""
        parts = text.split(":")
        kind = parts[0].lower()
        if kind == "feature":
            if len(parts) not in (2, 3) or not parts[1]:
                raise ValueError(f"bad feature scheme {text!r}")
            return cls("feature", parts[1], parts[2].upper() if len(parts) == 3 and parts[2] else None)
        if len(parts) != 1:
            raise ValueError(f"bad scheme {text!r}")
        return cls(kind)

    def __str__(self):
        if self.kind != "feature":
            return self.kind
        return f"feature:{self.feature}" + (f":{self.pos_filter}" if self.pos_filter else "")


UPOS = Scheme("upos")
DEPREL = Scheme("deprel")


@dataclass(frozen=True)
class SEType:
    source_label: str | None
    target_label: str | None

    @property
    def kind(self) -> Kind:
        if self.source_label is None:
            return Kind.ADDITION
        if self.target_label is None:
            return Kind.DELETION
        return Kind.REPLACEMENT

    @property
    def is_syntactic_error(self) -> bool:
        return self.source_label != self.target_label

    def __str__(self):
        return f"{self.source_label or 'None'}->{self.target_label or 'None'}"


@dataclass(frozen=True)
class ClassifiedEdit:
    sentence_index: int
    edit_index: int
    kind: Kind
    scheme: Scheme
    se_type: SEType | None  # None when the scheme does not apply to this edit
    source_rep: int | None = None
    target_rep: int | None = None
    external_type: str | None = None
    tied: bool = field(default=False, compare=False)

    @property
    def applicable(self) -> bool:
        return self.se_type is not None


def _min_depth_ids(span: tuple[int, int], sentence: ParsedSentence) -> list[int]:
    start, end = span
    if not 0 <= start <= end <= len(sentence):
        raise IndexError(f"span {span} outside sentence of length {len(sentence)}")
    ids = range(start + 1, end + 1)
    if not ids:
        return []
    best = min(sentence.depth(i) for i in ids)
    return [i for i in ids if sentence.depth(i) == best]


def representative(span: tuple[int, int], sentence: ParsedSentence) -> int | None:
    """Token id of the span token closest to the sentence root, leftmost on ties.

    ``span`` holds 0-based token offsets, end exclusive; the result is a 1-based id.
    """
    candidates = _min_depth_ids(span, sentence)
    return candidates[0] if candidates else None


def label_of(token: Token | None, scheme: Scheme) -> str | None:
    if token is None:
        return None
    if scheme.kind == "upos":
        return token.upos
    if scheme.kind == "deprel":
        return token.deprel
    if scheme.pos_filter and token.upos != scheme.pos_filter:
        return None
    return token.feats.get(scheme.feature)


def classify(
    edit: Edit,
    src: ParsedSentence,
    tgt: ParsedSentence,
    tgt_span: tuple[int, int],
    scheme: Scheme,
    *,
    sentence_index: int = 0,
    edit_index: int = 0,
) -> ClassifiedEdit:
    t0, t1 = tgt_span
    if t1 - t0 != len(edit.replacement) or tuple(tgt.forms[t0:t1]) != tuple(edit.replacement):
        raise FormMismatch(
            f"target span {tgt_span} reads {tgt.forms[t0:t1]!r}, edit says {list(edit.replacement)!r}")
    src_ties = _min_depth_ids((edit.start, edit.end), src)
    tgt_ties = _min_depth_ids(tgt_span, tgt)
    src_rep = src_ties[0] if src_ties else None
    tgt_rep = tgt_ties[0] if tgt_ties else None
    if src_rep is None:
        kind = Kind.ADDITION
    elif tgt_rep is None:
        kind = Kind.DELETION
    else:
        kind = Kind.REPLACEMENT

    src_tok = src.token(src_rep) if src_rep else None
    tgt_tok = tgt.token(tgt_rep) if tgt_rep else None
    se_type: SEType | None
    if scheme.kind == "feature":
        # feature matrices only compare same-POS replacements that both carry the feature
        ok = kind is Kind.REPLACEMENT and src_tok.upos == tgt_tok.upos
        src_label = label_of(src_tok, scheme) if ok else None
        tgt_label = label_of(tgt_tok, scheme) if ok else None
        se_type = SEType(src_label, tgt_label) if src_label and tgt_label else None
    else:
        se_type = SEType(label_of(src_tok, scheme), label_of(tgt_tok, scheme))
    return ClassifiedEdit(
        sentence_index, edit_index, kind, scheme, se_type, src_rep, tgt_rep,
        edit.external_type, tied=len(src_ties) > 1 or len(tgt_ties) > 1,
    )


@dataclass(frozen=True)
class CorpusBundle:
    """Aligned M2 sentences with their source and corrected parses."""

    m2: tuple[EditedSentence, ...]
    source_parses: tuple[ParsedSentence, ...]
    corrected_parses: tuple[ParsedSentence, ...]
    level_tag: str | None = None

    def __post_init__(self):
        n = len(self.m2)
        if len(self.source_parses) != n or len(self.corrected_parses) != n:
            raise ValueError(
                f"bundle sizes differ: m2={n}, source={len(self.source_parses)}, "
                f"corrected={len(self.corrected_parses)}")


def prepare_sentence(index: int, sent: EditedSentence, src: ParsedSentence,
                     cor: ParsedSentence, annotator: int) -> tuple[list[Edit], list[tuple[int, int]]]:
    """Select, merge and apply one sentence's edits, checking both parses line up."""
    if tuple(src.forms) != tuple(sent.source_tokens):
        raise AlignmentError(index, "source parse forms differ from the M2 source tokens")
    edits = merge_overlapping(select_annotator(sent, annotator).edits, sent.source_tokens)
    corrected, spans = apply_edits(sent.source_tokens, edits)
    if cor.forms != corrected:
        raise AlignmentError(index, "corrected parse forms differ from the edited source")
    return edits, spans


def classify_corpus(
    bundle: CorpusBundle,
    scheme: Scheme,
    annotator: int = 0,
    errors: list[AlignmentError] | None = None,
) -> list[ClassifiedEdit]:
    """Classify every merged edit of the bundle, in sentence order.

    Misaligned sentences raise AlignmentError, unless ``errors`` is given, in
    which case they are collected there and skipped.
    """
    out = []
    for i, (sent, src, cor) in enumerate(zip(bundle.m2, bundle.source_parses, bundle.corrected_parses)):
        try:
            edits, spans = prepare_sentence(i, sent, src, cor, annotator)
        except AlignmentError as exc:
            if errors is None:
                raise
            errors.append(exc)
            continue
        for j, (edit, span) in enumerate(zip(edits, spans)):
            out.append(classify(edit, src, cor, span, scheme, sentence_index=i, edit_index=j))
    return out


REPORT_COLUMNS = (
    "sentence_index", "edit_index", "kind", "scheme", "source_label",
    "target_label", "src_rep_id", "tgt_rep_id", "external_type",
)


def _cell(value) -> str:
    return "_" if value is None else str(value)


def report_row(ce: ClassifiedEdit) -> dict[str, str]:
    if ce.se_type is None:
        src_label = tgt_label = "_"
    else:
        src_label = ce.se_type.source_label or "None"
        tgt_label = ce.se_type.target_label or "None"
    return {
        "sentence_index": str(ce.sentence_index),
        "edit_index": str(ce.edit_index),
        "kind": ce.kind.value,
        "scheme": str(ce.scheme),
        "source_label": src_label,
        "target_label": tgt_label,
        "src_rep_id": _cell(ce.source_rep),
        "tgt_rep_id": _cell(ce.target_rep),
        "external_type": _cell(ce.external_type),
    }


def parse_report_row(cols: Sequence[str]) -> ClassifiedEdit:
    """Inverse of report_row on a split TSV line."""
    if len(cols) != len(REPORT_COLUMNS):
        raise ValueError(f"expected {len(REPORT_COLUMNS)} columns, got {len(cols)}")
    sidx, eidx, kind, scheme, sl, tl, sr, tr, ext = cols

    def label(x):
        return None if x == "None" else x

    se_type = None if sl == "_" else SEType(label(sl), label(tl))
    return ClassifiedEdit(
        int(sidx), int(eidx), Kind(kind), Scheme.parse(scheme), se_type,
        None if sr == "_" else int(sr), None if tr == "_" else int(tr),
        None if ext == "_" else ext,
    )
