"""CoNLL-U reading/writing and dependency-tree utilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, TextIO

UPOS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)


class ConlluError(ValueError):
    pass


class MalformedLine(ConlluError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


class CycleDetected(ConlluError):
    pass


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: dict[str, str] = field(default_factory=dict)
    head: int = 0
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"token id must be >= 1, got {self.id}")
        if self.head < 0 or self.head == self.id:
            raise ValueError(f"bad head {self.head} for token {self.id}")

    def to_line(self) -> str:
        return "\t".join((
            str(self.id), self.form, self.lemma, self.upos, self.xpos,
            format_feats(self.feats), str(self.head), self.deprel, self.deps, self.misc,
        ))


@dataclass(frozen=True)
class Violation:
    kind: str  # MultipleRoots | NoRoot | DanglingHead | Cycle
    ids: tuple[int, ...] = ()

    def __str__(self):
        return f"{self.kind}({','.join(map(str, self.ids))})" if self.ids else self.kind


@dataclass(frozen=True)
class ParsedSentence:
    tokens: tuple[Token, ...]
    comments: tuple[str, ...] = ()

    def __post_init__(self):
        for i, tok in enumerate(self.tokens, start=1):
            if tok.id != i:
                raise ValueError(f"token ids must be 1..n in order; position {i} has id {tok.id}")

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def token(self, id: int) -> Token:
        return self.tokens[id - 1]

    def root(self) -> int | None:
        roots = [t.id for t in self.tokens if t.head == 0]
        return roots[0] if len(roots) == 1 else None

    @cached_property
    def _depths(self) -> tuple[int, ...]:
        n = len(self.tokens)
        depths = [0] * (n + 1)
        for tok in self.tokens:
            if depths[tok.id]:
                continue
            path = []
            cur = tok.id
            while cur != 0 and not depths[cur]:
                path.append(cur)
                if len(path) > n:
                    raise CycleDetected(f"cycle through token {tok.id}")
                head = self.tokens[cur - 1].head
                if head > n:
                    raise ConlluError(f"token {cur} has dangling head {head}")
                cur = head
            base = depths[cur]
            for k, t in enumerate(reversed(path), start=1):
                depths[t] = base + k
        return tuple(depths)

    def depth(self, id: int) -> int:
        """Number of head hops from token ``id`` to the virtual root (the root token has depth 1)."""
        if not 1 <= id <= len(self.tokens):
            raise IndexError(f"no token {id}")
        return self._depths[id]

    def to_conllu(self) -> str:
        lines = list(self.comments) + [t.to_line() for t in self.tokens]
        return "\n".join(lines) + "\n\n"


def depth(sentence: ParsedSentence, id: int) -> int:
    return sentence.depth(id)


def parse_feats(text: str) -> dict[str, str]:
    if text == "_" or text == "":
        return {}
    feats = {}
    for pair in text.split("|"):
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise ValueError(f"bad feature {pair!r}")
        if name in feats:
            raise ValueError(f"duplicate feature {name!r}")
        feats[name] = value
    return feats


def format_feats(feats: dict[str, str]) -> str:
    if not feats:
        return "_"
    return "|".join(f"{k}={feats[k]}" for k in sorted(feats, key=str.lower))


def _parse_token(cols: list[str], lineno: int) -> Token:
    try:
        id_, head = int(cols[0]), int(cols[6])
    except ValueError:
        raise MalformedLine(lineno, "non-integer ID or HEAD") from None
    upos = cols[3]
    if upos.islower():
        upos = upos.upper()
    try:
        return Token(id_, cols[1], cols[2], upos, cols[4], parse_feats(cols[5]),
                     head, cols[7], cols[8], cols[9])
    except ValueError as exc:
        raise MalformedLine(lineno, str(exc)) from None


def iter_conllu(lines: Iterable[str]) -> Iterator[ParsedSentence]:
    comments: list[str] = []
    tokens: list[Token] = []
    lineno = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if tokens:
                yield _build(tokens, comments, lineno)
            comments, tokens = [], []
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise MalformedLine(lineno, f"expected 10 columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        tokens.append(_parse_token(cols, lineno))
    if tokens:
        yield _build(tokens, comments, lineno)


def _build(tokens: list[Token], comments: list[str], lineno: int) -> ParsedSentence:
    try:
        return ParsedSentence(tuple(tokens), tuple(comments))
    except ValueError as exc:
        raise MalformedLine(lineno, str(exc)) from None


def read_conllu(stream: TextIO | Iterable[str]) -> list[ParsedSentence]:
    """Read every sentence from a CoNLL-U stream; multiword ranges and empty nodes are dropped."""
    return list(iter_conllu(stream))


def write_conllu(sentences: Iterable[ParsedSentence], stream: TextIO) -> None:
    for sent in sentences:
        stream.write(sent.to_conllu())


def validate_tree(sentence: ParsedSentence) -> list[Violation]:
    """Return tree violations; an empty list means the sentence is a single-rooted tree."""
    n = len(sentence)
    violations = []
    roots = [t.id for t in sentence.tokens if t.head == 0]
    if not roots:
        violations.append(Violation("NoRoot"))
    elif len(roots) > 1:
        violations.append(Violation("MultipleRoots", tuple(roots)))
    heads = {}
    for tok in sentence.tokens:
        if tok.head > n:
            violations.append(Violation("DanglingHead", (tok.id,)))
        else:
            heads[tok.id] = tok.head
    # every token either reaches 0 / a dangling head, or ends up on a cycle
    state = dict.fromkeys(heads, 0)  # 0 unseen, 1 on stack, 2 done
    for start in heads:
        path = []
        cur = start
        while cur in heads and state[cur] == 0:
            state[cur] = 1
            path.append(cur)
            cur = heads[cur]
        if cur in heads and state[cur] == 1:
            cycle = path[path.index(cur):]
            violations.append(Violation("Cycle", tuple(sorted(cycle))))
        for t in path:
            state[t] = 2
    return violations
