from __future__ import annotations

import random
from collections import deque
from pathlib import Path

import pytest

from synerr.conllu import ParsedSentence, Token
from synerr.classify import CorpusBundle
from synerr.conllu import read_conllu
from synerr.edits import read_m2

import corpus

FIXTURES = Path(__file__).parent / "fixtures"


def random_tree(rng: random.Random, n: int) -> ParsedSentence:
    """Uniformly shuffled attachment order: each token hangs off an earlier-attached one."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    heads = {order[0]: 0}
    for k in range(1, n):
        heads[order[k]] = order[rng.randrange(k)]
    upos = ("NOUN", "VERB", "ADJ", "DET", "ADP", "PRON")
    return ParsedSentence(tuple(
        Token(i, f"w{i}", f"w{i}", rng.choice(upos), "_", {}, heads[i], rng.choice(("obj", "nsubj", "amod")))
        for i in range(1, n + 1)
    ))


def bfs_depths(sentence: ParsedSentence) -> dict[int, int]:
    children: dict[int, list[int]] = {0: []}
    for t in sentence.tokens:
        children.setdefault(t.head, []).append(t.id)
    depths = {0: 0}
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for child in children.get(node, []):
            depths[child] = depths[node] + 1
            queue.append(child)
    del depths[0]
    return depths


@pytest.fixture
def corpus_files(tmp_path):
    return corpus.write_corpus(tmp_path / "corpus")


@pytest.fixture
def corpus_bundle(corpus_files):
    m2, src, cor = corpus_files
    with open(m2) as a, open(src) as b, open(cor) as c:
        return CorpusBundle(tuple(read_m2(a)), tuple(read_conllu(b)), tuple(read_conllu(c)))


@pytest.fixture
def adj_adv_bundle():
    case = corpus.CASES[3]
    return CorpusBundle(
        tuple(read_m2(corpus.m2_text([case]).splitlines(True))),
        (corpus.parse_rows(case["src"]),),
        (corpus.parse_rows(case["cor"]),),
    )
