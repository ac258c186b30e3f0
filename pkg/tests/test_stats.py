import io
import math
import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synerr.classify import (
    DEPREL, UPOS, ClassifiedEdit, CorpusBundle, Kind, Scheme, SEType, classify_corpus,
    report_row,
)
from synerr.conllu import UPOS_TAGS
from synerr.edits import read_m2
from synerr.stats import (
    OTHER, ConfusionMatrix, DegenerateTable, MissingLevelTag, MixedSchemes, ZeroVariance,
    build_matrix, chi_squared, compare_distributions, cramers_v, entropy_effective,
    format_matrix, joint_counts, levels_matrix, levels_table, levels_table_from_matrices,
    merge, pearson, read_count_table, read_matrix, recall_bound, se_counts, se_frequencies,
    taxonomy_overlap, tie_rate, unchanged_fraction,
)

import corpus
from conftest import FIXTURES


def load_matrix(name, scheme=UPOS, universe=True):
    with open(FIXTURES / name) as f:
        return read_matrix(f, scheme, universe)


def random_edit(rng, i, scheme=UPOS):
    labels = list(UPOS_TAGS[:6]) + ["WEIRD"]
    kind = rng.choice(list(Kind))
    s = None if kind is Kind.ADDITION else rng.choice(labels)
    t = None if kind is Kind.DELETION else rng.choice(labels)
    return ClassifiedEdit(i, 0, kind, scheme, SEType(s, t), None, None, rng.choice(["M:DET", "R:OTHER"]))


def tally_report_text(text, kinds):
    """Oracle: count (source, target) cells straight from report TSV lines."""
    out = Counter()
    for line in text.splitlines():
        cols = line.split("\t")
        if cols[2] not in kinds:
            continue
        s, t = (None if c == "None" else c if c in UPOS_TAGS else OTHER for c in cols[4:6])
        out[(s, t)] += 1
    return out


def test_build_matrix_examples(corpus_bundle):
    m = build_matrix(classify_corpus(corpus_bundle, UPOS))
    assert m[("ADJ", "ADV")] == 1
    assert m[("DET", None)] == 1
    assert m[(None, "DET")] == 1
    assert m[("VERB", "VERB")] == 3
    assert m.total() == len(corpus.expected_rows())
    reps = build_matrix(classify_corpus(corpus_bundle, UPOS), kinds={Kind.REPLACEMENT})
    assert reps[("DET", None)] == 0 and reps[("ADJ", "ADV")] == 1


def test_build_matrix_excludes_and_mixes(corpus_bundle):
    m = build_matrix(classify_corpus(corpus_bundle, UPOS), exclude_labels={"DET"})
    assert m[("DET", None)] == 0 and m[("PRON", "DET")] == 0
    with pytest.raises(MixedSchemes):
        build_matrix(classify_corpus(corpus_bundle, UPOS) + classify_corpus(corpus_bundle, DEPREL))


def test_build_matrix_matches_report_text_tally():
    rng = random.Random(200)
    edits = [random_edit(rng, i) for i in range(200)]
    text = "\n".join("\t".join(report_row(e).values()) for e in edits)
    for kinds in ({"Addition", "Deletion", "Replacement"}, {"Replacement"}):
        m = build_matrix(edits, kinds={Kind(k) for k in kinds})
        assert Counter({k: v for k, v in m.counts.items() if v}) == tally_report_text(text, kinds)


def test_unknown_labels_bucketed_only_for_closed_universe():
    closed = ConfusionMatrix.empty(UPOS)
    closed.add("WEIRD", "NOUN")
    assert closed[(OTHER, "NOUN")] == 1
    opened = ConfusionMatrix.empty(DEPREL)
    opened.add("weird", "obj")
    assert opened[("weird", "obj")] == 1
    assert opened.labels() == ["obj", "weird", None, OTHER]


def test_unchanged_fraction_fixture_cells():
    assert unchanged_fraction(load_matrix("wi_level_A.tsv"))["SCONJ"] == pytest.approx(0.804, abs=1e-3)
    assert unchanged_fraction(load_matrix("wi_level_N.tsv"))["PUNCT"] == pytest.approx(0.981, abs=1e-3)


def test_se_counts_match_off_diagonal_sums():
    m = load_matrix("uedin_ms_dev.tsv")
    arr = m.to_array()
    labels = m.labels()
    counts = se_counts(m)
    for i, l in enumerate(labels):
        if l is None or arr[i].sum() == 0:
            continue
        assert counts[l] == arr[i].sum() - arr[i, i]
    assert counts["ADJ"] == 283


def test_recall_bound_fixture():
    rb = recall_bound(load_matrix("uedin_se_counts.tsv"), load_matrix("gold_se_counts.tsv"))
    r = rb.ratios()
    assert r["CCONJ"] == pytest.approx(71 / 158)
    assert (rb.system_total, rb.gold_total) == (2686, 4790)
    assert rb.overall == pytest.approx(0.561, abs=1e-3)
    assert [x.ratio for x in rb.rows] == sorted(x.ratio for x in rb.rows)


def test_recall_bound_small():
    sys_m, gold = ConfusionMatrix.empty(), ConfusionMatrix.empty()
    sys_m.add("ADJ", "ADV", 1)
    sys_m.add(None, "DET", 5)
    gold.add("ADJ", "ADV", 3)
    gold.add("ADJ", "ADJ", 9)
    gold.add("NOUN", None, 2)
    gold.add(None, "DET", 7)
    rb = recall_bound(sys_m, gold)
    assert rb.ratios() == {"ADJ": 1 / 3, "NOUN": 0.0}
    assert rb.overall == pytest.approx(1 / 5)
    assert recall_bound(sys_m, gold, exclude_labels={"NOUN"}).overall == pytest.approx(1 / 3)


V_TABLE = [[8, 1, 1], [2, 6, 2], [1, 1, 8]]


def test_cramers_v_frozen_value():
    assert chi_squared(V_TABLE) == pytest.approx(963 / 44, abs=1e-12)
    assert cramers_v(V_TABLE) == pytest.approx(0.6039641771435846, abs=1e-12)


def test_cramers_v_agrees_with_scipy():
    stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(5)
    for _ in range(50):
        t = rng.integers(1, 50, size=(rng.integers(2, 6), rng.integers(2, 6)))
        chi2 = stats.chi2_contingency(t, correction=False)[0]
        assert chi_squared(t) == pytest.approx(chi2, rel=1e-9)


def test_cramers_v_invariances():
    rng = np.random.default_rng(9)
    for _ in range(100):
        t = rng.integers(0, 30, size=(rng.integers(2, 7), rng.integers(2, 7)))
        t[0, 0] += 1
        t[1, 1] += 1
        v = cramers_v(t)
        assert 0.0 <= v <= 1.0
        assert cramers_v(t.T) == pytest.approx(v, abs=1e-9)
        assert cramers_v(t * 7) == pytest.approx(v, abs=1e-9)
        p = rng.permutation(t.shape[0])
        assert cramers_v(t[p]) == pytest.approx(v, abs=1e-9)
        # empty rows and columns do not change the statistic
        padded = np.zeros((t.shape[0] + 1, t.shape[1] + 1), dtype=int)
        padded[:-1, :-1] = t
        assert cramers_v(padded) == pytest.approx(v, abs=1e-9)


def test_cramers_v_extremes_and_degenerate():
    assert cramers_v(np.diag([5, 3, 9])) == pytest.approx(1.0)
    assert cramers_v(np.outer([1, 2, 3], [4, 5])) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DegenerateTable):
        cramers_v([[3, 4]])
    with pytest.raises(DegenerateTable):
        cramers_v([[3, 0], [0, 0]])


def test_cramers_v_of_matrix_uses_nonzero_labels():
    m = ConfusionMatrix.empty()
    for (s, t), n in {("ADJ", "ADJ"): 8, ("ADJ", "ADV"): 1, ("ADV", "ADV"): 6, ("ADV", "ADJ"): 2}.items():
        m.add(s, t, n)
    assert cramers_v(m) == pytest.approx(cramers_v([[8, 1], [2, 6]]))


def pearson_fraction(x, y):
    """Exact oracle up to a single final square root."""
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return float(cov) / math.sqrt(float(vx * vy))


def test_pearson_against_fraction_oracle():
    rng = random.Random(17)
    for _ in range(100):
        n = rng.randint(2, 20)
        a = {f"L{i}": rng.randint(0, 100) / 100 for i in range(n)}
        b = {f"L{i}": rng.randint(0, 100) / 100 for i in range(n)}
        if len(set(a.values())) < 2 or len(set(b.values())) < 2:
            continue
        got = pearson(a, b)
        labels = sorted(a)
        assert got.r == pytest.approx(pearson_fraction([a[l] for l in labels], [b[l] for l in labels]), abs=1e-12)
        assert got.mean_abs_diff == pytest.approx(sum(abs(a[l] - b[l]) for l in labels) / n, abs=1e-12)


def test_pearson_signs_and_missing_labels():
    a = {"x": 1.0, "y": 2.0, "z": 3.0}
    assert pearson(a, {k: 2 * v + 1 for k, v in a.items()}).r == pytest.approx(1.0, abs=1e-12)
    assert pearson(a, {k: -v for k, v in a.items()}).r == pytest.approx(-1.0, abs=1e-12)
    c = pearson({"x": 1.0, "y": 0.0}, {"x": 1.0, "z": 1.0})
    assert c.labels == ("x", "y", "z")
    with pytest.raises(ZeroVariance):
        pearson({"x": 1.0, "y": 1.0}, {"x": 0.0, "y": 1.0})


def test_se_frequencies_and_compare():
    a, b = ConfusionMatrix.empty(), ConfusionMatrix.empty()
    for m, k in ((a, 1), (b, 2)):
        m.add("ADJ", "ADJ", 9 * k)
        m.add("ADJ", "ADV", 1 * k)
        m.add("NOUN", "NOUN", 6 * k)
        m.add("NOUN", "VERB", 4 * k)
        m.add("DET", None, 2 * k)
    assert se_frequencies(a, "tokens") == {"ADJ": 0.1, "NOUN": 0.4, "DET": 1.0}
    assert se_frequencies(a, "ses") == {"ADJ": 1 / 7, "NOUN": 4 / 7, "DET": 2 / 7}
    cmp = compare_distributions(a, b)
    assert cmp["tokens"].r == pytest.approx(1.0) and cmp["ses"].r == pytest.approx(1.0)
    assert cmp["ses"].mean_abs_diff == pytest.approx(0.0)
    with pytest.raises(ValueError):
        se_frequencies(a, "words")


def test_entropy():
    h, eff = entropy_effective({"a": 5})
    assert h == 0.0 and eff == 1.0
    for k in (1, 2, 7, 64):
        h, eff = entropy_effective({i: 3 for i in range(k)})
        assert h == pytest.approx(math.log(k), abs=1e-12)
        assert eff == pytest.approx(k, abs=1e-9)
    assert entropy_effective({"a": 1, "b": 0})[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        entropy_effective({})


def load_joint():
    with open(FIXTURES / "nucle_joint.tsv") as f:
        _, _, counts = read_count_table(f)
    return counts


def test_taxonomy_overlap_fixture_rows():
    ov = taxonomy_overlap(load_joint())
    rows = {r.se_type: r for r in ov.rows}
    assert rows["None->DET"].max_frac == pytest.approx(0.958950014, abs=1e-6)
    assert rows["None->DET"].top3_frac == pytest.approx(0.9757051103, abs=1e-6)
    assert rows["None->DET"].best == "ArtOrDet"
    assert rows["CCONJ->ADV"].max_frac == pytest.approx(0.9482758621, abs=1e-6)
    assert [r.max_frac for r in ov.rows] == sorted((r.max_frac for r in ov.rows), reverse=True)


def test_taxonomy_overlap_min_count_and_ties():
    joint = {("A->B", "x"): 20, ("A->B", "y"): 20, ("C->D", "z"): 10}
    ov = taxonomy_overlap(joint, min_count=30)
    assert [r.se_type for r in ov.kept] == ["A->B"]
    assert ov.kept[0].best == "x"
    assert ov.mean_max_frac == pytest.approx(0.5)
    assert ov.mean_top3_frac == pytest.approx(1.0)
    assert math.isnan(taxonomy_overlap(joint, min_count=100).mean_max_frac)


def test_joint_counts_and_tie_rate(corpus_bundle):
    edits = classify_corpus(corpus_bundle, UPOS)
    joint = joint_counts(edits)
    assert joint[("ADJ->ADV", "R:OTHER")] == 1
    assert joint[("DET->None", "U:DET")] == 1
    assert sum(joint.values()) == len(edits)
    assert tie_rate(edits) == pytest.approx(sum(e.tied for e in edits) / len(edits))
    assert tie_rate([]) == 0.0


def test_merge_is_a_commutative_monoid():
    rng = random.Random(1)
    ms = []
    for _ in range(3):
        m = ConfusionMatrix.empty()
        for _ in range(20):
            e = random_edit(rng, 0)
            m.add(e.se_type.source_label, e.se_type.target_label)
        ms.append(m)
    a, b, c = ms
    e = ConfusionMatrix.empty()
    assert merge(a, e) == a
    assert merge(a, b) == merge(b, a)
    assert merge(merge(a, b), c) == merge(a, merge(b, c))
    with pytest.raises(MixedSchemes):
        merge(a, ConfusionMatrix.empty(DEPREL))


def test_sharded_fold_equals_whole():
    rng = random.Random(5)
    edits = [random_edit(rng, i) for i in range(300)]
    whole = build_matrix(edits)
    acc = ConfusionMatrix.empty()
    for k in range(5):
        acc = merge(acc, build_matrix(edits[k::5]))
    assert acc == whole


def _bundle(cases, tag=None):
    return CorpusBundle(
        tuple(read_m2(io.StringIO(corpus.m2_text(cases)))),
        tuple(corpus.parse_rows(c["src"]) for c in cases),
        tuple(corpus.parse_rows(c["cor"]) for c in cases),
        tag,
    )


def test_levels_matrix_counts_untouched_tokens():
    m = levels_matrix(_bundle([corpus.CASES[3]]))
    assert m[("ADJ", "ADV")] == 1
    assert m[("PRON", "PRON")] == 3
    assert m[("VERB", "VERB")] == 2
    assert m.total() == 10


def test_levels_single_bundle_without_edits_is_all_unchanged():
    t = levels_table([_bundle([corpus.CASES[18]], "A")])
    assert t.levels == ("A",)
    assert all(v == 1.0 for _, fracs in t.rows for v in fracs.values())


def test_levels_monotone_two_levels():
    # the weaker level gets the verb fix, the stronger level copies the source untouched
    weak = _bundle([corpus.CASES[14]], "A")
    strong = _bundle([dict(corpus.CASES[18]), dict(corpus.CASES[18])], "B")
    t = levels_table([weak, strong], native_levels=())
    assert t.get("VERB", "A") == pytest.approx(0.0)
    assert t.get("VERB", "B") == pytest.approx(1.0)
    assert t.rows[0][0] == "VERB"


def test_levels_missing_tag():
    with pytest.raises(MissingLevelTag):
        levels_table([_bundle([corpus.CASES[18]])])


def test_levels_from_fixture_matrices():
    mats = {lv: load_matrix(f"wi_level_{lv}.tsv") for lv in "ABCN"}
    t = levels_table_from_matrices(mats)
    with open(FIXTURES / "wi_levels_printed.tsv") as f:
        lines = [l.rstrip("\n").split("\t") for l in f if l.strip()]
    header = lines[0][1:]
    for row in lines[1:]:
        for lv, cell in zip(header, row[1:]):
            assert t.get(row[0], lv) == pytest.approx(float(cell), abs=1e-3)


def test_matrix_tsv_round_trip():
    rng = random.Random(8)
    for scheme, universe in ((UPOS, True), (DEPREL, True), (Scheme.parse("feature:Case"), True)):
        m = ConfusionMatrix.empty(scheme, universe)
        for _ in range(50):
            e = random_edit(rng, 0)
            m.add(e.se_type.source_label, e.se_type.target_label)
        text = format_matrix(m)
        back = read_matrix(io.StringIO(text), scheme, universe)
        assert back == m
        assert format_matrix(back) == text


def test_read_count_table_errors():
    with pytest.raises(ValueError):
        read_count_table(["\tA\tB", "X\t1"])
    with pytest.raises(ValueError):
        read_count_table(["\tA", "X\tq"])
    assert read_count_table([]) == ([], [], {})


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(list(UPOS_TAGS) + [None, "zzz"]),
                          st.sampled_from(list(UPOS_TAGS) + [None]),
                          st.integers(0, 5)), max_size=40))
def test_matrix_total_is_sum_of_adds(cells):
    m = ConfusionMatrix.empty()
    for s, t, n in cells:
        m.add(s, t, n)
    assert m.total() == sum(n for _, _, n in cells)
    assert int(m.to_array().sum()) == m.total()


def test_levels_row_order_matches_learner_mean_oracle():
    fracs = {}
    for lv in "ABC":
        rows = [l.rstrip("\n").split("\t") for l in (FIXTURES / f"wi_level_{lv}.tsv").read_text().splitlines()]
        cols = rows[0][1:]
        arr = np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=float)
        for i, r in enumerate(rows[1:]):
            if arr[i].sum():
                fracs.setdefault(r[0], []).append(arr[i, cols.index(r[0])] / arr[i].sum())
    expected = sorted(fracs, key=lambda l: (np.mean(fracs[l]), l))
    t = levels_table_from_matrices({lv: load_matrix(f"wi_level_{lv}.tsv") for lv in "ABCN"})
    assert [label for label, _ in t.rows] == expected
