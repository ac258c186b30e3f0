"""Command-line front end: ``synerr classify|matrix|levels|recall|compare``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .classify import (
    ALL_KINDS, REPORT_COLUMNS, AlignmentError, CorpusBundle, Kind, Scheme,
    classify_corpus, parse_report_row, report_row,
)
from .conllu import ConlluError, read_conllu
from .edits import M2Error, read_m2
from .stats import (
    ConfusionMatrix, build_matrix, format_matrix, joint_counts, levels_matrix,
    levels_table_from_matrices, merge, read_count_table, read_matrix, recall_bound,
    taxonomy_overlap,
)

log = logging.getLogger("synerr")

EXIT_OK, EXIT_INPUT, EXIT_ALIGN = 0, 1, 2


class InputError(Exception):
    pass


def _csv(text: str | None) -> list[str]:
    return [x.strip() for x in (text or "").split(",") if x.strip()]


def _kinds(text: str | None, default=ALL_KINDS) -> frozenset[Kind]:
    if not text:
        return frozenset(default)
    try:
        return frozenset(Kind.parse(k) for k in _csv(text))
    except ValueError:
        raise InputError(f"bad --kinds value {text!r}") from None


def _open(path: str):
    return open(path, encoding="utf-8", newline="")


def load_bundles(args) -> list[CorpusBundle]:
    m2s, srcs, cors = args.m2 or [], args.src_conllu or [], args.cor_conllu or []
    if not (len(m2s) == len(srcs) == len(cors)) or not m2s:
        raise InputError("need matching --m2, --src-conllu and --cor-conllu paths")
    levels = args.level or []
    if levels and len(levels) != len(m2s):
        raise InputError("give one --level per input triple")
    bundles = []
    for k, (m2, src, cor) in enumerate(zip(m2s, srcs, cors)):
        with _open(m2) as f:
            sents = read_m2(f)
        with _open(src) as f:
            src_parses = read_conllu(f)
        with _open(cor) as f:
            cor_parses = read_conllu(f)
        if not (len(sents) == len(src_parses) == len(cor_parses)):
            raise InputError(
                f"{m2}: {len(sents)} M2 sentences, {len(src_parses)} source parses, "
                f"{len(cor_parses)} corrected parses")
        bundles.append(CorpusBundle(tuple(sents), tuple(src_parses), tuple(cor_parses),
                                    levels[k] if levels else None))
    return bundles


def _classify_all(args, bundles, scheme):
    edits, errors = [], []
    for k, b in enumerate(bundles):
        errs: list[AlignmentError] = []
        edits.extend(classify_corpus(b, scheme, args.annotator, errs))
        for e in errs:
            errors.append(f"input {k}: {e}")
    return edits, errors


def _report_alignment(errors: list[str]) -> int:
    for e in errors:
        print(f"alignment error: {e}", file=sys.stderr)
    return EXIT_ALIGN if errors else EXIT_OK


def _fmt3(x: float) -> str:
    return f"{x:.3f}"


def _fmt_frac(x: float) -> str:
    return f"{x:.10g}"


def _write_table(out: TextIO, fmt: str, key: str, columns: Sequence[str], rows: list[list[str]]):
    if fmt == "json":
        json.dump({key: [dict(zip(columns, r)) for r in rows]}, out, indent=1, ensure_ascii=False)
        out.write("\n")
    else:
        out.write("\t".join(columns) + "\n")
        for r in rows:
            out.write("\t".join(r) + "\n")


def cmd_classify(args, out: TextIO) -> int:
    bundles = load_bundles(args)
    edits, errors = _classify_all(args, bundles, args.scheme)
    kinds = _kinds(args.kinds)
    excluded = set(_csv(args.exclude_labels))
    rows = []
    for e in edits:
        if e.kind not in kinds:
            continue
        if e.se_type and {e.se_type.source_label, e.se_type.target_label} & excluded:
            continue
        rows.append(report_row(e))
    if args.format == "json":
        json.dump({"edits": rows}, out, indent=1, ensure_ascii=False)
        out.write("\n")
    else:
        for r in rows:
            out.write("\t".join(r[c] for c in REPORT_COLUMNS) + "\n")
    return _report_alignment(errors)


def _write_matrix(m: ConfusionMatrix, out: TextIO, fmt: str):
    text = format_matrix(m)
    if fmt != "json":
        out.write(text)
        return
    lines = [l.split("\t") for l in text.splitlines()]
    columns = lines[0][1:]
    rows = [{"label": r[0], "counts": [int(x) for x in r[1:]]} for r in lines[1:]]
    json.dump({"matrix": {"columns": columns, "rows": rows}}, out, indent=1, ensure_ascii=False)
    out.write("\n")


def cmd_matrix(args, out: TextIO) -> int:
    bundles = load_bundles(args)
    edits, errors = _classify_all(args, bundles, args.scheme)
    m = build_matrix(edits, _kinds(args.kinds), _csv(args.exclude_labels), scheme=args.scheme)
    _write_matrix(m, out, args.format)
    return _report_alignment(errors)


def _read_matrix_file(path: str, scheme: Scheme) -> ConfusionMatrix:
    with _open(path) as f:
        return read_matrix(f, scheme)


def cmd_levels(args, out: TextIO) -> int:
    levels = args.level or []
    errors: list[str] = []
    pairs = []
    if args.matrix:
        if len(levels) != len(args.matrix):
            raise InputError("give one --level per --matrix")
        pairs = [(lv, _read_matrix_file(p, args.scheme)) for lv, p in zip(levels, args.matrix)]
    else:
        bundles = load_bundles(args)
        kinds = _kinds(args.kinds, default={Kind.REPLACEMENT})
        for k, b in enumerate(bundles):
            if not b.level_tag:
                raise InputError(f"input {k} has no --level tag")
            errs: list[AlignmentError] = []
            pairs.append((b.level_tag, levels_matrix(b, args.scheme, args.annotator, kinds, errors=errs)))
            errors.extend(f"input {k}: {e}" for e in errs)
    table = levels_table_from_matrices(pairs, _csv(args.native_levels), _csv(args.exclude_labels))
    columns = ["label", *table.levels]
    rows = [[label] + [_fmt3(fr[lv]) if lv in fr else "_" for lv in table.levels]
            for label, fr in table.rows]
    _write_table(out, args.format, "levels", columns, rows)
    return _report_alignment(errors)


def cmd_recall(args, out: TextIO) -> int:
    if not args.gold or not args.matrix:
        raise InputError("recall needs --gold and at least one --matrix")
    gold = _read_matrix_file(args.gold, args.scheme)
    names = args.level or []
    if names and len(names) != len(args.matrix):
        raise InputError("give one --level (system name) per --matrix")
    systems: dict[str, ConfusionMatrix] = {}
    for k, path in enumerate(args.matrix):
        name = names[k] if names else Path(path).stem
        m = _read_matrix_file(path, args.scheme)
        systems[name] = merge(systems[name], m) if name in systems else m
    columns = ["label", "system", "system_count", "gold_count", "ratio"]
    rows = []
    for name, m in systems.items():
        rb = recall_bound(m, gold, _csv(args.exclude_labels))
        rows += [[r.label, name, str(r.system), str(r.gold), _fmt3(r.ratio)] for r in rb.rows]
        rows.append(["Overall", name, str(rb.system_total), str(rb.gold_total), _fmt3(rb.overall)])
    _write_table(out, args.format, "recall", columns, rows)
    return EXIT_OK


def _read_report(path: str):
    edits = []
    with _open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            try:
                edits.append(parse_report_row(line.split("\t")))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return edits


def cmd_compare(args, out: TextIO) -> int:
    errors: list[str] = []
    if args.joint:
        with _open(args.joint) as f:
            _, _, joint = read_count_table(f)
        excluded = set(_csv(args.exclude_labels))
        if excluded:
            joint = {k: n for k, n in joint.items()
                     if not set(k[0].split("->")) & excluded}
    else:
        if args.report:
            edits = _read_report(args.report)
        else:
            edits, errors = _classify_all(args, load_bundles(args), args.scheme)
        joint = joint_counts(edits, _kinds(args.kinds), _csv(args.exclude_labels))
    overlap = taxonomy_overlap(joint, args.min_count)
    columns = ["se_type", "best_external", "max", "2nd", "3rd", "total", "max/sum", "top3/sum"]
    rows = []
    for r in overlap.kept:
        top = [str(n) for n in r.top] + ["0"] * (3 - len(r.top))
        rows.append([r.se_type, r.best, *top, str(r.total), _fmt_frac(r.max_frac), _fmt_frac(r.top3_frac)])
    if overlap.kept:
        rows.append(["MEAN", "_", "_", "_", "_", str(len(overlap.kept)),
                     _fmt_frac(overlap.mean_max_frac), _fmt_frac(overlap.mean_top3_frac)])
    _write_table(out, args.format, "overlap", columns, rows)
    return _report_alignment(errors)


COMMANDS = {
    "classify": cmd_classify,
    "matrix": cmd_matrix,
    "levels": cmd_levels,
    "recall": cmd_recall,
    "compare": cmd_compare,
}


def _scheme(text: str) -> Scheme:
    try:
        return Scheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", type=_scheme, default=Scheme("upos"),
                        help="upos, deprel or feature:<Name>[:<UPOS>] (default: upos)")
    common.add_argument("--annotator", type=int, default=0, help="M2 annotator id (default: 0)")
    common.add_argument("--kinds", help="comma-separated subset of add,del,rep")
    common.add_argument("--exclude-labels", default="", help="labels to drop, e.g. PUNCT,SYM,X,INTJ")
    common.add_argument("--format", choices=("tsv", "json"), default="tsv")
    common.add_argument("--min-count", type=int, default=30,
                        help="compare: minimum SE type frequency (default: 30)")
    common.add_argument("--level", action="append", help="level tag / system name, one per input")
    common.add_argument("--m2", action="append", help="M2 edit file")
    common.add_argument("--src-conllu", action="append", help="CoNLL-U parses of the source sentences")
    common.add_argument("--cor-conllu", action="append", help="CoNLL-U parses of the corrected sentences")
    common.add_argument("--matrix", action="append", help="matrix TSV file")
    common.add_argument("-o", "--output", help="write data here instead of stdout")

    parser = argparse.ArgumentParser(prog="synerr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="one TSV line per merged edit")
    sub.add_parser("matrix", parents=[common], help="confusion matrix of SE types")
    p = sub.add_parser("levels", parents=[common], help="unchanged-label fractions per level")
    p.add_argument("--native-levels", default="N", help="levels left out of the row ordering (default: N)")
    p = sub.add_parser("recall", parents=[common], help="recall upper bound of systems against gold")
    p.add_argument("--gold", help="gold matrix TSV")
    p = sub.add_parser("compare", parents=[common], help="overlap of SE types with an external taxonomy")
    p.add_argument("--report", help="per-edit report written by `classify`")
    p.add_argument("--joint", help="joint count table: SE types (rows) x external types (columns)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    out = open(args.output, "w", encoding="utf-8", newline="") if args.output else sys.stdout
    try:
        return COMMANDS[args.command](args, out)
    except (InputError, ConlluError, M2Error, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if args.output:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
