"""Classify grammatical-error-correction edits into syntactic-error types over UD parses."""

from .classify import (
    DEPREL, UPOS, ClassifiedEdit, CorpusBundle, Kind, Scheme, SEType,
    classify, classify_corpus, label_of, representative,
)
from .conllu import ParsedSentence, Token, depth, read_conllu, validate_tree, write_conllu
from .edits import Edit, EditedSentence, apply_edits, merge_overlapping, read_m2, select_annotator
from .stats import (
    ConfusionMatrix, build_matrix, cramers_v, entropy_effective, levels_table,
    levels_table_from_matrices, merge, pearson, read_matrix, recall_bound,
    taxonomy_overlap, unchanged_fraction, write_matrix,
)

__version__ = "0.1.0"
