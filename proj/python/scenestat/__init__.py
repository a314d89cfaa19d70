"""Scene-graph corpus statistics, motif mining, frequency baselines and recall@K evaluation."""

from ._core import (
    Box,
    Dataset,
    FrequencyTable,
    InvariantError,
    PersistError,
    SchemaError,
    Vocab,
    boxes_overlap,
    build_frequency_table,
    evaluate,
    guess_curve,
    iou,
    load_dataset,
    load_frequency_table,
    mine_motifs,
    overlap_recall_ceiling,
    run_cli,
    union_box,
)

__all__ = [
    "Box",
    "Dataset",
    "FrequencyTable",
    "InvariantError",
    "PersistError",
    "SchemaError",
    "Vocab",
    "boxes_overlap",
    "build_frequency_table",
    "evaluate",
    "guess_curve",
    "iou",
    "load_dataset",
    "load_frequency_table",
    "mine_motifs",
    "overlap_recall_ceiling",
    "run_cli",
    "union_box",
]
