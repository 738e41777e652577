"""Bundled fixture data: the 10-pair query/label evaluation set."""

from importlib import resources
from pathlib import Path

EVAL_DATASET_NAME = "eval_table6.jsonl"


def default_eval_dataset_path() -> Path:
    """Filesystem path of the bundled evaluation dataset."""
    return Path(resources.files(__package__) / EVAL_DATASET_NAME)
