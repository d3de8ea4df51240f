"""Tabular export of experiment records."""

import logging
from typing import Sequence

import pandas as pd

from fusionchain.core.pipeline import RECORD_FIELDS, ExperimentRecord
from fusionchain.utils.file_utils import resolve_output_path

logger = logging.getLogger(__name__)


def records_to_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    """One row per record, columns in ``ExperimentRecord`` field order."""
    frame = pd.DataFrame([r.to_dict() for r in records], columns=RECORD_FIELDS)
    return frame.astype({"seed": "Int64"})


def write_records(records: Sequence[ExperimentRecord], path: str, as_json: bool = False) -> str:
    """Write records as CSV (or a JSON array of row objects).

    Returns:
        Absolute path of the written file.
    """
    destination = resolve_output_path(path, (".json",) if as_json else (".csv",))
    frame = records_to_frame(records)
    if as_json:
        frame.to_json(destination, orient="records", indent=2)
    else:
        frame.to_csv(destination, index=False)
    logger.info(f"Wrote {len(frame)} rows to {destination}")
    return str(destination.absolute())


def summarize(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    """Mean MFPT per (fusion type, strategy, p) over successful rows."""
    frame = records_to_frame(records)
    ok = frame[frame["error"] == ""]
    return ok.groupby(["fusion_type", "strategy", "p"], as_index=False)["mfpt"].mean()
