"""
Deterministic CSV export.

Every cell is rendered to text before pandas writes the frame, so the bytes on
disk depend only on the values: fixed notation, 10 significant digits, '.'
decimal separator, LF line endings, empty cell for a missing value.
"""
import json
import logging
import math
import os
from datetime import datetime
from numbers import Integral, Real
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 10


def format_number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        x = float(value)
        if math.isnan(x):
            return ""
        if x == 0.0:
            x = 0.0  # drop the sign of -0.0
        return np.format_float_positional(
            x, precision=SIGNIFICANT_DIGITS, unique=False, fractional=False, trim="-"
        )
    return str(value)


class ResultsWriter:
    """Render tables to CSV text and write them, with an optional metadata sidecar"""

    def __init__(self, output_path: str):
        self.output_path = output_path

    @staticmethod
    def to_csv_text(frame: pd.DataFrame) -> str:
        rendered = frame.astype(object).apply(lambda column: column.map(format_number))
        return rendered.to_csv(index=False, lineterminator="\n")

    def save_table(self, frame: pd.DataFrame, metadata: Optional[Dict[str, Any]] = None) -> str:
        """Write the CSV; metadata (timestamps, seed, command) goes to <output>.meta.json"""
        try:
            directory = os.path.dirname(os.path.abspath(self.output_path))
            os.makedirs(directory, exist_ok=True)
            with open(self.output_path, "w", encoding="utf-8", newline="") as f:
                f.write(self.to_csv_text(frame))

            if metadata is not None:
                sidecar = {"written_at": datetime.now().isoformat(), "rows": len(frame), **metadata}
                with open(self.metadata_path, "w", encoding="utf-8") as f:
                    json.dump(sidecar, f, indent=2, ensure_ascii=False, default=str)

            logger.info(f"💾 CSV saved to: {self.output_path} ({len(frame)} rows)")
            return self.output_path

        except OSError as e:
            logger.error(f"❌ Failed to write results: {e}")
            raise

    @property
    def metadata_path(self) -> str:
        return f"{self.output_path}.meta.json"

    @property
    def log_directory(self) -> str:
        return os.path.join(os.path.dirname(os.path.abspath(self.output_path)), "logs")
