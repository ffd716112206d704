"""Deterministic CSV emission with a commented provenance header."""
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd

from shared.config import Config

logger = logging.getLogger(__name__)


def render_csv(frame: pd.DataFrame, header: Dict[str, Any]) -> str:
    """``# key: value`` lines followed by the table.

    Header values are written in insertion order; floats in the table use
    CSV_FLOAT_FORMAT and lines end with a bare newline.
    """
    lines = [f"# {key}: {value}\n" for key, value in header.items() if value is not None]
    body = frame.to_csv(index=False, lineterminator="\n", float_format=Config.CSV_FLOAT_FORMAT)
    return "".join(lines) + body


def write_csv(frame: pd.DataFrame, header: Dict[str, Any], out: Optional[Union[str, Path]] = None) -> str:
    """Write the CSV to ``out`` or stdout and return the text."""
    text = render_csv(frame, header)
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
        logger.info(f"Wrote {len(frame)} rows to {out}")
    return text
