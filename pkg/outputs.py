import logging
import os
import tempfile
from typing import Callable

import pandas as pd

logger = logging.getLogger(__name__)


def atomic_write(path: str, writer: Callable[[str], None]) -> str:
    """
    Write a file through a temporary sibling and rename it into place.

    Args:
        path: Final destination
        writer: Callable that writes the full content to the path it is given

    Returns:
        The destination path
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    suffix = os.path.splitext(path)[1]
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=suffix)
    os.close(fd)
    try:
        writer(tmp_path)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug("Wrote %s", path)
    return path


def write_text(path: str, text: str) -> str:
    """Atomically write a text file with newline-delimited content"""
    def _write(tmp_path: str) -> None:
        with open(tmp_path, "w", newline="\n") as f:
            f.write(text)

    return atomic_write(path, _write)


def write_frame(path: str, frame: pd.DataFrame) -> str:
    """Atomically write a DataFrame as CSV (header row, no index, '.' decimals)"""
    return write_text(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.17g"))
