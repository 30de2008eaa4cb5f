# -*- coding: utf-8 -*-
# Dataset ingestion and atomic writing of result files.
import io
import json
import logging
import os
import tempfile
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from infrastructure.errors import ConfigError, DataFormatError
from infrastructure.schemas import Dataset, to_builtin

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _read_csv(path: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise DataFormatError(f"{path}: no such file")
    try:
        return pd.read_csv(path)
    except pd.errors.ParserError as e:
        # pandas reports the offending line as "... in line N ..."
        raise DataFormatError(f"{path}: malformed CSV ({e})".strip())
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path}: file is empty")


def _numeric(frame: pd.DataFrame, path: str) -> np.ndarray:
    for column in frame.columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise DataFormatError(f"{path}: non-numeric or missing value in column {column!r} at line {row}")
    return frame.to_numpy(dtype=float)


def load_dataset(path: str) -> Dataset:
    """
    Reads a dataset CSV: header row, column ``y`` first, then ``x1..xp`` in
    order. The intercept is added here and never stored in the file.
    """
    frame = _read_csv(path)
    columns = [str(c).strip() for c in frame.columns]
    if not columns or columns[0] != "y":
        raise DataFormatError(f"{path}: first column must be 'y', got {columns[:1]}")
    expected = [f"x{j}" for j in range(1, len(columns))]
    if columns[1:] != expected:
        raise DataFormatError(f"{path}: covariate columns must be {expected[:3]}..., got {columns[1:4]}...")
    if len(frame) == 0:
        raise DataFormatError(f"{path}: no data rows")
    values = _numeric(frame, path)
    logger.info(f"loaded {path}: n={values.shape[0]}, p={values.shape[1] - 1}")
    return Dataset.from_covariates(values[:, 0], values[:, 1:])


def load_hypothesis(path: str, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """Hypothesis CSV with columns m0..m{p}, r; one row per restriction."""
    frame = _read_csv(path)
    columns = [str(c).strip() for c in frame.columns]
    expected = [f"m{j}" for j in range(q)] + ["r"]
    if columns != expected:
        raise ConfigError(f"{path}: hypothesis columns must be m0..m{q - 1}, r")
    values = _numeric(frame, path)
    return values[:, :q], values[:, q]


def load_json(path: str) -> Any:
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")


def frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def to_json(obj: Any) -> str:
    return json.dumps(to_builtin(obj), indent=2, sort_keys=True) + "\n"


class OutputBundle:
    """
    Result files of one command. Nothing touches the output directory until
    commit(), which writes every file to a temporary name and renames it in place.
    """

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: Dict[str, str] = {}

    def add_frame(self, name: str, frame: pd.DataFrame):
        self.files[name] = frame_to_csv(frame)

    def add_json(self, name: str, obj: Any):
        self.files[name] = to_json(obj)

    def commit(self) -> List[str]:
        os.makedirs(self.out_dir, exist_ok=True)
        staged = []
        try:
            for name, text in self.files.items():
                fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
                with os.fdopen(fd, "w", newline="") as f:
                    f.write(text)
                os.chmod(tmp, 0o644)
                staged.append((tmp, os.path.join(self.out_dir, name)))
        except OSError:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, final in staged:
            os.replace(tmp, final)
        written = [final for _, final in staged]
        logger.info(f"wrote {', '.join(os.path.basename(p) for p in written)} to {self.out_dir}")
        return written
