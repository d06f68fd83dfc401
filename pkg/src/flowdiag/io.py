from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pandas as pd

from .errors import OutputError

FLOAT_FORMAT = "%.17g"


def parquet_supported() -> bool:
    try:
        import pyarrow  # noqa: F401
    except Exception:
        return False
    return True


def read_tabular(path: Path) -> pd.DataFrame:
    if path.suffix.lower() == ".parquet":
        return pd.read_parquet(path)
    return pd.read_csv(path, float_precision="round_trip")


def write_tabular(df: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".parquet":
        if not parquet_supported():
            raise OutputError(f"cannot write {path}: parquet output requires optional dependency 'pyarrow'")
        df.to_parquet(path, index=False)
        return
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def dumps_report(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_report(report: dict[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report), encoding="utf-8")


def read_report(path: Path) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
