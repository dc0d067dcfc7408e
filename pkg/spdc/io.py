"""
Artifact writers: CSV tables, JSON summaries and SVG line plots.

Every write goes to a temporary file next to the target and is then
moved into place with ``os.replace``.
"""
import json
import logging
import os
import tempfile
from collections.abc import Callable, Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any, Optional, overload

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np
import pandas as pd

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
CSV_FLOAT_FORMAT = "%.10g"


__all__ = [
    "SCHEMA_VERSION", "ArrayEncoder", "atomic_write", "write_csv",
    "write_json", "write_svg",
]


# JSON serializer class to handle numpy arrays, numpy scalars and paths
class ArrayEncoder(json.JSONEncoder):
    @overload
    def default(self, o: np.ndarray) -> list[Any]:
        ...

    @overload
    def default(self, o: Any) -> Any:
        ...

    def default(self, o: np.ndarray | Any) -> list[Any] | Any:
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, Path):
            return str(o)
        if isinstance(o, (set, frozenset)):
            return sorted(o)
        return super().default(o)


def atomic_write(
    path: str | os.PathLike,
    write: Callable[[IO], None],
    binary: bool = False
) -> Path:
    """
    Call `write` with a temporary file handle, then move the file onto
    `path`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb" if binary else "w", newline=None if binary else "") as f:
            write(f)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.remove(temp)
        raise
    LOGGER.info("Wrote %s", path)
    return path


def write_csv(frame: pd.DataFrame, path: str | os.PathLike) -> Path:
    return atomic_write(
        path,
        lambda f: frame.to_csv(
            f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        ),
    )


def write_json(
    document: dict,
    path: str | os.PathLike,
    schema_version: str = SCHEMA_VERSION
) -> Path:
    """
    Write `document` with ``schema_version`` and ``created`` stamped in.
    """
    stamped = {
        "schema_version": schema_version,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **document,
    }

    def dump(f: IO) -> None:
        json.dump(stamped, f, cls=ArrayEncoder, indent=2, sort_keys=False)
        f.write("\n")

    return atomic_write(path, dump)


def write_svg(
    path: str | os.PathLike,
    x: np.ndarray,
    series: dict[str, np.ndarray] | Sequence[np.ndarray],
    xlabel: str = "",
    ylabel: str = "",
    title: Optional[str] = None
) -> Path:
    """
    Line plot of one or more series against `x`.
    """
    if not isinstance(series, dict):
        series = {f"series {i}": y for i, y in enumerate(series)}
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for label, y in series.items():
            ax.plot(x, y, label=label, linewidth=1.0)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        return atomic_write(
            path,
            lambda f: fig.savefig(f, format="svg", metadata={"Date": None}),
            binary=True,
        )
    finally:
        plt.close(fig)
