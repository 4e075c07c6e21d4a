"""
File formats shared by the library and the CLI.

Series file    one term per line: `index  coord:value coord:value ...`
Gradient file  header `d N`, then N lines of d whitespace-separated decimals
Frame file     header `d M`, then M lines of d whitespace-separated decimals
Trace export   JSON lines, one object per step
Checkpoints    CSV with a header row
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from convergence.errors import InvalidParameterError, ShapeError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _content_lines(path: PathLike) -> List[Tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InvalidParameterError(f"Cannot read {path}: {e}")
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line))
    return out


def read_series_file(path: PathLike) -> Dict[int, Dict[int, str]]:
    """
    Parse a series file into raw (unconverted) entries.

    Args:
        path: File with lines `index coord:value ...`

    Returns:
        Mapping term index -> {coordinate: value string}

    Raises:
        InvalidParameterError: On malformed lines, indices < 1 or duplicates
    """
    terms: Dict[int, Dict[int, str]] = {}
    for lineno, line in _content_lines(path):
        head, *pairs = line.split()
        try:
            index = int(head)
            entries = {}
            for pair in pairs:
                coord, value = pair.split(":", 1)
                entries[int(coord)] = value
        except ValueError:
            raise InvalidParameterError(f"{path}:{lineno}: expected `index coord:value ...`, got {line!r}")
        if index < 1 or any(c < 1 for c in entries):
            raise InvalidParameterError(f"{path}:{lineno}: indices and coordinates start at 1")
        if index in terms:
            raise InvalidParameterError(f"{path}:{lineno}: duplicate term index {index}")
        terms[index] = entries
    logger.info(f"Loaded {len(terms)} series terms from {path}")
    return terms


def _read_matrix(path: PathLike, kind: str) -> List[List[str]]:
    lines = _content_lines(path)
    if not lines:
        raise InvalidParameterError(f"{path}: empty {kind} file")
    try:
        width, count = (int(x) for x in lines[0][1].split())
    except ValueError:
        raise InvalidParameterError(f"{path}: header must be two integers, got {lines[0][1]!r}")
    rows = [line.split() for _, line in lines[1:]]
    if len(rows) != count:
        raise ShapeError(f"{path}: header declares {count} rows, found {len(rows)}")
    for (lineno, _), row in zip(lines[1:], rows):
        if len(row) != width:
            raise ShapeError(f"{path}:{lineno}: expected {width} values, got {len(row)}")
    return rows


def read_gradient_file(path: PathLike) -> List[List[float]]:
    """Gradient stream: header `d N`, then N rows of d decimals."""
    try:
        return [[float(x) for x in row] for row in _read_matrix(path, "gradient")]
    except ValueError as e:
        raise InvalidParameterError(f"{path}: {e}")


def read_frame_file(path: PathLike) -> List[List[float]]:
    """Frame: header `d M`, then M rows of d decimals."""
    try:
        return [[float(x) for x in row] for row in _read_matrix(path, "frame")]
    except ValueError as e:
        raise InvalidParameterError(f"{path}: {e}")


def write_matrix_file(path: PathLike, rows: Sequence[Sequence[float]]) -> None:
    """Write rows in the `d N` header format (used for gradients and frames)."""
    width = len(rows[0]) if rows else 0
    with open(path, "w") as fh:
        fh.write(f"{width} {len(rows)}\n")
        for row in rows:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def write_json_lines(path: PathLike, records: Iterable[Mapping]) -> int:
    count = 0
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count


def write_csv(path_or_handle, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV table to a path or an open text handle."""
    if hasattr(path_or_handle, "write"):
        writer = csv.writer(path_or_handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path_or_handle, "w", newline="") as fh:
        write_csv(fh, header, rows)
