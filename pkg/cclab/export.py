"""Plot-ready CSV tables and JSON reports"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pathvalidate

from .conformal import ConformalFactor, sample_factor
from .convexity import ScanReport
from .fowler import FowlerTrajectory, PeriodRow
from .moving_planes import ReflectionField

LOGGER = logging.getLogger(__name__)


def generate_output_name(
    command: str, parameters: dict[str, Any], extension: str = "csv"
) -> str:
    """Programmatically generate a name for a command's output file

    Parameters
    ----------
    command : str
        The command that produced the output
    parameters : dict
        The parameters that distinguish this run, in the order they should
        appear in the name
    extension : str, optional
        The file extension. Default is "csv".

    Returns
    -------
    str
        A descriptive filename that is safe to use on any platform

    Examples
    --------
    >>> generate_output_name("fowler", {"n": 4, "epsilon": 0.5})
    'fowler_n=4_epsilon=0.5.csv'
    """
    stem = "_".join(
        [command, *(f"{key}={_format_value(value)}" for key, value in parameters.items())]
    )
    return pathvalidate.sanitize_filename(f"{stem}.{extension.lstrip('.')}")


def _format_value(value: Any) -> str:
    """Render a table entry, with floats to 17 significant digits"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def _open_for_writing(path: Path, overwrite: bool):
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} already exists")
    return path.open("w", encoding="utf-8", newline="")


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    overwrite: bool = False,
) -> Path:
    """Write a table as RFC-4180 CSV

    Parameters
    ----------
    path : Path
        The destination file
    header : list of str
        The column names
    rows : iterable of lists
        The rows, which must have as many entries as the header
    overwrite : bool, optional
        Replace an existing file. Default is False.

    Returns
    -------
    Path
        The file that was written

    Raises
    ------
    FileExistsError
        If the file already exists and `overwrite` is False
    ValueError
        If a row does not match the header
    """
    with _open_for_writing(path, overwrite) as file:
        writer = csv.writer(file)
        writer.writerow(header)
        count = 0
        for row in rows:
            if len(row) != len(header):
                raise ValueError(
                    f"Row {count} has {len(row)} entries but the header has {len(header)}"
                )
            writer.writerow([_format_value(value) for value in row])
            count += 1
    LOGGER.info("Wrote %d rows to %s", count, path)
    return Path(path)


def write_trajectory(
    trajectory: FowlerTrajectory, path: Path, overwrite: bool = False
) -> Path:
    """Export a sampled orbit as columns t, v, w, H"""
    rows = np.column_stack(
        (trajectory.t, trajectory.v, trajectory.w, trajectory.hamiltonian())
    )
    return write_csv(path, ("t", "v", "w", "H"), rows.tolist(), overwrite)


def write_factor_samples(
    factor: ConformalFactor, points: np.ndarray, path: Path, overwrite: bool = False
) -> Path:
    """Export a factor with its gradient and Laplacian at the given points"""
    n = factor.n
    header = (
        [f"x{i + 1}" for i in range(n)]
        + ["u"]
        + [f"du_dx{i + 1}" for i in range(n)]
        + ["laplacian"]
    )
    return write_csv(path, header, sample_factor(factor, points).tolist(), overwrite)


def write_reflection_field(
    field: ReflectionField, path: Path, overwrite: bool = False
) -> Path:
    """Export a reflection difference as columns x1..xn, w"""
    header = [f"x{i + 1}" for i in range(field.n)] + ["w"]
    rows = np.column_stack((field.points, field.w))
    return write_csv(path, header, rows.tolist(), overwrite)


def write_scan_rows(report: ScanReport, path: Path, overwrite: bool = False) -> Path:
    """Export a convexity scan with one row per ball"""
    header, rows = report.ball_rows()
    return write_csv(path, header, rows, overwrite)


def write_period_table(
    rows: Sequence[PeriodRow], path: Path, overwrite: bool = False
) -> Path:
    """Export a period table as columns fraction, epsilon, period"""
    return write_csv(path, PeriodRow._fields, [tuple(row) for row in rows], overwrite)


def _jsonable(value: Any) -> Any:
    """Convert numpy types to built-ins and non-finite floats to null"""
    if isinstance(value, dict):
        return {str(key): _jsonable(entry) for key, entry in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(entry) for entry in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def to_json(report: dict[str, Any]) -> str:
    """Serialize a report so that identical runs give identical text

    Keys are sorted and floats use their shortest round-trip representation.
    NaN and infinities are written as null.
    """
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, allow_nan=False)


def write_json(report: dict[str, Any], path: Path, overwrite: bool = False) -> Path:
    """Write a report as UTF-8 JSON (see `to_json`)"""
    with _open_for_writing(path, overwrite) as file:
        file.write(to_json(report) + "\n")
    LOGGER.info("Wrote %s", path)
    return Path(path)
