"""CSV and portable-graymap writers."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

__all__ = ["CSV_HEADER", "emit_csv", "format_float", "variance_to_gray", "write_pgm"]

CSV_HEADER = (
    "scenario", "estimator", "sweep_param", "sweep_value", "trials", "mean", "variance",
    "mse", "std_error", "mean_cost", "efficiency", "reference_T",
)


def format_float(x: float | None) -> str:
    if x is None:
        return ""
    return "%.17g" % x


def _sort_key(row):
    v = row.sweep_value
    return (row.scenario, row.estimator, -math.inf if v is None else v)


def emit_csv(rows, path) -> Path:
    """Write summary rows; adds an ``oracle_variance`` column when any row has one."""
    path = Path(path)
    rows = sorted(rows, key=_sort_key)
    with_oracle = any(r.oracle_variance is not None for r in rows)
    header = CSV_HEADER + (("oracle_variance",) if with_oracle else ())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                s = r.stats
                line = [r.scenario, r.estimator, r.sweep_param, format_float(r.sweep_value),
                        str(s.trials)]
                line += [format_float(x) for x in (s.mean, s.variance, s.mse, s.std_error,
                                                    s.mean_cost, s.efficiency, r.reference_T)]
                if with_oracle:
                    line.append(format_float(r.oracle_variance))
                w.writerow(line)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV {path}: {exc.strerror}") from exc
    return path


def variance_to_gray(image: np.ndarray, lo: float = -8.0, hi: float = 0.0) -> np.ndarray:
    """Map log10 variance in ``[lo, hi]`` linearly to 0..255 (zero variance is black)."""
    img = np.asarray(image, dtype=float)
    with np.errstate(divide="ignore"):
        logv = np.log10(np.maximum(img, 0.0))
    g = np.clip((logv - lo) / (hi - lo), 0.0, 1.0)
    return np.round(g * 255.0).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> Path:
    """Binary (P5) graymap of an 8-bit image, or of a variance image via :func:`variance_to_gray`."""
    path = Path(path)
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    if img.dtype != np.uint8:
        img = variance_to_gray(img)
    h, w = img.shape
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(np.ascontiguousarray(img).tobytes())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write image {path}: {exc.strerror}") from exc
    return path
