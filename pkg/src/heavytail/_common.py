"""Shared plumbing: verdicts, ratio reports and limit detection on grids."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


def combine(verdicts) -> Verdict:
    """Fail dominates inconclusive, which dominates pass."""
    verdicts = list(verdicts)
    if any(v == Verdict.FAIL for v in verdicts):
        return Verdict.FAIL
    if any(v == Verdict.INCONCLUSIVE for v in verdicts):
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


def geometric_grid(x0: float, j_max: int = 40, base: float = 2.0) -> np.ndarray:
    """Grid x0 * base**j for j = 0..j_max."""
    return x0 * base ** np.arange(j_max + 1, dtype=float)


def settled(values, tol: float, count: int = 3) -> bool:
    """True when the last `count` values agree pairwise to relative tolerance `tol`."""
    v = np.asarray(values, dtype=float)[-count:]
    if v.size < count or not np.all(np.isfinite(v)):
        return False
    scale = np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
    scale = np.where(scale == 0, 1.0, scale)
    return bool(np.all(np.abs(np.diff(v)) <= tol * scale))


def limit_verdict(values, target: float, tol: float, count: int = 3) -> Verdict:
    """Judge whether a sequence evaluated along a growing grid tends to `target`.

    pass: the last `count` values are all within `tol` of the target.
    fail: the last `count` values are outside the band and the distance to
    the target is not shrinking.
    inconclusive: anything else, since a limit at infinity cannot be
    refuted at finite x.
    """
    v = np.asarray(values, dtype=float)
    if v.size < count:
        return Verdict.INCONCLUSIVE
    tail = v[-count:]
    scale = max(abs(target), 1.0) if target != 0 else 1.0
    dist = np.abs(tail - target) / scale
    if not np.all(np.isfinite(dist)):
        return Verdict.FAIL if np.any(np.isinf(tail)) else Verdict.INCONCLUSIVE
    if np.all(dist <= tol):
        return Verdict.PASS
    if np.all(dist > tol) and np.all(np.diff(dist) >= -1e-12 * (1 + dist[:-1])):
        return Verdict.FAIL
    return Verdict.INCONCLUSIVE


@dataclass
class RatioReport:
    """Ratio of a computed quantity to its asymptotic target along a grid."""

    x: np.ndarray
    value: np.ndarray
    target: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        self.target = np.broadcast_to(np.asarray(self.target, dtype=float), self.x.shape).copy()

    @property
    def relative_error(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.value - self.target) / np.abs(self.target)

    def converged(self, tol: float = 1e-2) -> bool:
        """Three successive ratios agree to `tol`."""
        return settled(self.value, tol)

    def verdict(self, tol: float = 1e-2) -> Verdict:
        return limit_verdict(self.value, float(self.target[-1]), tol)

    def rows(self):
        return [
            (float(a), float(b), float(c), float(d))
            for a, b, c, d in zip(self.x, self.value, self.target, self.relative_error)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "value", "target", "relative_error"])
        for row in self.rows():
            writer.writerow([format_float(v) for v in row])
        return buf.getvalue()


def format_float(v: float) -> str:
    """17 significant digits; non-finite values spelled as inf/-inf/nan."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


class IntegrationError(RuntimeError):
    """Numeric integral failed or diverged."""


class HeavyTailDomainError(ValueError):
    """Argument outside the domain of an operation."""
