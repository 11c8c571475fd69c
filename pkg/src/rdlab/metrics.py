"""Rate-distortion curves, Bjontegaard deltas and Pearson correlation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RDCurve",
    "RDPoint",
    "bd_psnr",
    "bd_rate",
    "pearson",
    "read_rd_csv",
    "format_rd_csv",
]


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    psnr: float
    mse: float = float("nan")


@dataclass(frozen=True)
class RDCurve:
    """RD samples kept sorted by ascending bpp."""

    points: tuple[RDPoint, ...]
    label: str = ""

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.bpp))
        if len(pts) < 2:
            raise ValueError(f"an RD curve needs at least 2 points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_arrays(cls, bpp: Iterable[float], psnr: Iterable[float], label: str = "") -> "RDCurve":
        return cls(tuple(RDPoint(float(r), float(q)) for r, q in zip(bpp, psnr)), label)

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnr(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])


def _check_curve(curve: RDCurve, name: str) -> tuple[np.ndarray, np.ndarray]:
    rate, quality = curve.bpp, curve.psnr
    if len(rate) < 4:
        raise ValueError(f"{name} curve has {len(rate)} points, BD metrics need at least 4")
    if np.any(rate <= 0) or not np.all(np.isfinite(quality)):
        raise ValueError(f"{name} curve needs positive rates and finite PSNR values")
    if np.any(np.diff(rate) <= 0) or np.any(np.diff(quality) <= 0):
        raise ValueError(f"{name} curve is not strictly monotone in both rate and PSNR")
    return np.log10(rate), quality


def _cubic_integral(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    """Integral over [lo, hi] of the least-squares cubic through (x, y).

    Normal equations are solved on an axis centered at mean(x) and scaled by
    its spread, which keeps the system well conditioned at 30-45 dB.
    """
    center = float(np.mean(x))
    scale = float(np.max(np.abs(x - center))) or 1.0
    t = (x - center) / scale
    V = np.vander(t, 4, increasing=True)
    coef = np.linalg.solve(V.T @ V, V.T @ y)
    # antiderivative in t, rescaled to x
    ta, tb = (lo - center) / scale, (hi - center) / scale
    anti = lambda u: sum(c * u ** (k + 1) / (k + 1) for k, c in enumerate(coef))
    return (anti(tb) - anti(ta)) * scale


def _pchip_integral(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    from scipy.interpolate import PchipInterpolator

    return float(PchipInterpolator(x, y).integrate(lo, hi))


def _avg_delta(xa, ya, xb, yb, pchip: bool) -> float:
    lo = max(xa.min(), xb.min())
    hi = min(xa.max(), xb.max())
    if not hi > lo:
        raise ValueError(f"curves do not overlap (interval [{lo}, {hi}] is empty)")
    integrate = _pchip_integral if pchip else _cubic_integral
    return (integrate(xb, yb, lo, hi) - integrate(xa, ya, lo, hi)) / (hi - lo)


def bd_log_rate_delta(anchor: RDCurve, test: RDCurve, pchip: bool = False) -> float:
    """Mean log10-rate difference (test minus anchor) over the shared PSNR range."""
    la, qa = _check_curve(anchor, "anchor")
    lt, qt = _check_curve(test, "test")
    return _avg_delta(qa, la, qt, lt, pchip)


def bd_rate(anchor: RDCurve, test: RDCurve, pchip: bool = False) -> float:
    """Bjontegaard delta rate in percent; negative means the test curve saves rate."""
    return (10.0 ** bd_log_rate_delta(anchor, test, pchip) - 1.0) * 100.0


def bd_psnr(anchor: RDCurve, test: RDCurve, pchip: bool = False) -> float:
    """Mean PSNR gain of ``test`` over ``anchor`` in dB across the shared log-rate range."""
    la, qa = _check_curve(anchor, "anchor")
    lt, qt = _check_curve(test, "test")
    return _avg_delta(la, qa, lt, qt, pchip)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("pearson needs at least 2 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for zero-variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def read_rd_csv(path_or_text, label: str = "") -> RDCurve:
    """Read a ``bpp,psnr`` CSV (extra columns are ignored)."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, newline="") as f:
            text = f.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"bpp", "psnr"} <= set(reader.fieldnames):
        raise ValueError("RD CSV needs a 'bpp,psnr' header")
    pts = [RDPoint(float(row["bpp"]), float(row["psnr"])) for row in reader]
    return RDCurve(tuple(pts), label)


def format_rd_csv(curve: RDCurve) -> str:
    lines = ["bpp,psnr"]
    lines += [f"{p.bpp:.6f},{p.psnr:.6f}" for p in curve.points]
    return "\n".join(lines) + "\n"
