"""Power-law scaling fits, compute-optimal frontiers and forecasts.

Model sizes are expressed in billions of parameters and training compute in
PFLOPs (1e15 floating point operations).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np

from .metrics import pearson

__all__ = [
    "ForecastReport",
    "PowerLawFit",
    "ScalePoint",
    "TrainingCurve",
    "compute_pflops",
    "evaluate_fit",
    "fit_power_law",
    "fit_power_law_floor",
    "forecast_report",
    "pareto_frontier",
    "read_points_csv",
    "read_training_log",
]


@dataclass(frozen=True)
class ScalePoint:
    x: float
    loss: float

    def __post_init__(self):
        if not (self.x > 0 and self.loss > 0):
            raise ValueError(f"scale points must be strictly positive, got ({self.x}, {self.loss})")


@dataclass(frozen=True)
class PowerLawFit:
    """``loss(x) = floor + gamma * x ** -alpha_exp`` (floor absent means 0)."""

    gamma: float
    alpha_exp: float
    floor: float | None = None
    pearson_r: float = float("nan")
    n_points: int = 0


@dataclass(frozen=True)
class TrainingCurve:
    model_id: str
    n_params_billions: float
    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(c), float(l)) for c, l in self.samples)
        if not samples:
            raise ValueError(f"training curve {self.model_id!r} has no samples")
        if any(b[0] <= a[0] for a, b in zip(samples, samples[1:])):
            raise ValueError(f"compute must be strictly increasing in curve {self.model_id!r}")
        object.__setattr__(self, "samples", samples)

    def final_point(self) -> ScalePoint:
        return ScalePoint(self.n_params_billions, self.samples[-1][1])


def _as_points(points) -> list[ScalePoint]:
    return [p if isinstance(p, ScalePoint) else ScalePoint(*p) for p in points]


def _ols(lx: np.ndarray, ly: np.ndarray) -> tuple[float, float]:
    mx, my = lx.mean(), ly.mean()
    dx = lx - mx
    slope = float(dx @ (ly - my)) / float(dx @ dx)
    return slope, float(my - slope * mx)


def _safe_pearson(a: np.ndarray, b: np.ndarray) -> float:
    try:
        return pearson(a, b)
    except ValueError:
        return float("nan")


def fit_power_law(points: Sequence[ScalePoint], base: float = math.e) -> PowerLawFit:
    """Ordinary least squares of ``log loss`` on ``log x``.

    ``base`` only selects the logarithm used internally; the fitted
    coefficients do not depend on it.
    """
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError(f"need at least 2 points, got {len(pts)}")
    x = np.array([p.x for p in pts])
    y = np.array([p.loss for p in pts])
    if np.all(x == x[0]):
        raise ValueError("all x values are equal")
    lx = np.log(x) / math.log(base)
    ly = np.log(y) / math.log(base)
    slope, intercept = _ols(lx, ly)
    return PowerLawFit(base**intercept, -slope, None, _safe_pearson(lx, ly), len(pts))


def _r2_grid(lx: np.ndarray, y: np.ndarray, floors: np.ndarray) -> np.ndarray:
    ly = np.log(y[None, :] - floors[:, None])
    dx = lx - lx.mean()
    dy = ly - ly.mean(axis=1, keepdims=True)
    sxy = dy @ dx
    syy = np.einsum("ij,ij->i", dy, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = sxy**2 / (float(dx @ dx) * syy)
    return np.where(syy > 0, r2, -np.inf)


def fit_power_law_floor(
    points: Sequence[ScalePoint], grid_size: int = 512, refine_factor: int = 10
) -> PowerLawFit:
    """Fit ``floor + A * x ** -alpha`` by grid search over the floor.

    Every candidate floor gets an inner log-log OLS on ``loss - floor``; the
    one with the highest log-domain R^2 wins (lowest floor on ties), then the
    grid cells on either side are searched again ``refine_factor`` times finer.
    """
    pts = _as_points(points)
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points, got {len(pts)}")
    x = np.array([p.x for p in pts])
    y = np.array([p.loss for p in pts])
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("degenerate data: zero variance in x or loss")
    lx = np.log(x)
    upper = (1.0 - 1e-3) * float(y.min())

    floors = np.linspace(0.0, upper, grid_size)
    best = floors[int(np.argmax(_r2_grid(lx, y, floors)))]
    step = floors[1] - floors[0]
    fine = np.linspace(max(0.0, best - step), min(upper, best + step), 2 * refine_factor + 1)
    best = float(fine[int(np.argmax(_r2_grid(lx, y, fine)))])

    ly = np.log(y - best)
    slope, intercept = _ols(lx, ly)
    return PowerLawFit(math.exp(intercept), -slope, best, _safe_pearson(lx, ly), len(pts))


def evaluate_fit(fit: PowerLawFit, x):
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa <= 0):
        raise ValueError("x must be positive")
    out = (fit.floor or 0.0) + fit.gamma * xa ** (-fit.alpha_exp)
    return float(out) if out.ndim == 0 else out


def _running_min(samples: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    out, best = [], math.inf
    for c, l in samples:
        best = min(best, l)
        out.append((c, best))
    return out


def pareto_frontier(curves: Sequence[TrainingCurve]) -> list[ScalePoint]:
    """Compute-optimal envelope: points that lower the best loss seen so far."""
    if not curves:
        raise ValueError("no training curves")
    merged = sorted(
        (s for curve in curves for s in _running_min(curve.samples)),
        key=lambda s: (s[0], s[1]),
    )
    frontier, best = [], math.inf
    for c, l in merged:
        if l < best:
            frontier.append(ScalePoint(c, l))
            best = l
    return frontier


def compute_pflops(
    macs_per_pixel_k: float,
    pixels_per_sample: int = 256 * 256,
    batch: int = 32,
    steps: int = 1,
    backward_factor: float = 3.0,
) -> float:
    """Training compute in PFLOPs: 2 FLOPs per MAC, times ``backward_factor``
    for forward plus backward passes."""
    if min(macs_per_pixel_k, pixels_per_sample, batch, backward_factor) <= 0 or steps < 0:
        raise ValueError("compute inputs must be positive (steps may be zero)")
    return steps * batch * pixels_per_sample * (macs_per_pixel_k * 1e3) * 2.0 * backward_factor / 1e15


@dataclass(frozen=True)
class ForecastReport:
    size_fit: PowerLawFit
    compute_fit: PowerLawFit | None
    model_points: tuple[ScalePoint, ...]
    frontier: tuple[ScalePoint, ...]
    forecasts: tuple[tuple[float, float], ...] = field(default=())

    def to_dict(self) -> dict:
        def fit_dict(f):
            return None if f is None else {
                "gamma": f.gamma, "alpha_exp": f.alpha_exp, "floor": f.floor,
                "pearson_r": f.pearson_r, "n_points": f.n_points,
            }

        return {
            "size_fit": fit_dict(self.size_fit),
            "compute_fit": fit_dict(self.compute_fit),
            "model_points": [[p.x, p.loss] for p in self.model_points],
            "frontier": [[p.x, p.loss] for p in self.frontier],
            "forecasts": [list(f) for f in self.forecasts],
        }


def forecast_report(
    model_points: Sequence[ScalePoint],
    curves: Sequence[TrainingCurve] = (),
    targets: Iterable[float] = (),
    floor: bool = False,
) -> ForecastReport:
    """Fit loss against model size and against frontier compute, then
    evaluate the size law at each target size."""
    pts = _as_points(model_points)
    fitter = fit_power_law_floor if floor else fit_power_law
    size_fit = fitter(pts)
    frontier = pareto_frontier(curves) if curves else []
    compute_fit = fitter(frontier) if len(frontier) >= (4 if floor else 2) else None
    forecasts = tuple((float(t), evaluate_fit(size_fit, float(t))) for t in targets)
    return ForecastReport(size_fit, compute_fit, tuple(pts), tuple(frontier), forecasts)


def _read_text(path_or_text) -> str:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        return path_or_text
    with open(path_or_text, newline="") as f:
        return f.read()


def read_training_log(path_or_text) -> list[TrainingCurve]:
    """Read ``model_id,n_params_billions,compute_pflops,loss`` rows into curves.

    Rows are grouped by model in order of first appearance and sorted by
    compute within each model.
    """
    reader = csv.DictReader(io.StringIO(_read_text(path_or_text)))
    need = {"model_id", "n_params_billions", "compute_pflops", "loss"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValueError(f"training log needs columns {sorted(need)}")
    rows = list(reader)
    order = {}
    for r in rows:
        order.setdefault(r["model_id"], len(order))
    rows.sort(key=lambda r: order[r["model_id"]])
    curves = []
    for model_id, group in groupby(rows, key=lambda r: r["model_id"]):
        group = list(group)
        sizes = {float(r["n_params_billions"]) for r in group}
        if len(sizes) != 1:
            raise ValueError(f"model {model_id!r} lists several parameter counts")
        samples = sorted((float(r["compute_pflops"]), float(r["loss"])) for r in group)
        curves.append(TrainingCurve(model_id, sizes.pop(), tuple(samples)))
    return curves


def read_points_csv(path_or_text) -> list[ScalePoint]:
    """Read ``x,loss`` rows."""
    reader = csv.DictReader(io.StringIO(_read_text(path_or_text)))
    if reader.fieldnames is None or not {"x", "loss"} <= set(reader.fieldnames):
        raise ValueError("points CSV needs an 'x,loss' header")
    return [ScalePoint(float(r["x"]), float(r["loss"])) for r in reader]
