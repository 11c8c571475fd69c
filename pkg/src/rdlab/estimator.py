"""scikit-learn estimator interface to the power-law fits."""

from __future__ import annotations

from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .scaling import ScalePoint, evaluate_fit, fit_power_law, fit_power_law_floor

__all__ = ["PowerLawRegressor"]


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_power_law` / :func:`fit_power_law_floor`.

    ``X`` holds a single positive feature (model size or compute) and ``y``
    the positive losses.
    """

    def __init__(self, with_floor: bool = False, grid_size: int = 512, refine_factor: int = 10):
        self.with_floor = with_floor
        self.grid_size = grid_size
        self.refine_factor = refine_factor

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        pts = [ScalePoint(float(a), float(b)) for a, b in zip(X[:, 0], y)]
        if self.with_floor:
            self.fit_ = fit_power_law_floor(pts, self.grid_size, self.refine_factor)
        else:
            self.fit_ = fit_power_law(pts)
        self.gamma_ = self.fit_.gamma
        self.alpha_exp_ = self.fit_.alpha_exp
        self.floor_ = self.fit_.floor or 0.0
        self.pearson_r_ = self.fit_.pearson_r
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        return evaluate_fit(self.fit_, X[:, 0])
