"""Deterministic and probabilistic evaluation scores.

Probabilistic scores evaluate the marginal (per-point) predictive Gaussians:
the reported log-likelihood is the mean per-point log-density, which keeps
values comparable across series lengths.  The joint log-density of a full
posterior is available separately via ``inference.predictive_log_density``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import GridMismatch, LengthMismatch, NonPositiveVariance
from .scenario import SpatialGrid
from .spatial import area_weighted_mean

# Two-sided 95% normal quantile used for credible intervals everywhere.
Z95 = 1.959964

SCORE_FIELDS = ("rmse", "mae", "bias", "log_likelihood", "calib95", "crps")


@dataclass
class ScoreReport:
    """Flat bundle of scores; fields are None when not applicable."""

    rmse: float | None = None
    mae: float | None = None
    bias: float | None = None
    log_likelihood: float | None = None
    calib95: float | None = None
    crps: float | None = None

    def csv_values(self) -> list[str]:
        return [
            "" if getattr(self, name) is None else repr(float(getattr(self, name)))
            for name in SCORE_FIELDS
        ]

    @classmethod
    def from_csv_values(cls, values: list[str]) -> "ScoreReport":
        if len(values) != len(SCORE_FIELDS):
            raise LengthMismatch(
                f"expected {len(SCORE_FIELDS)} score fields, got {len(values)}"
            )
        kwargs = {
            name: (float(text) if text.strip() else None)
            for name, text in zip(SCORE_FIELDS, values)
        }
        return cls(**kwargs)

    def to_table(self) -> str:
        lines = []
        for name in SCORE_FIELDS:
            value = getattr(self, name)
            shown = "-" if value is None else f"{value:.6f}"
            lines.append(f"{name:>14}  {shown}")
        return "\n".join(lines)


def deterministic_scores(prediction: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """(rmse, mae, bias) of a point prediction against the ground truth."""
    prediction = np.atleast_1d(np.asarray(prediction, dtype=float))
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    if prediction.size != truth.size or prediction.size == 0:
        raise LengthMismatch(
            f"prediction has {prediction.size} points, truth has {truth.size}"
        )
    err = prediction - truth
    return (
        float(np.sqrt(np.mean(err**2))),
        float(np.mean(np.abs(err))),
        float(np.mean(err)),
    )


def _phi(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)


def gaussian_crps(mean: np.ndarray, std: np.ndarray, value: np.ndarray) -> np.ndarray:
    """Closed-form CRPS of Gaussian forecasts, elementwise.

    Degenerate forecasts (std == 0) reduce to the absolute error.
    """
    mean, std, value = np.broadcast_arrays(
        np.atleast_1d(np.asarray(mean, dtype=float)),
        np.atleast_1d(np.asarray(std, dtype=float)),
        np.atleast_1d(np.asarray(value, dtype=float)),
    )
    out = np.abs(value - mean)
    positive = std > 0
    if np.any(positive):
        z = (value[positive] - mean[positive]) / std[positive]
        out = out.copy()
        out[positive] = std[positive] * (
            z * (2.0 * ndtr(z) - 1.0) + 2.0 * _phi(z) - 1.0 / np.sqrt(np.pi)
        )
    return out


def probabilistic_scores(
    mean: np.ndarray, variance: np.ndarray, truth: np.ndarray
) -> tuple[float, float, float]:
    """(mean per-point log-likelihood, calib95, mean CRPS) of marginal
    Gaussian predictions.

    Zero variances are permitted: the calibration check then counts exact
    hits, CRPS degrades to absolute error and the log-likelihood diverges.
    Negative variances raise NonPositiveVariance.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    variance = np.atleast_1d(np.asarray(variance, dtype=float))
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    if not (mean.size == variance.size == truth.size) or mean.size == 0:
        raise LengthMismatch(
            f"sizes differ: mean {mean.size}, variance {variance.size}, truth {truth.size}"
        )
    if np.any(variance < 0):
        raise NonPositiveVariance("negative predictive variance")
    std = np.sqrt(variance)

    with np.errstate(divide="ignore"):
        log_density = -0.5 * (
            np.log(2.0 * np.pi) + np.log(variance) + (truth - mean) ** 2 / np.where(variance > 0, variance, 1.0)
        )
    log_density = np.where(variance > 0, log_density, np.where(truth == mean, np.inf, -np.inf))
    calib = float(np.mean(np.abs(truth - mean) <= Z95 * std))
    crps = float(np.mean(gaussian_crps(mean, std, truth)))
    with np.errstate(invalid="ignore"):
        mean_ll = float(np.mean(log_density))
    return mean_ll, calib, crps


def spatial_scores(reports: list[list[ScoreReport]], grid: SpatialGrid) -> ScoreReport:
    """Aggregate per-cell reports with cos-latitude area weights.

    A score is aggregated only when every cell provides it.
    """
    n_lat, n_lon = grid.shape
    if len(reports) != n_lat or any(len(row) != n_lon for row in reports):
        raise GridMismatch(
            f"reports have shape ({len(reports)}, ...), grid is {grid.shape}"
        )
    aggregated = {}
    for name in SCORE_FIELDS:
        values = np.array(
            [
                [np.nan if getattr(reports[i][j], name) is None else getattr(reports[i][j], name)
                 for j in range(n_lon)]
                for i in range(n_lat)
            ]
        )
        if np.any(np.isnan(values)):
            aggregated[name] = None
        else:
            aggregated[name] = area_weighted_mean(values, grid)
    return ScoreReport(**aggregated)
