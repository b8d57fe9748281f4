"""Covariance functions.

Matérn kernels with automatic relevance determination over emission inputs,
the physics-propagated thermal and temperature Gram matrices, the
internal-variability covariances (long-time and exact forms) and the
forcing-to-temperature cross covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from . import ebm
from .errors import DimensionMismatch

KERNEL_FAMILIES = ("matern12", "matern32")

SQRT3 = np.sqrt(3.0)


@dataclass
class KernelConfig:
    """Matérn kernel configuration with one lengthscale per input dimension."""

    family: str
    lengthscales: np.ndarray
    variance: float
    standardize_inputs: bool = True

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family '{self.family}'")
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if np.any(self.lengthscales <= 0):
            raise ValueError("lengthscales must be positive")
        if self.variance <= 0:
            raise ValueError("variance must be positive")

    @property
    def n_dims(self) -> int:
        return self.lengthscales.size


@dataclass
class GramMatrix:
    """Symmetric covariance matrix plus the jitter to add before factorization."""

    values: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("Gram matrix must be square")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def regularized(self) -> np.ndarray:
        return self.values + self.jitter * np.eye(self.n)

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of the jittered matrix."""
        return cholesky(self.regularized(), lower=True)


def _scaled_distance(x: np.ndarray, y: np.ndarray, config: KernelConfig) -> float:
    dx = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) / config.lengthscales
    return float(np.sqrt(np.sum(dx * dx)))


def matern(x: np.ndarray, y: np.ndarray, config: KernelConfig) -> float:
    """Evaluate the ARD Matérn kernel between two input vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.size != y.size or x.size != config.n_dims:
        raise DimensionMismatch(
            f"inputs of size {x.size} and {y.size} for {config.n_dims} lengthscales"
        )
    r = _scaled_distance(x, y, config)
    if config.family == "matern12":
        return config.variance * np.exp(-r)
    u = SQRT3 * r
    return config.variance * (1.0 + u) * np.exp(-u)


def _sq_diffs(xa: np.ndarray, xb: np.ndarray, config: KernelConfig) -> np.ndarray:
    """Per-dimension squared scaled differences, shape (d, n, m)."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    if xa.shape[1] != xb.shape[1]:
        raise DimensionMismatch(
            f"input matrices have {xa.shape[1]} and {xb.shape[1]} columns"
        )
    if xa.shape[1] != config.n_dims:
        raise DimensionMismatch(
            f"{xa.shape[1]} input dimensions for {config.n_dims} lengthscales"
        )
    diff = xa[:, None, :] - xb[None, :, :]
    return np.moveaxis((diff / config.lengthscales) ** 2, -1, 0)


def forcing_gram(xa: np.ndarray, xb: np.ndarray, config: KernelConfig) -> np.ndarray:
    """Kernel matrix between two sets of emission input rows."""
    sq = _sq_diffs(xa, xb, config)
    r = np.sqrt(np.sum(sq, axis=0))
    if config.family == "matern12":
        return config.variance * np.exp(-r)
    u = SQRT3 * r
    return config.variance * (1.0 + u) * np.exp(-u)


def forcing_gram_gradients(
    x: np.ndarray, config: KernelConfig
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """Kernel matrix over one input set plus its log-parameter derivatives.

    Returns (K, [dK/dlog lengthscale_chi ...], dK/dlog variance).  Used by the
    marginal-likelihood optimizer; derivatives are with respect to the log of
    each positive hyperparameter.
    """
    sq = _sq_diffs(x, x, config)
    r = np.sqrt(np.sum(sq, axis=0))
    v = config.variance
    if config.family == "matern12":
        k = v * np.exp(-r)
        # dK/dlog l = K * sq_chi / r, with the r -> 0 diagonal limit of zero
        safe_r = np.where(r > 0, r, 1.0)
        grads = [np.where(r > 0, k * sq[c] / safe_r, 0.0) for c in range(config.n_dims)]
    else:
        e = np.exp(-SQRT3 * r)
        k = v * (1.0 + SQRT3 * r) * e
        grads = [3.0 * v * e * sq[c] for c in range(config.n_dims)]
    return k, grads, k.copy()


def thermal_cross_gram(k: np.ndarray, op_i: np.ndarray, op_j: np.ndarray) -> np.ndarray:
    """Covariance between two mode responses: op_i K op_j^T."""
    k = np.asarray(k, dtype=float)
    if op_i.shape[1] != k.shape[0] or op_j.shape[1] != k.shape[1]:
        raise DimensionMismatch(
            f"operators {op_i.shape}, {op_j.shape} do not conform with kernel {k.shape}"
        )
    return op_i @ k @ op_j.T


def temperature_gram(
    k: np.ndarray, impulse: ebm.ImpulseParams, grid: ebm.TimeGrid
) -> np.ndarray:
    """Temperature covariance L K L^T with L the summed mode operator."""
    op = ebm.temperature_operator(impulse, grid)
    return thermal_cross_gram(k, op, op)


def forcing_temperature_cross_gram(
    k_block: np.ndarray, impulse: ebm.ImpulseParams, grid: ebm.TimeGrid
) -> np.ndarray:
    """Cross covariance Cov(F(t), T(t')): forcing kernel rows against K L^T columns."""
    k_block = np.asarray(k_block, dtype=float)
    if k_block.ndim != 2 or k_block.shape[1] != grid.n_steps:
        raise DimensionMismatch(
            f"kernel block {k_block.shape} does not conform with grid of {grid.n_steps} steps"
        )
    op = ebm.temperature_operator(impulse, grid)
    return k_block @ op.T


def variability_weights(impulse: ebm.ImpulseParams) -> np.ndarray:
    """Dimensionless mode weights folding the cross terms of the noise
    responses into a per-mode sum: nu_i = sum_j 2 d_i q_j / (q_i (d_i + d_j))."""
    d = impulse.timescales
    q = impulse.equilibrium_responses
    return np.array(
        [2.0 * d[i] * np.sum(q / (d[i] + d)) / q[i] for i in range(impulse.n_boxes)]
    )


def internal_variability_gram(
    impulse: ebm.ImpulseParams, grid: ebm.TimeGrid, mode: str = "long_time"
) -> np.ndarray:
    """Internal-variability covariance on the grid, without the sigma^2 factor.

    "long_time": stationary form, sum_i nu_i (q_i^2 / 2 d_i) exp(-|t-t'| / d_i).
    "exact": full covariance of the noise responses started from rest at the
    grid start, including the transient correction term; converges to the
    long-time form once both times are large against every timescale.
    """
    d = impulse.timescales
    q = impulse.equilibrium_responses
    t = grid.response_times()
    if mode == "long_time":
        nu = variability_weights(impulse)
        lag = np.abs(t[:, None] - t[None, :])
        gram = np.zeros((grid.n_steps, grid.n_steps))
        for i in range(impulse.n_boxes):
            gram += nu[i] * (q[i] ** 2 / (2.0 * d[i])) * np.exp(-lag / d[i])
        return gram
    if mode == "exact":
        ti = t[:, None]
        tj = t[None, :]
        lag = np.abs(ti - tj)
        gram = np.zeros((grid.n_steps, grid.n_steps))
        for i in range(impulse.n_boxes):
            for j in range(impulse.n_boxes):
                # For t <= t' the lag decays on d_i, otherwise on d_j; the
                # second exponential is the start-from-rest transient.
                stationary = np.where(
                    ti <= tj, np.exp(-lag / d[i]), np.exp(-lag / d[j])
                )
                transient = np.exp(-ti / d[i] - tj / d[j])
                gram += q[i] * q[j] / (d[i] + d[j]) * (stationary - transient)
        return gram
    raise ValueError(f"unknown variability mode '{mode}'")
