"""Independent brute-force verifiers for the analytical machinery.

Monte Carlo sampling of the forcing prior pushed through a fine-substep ODE
integrator, Euler-Maruyama simulation of the noise responses, direct
trapezoid quadrature of the covariance double integrals, a Monte Carlo CRPS
estimator and a central finite-difference gradient checker.

These routines back the test and acceptance suites and the ``verify`` CLI
command; production inference never calls them.  Everything is
deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ebm, kernels
from .ebm import BoxModelParams, ImpulseParams, TimeGrid
from .kernels import KernelConfig


def rk4_box_temperature(
    box: BoxModelParams, forcing: np.ndarray, grid: TimeGrid, substeps: int = 100
) -> np.ndarray:
    """Surface-box temperature from fine-step RK4 of the coupled box ODE.

    Forcing is held constant within each grid step; returns the surface
    temperature at the end of every step, starting from rest.
    """
    a = ebm.build_feedback_matrix(box)
    b = ebm.forcing_feedback_vector(box)
    h = grid.step / substeps
    state = np.zeros(box.n_boxes)
    out = np.empty(grid.n_steps)
    for step in range(grid.n_steps):
        drive = b * forcing[step]
        for _ in range(substeps):
            k1 = a @ state + drive
            k2 = a @ (state + 0.5 * h * k1) + drive
            k3 = a @ (state + 0.5 * h * k2) + drive
            k4 = a @ (state + h * k3) + drive
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[step] = state[0]
    return out


def rk4_impulse_temperature(
    impulse: ImpulseParams, forcing: np.ndarray, grid: TimeGrid, substeps: int = 20
) -> np.ndarray:
    """Temperature from fine-step RK4 of the uncoupled mode ODEs.

    ``forcing`` may be a single series (n_steps,) or a batch
    (n_paths, n_steps); forcing is constant within each step.  Returns end
    of step temperatures with matching leading shape.
    """
    f = np.atleast_2d(np.asarray(forcing, dtype=float))
    n_paths = f.shape[0]
    d = impulse.timescales
    q = impulse.equilibrium_responses
    h = grid.step / substeps
    state = np.zeros((n_paths, impulse.n_boxes))
    out = np.empty((n_paths, grid.n_steps))
    for step in range(grid.n_steps):
        drive = q[None, :] * f[:, step, None]

        def rate(s):
            return (drive - s) / d[None, :]

        for _ in range(substeps):
            k1 = rate(state)
            k2 = rate(state + 0.5 * h * k1)
            k3 = rate(state + 0.5 * h * k2)
            k4 = rate(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, step] = state.sum(axis=1)
    return out if np.asarray(forcing).ndim > 1 else out[0]


def _psd_root(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def mc_temperature_covariance(
    kernel: KernelConfig,
    emissions: np.ndarray,
    impulse: ImpulseParams,
    grid: TimeGrid,
    n_samples: int,
    seed: int,
    substeps: int = 20,
    forcing_mean: np.ndarray | None = None,
) -> np.ndarray:
    """Empirical temperature covariance from sampled forcing paths.

    Paths are drawn from the Gaussian forcing prior on the annual grid
    (kernel over the given, already-prepared emission rows) and pushed
    through the fine-substep RK4 integrator of the mode ODEs.  The sample
    covariance of the resulting temperatures estimates the propagated Gram.
    """
    x = np.atleast_2d(np.asarray(emissions, dtype=float))
    k = kernels.forcing_gram(x, x, kernel)
    root = _psd_root(k)
    rng = np.random.default_rng(seed)
    paths = rng.standard_normal((n_samples, grid.n_steps)) @ root.T
    if forcing_mean is not None:
        paths = paths + np.asarray(forcing_mean, dtype=float)
    temps = rk4_impulse_temperature(impulse, paths, grid, substeps=substeps)
    return np.cov(temps, rowvar=False, ddof=1)


def sde_variability_covariance(
    impulse: ImpulseParams,
    sigma: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    substep: float | None = None,
) -> np.ndarray:
    """Empirical covariance of Euler-Maruyama noise-response paths.

    All modes share one Brownian path, so cross-mode covariances are
    exercised.  The default substep is min(timescale)/50.  Paths start from
    rest at the grid start and are recorded at end-of-step times.
    """
    d = impulse.timescales
    q = impulse.equilibrium_responses
    if substep is None:
        substep = float(d.min()) / 50.0
    per_step = max(int(np.ceil(grid.step / substep)), 1)
    h = grid.step / per_step
    rng = np.random.default_rng(seed)
    state = np.zeros((n_paths, impulse.n_boxes))
    totals = np.empty((n_paths, grid.n_steps))
    sqrt_h = np.sqrt(h)
    for step in range(grid.n_steps):
        for _ in range(per_step):
            noise = rng.standard_normal(n_paths)[:, None]
            state = state - state / d[None, :] * h + sigma * (q / d)[None, :] * sqrt_h * noise
        totals[:, step] = state.sum(axis=1)
    return np.cov(totals, rowvar=False, ddof=1)


def _cumtrapz2d(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid integral along both axes; row/column 0 are zero."""
    def along(axis_values):
        inner = 0.5 * h * (axis_values[:-1] + axis_values[1:])
        out = np.zeros_like(axis_values)
        out[1:] = np.cumsum(inner, axis=0)
        return out

    return along(along(values).T).T


def quadrature_thermal_covariance(
    kernel: KernelConfig,
    emissions: np.ndarray,
    impulse: ImpulseParams,
    grid: TimeGrid,
    substeps: int = 16,
) -> np.ndarray:
    """Direct trapezoid quadrature of the thermal covariance double integral.

    Treats the annual emission rows as samples of a smooth path (linear
    interpolation anchored at step midpoints) and integrates the smooth
    limit object; the discrete production Gram should agree with the
    high-substep limit on smooth inputs to a few percent.  Exponential
    rescaling keeps one kernel evaluation per substep pair, so the routine
    is intended for short grids (exp(t_max / min timescale) must stay
    finite).
    """
    x = np.atleast_2d(np.asarray(emissions, dtype=float))
    n = grid.n_steps
    h = grid.step / substeps
    m = n * substeps
    s = h * np.arange(m + 1)
    nodes = grid.step * (np.arange(n) + 0.5)
    x_sub = np.column_stack(
        [np.interp(s, nodes, x[:, dim]) for dim in range(x.shape[1])]
    )
    k_sub = kernels.forcing_gram(x_sub, x_sub, kernel)

    t = grid.response_times()
    idx = (np.arange(n) + 1) * substeps
    gram = np.zeros((n, n))
    d = impulse.timescales
    q = impulse.equilibrium_responses
    for i in range(impulse.n_boxes):
        for j in range(impulse.n_boxes):
            weighted = k_sub * np.exp(s / d[i])[:, None] * np.exp(s / d[j])[None, :]
            integral = _cumtrapz2d(weighted, h)[np.ix_(idx, idx)]
            damp = np.exp(-t / d[i])[:, None] * np.exp(-t / d[j])[None, :]
            gram += (q[i] * q[j] / (d[i] * d[j])) * damp * integral
    return gram


def mc_crps(mean: float, std: float, value: float, n_samples: int, seed: int) -> float:
    """Monte Carlo CRPS estimate for one Gaussian forecast.

    Scores the empirical distribution of a stratified sample (one uniform
    per stratum through the inverse CDF) with the energy form
    E|X - y| - E|X - X'|/2, the pair term evaluated exactly over the sample
    via the sorted-sum identity.  Stratification keeps the estimator error
    well below the tolerance it is used to certify.
    """
    from scipy.special import ndtri

    rng = np.random.default_rng(seed)
    strata = (np.arange(n_samples) + rng.uniform(0.0, 1.0, n_samples)) / n_samples
    draws = mean + std * ndtri(strata)  # already sorted
    term1 = np.mean(np.abs(draws - value))
    ranks = np.arange(n_samples)
    term2 = float(draws @ (2.0 * ranks + 1.0 - n_samples)) / n_samples**2
    return float(term1 - term2)


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central finite-difference gradient, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        down = x.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (f(up) - f(down)) / (2.0 * step)
    return grad


def scaled_frobenius_distance(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Frobenius norm of the difference relative to the reference norm."""
    reference = np.asarray(reference, dtype=float)
    return float(
        np.linalg.norm(estimate - reference) / np.linalg.norm(reference)
    )


# ---------------------------------------------------------------------------
# Bundled verification suite for the CLI
# ---------------------------------------------------------------------------


@dataclass
class VerificationCheck:
    name: str
    statistic: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.tolerance


def _toy_setup():
    impulse = ImpulseParams([3.5, 80.0], [0.45, 0.30])
    grid = TimeGrid(2000, 20)
    t = np.arange(grid.n_steps, dtype=float)
    emissions = np.column_stack([t / 10.0, np.sin(t / 9.0)])
    kernel = KernelConfig("matern32", [3.0, 4.0], 0.5, standardize_inputs=False)
    return impulse, grid, emissions, kernel


def default_verification(seed: int = 0) -> list[VerificationCheck]:
    """Oracle-versus-production checks behind the ``verify`` command."""
    checks: list[VerificationCheck] = []
    rng = np.random.default_rng(seed)

    # Steady-state gain of the diagonalized system matches the box form.
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        box = BoxModelParams(
            heat_capacities=rng.uniform(3.0, 120.0, size=k),
            heat_transfer=rng.uniform(0.4, 3.0, size=k),
            deep_ocean_efficacy=float(rng.uniform(0.6, 1.6)),
        )
        impulse = ebm.diagonalize(box)
        a = ebm.build_feedback_matrix(box)
        b = ebm.forcing_feedback_vector(box)
        gain = np.linalg.solve(a, -b)[0]
        worst = max(worst, abs(impulse.equilibrium_responses.sum() - gain) / abs(gain))
    checks.append(VerificationCheck("steady_state_gain", worst, 1e-10))

    # Impulse-form solver against RK4 integration of the coupled box ODE.
    worst = 0.0
    grid = TimeGrid(1850, 120)
    forcing = np.full(grid.n_steps, 3.0)
    for _ in range(3):
        box = BoxModelParams(
            heat_capacities=rng.uniform(3.0, 120.0, size=2),
            heat_transfer=rng.uniform(0.4, 3.0, size=2),
            deep_ocean_efficacy=float(rng.uniform(0.6, 1.6)),
        )
        impulse = ebm.diagonalize(box)
        _, temp = ebm.thermal_response(forcing, impulse, grid)
        reference = rk4_box_temperature(box, forcing, grid, substeps=100)
        worst = max(worst, np.max(np.abs(temp - reference)) / np.max(np.abs(reference)))
    checks.append(VerificationCheck("impulse_vs_box_ode", worst, 1e-6))

    impulse, grid, emissions, kernel = _toy_setup()

    analytic = kernels.temperature_gram(
        kernels.forcing_gram(emissions, emissions, kernel), impulse, grid
    )
    empirical = mc_temperature_covariance(kernel, emissions, impulse, grid, 2000, seed)
    checks.append(
        VerificationCheck(
            "mc_temperature_covariance",
            scaled_frobenius_distance(empirical, analytic),
            0.05,
        )
    )

    quad = quadrature_thermal_covariance(kernel, emissions, impulse, grid, substeps=16)
    checks.append(
        VerificationCheck(
            "quadrature_thermal_covariance",
            scaled_frobenius_distance(analytic, quad),
            0.02,
        )
    )

    # Stationary variance of a single noisy mode.
    one = ImpulseParams([4.0], [0.5])
    sigma = 0.3
    long_grid = TimeGrid(1900, 60)
    emp = sde_variability_covariance(one, sigma, long_grid, 5000, seed + 1)
    target = sigma**2 * one.equilibrium_responses[0] ** 2 / (2.0 * one.timescales[0])
    checks.append(
        VerificationCheck(
            "ou_stationary_variance",
            abs(emp[-1, -1] - target) / target,
            0.05,
        )
    )

    # Exact covariance decays to the long-time form.
    two = ImpulseParams([3.0, 8.0], [0.4, 0.3])
    tail_grid = TimeGrid(1900, 120)
    exact = kernels.internal_variability_gram(two, tail_grid, "exact")
    stationary = kernels.internal_variability_gram(two, tail_grid, "long_time")
    times = tail_grid.response_times()
    late = np.minimum(times[:, None], times[None, :]) > 10.0 * two.timescales.max()
    tail = np.max(np.abs((exact - stationary)[late])) / np.max(np.abs(stationary))
    checks.append(VerificationCheck("exact_vs_long_time_tail", tail, 0.01))

    # Closed-form CRPS against the Monte Carlo estimator.
    from .metrics import gaussian_crps

    closed = float(gaussian_crps(0.3, 1.0, 0.0)[0])
    estimated = mc_crps(0.3, 1.0, 0.0, 1_000_000, seed + 2)
    checks.append(VerificationCheck("gaussian_crps_mc", abs(closed - estimated), 1e-3))

    return checks
