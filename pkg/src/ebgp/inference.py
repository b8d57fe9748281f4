"""Gaussian-process prior assembly and exact posterior inference.

Builds the stacked multi-scenario prior (mean path from the box model,
physics-propagated covariance, block-diagonal internal variability),
computes exact posteriors over temperature and radiative forcing, the
marginal log-likelihood and its gradients, and fits hyperparameters by
quasi-Newton ascent on log-parameters.

All solves go through Cholesky factorizations with an escalating jitter
ladder; explicit matrix inverses never appear on the solve path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import block_diag, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from . import ebm, kernels
from .ebm import ForcingParams, ImpulseParams
from .errors import GridMismatch, NonFinite, SchemaError, SingularGram
from .kernels import GramMatrix, KernelConfig
from .scenario import AgentSpec, Scenario, Standardization, TrainingSet

LOG_2PI = np.log(2.0 * np.pi)

# Relative jitter rungs tried before declaring a Gram singular.
JITTER_LADDER = (1e-6, 1e-5, 1e-4)


def cholesky_with_jitter(
    matrix: np.ndarray, ladder: Sequence[float] = JITTER_LADDER
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor with escalating diagonal jitter.

    Jitter rungs are relative to the mean diagonal.  Returns the factor and
    the absolute jitter that succeeded; raises SingularGram when the last
    rung fails.
    """
    matrix = np.asarray(matrix, dtype=float)
    scale = float(np.mean(np.diag(matrix))) if matrix.size else 0.0
    if scale <= 0:
        scale = 1.0
    for rel in ladder:
        jitter = rel * scale
        try:
            factor = cholesky(matrix + jitter * np.eye(matrix.shape[0]), lower=True)
            return factor, jitter
        except np.linalg.LinAlgError:
            continue
    raise SingularGram(
        f"Cholesky failed at maximum jitter {ladder[-1] * scale:g} (n={matrix.shape[0]})"
    )


@dataclass
class GPPrior:
    """Prior over the stacked multi-scenario grid.

    ``mean`` is the deterministic box-model temperature path,
    ``physics_gram`` the propagated forcing covariance, and
    ``variability_gram`` the internal-variability covariance (block diagonal
    across scenarios, without the sigma^2 factor).  ``index`` locates each
    row as a (scenario name, year) pair.  The remaining fields carry what
    forcing posteriors and refitting need: the prior forcing path, the raw
    forcing kernel matrix, the stacked response operator and the
    (standardized) kernel inputs.  ``extra_noise`` optionally adds a
    per-row white-noise variance on top of sigma^2 * variability.
    """

    mean: np.ndarray
    physics_gram: GramMatrix
    variability_gram: GramMatrix
    sigma: float
    index: list[tuple[str, int]]
    forcing_mean: np.ndarray
    forcing_gram: np.ndarray
    response_operator: np.ndarray
    kernel_inputs: np.ndarray
    extra_noise: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.mean.size

    def rows_for_scenario(self, name: str) -> np.ndarray:
        rows = np.array([i for i, (scen, _) in enumerate(self.index) if scen == name])
        if rows.size == 0:
            raise GridMismatch(f"scenario '{name}' is not part of this prior")
        return rows

    def noise_block(self, rows: np.ndarray) -> np.ndarray:
        block = self.sigma**2 * self.variability_gram.values[np.ix_(rows, rows)]
        if self.extra_noise is not None:
            block = block + np.diag(self.extra_noise[rows])
        return block


@dataclass
class PosteriorDistribution:
    """Multivariate Gaussian over selected rows: mean, covariance and index."""

    mean: np.ndarray
    covariance: np.ndarray
    index: list[tuple[str, int]]

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.covariance.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean")

    @property
    def n(self) -> int:
        return self.mean.size

    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


@dataclass
class FitSettings:
    """Which parameters the optimizer may move, and how hard it tries."""

    free: tuple[str, ...] = ("lengthscales", "variance", "sigma")
    restarts: int = 5
    max_iterations: int = 200


@dataclass
class EmulatorModel:
    """Complete model state: agents, response parameters, forcing model,
    kernel configuration and input standardization."""

    agents: list[AgentSpec]
    impulse: ImpulseParams
    forcing: ForcingParams
    kernel: KernelConfig
    standardization: Standardization | None = None
    fit: FitSettings = field(default_factory=FitSettings)

    @property
    def agent_names(self) -> list[str]:
        return [a.name for a in self.agents]


def scenario_forcing(
    scen: Scenario, forcing: ForcingParams, agents: list[AgentSpec]
) -> np.ndarray:
    """Deterministic forcing path for one scenario.

    Uses the scenario's concentration series when present; otherwise falls
    back to the linear accumulation rule for agents that configure one.
    """
    conc: dict[str, np.ndarray] = dict(scen.concentrations or {})
    for spec in agents:
        params = forcing[spec.name]
        active = params.alpha_log != 0 or params.alpha_lin != 0 or params.alpha_sqrt != 0
        if spec.name in conc or not active:
            continue
        if params.concentration_per_emission is None:
            raise SchemaError(
                f"scenario '{scen.name}' has no concentrations for agent "
                f"'{spec.name}' and no accumulation rule is configured"
            )
        conc[spec.name] = ebm.linear_concentrations(
            scen.emissions[spec.name],
            params,
            scen.grid,
            cumulative=spec.input_mode == "cumulative_emission",
        )
    return ebm.forcing_response(conc, forcing, scen.grid)


def build_prior(
    scenarios: list[Scenario],
    impulse: ImpulseParams,
    forcing: ForcingParams,
    kernel: KernelConfig,
    agents: list[AgentSpec] | None = None,
    standardization: Standardization | None = None,
    variability_mode: str = "long_time",
    jitter: float = 1e-6,
) -> GPPrior:
    """Assemble the prior over the stacked scenarios.

    Per-scenario means come from the discrete thermal response of that
    scenario's forcing.  Physics blocks between scenarios a and b are
    L_a K_ab L_b^T with K_ab the forcing kernel between their emission rows;
    the variability Gram is block diagonal because internal-variability
    realizations of distinct runs are independent.  ``jitter`` is relative
    to the mean diagonal of each Gram.
    """
    if not scenarios:
        raise GridMismatch("at least one scenario is required")
    steps = {s.grid.step for s in scenarios}
    if len(steps) > 1:
        raise GridMismatch(f"scenarios have inconsistent steps: {sorted(steps)}")
    if agents is None:
        agents = [AgentSpec(name) for name in scenarios[0].agent_names]
    names = [a.name for a in agents]

    means = []
    forcings = []
    operators = []
    var_blocks = []
    raw_inputs = []
    index: list[tuple[str, int]] = []
    for scen in scenarios:
        f = scenario_forcing(scen, forcing, agents)
        _, temp = ebm.thermal_response(f, impulse, scen.grid)
        means.append(temp)
        forcings.append(f)
        operators.append(ebm.temperature_operator(impulse, scen.grid))
        var_blocks.append(kernels.internal_variability_gram(impulse, scen.grid, variability_mode))
        raw_inputs.append(scen.emission_matrix(names))
        index.extend((scen.name, int(y)) for y in scen.grid.years().astype(int))

    x = np.vstack(raw_inputs)
    if kernel.standardize_inputs:
        st = standardization if standardization is not None else Standardization.from_rows(x)
        x = st.apply(x)
    k_f = kernels.forcing_gram(x, x, kernel)
    op = block_diag(*operators)
    k_t = op @ k_f @ op.T
    k_t = 0.5 * (k_t + k_t.T)
    gamma = block_diag(*var_blocks)

    def _rel_jitter(matrix: np.ndarray) -> float:
        scale = float(np.mean(np.diag(matrix)))
        return jitter * (scale if scale > 0 else 1.0)

    return GPPrior(
        mean=np.concatenate(means),
        physics_gram=GramMatrix(k_t, jitter=_rel_jitter(k_t)),
        variability_gram=GramMatrix(gamma, jitter=_rel_jitter(gamma)),
        sigma=impulse.variability_amplitude,
        index=index,
        forcing_mean=np.concatenate(forcings),
        forcing_gram=k_f,
        response_operator=op,
        kernel_inputs=x,
    )


def build_prior_from_model(
    scenarios: list[Scenario],
    model: EmulatorModel,
    variability_mode: str = "long_time",
) -> GPPrior:
    return build_prior(
        scenarios,
        model.impulse,
        model.forcing,
        model.kernel,
        agents=model.agents,
        standardization=model.standardization,
        variability_mode=variability_mode,
    )


def locate_rows(prior: GPPrior, index: Sequence[tuple[str, int]]) -> np.ndarray:
    """Positions of (scenario, year) pairs within the prior index."""
    lookup = {pair: i for i, pair in enumerate(prior.index)}
    try:
        return np.array([lookup[pair] for pair in index], dtype=int)
    except KeyError as missing:
        raise GridMismatch(f"row {missing.args[0]} is not in the prior index") from None


def _train_factor(prior: GPPrior, train: TrainingSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(positions, Cholesky factor of the noisy train block, residual)."""
    pos = locate_rows(prior, train.index)
    block = prior.physics_gram.values[np.ix_(pos, pos)] + prior.noise_block(pos)
    factor, _ = cholesky_with_jitter(block)
    residual = train.temperatures - prior.mean[pos]
    return pos, factor, residual


def posterior_temperature(
    prior: GPPrior, train: TrainingSet, test_rows: np.ndarray
) -> PosteriorDistribution:
    """Exact posterior over the temperature process at the requested rows.

    The covariance is the posterior of the smooth (epistemic) temperature
    component; add the variability term via ``with_variability`` to get the
    predictive distribution for noisy observations.
    """
    test_rows = np.asarray(test_rows, dtype=int)
    test_index = [prior.index[i] for i in test_rows]
    k = prior.physics_gram.values
    if train.n == 0:
        return PosteriorDistribution(
            mean=prior.mean[test_rows].copy(),
            covariance=k[np.ix_(test_rows, test_rows)].copy(),
            index=test_index,
        )
    pos, factor, residual = _train_factor(prior, train)
    alpha = cho_solve((factor, True), residual)
    cross = k[np.ix_(test_rows, pos)]
    mean = prior.mean[test_rows] + cross @ alpha
    v = solve_triangular(factor, cross.T, lower=True)
    cov = k[np.ix_(test_rows, test_rows)] - v.T @ v
    return PosteriorDistribution(mean=mean, covariance=0.5 * (cov + cov.T), index=test_index)


def posterior_forcing(
    prior: GPPrior, train: TrainingSet, test_rows: np.ndarray
) -> PosteriorDistribution:
    """Exact posterior over the radiative forcing at the requested rows,
    informed by temperature observations only."""
    test_rows = np.asarray(test_rows, dtype=int)
    test_index = [prior.index[i] for i in test_rows]
    k_f = prior.forcing_gram
    if train.n == 0:
        return PosteriorDistribution(
            mean=prior.forcing_mean[test_rows].copy(),
            covariance=k_f[np.ix_(test_rows, test_rows)].copy(),
            index=test_index,
        )
    pos, factor, residual = _train_factor(prior, train)
    alpha = cho_solve((factor, True), residual)
    # Cov(F, T) = K_f L^T restricted to (test, train) rows.
    cross = k_f[test_rows, :] @ prior.response_operator[pos, :].T
    mean = prior.forcing_mean[test_rows] + cross @ alpha
    v = solve_triangular(factor, cross.T, lower=True)
    cov = k_f[np.ix_(test_rows, test_rows)] - v.T @ v
    return PosteriorDistribution(mean=mean, covariance=0.5 * (cov + cov.T), index=test_index)


def with_variability(
    posterior: PosteriorDistribution, gram: np.ndarray, sigma: float
) -> PosteriorDistribution:
    """Predictive distribution: posterior covariance plus sigma^2 * gram."""
    gram = np.asarray(gram, dtype=float)
    if gram.shape != posterior.covariance.shape:
        raise GridMismatch("variability gram does not match the posterior shape")
    return PosteriorDistribution(
        mean=posterior.mean.copy(),
        covariance=posterior.covariance + sigma**2 * gram,
        index=list(posterior.index),
    )


def marginal_log_likelihood(prior: GPPrior, train: TrainingSet) -> float:
    """Log-density of the training temperatures under the noisy prior."""
    if train.n == 0:
        return 0.0
    _, factor, residual = _train_factor(prior, train)
    alpha = cho_solve((factor, True), residual)
    logdet = 2.0 * np.sum(np.log(np.diag(factor)))
    return -0.5 * (train.n * LOG_2PI + logdet + float(residual @ alpha))


def predictive_log_density(
    posterior: PosteriorDistribution,
    values: np.ndarray,
    variability: tuple[np.ndarray, float] | None = None,
) -> float:
    """Joint log-density of ``values`` under the (optionally noise-augmented)
    posterior Gaussian."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size != posterior.n:
        raise GridMismatch(f"{values.size} values for a posterior of size {posterior.n}")
    cov = posterior.covariance
    if variability is not None:
        gram, sigma = variability
        cov = cov + sigma**2 * np.asarray(gram, dtype=float)
    factor, _ = cholesky_with_jitter(cov, ladder=(0.0, *JITTER_LADDER))
    residual = values - posterior.mean
    alpha = cho_solve((factor, True), residual)
    logdet = 2.0 * np.sum(np.log(np.diag(factor)))
    return -0.5 * (posterior.n * LOG_2PI + logdet + float(residual @ alpha))


def sample_posterior(
    posterior: PosteriorDistribution, count: int, seed: int
) -> np.ndarray:
    """Draw ``count`` joint samples; deterministic for a fixed seed.

    Uses the symmetric eigendecomposition square root so that singular (even
    zero) covariances sample exactly on their support.
    """
    cov = 0.5 * (posterior.covariance + posterior.covariance.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((count, posterior.n))
    return draws @ root.T + posterior.mean


# ---------------------------------------------------------------------------
# Hyperparameter fitting
# ---------------------------------------------------------------------------

KERNEL_PARAMS = ("lengthscales", "variance", "sigma")
EBM_PARAMS = ("timescales", "equilibrium_responses", "forcing")
FITTABLE = KERNEL_PARAMS + EBM_PARAMS


@dataclass
class FitResult:
    model: EmulatorModel
    trace: list[float]
    iterations: int
    mll: float


def fitting_jitter(prior: GPPrior, train: TrainingSet, rel: float = JITTER_LADDER[0]) -> float:
    """Absolute diagonal regularizer for fitting, frozen at the start point."""
    pos = locate_rows(prior, train.index)
    block = prior.physics_gram.values[np.ix_(pos, pos)] + prior.noise_block(pos)
    scale = float(np.mean(np.diag(block))) if block.size else 1.0
    return rel * (scale if scale > 0 else 1.0)


def _forcing_alpha_items(forcing: ForcingParams) -> list[tuple[str, str]]:
    items = []
    for name in forcing:
        for coef in ("alpha_log", "alpha_lin", "alpha_sqrt"):
            items.append((name, coef))
    return items


def _pack(model: EmulatorModel, free: tuple[str, ...]) -> tuple[np.ndarray, Callable]:
    """Flatten the free parameters into an unconstrained vector.

    Positive parameters travel in log space; forcing coefficients (which may
    be negative) travel untransformed.  Returns the initial vector and a
    function mapping a vector back to a model.
    """
    for name in free:
        if name not in FITTABLE:
            raise ValueError(f"unknown fittable parameter '{name}'")
    pieces: list[np.ndarray] = []
    layout: list[tuple[str, int]] = []

    def _push(name: str, values: np.ndarray):
        pieces.append(values)
        layout.append((name, values.size))

    if "lengthscales" in free:
        _push("lengthscales", np.log(model.kernel.lengthscales))
    if "variance" in free:
        _push("variance", np.array([np.log(model.kernel.variance)]))
    if "sigma" in free:
        if model.impulse.variability_amplitude <= 0:
            raise ValueError("sigma must be positive to be fit on the log scale")
        _push("sigma", np.array([np.log(model.impulse.variability_amplitude)]))
    if "timescales" in free:
        _push("timescales", np.log(model.impulse.timescales))
    if "equilibrium_responses" in free:
        _push("equilibrium_responses", np.log(model.impulse.equilibrium_responses))
    if "forcing" in free:
        alphas = [getattr(model.forcing[a], c) for a, c in _forcing_alpha_items(model.forcing)]
        _push("forcing", np.array(alphas))

    theta0 = np.concatenate(pieces) if pieces else np.empty(0)

    def apply(theta: np.ndarray) -> EmulatorModel:
        out = model
        cursor = 0
        kernel = model.kernel
        impulse = model.impulse
        forcing = model.forcing
        for name, size in layout:
            chunk = theta[cursor : cursor + size]
            cursor += size
            if name == "lengthscales":
                kernel = dataclasses.replace(kernel, lengthscales=np.exp(chunk))
            elif name == "variance":
                kernel = dataclasses.replace(kernel, variance=float(np.exp(chunk[0])))
            elif name == "sigma":
                impulse = dataclasses.replace(
                    impulse, variability_amplitude=float(np.exp(chunk[0]))
                )
            elif name == "timescales":
                impulse = dataclasses.replace(impulse, timescales=np.exp(chunk))
            elif name == "equilibrium_responses":
                impulse = dataclasses.replace(impulse, equilibrium_responses=np.exp(chunk))
            elif name == "forcing":
                forcing = {k: dataclasses.replace(v) for k, v in forcing.items()}
                for (agent, coef), value in zip(_forcing_alpha_items(forcing), chunk):
                    setattr(forcing[agent], coef, float(value))
        return dataclasses.replace(out, kernel=kernel, impulse=impulse, forcing=forcing)

    return theta0, apply


def _entry_kinds(model: EmulatorModel, free: tuple[str, ...]) -> list[str]:
    """Per-entry parameter kind in pack order."""
    kinds: list[str] = []
    if "lengthscales" in free:
        kinds += ["lengthscale"] * model.kernel.n_dims
    if "variance" in free:
        kinds += ["variance"]
    if "sigma" in free:
        kinds += ["sigma"]
    if "timescales" in free:
        kinds += ["ebm"] * model.impulse.n_boxes
    if "equilibrium_responses" in free:
        kinds += ["ebm"] * model.impulse.n_boxes
    if "forcing" in free:
        kinds += ["ebm"] * (3 * len(model.forcing))
    return kinds


def mll_and_gradient(
    prior: GPPrior,
    train: TrainingSet,
    kernel: KernelConfig,
    sigma: float | None = None,
    jitter: float | None = None,
) -> tuple[float, np.ndarray]:
    """Marginal log-likelihood and its gradient with respect to
    (log lengthscales..., log variance, log sigma).

    The kernel matrix is re-evaluated from the prior's stored inputs at the
    given kernel configuration (and ``sigma``, defaulting to the prior's),
    so the prior's fixed geometry -- mean path, response operator and
    variability Gram -- can be reused across optimizer steps.  Gradients use
    the standard trace identities, with the physics-Gram derivative obtained
    by pushing the kernel derivative through the response operator.

    ``jitter`` is an absolute diagonal regularizer; the optimizer freezes it
    at its starting point so the objective stays consistent with its
    gradient.  When None, the relative ladder is used instead.
    """
    pos = locate_rows(prior, train.index)
    k_f, dk_dl, dk_dv = kernels.forcing_gram_gradients(prior.kernel_inputs, kernel)
    op = prior.response_operator[pos, :]
    k_t = op @ k_f @ op.T
    gamma = prior.variability_gram.values[np.ix_(pos, pos)]
    sigma = prior.sigma if sigma is None else sigma
    noisy = k_t + sigma**2 * gamma
    if prior.extra_noise is not None:
        noisy = noisy + np.diag(prior.extra_noise[pos])
    if jitter is None:
        factor, _ = cholesky_with_jitter(noisy)
    else:
        try:
            factor = cholesky(noisy + jitter * np.eye(train.n), lower=True)
        except np.linalg.LinAlgError:
            raise SingularGram("Cholesky failed at the frozen fitting jitter") from None
    residual = train.temperatures - prior.mean[pos]
    alpha = cho_solve((factor, True), residual)
    logdet = 2.0 * np.sum(np.log(np.diag(factor)))
    mll = -0.5 * (train.n * LOG_2PI + logdet + float(residual @ alpha))

    inv = cho_solve((factor, True), np.eye(train.n))
    w = np.outer(alpha, alpha) - inv
    b = op.T @ w @ op
    grad = [0.5 * float(np.sum(b * g)) for g in dk_dl]
    grad.append(0.5 * float(np.sum(b * dk_dv)))
    grad.append(float(sigma**2 * np.sum(w * gamma)))
    return mll, np.array(grad)


def fit_hyperparameters(
    builder: Callable[[EmulatorModel], GPPrior],
    train: TrainingSet,
    model: EmulatorModel,
    free: tuple[str, ...] | None = None,
    restarts: int | None = None,
    max_iterations: int | None = None,
    seed: int = 0,
) -> FitResult:
    """Maximise the marginal log-likelihood over the selected parameters.

    ``builder`` maps a model to a prior covering (at least) the training
    rows.  Runs L-BFGS-B on log-transformed positive parameters, once from
    the supplied model and ``restarts`` more times from perturbed starts.
    The trace records the best marginal log-likelihood seen after each
    objective evaluation and is non-decreasing by construction.
    """
    free = tuple(free) if free is not None else model.fit.free
    restarts = restarts if restarts is not None else model.fit.restarts
    max_iterations = max_iterations if max_iterations is not None else model.fit.max_iterations

    if not free:
        mll = marginal_log_likelihood(builder(model), train)
        return FitResult(model=model, trace=[mll], iterations=0, mll=mll)

    theta0, apply = _pack(model, free)
    kinds = _entry_kinds(model, free)
    kernel_mask = np.array([k != "ebm" for k in kinds])
    ebm_entries = np.where(~kernel_mask)[0]
    ebm_free = ebm_entries.size > 0
    # With the box model fixed the prior geometry (mean path, response
    # operator, variability Gram, kernel inputs) never changes; build once.
    fixed_prior = None if ebm_free else builder(model)
    jitter = fitting_jitter(fixed_prior if fixed_prior is not None else builder(model), train)

    trace: list[float] = []
    best = -np.inf
    evaluations = 0

    def mll_at(theta: np.ndarray) -> float:
        try:
            candidate = apply(theta)
            prior = builder(candidate)
            value, _ = mll_and_gradient(
                prior, train, candidate.kernel,
                sigma=candidate.impulse.variability_amplitude, jitter=jitter,
            )
            return value
        except (ValueError, SingularGram):
            return -np.inf

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal best, evaluations
        evaluations += 1
        try:
            candidate = apply(theta)
            prior = fixed_prior if fixed_prior is not None else builder(candidate)
            mll, kernel_grad = mll_and_gradient(
                prior, train, candidate.kernel,
                sigma=candidate.impulse.variability_amplitude, jitter=jitter,
            )
        except (ValueError, SingularGram):
            trace.append(best)
            return np.inf, np.zeros_like(theta)
        if not np.isfinite(mll):
            trace.append(best)
            return np.inf, np.zeros_like(theta)
        grad = np.zeros_like(theta)
        sel = []
        if "lengthscales" in free:
            sel.extend(range(model.kernel.n_dims))
        if "variance" in free:
            sel.append(model.kernel.n_dims)
        if "sigma" in free:
            sel.append(model.kernel.n_dims + 1)
        grad[kernel_mask] = kernel_grad[sel]
        if ebm_free:
            h = 1e-5
            for pos in ebm_entries:
                up = theta.copy()
                dn = theta.copy()
                up[pos] += h
                dn[pos] -= h
                grad[pos] = (mll_at(up) - mll_at(dn)) / (2.0 * h)
        best = max(best, mll)
        trace.append(best)
        return -mll, -grad

    rng = np.random.default_rng(seed)
    starts = [theta0]
    starts.extend(theta0 + rng.normal(scale=0.5, size=theta0.size) for _ in range(restarts))

    best_theta = theta0
    best_value = -np.inf
    for start in starts:
        result = minimize(
            objective,
            start,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": max_iterations},
        )
        value = -result.fun if np.isfinite(result.fun) else -np.inf
        if value > best_value:
            best_value = value
            best_theta = result.x
    if not np.isfinite(best_value):
        raise NonFinite("marginal log-likelihood is not finite anywhere the optimizer looked")

    fitted = apply(best_theta)
    return FitResult(model=fitted, trace=trace, iterations=evaluations, mll=best_value)
