"""Reference estimators and bounds: MAP/ML, Gibbs posterior mean, exact
posterior mean by quadrature for tiny problems, and the Fisher-information
lower bound.

These are the comparison points for the linear MMSE estimator: MAP is the
standard convex point estimate, the Gibbs sampler approximates the exact
posterior mean, and the Fisher bound gives an (asymptotic) floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .linear_probit import GeneralProbitModel

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MapConfig:
    """Settings for the Newton MAP/ML solver."""

    max_iterations: int = 100
    gradient_tolerance: float = 1e-8
    link: str = "probit"
    use_prior: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.link not in ("probit", "logit"):
            raise ValueError(f"unknown link {self.link!r}")


@dataclass(frozen=True)
class GibbsConfig:
    """Settings for the data-augmentation Gibbs sampler."""

    burn_in: int = 10_000
    samples: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.samples < 1:
            raise ValueError("samples must be positive")


@dataclass(frozen=True)
class FisherBound:
    """Per-component lower bounds on estimation MSE at an evaluation point."""

    per_component_bound: np.ndarray
    evaluation_point: np.ndarray


def _check_y(y, M):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape != (M,):
        raise ValueError(f"y has shape {y.shape}, expected ({M},)")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("y entries must be +1 or -1")
    return y


def _weighted_gram(D, weights):
    """D^T diag(weights) D as a dense N x N array, for dense or sparse D."""
    if scipy.sparse.issparse(D):
        gram = D.multiply(weights[:, None]).T @ D
        return np.asarray(gram.todense())
    return (D * weights[:, None]).T @ D


def _neg_log_lik_terms(t, link):
    """-log g(t) per observation, with g = Phi or the logistic sigmoid."""
    if link == "probit":
        return -log_ndtr(t)
    # -log sigmoid(t) = softplus(-t)
    return np.logaddexp(0.0, -t)


def _lik_weights(t, link):
    """(lambda, omega): gradient weight lambda(t) and Hessian weight omega(t).

    For probit, lambda = phi(t)/Phi(t) and omega = lambda (lambda + t); for
    logit, lambda = sigmoid(-t) and omega = sigmoid(t) sigmoid(-t).  Both
    omegas are positive, so the Newton Hessian is PSD.
    """
    if link == "probit":
        log_phi = -0.5 * t * t - _LOG_SQRT_2PI
        lam = np.exp(log_phi - log_ndtr(t))
        omega = lam * (lam + t)
        return lam, np.maximum(omega, 0.0)
    sig_neg = 0.5 * (1.0 - np.tanh(0.5 * t))  # sigmoid(-t), stable both tails
    return sig_neg, sig_neg * (1.0 - sig_neg)


def map_fit(model: GeneralProbitModel, y, config: MapConfig | None = None):
    """MAP (or ML when use_prior is false) estimate by damped Newton.

    Minimizes -sum log g(y_m (d_m^T x + m_m)) plus the Gaussian prior
    penalty; the objective is smooth and convex, so Newton with Armijo
    backtracking reaches the global optimum.  Stops when the gradient norm
    falls below gradient_tolerance, or, once the objective is flat to
    machine precision, when the gradient norm stops improving (the
    gradient-norm floor of an instance can sit above any fixed tolerance).
    ML on separable data diverges and is reported as an error once the
    iterate norm passes 1e3.
    """
    if config is None:
        config = MapConfig()
    D = model.D
    M, N = D.shape
    y = _check_y(y, M)

    if config.use_prior:
        cf_prior = scipy.linalg.cho_factor(model.C_x)
        prec = scipy.linalg.cho_solve(cf_prior, np.eye(N))
    else:
        prec = np.zeros((N, N))

    def objective(x):
        t = y * (D @ x + model.m)
        val = float(np.sum(_neg_log_lik_terms(t, config.link)))
        if config.use_prior:
            dx = x - model.x_mean
            val += 0.5 * float(dx @ (prec @ dx))
        return val

    x = model.x_mean.copy()
    f = objective(x)
    best_x, best_gnorm = x, np.inf
    stalled = 0
    for _ in range(config.max_iterations):
        t = y * (D @ x + model.m)
        lam, omega = _lik_weights(t, config.link)
        grad = -(D.T @ (y * lam)) + prec @ (x - model.x_mean)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= config.gradient_tolerance:
            return x
        made_progress = gnorm < 0.9 * best_gnorm
        if gnorm < best_gnorm:
            best_x, best_gnorm = x, gnorm
        H = _weighted_gram(D, omega) + prec
        try:
            cf = scipy.linalg.cho_factor(H)
        except scipy.linalg.LinAlgError:
            # Singular Hessian can occur for ML with a rank-deficient
            # effective design; a tiny ridge restores a descent direction.
            cf = scipy.linalg.cho_factor(H + 1e-10 * np.eye(N))
        step = -scipy.linalg.cho_solve(cf, grad)

        # Armijo backtracking on the Newton direction.
        slope = float(grad @ step)
        alpha = 1.0
        for _ in range(60):
            x_new = x + alpha * step
            f_new = objective(x_new)
            if f_new <= f + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        # Once -slope/2 (the remaining suboptimality) is below one ulp of
        # the objective, f cannot measurably decrease; Newton may still be
        # polishing the gradient, so run on while its norm falls at a real
        # rate and accept the best iterate once it stalls (sub-ulp rounding
        # noise can leave the norm creeping in its tenth digit forever) or
        # the step rounds away.
        at_floor = -slope <= np.finfo(np.float64).eps * (1.0 + abs(f))
        stalled = stalled + 1 if at_floor and not made_progress else 0
        if at_floor and (stalled >= 3 or np.array_equal(x_new, x)):
            return best_x
        x, f = x_new, f_new
        if not config.use_prior and np.linalg.norm(x) > 1e3:
            raise RuntimeError(
                "ML estimate diverged (separable data?): parameter norm "
                "exceeded 1e3"
            )
    t = y * (D @ x + model.m)
    lam, _ = _lik_weights(t, config.link)
    grad = -(D.T @ (y * lam)) + prec @ (x - model.x_mean)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= config.gradient_tolerance:
        return x
    raise RuntimeError(
        f"MAP did not converge in {config.max_iterations} iterations "
        f"(gradient norm {gnorm:.3e})"
    )


def _truncated_std_normal(lower, u):
    """Standard normal truncated to (lower, inf), via inverse CDF.

    u is uniform on (0, 1].  The far-tail branch (lower > 8) works in log
    space to keep the quantile finite.
    """
    out = np.empty_like(lower)
    tail = lower > 8.0
    easy = ~tail
    if np.any(easy):
        out[easy] = -ndtri(u[easy] * ndtr(-lower[easy]))
    if np.any(tail):
        out[tail] = -ndtri_exp(np.log(u[tail]) + log_ndtr(-lower[tail]))
    return out


def pm_gibbs(model: GeneralProbitModel, y, config: GibbsConfig | None = None):
    """Posterior mean by data-augmentation Gibbs sampling (probit link).

    Alternates z | x, y (truncated normals on the side given by y) and
    x | z (Gaussian with fixed covariance (D^T D + C_x^{-1})^{-1}).
    Returns the post-burn-in sample mean; fully reproducible from the seed.
    """
    if config is None:
        config = GibbsConfig()
    D = model.D
    M, N = D.shape
    y = _check_y(y, M)

    cf_prior = scipy.linalg.cho_factor(model.C_x)
    prec = scipy.linalg.cho_solve(cf_prior, np.eye(N))
    A = _weighted_gram(D, np.ones(M)) + prec
    L = scipy.linalg.cholesky(A, lower=True)
    prior_pull = prec @ model.x_mean

    rng = np.random.default_rng(config.seed)
    x = model.x_mean.copy()
    total = np.zeros(N)
    for it in range(config.burn_in + config.samples):
        mu = D @ x + model.m
        u = 1.0 - rng.random(M)  # in (0, 1], keeps the log branch finite
        eps = _truncated_std_normal(-y * mu, u)
        z = mu + y * eps
        rhs = D.T @ (z - model.m) + prior_pull
        mean = scipy.linalg.cho_solve((L, True), rhs)
        xi = rng.standard_normal(N)
        x = mean + scipy.linalg.solve_triangular(L.T, xi, lower=False)
        if it >= config.burn_in:
            total += x
    return total / config.samples


def _gh_grid(order, dim):
    """Tensor Gauss-Hermite grid (probabilists'), normalized to N(0, I)."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    w = np.ones(len(pts))
    wg = np.meshgrid(*([weights] * dim), indexing="ij")
    for g in wg:
        w *= g.ravel()
    return pts, w


_GH_ORDERS = (40, 80, 160)
_GRID_CHUNK = 65536
_PATTERN_CHUNK = 256


def _dense_D(model):
    D = model.D
    if scipy.sparse.issparse(D):
        return np.asarray(D.todense())
    return D


def pm_exact(model: GeneralProbitModel, y):
    """Exact posterior mean for tiny parameter dimension (N <= 3).

    Returns (estimate, mse): the conditional mean for the given y by
    Gauss-Hermite quadrature (order doubled until the estimate settles),
    and the exact PM MSE obtained by enumerating all 2^M response patterns
    weighted by their marginal probabilities (M <= 12).
    """
    estimate = _pm_conditional_mean(model, y)
    mse = pm_exact_mse(model)
    return estimate, mse


def _pm_conditional_mean(model, y):
    D = _dense_D(model)
    M, N = D.shape
    if N > 3:
        raise ValueError("pm_exact supports at most 3 parameters")
    y = _check_y(y, M)

    Lx = scipy.linalg.cholesky(model.C_x, lower=True)
    base = D @ model.x_mean + model.m
    G = D @ Lx

    prev = None
    for order in _GH_ORDERS:
        pts, w = _gh_grid(order, N)
        Z = 0.0
        mean_u = np.zeros(N)
        for lo in range(0, len(pts), _GRID_CHUNK):
            pts_c = pts[lo : lo + _GRID_CHUNK]
            w_c = w[lo : lo + _GRID_CHUNK]
            T = base[None, :] + pts_c @ G.T
            post = w_c * np.exp(log_ndtr(y[None, :] * T).sum(axis=1))
            Z += post.sum()
            mean_u += post @ pts_c
        est = model.x_mean + Lx @ (mean_u / Z)
        if prev is not None and np.linalg.norm(est - prev) <= 1e-6 * (
            1.0 + np.linalg.norm(est)
        ):
            return est
        prev = est
    return prev


def pm_exact_mse(model: GeneralProbitModel):
    """Exact MSE of the posterior-mean estimator by full enumeration.

    Uses MSE = E||x||^2 - sum_y P(y) ||E[x|y]||^2 with E||x||^2 =
    trace(C_x) + ||x_mean||^2, enumerating all 2^M response patterns.
    Requires N <= 3 and M <= 12.
    """
    D = _dense_D(model)
    M, N = D.shape
    if N > 3:
        raise ValueError("pm_exact supports at most 3 parameters")
    if M > 12:
        raise ValueError("pm_exact_mse supports at most 12 observations")

    Lx = scipy.linalg.cholesky(model.C_x, lower=True)
    base = D @ model.x_mean + model.m
    G = D @ Lx
    num_patterns = 2**M
    signs01 = np.array(
        [[(p >> m) & 1 for m in range(M)] for p in range(num_patterns)],
        dtype=np.float64,
    )

    prev = None
    for order in _GH_ORDERS:
        pts, w = _gh_grid(order, N)
        Z = np.zeros(num_patterns)
        M1 = np.zeros((num_patterns, N))
        for glo in range(0, len(pts), _GRID_CHUNK):
            pts_c = pts[glo : glo + _GRID_CHUNK]
            w_c = w[glo : glo + _GRID_CHUNK]
            T = base[None, :] + pts_c @ G.T
            A = log_ndtr(T)
            B = log_ndtr(-T)
            AB = A - B
            row_b = B.sum(axis=1)
            for plo in range(0, num_patterns, _PATTERN_CHUNK):
                S = signs01[plo : plo + _PATTERN_CHUNK]
                post = np.exp(AB @ S.T + row_b[:, None]) * w_c[:, None]
                Z[plo : plo + len(S)] += post.sum(axis=0)
                M1[plo : plo + len(S)] += post.T @ pts_c
        total_prob = float(Z.sum())
        if abs(total_prob - 1.0) > 1e-6:
            raise RuntimeError(
                f"pattern probabilities sum to {total_prob}, quadrature too coarse"
            )
        keep = Z > 0
        est = model.x_mean[None, :] + (M1[keep] / Z[keep, None]) @ Lx.T
        mse = float(
            np.trace(model.C_x)
            + model.x_mean @ model.x_mean
            - Z[keep] @ np.sum(est**2, axis=1)
        )
        if prev is not None and abs(mse - prev) <= 1e-8 * (1.0 + abs(mse)):
            return mse
        prev = mse
    return prev


def probit_information(t):
    """Per-observation probit Fisher information lambda(t) = phi(t)^2 / (Phi(t) Phi(-t)).

    Evaluated in the log domain; lambda(0) = 2/pi.
    """
    t = np.asarray(t, dtype=np.float64)
    log_phi = -0.5 * t * t - _LOG_SQRT_2PI
    return np.exp(2.0 * log_phi - log_ndtr(t) - log_ndtr(-t))


def fisher_rasch_ability_bound(U, Q, sigma2_x) -> float:
    """Bayesian Fisher bound on the ability MSE for the full design, at the prior mean.

    The information matrix at x = 0 is (2/pi) D^T D + I/sigma2_x; its ability
    block inverts in closed form through the Schur complement of the
    difficulty block, so the bound costs O(1) at any size.
    """
    sigma2_x = float(sigma2_x)
    if U < 1 or Q < 1 or sigma2_x <= 0:
        raise ValueError("need U >= 1, Q >= 1, sigma2_x > 0")
    lam0 = 2.0 / np.pi
    alpha = lam0 * Q + 1.0 / sigma2_x
    beta = lam0 * U + 1.0 / sigma2_x
    g = lam0 * lam0 * Q / beta
    return float(1.0 / alpha + g / (alpha * (alpha - U * g)))


def fisher_lower_bound(
    model: GeneralProbitModel,
    evaluation_point,
    *,
    include_prior: bool = True,
) -> FisherBound:
    """Fisher-information lower bound on per-component MSE.

    Forms I = D^T diag(lambda) D with the probit item information
    lambda(t) = phi(t)^2 / (Phi(t) Phi(-t)) at the evaluation point, adds
    the prior precision (Bayesian variant, default), and returns the
    diagonal of the inverse.
    """
    theta = np.asarray(evaluation_point, dtype=np.float64).ravel()
    M, N = model.D.shape
    if theta.shape != (N,):
        raise ValueError(f"evaluation_point has shape {theta.shape}, expected ({N},)")
    t = np.asarray(model.D @ theta).ravel() + model.m
    lam = probit_information(t)
    info = _weighted_gram(model.D, lam)
    if include_prior:
        cf_prior = scipy.linalg.cho_factor(model.C_x)
        info = info + scipy.linalg.cho_solve(cf_prior, np.eye(N))
    try:
        cf = scipy.linalg.cho_factor(info)
    except scipy.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "Fisher information is singular; use include_prior=True"
        ) from err
    bounds = np.diag(scipy.linalg.cho_solve(cf, np.eye(N))).copy()
    return FisherBound(per_component_bound=bounds, evaluation_point=theta)
