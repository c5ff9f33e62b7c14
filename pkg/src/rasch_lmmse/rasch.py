"""Rasch-model specializations of the linear MMSE machinery.

The Rasch (1PL) model observes Y_ui = sign(a_u - d_i + w_ui).  Stacking the
parameters as x = [a; -d] gives the probit model y = sign(D x + w) with the
structured design D = [1_Q (x) I_U, I_Q (x) 1_U].  With equal prior
variances and a full response matrix, the sign covariance C_y has only four
distinct inverse entries, which yields a closed-form MSE and an O(UQ) fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .data import ResponseSet
from .linear_probit import (
    GeneralProbitModel,
    LmmseSolution,
    _solve_spd,
    lmmse_fit,
    sign_covariance,
)
from .specfun import norm_cdf, norm_pdf

_SATURATION_C = 37.0


@dataclass(frozen=True)
class RaschDesign:
    """Problem dimensions and prior variances for a Rasch instance."""

    U: int
    Q: int
    sigma2_a: float
    sigma2_d: float

    def __post_init__(self):
        if self.U < 1 or self.Q < 1:
            raise ValueError("U and Q must be at least 1")
        if not (self.sigma2_a > 0 and self.sigma2_d > 0):
            raise ValueError("prior variances must be positive")

    @property
    def equal_variances(self):
        return self.sigma2_a == self.sigma2_d


@dataclass(frozen=True)
class StructuredCyInverse:
    """The four distinct entries of C_y^{-1} for the full-response Rasch case.

    C_y^{-1} = 1_{QxQ} (x) A + I_Q (x) B where A has diagonal c and
    off-diagonal d, and B has diagonal a - c and off-diagonal b - d.
    """

    U: int
    Q: int
    s: float
    a: float
    b: float
    c: float
    d: float
    r: float

    def dense(self):
        """Materialize C_y^{-1} (test/debug helper; O((UQ)^2) memory)."""
        U, Q = self.U, self.Q
        eye_u = np.eye(U)
        ones_u = np.ones((U, U))
        A = self.c * eye_u + self.d * (ones_u - eye_u)
        B = (self.a - self.c) * eye_u + (self.b - self.d) * (ones_u - eye_u)
        return np.kron(np.ones((Q, Q)), A) + np.kron(np.eye(Q), B)


@dataclass(frozen=True)
class KnownDifficultyModel:
    """Single-user ability estimation when item difficulties are known."""

    d: np.ndarray
    x_bar: float
    sigma2_x: float

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64).ravel()
        if d.size < 1:
            raise ValueError("need at least one item difficulty")
        if not self.sigma2_x > 0:
            raise ValueError("sigma2_x must be positive")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x_bar", float(self.x_bar))
        object.__setattr__(self, "sigma2_x", float(self.sigma2_x))


def rasch_design_matrix(
    design: RaschDesign,
    observed: ResponseSet | None = None,
    *,
    sparse: bool = False,
) -> GeneralProbitModel:
    """Build the probit model for a Rasch instance.

    Full response by default: row m corresponds to (user m % U, item m // U),
    matching Y.flatten(order="F") for a U x Q response matrix.  With an
    observed ResponseSet, rows are restricted to its (user, item) pairs in
    order.  Row (u, i) has ones at columns u and U + i; the second parameter
    block carries -d, so the row computes a_u - d_i.
    """
    U, Q = design.U, design.Q
    if observed is None:
        users = np.tile(np.arange(U), Q)
        items = np.repeat(np.arange(Q), U)
    else:
        users = np.asarray(observed.users, dtype=np.int64)
        items = np.asarray(observed.items, dtype=np.int64)
        if len(users) == 0:
            raise ValueError("observed ResponseSet is empty")
        if users.min() < 0 or users.max() >= U:
            raise ValueError("user index out of range for design")
        if items.min() < 0 or items.max() >= Q:
            raise ValueError("item index out of range for design")
        pairs = users * Q + items
        if len(np.unique(pairs)) != len(pairs):
            raise ValueError("duplicate (user, item) pairs in observed data")
    M, N = len(users), U + Q
    if sparse:
        rows = np.repeat(np.arange(M), 2)
        cols = np.column_stack([users, U + items]).ravel()
        D = scipy.sparse.csr_matrix(
            (np.ones(2 * M), (rows, cols)), shape=(M, N)
        )
    else:
        D = np.zeros((M, N))
        D[np.arange(M), users] = 1.0
        D[np.arange(M), U + items] = 1.0
    prior_var = np.concatenate(
        [np.full(U, design.sigma2_a), np.full(Q, design.sigma2_d)]
    )
    return GeneralProbitModel(
        D=D, m=np.zeros(M), x_mean=np.zeros(N), C_x=np.diag(prior_var)
    )


def rasch_s(sigma2_x) -> float:
    """Arcsine correlation s = (2/pi) arcsin(sigma2 / (2 sigma2 + 1)).

    Strictly below 1/3 for all finite sigma2 since the argument stays
    below 1/2.
    """
    sigma2_x = float(sigma2_x)
    if sigma2_x < 0:
        raise ValueError("sigma2_x must be nonnegative")
    return (2.0 / np.pi) * np.arcsin(sigma2_x / (2.0 * sigma2_x + 1.0))


def _ability_mse(U, Q, sigma2, s):
    # Equals Q * (a + (Q-1) c) of the structured inverse, reduced to a
    # ratio of first-order polynomials in s.
    ratio = (
        Q
        * (s * (Q + U - 3.0) + 1.0)
        / ((s * (Q - 2.0) + 1.0) * (s * (Q + U - 2.0) + 1.0))
    )
    return float(
        sigma2 * (1.0 - (2.0 / np.pi) * (sigma2 / (2.0 * sigma2 + 1.0)) * ratio)
    )


def rasch_closed_form_mse(design: RaschDesign):
    """Exact per-component L-MMSE MSE for the full-response, equal-variance case.

    Returns (mse_ability, mse_difficulty); the difficulty expression is the
    ability one with U and Q swapped.
    """
    if not design.equal_variances:
        raise ValueError("closed form requires sigma2_a == sigma2_d")
    sigma2 = design.sigma2_a
    s = rasch_s(sigma2)
    return (
        _ability_mse(design.U, design.Q, sigma2, s),
        _ability_mse(design.Q, design.U, sigma2, s),
    )


def rasch_asymptotic_mse(sigma2_x) -> float:
    """Large-problem limit of the ability MSE as U, Q -> infinity."""
    sigma2_x = float(sigma2_x)
    if sigma2_x < 0:
        raise ValueError("sigma2_x must be nonnegative")
    if sigma2_x == 0.0:
        return 0.0
    arg = sigma2_x / (2.0 * sigma2_x + 1.0)
    return sigma2_x * (1.0 - arg / np.arcsin(arg))


def structured_cy_inverse(design: RaschDesign) -> StructuredCyInverse:
    """Closed-form inverse of the arcsine-law C_y for the full Rasch design.

    The inverse shares the Kronecker structure of C_y and is determined by
    four scalars (a, b, c, d) that are rational cubics in s.
    """
    if not design.equal_variances:
        raise ValueError("structured inverse requires sigma2_a == sigma2_d")
    U, Q = float(design.U), float(design.Q)
    s = rasch_s(design.sigma2_a)
    r = (
        (2.0 * s - 1.0)
        * ((U - 2.0) * s + 1.0)
        * ((Q - 2.0) * s + 1.0)
        * ((Q + U - 2.0) * s + 1.0)
    )
    if r == 0.0:
        raise np.linalg.LinAlgError(
            f"degenerate configuration: zero denominator at U={design.U}, "
            f"Q={design.Q}, s={s}"
        )
    a = (
        (
            3 * U**2
            + 3 * Q**2
            - U**2 * Q
            - U * Q**2
            + 8 * U * Q
            - 15 * U
            - 15 * Q
            + 20
        )
        * s**3
        + (-(U**2) - Q**2 - 3 * U * Q + 11 * U + 11 * Q - 22) * s**2
        + (-2 * U - 2 * Q + 8) * s
        - 1.0
    ) / r
    b = (
        (U * Q + Q**2 - 3 * U - 5 * Q + 8) * s**3
        + (U + 2 * Q - 6) * s**2
        + s
    ) / r
    c = (
        (U * Q + U**2 - 5 * U - 3 * Q + 8) * s**3
        + (2 * U + Q - 6) * s**2
        + s
    ) / r
    d = (-(U + Q - 4) * s**3 - 2 * s**2) / r
    return StructuredCyInverse(
        U=design.U, Q=design.Q, s=s, a=a, b=b, c=c, d=d, r=r
    )


def _check_responses(Y, U, Q):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (U, Q):
        raise ValueError(f"Y has shape {Y.shape}, expected ({U}, {Q})")
    if not np.all(np.abs(Y) == 1.0):
        raise ValueError("responses must be +1 or -1")
    return Y


def rasch_fast_lmmse_fit(design: RaschDesign, Y) -> LmmseSolution:
    """L-MMSE fit of a full U x Q response matrix in O(UQ) time and memory.

    Uses the structured inverse of C_y; no UQ x UQ matrix is formed.  With
    unequal prior variances the structure is unavailable and the call falls
    back to the dense path (flagged in metadata).
    """
    U, Q = design.U, design.Q
    Y = _check_responses(Y, U, Q)
    if not design.equal_variances:
        model = rasch_design_matrix(design)
        sol = lmmse_fit(model, Y.flatten(order="F"))
        sol.metadata["path"] = "dense_fallback"
        sol.metadata["reason"] = "unequal prior variances"
        return sol

    sigma2 = design.sigma2_a
    inv = structured_cy_inverse(design)
    a, b, c, d = inv.a, inv.b, inv.c, inv.d

    t = Y.sum(axis=1)  # per-user response sums
    s_i = Y.sum(axis=0)  # per-item response sums
    S = float(Y.sum())

    kappa = np.sqrt(2.0 / np.pi) * sigma2 / np.sqrt(2.0 * sigma2 + 1.0)
    # x_hat = kappa * D^T (C_y^{-1} y) with C_y^{-1} = 1 (x) A + I (x) B.
    ability = kappa * (
        Q * ((c - d) * t + d * S) + (a - c - b + d) * t + (b - d) * S
    )
    diff_block = kappa * (
        (c - d) * S + d * U * S + (a - c + (U - 1.0) * (b - d)) * s_i
    )
    estimate = np.concatenate([ability, diff_block])

    scale = (2.0 / np.pi) * sigma2**2 / (2.0 * sigma2 + 1.0)
    mse_a = sigma2 - scale * Q * (a + (Q - 1.0) * c)
    mse_d = sigma2 - scale * U * (a + (U - 1.0) * b)
    per_component = np.concatenate([np.full(U, mse_a), np.full(Q, mse_d)])

    return LmmseSolution(
        estimate=estimate,
        predicted_mse=float(U * mse_a + Q * mse_d),
        per_component_mse=per_component,
        W=None,
        b=None,
        method="lmmse_kron",
        metadata={"path": "kron"},
    )


def split_estimate(design: RaschDesign, estimate):
    """Split a stacked estimate into (abilities, difficulties).

    The model stacks x = [a; -d], so difficulties are the negated second
    block.
    """
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    if estimate.shape != (design.U + design.Q,):
        raise ValueError("estimate length does not match design")
    return estimate[: design.U].copy(), -estimate[design.U :]


def _known_difficulty_moments(model: KnownDifficultyModel):
    """Sign moments (c, y_mean, e, C_y) for one user with known difficulties."""
    d, x_bar, sigma2 = model.d, model.x_bar, model.sigma2_x
    Q = d.size
    sz = np.sqrt(sigma2 + 1.0)
    cvec = (x_bar - d) / sz
    y_mean = norm_cdf(cvec) - norm_cdf(-cvec)
    saturated = np.abs(cvec) > _SATURATION_C
    y_mean = np.where(saturated, np.sign(cvec) * (1.0 - 1e-16), y_mean)
    e = 2.0 * (sigma2 / sz) * norm_pdf(cvec)

    rho = sigma2 / (sigma2 + 1.0)
    C_y = np.empty((Q, Q))
    if Q > 1:
        iu, ju = np.triu_indices(Q, k=1)
        off = sign_covariance(cvec[iu], cvec[ju], rho, y_mean[iu], y_mean[ju])
        C_y[iu, ju] = off
        C_y[ju, iu] = off
    if np.any(saturated):
        C_y[saturated, :] = 0.0
        C_y[:, saturated] = 0.0
    np.fill_diagonal(C_y, 1.0 - y_mean**2)
    return cvec, y_mean, e, C_y


def known_difficulty_fit(model: KnownDifficultyModel, y):
    """L-MMSE ability estimate for one user against known item difficulties.

    Observes y_i = sign(a - d_i + w_i) with a ~ N(x_bar, sigma2_x).  All
    latent correlations equal sigma2_x / (sigma2_x + 1).  Returns
    (a_hat, predicted_mse); the MSE is data-independent.
    """
    Q = model.d.size
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape != (Q,):
        raise ValueError(f"y has shape {y.shape}, expected ({Q},)")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("y entries must be +1 or -1")

    _, y_mean, e, C_y = _known_difficulty_moments(model)
    rhs = np.column_stack([e, y_mean])
    X, _ = _solve_spd(C_y, rhs)
    w = X[:, 0]
    a_hat = float(w @ y + (model.x_bar - w @ y_mean))
    predicted_mse = float(model.sigma2_x - e @ w)
    return a_hat, predicted_mse


def known_difficulty_predicted_mse(model: KnownDifficultyModel) -> float:
    """Data-independent MSE of the known-difficulty L-MMSE ability estimate."""
    _, _, e, C_y = _known_difficulty_moments(model)
    X, _ = _solve_spd(C_y, e[:, None])
    return float(model.sigma2_x - e @ X[:, 0])
