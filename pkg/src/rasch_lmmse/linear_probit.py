"""Linear MMSE and least-squares estimation for one-bit probit observations.

The observation model is y = sign(D x + m + w) with x ~ N(x_mean, C_x) and
w ~ N(0, I).  Both estimators are linear in y and come with exact,
data-independent MSE expressions, built from the first two moments of the
sign vector (computed via the normal CDF and the bivariate normal CDF).

A smoothed variant y = f_sigma(D x + w) is supported on the zero-mean path,
where the second moment of y follows an arcsine law with sigma^2 added to
the variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .specfun import binorm_cdf, norm_cdf, norm_pdf

# Beyond this, Phi(c) is 1 to double precision and the sign is deterministic.
_SATURATION_C = 37.0

_JITTER_START = 1e-10
_JITTER_MAX = 1e-6

# W = E^T C_y^{-1} is materialized only when N*M stays below this.
DEFAULT_WEIGHT_ENTRIES = 10**7

_CG_RTOL = 1e-10


def _as_float_array(x, name, ndim):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GeneralProbitModel:
    """Probit observation model y = sign(D x + m + w), x ~ N(x_mean, C_x).

    smoothing_sigma > 0 replaces the hard sign by the smoothed sigmoid
    f_sigma; this is only supported with x_mean = 0 and m = 0, where the
    arcsine second-moment formula extends cleanly.
    """

    D: np.ndarray
    m: np.ndarray
    x_mean: np.ndarray
    C_x: np.ndarray
    smoothing_sigma: float = 0.0

    def __post_init__(self):
        if scipy.sparse.issparse(self.D):
            D = scipy.sparse.csr_matrix(self.D, dtype=np.float64)
        else:
            D = _as_float_array(self.D, "D", 2)
        M, N = D.shape
        m = _as_float_array(self.m, "m", 1)
        x_mean = _as_float_array(self.x_mean, "x_mean", 1)
        C_x = _as_float_array(self.C_x, "C_x", 2)
        if m.shape != (M,):
            raise ValueError(f"m has shape {m.shape}, expected ({M},)")
        if x_mean.shape != (N,):
            raise ValueError(f"x_mean has shape {x_mean.shape}, expected ({N},)")
        if C_x.shape != (N, N):
            raise ValueError(f"C_x has shape {C_x.shape}, expected ({N}, {N})")
        if not np.allclose(C_x, C_x.T, rtol=0.0, atol=1e-12):
            raise ValueError("C_x must be symmetric")
        try:
            scipy.linalg.cholesky(C_x, lower=True)
        except scipy.linalg.LinAlgError as err:
            raise ValueError("C_x must be positive definite") from err
        sigma = float(self.smoothing_sigma)
        if sigma < 0:
            raise ValueError("smoothing_sigma must be nonnegative")
        if sigma > 0 and (np.any(x_mean != 0) or np.any(m != 0)):
            raise ValueError(
                "smoothing_sigma > 0 requires x_mean = 0 and m = 0"
            )
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "x_mean", x_mean)
        object.__setattr__(self, "C_x", C_x)
        object.__setattr__(self, "smoothing_sigma", sigma)

    @property
    def num_observations(self):
        return self.D.shape[0]

    @property
    def num_parameters(self):
        return self.D.shape[1]

    def is_zero_mean(self):
        return not (np.any(self.x_mean != 0) or np.any(self.m != 0))


@dataclass(frozen=True)
class LinearizedQuantities:
    """First and second moments of (y, x) under the probit sign model.

    z_mean, C_z describe the latent z = D x + m + w; c is the per-entry
    normalized mean, R the correlation matrix of z, y_mean and C_y the
    moments of the sign vector, and E the cross-covariance factor with
    E[ (y - y_mean) (x - x_mean)^T ] = E.
    """

    z_mean: np.ndarray
    C_z: np.ndarray
    c: np.ndarray
    R: np.ndarray
    y_mean: np.ndarray
    C_y: np.ndarray
    E: np.ndarray


@dataclass(frozen=True)
class LmmseSolution:
    """Result of a linear fit x_hat = W y + b with its predicted MSE.

    predicted_mse is the exact expected squared error summed over
    components (data-independent); it is None when skipped for cost on the
    sparse path.  W and b are None when materializing N x M weights was
    not requested or exceeds the entry budget.
    """

    estimate: np.ndarray
    predicted_mse: float | None
    per_component_mse: np.ndarray | None
    W: np.ndarray | None
    b: np.ndarray | None
    method: str = "lmmse"
    jitter: float = 0.0
    metadata: dict = field(default_factory=dict)


def sign_covariance(c_i, c_j, rho, y_mean_i, y_mean_j):
    """Covariance of sign(z_i), sign(z_j) for standardized means c and corr rho.

    Entry formula 2*(Phi2(c_i, c_j; rho) + Phi2(-c_i, -c_j; rho)) - 1
    - y_mean_i * y_mean_j, vectorized over broadcast inputs.
    """
    joint = binorm_cdf(c_i, c_j, rho) + binorm_cdf(-c_i, -c_j, rho)
    return 2.0 * joint - 1.0 - y_mean_i * y_mean_j


def _arcsine_entry(cz_ij, denom_i, denom_j):
    # Shared with sparse_cy so dense and sparse entries agree bit for bit.
    # The clip guards rounding pushing |argument| past 1 for near-duplicate rows.
    arg = np.clip(cz_ij / (denom_i * denom_j), -1.0, 1.0)
    return (2.0 / np.pi) * np.arcsin(arg)


def _arcsine_diag(cz_diag, sigma):
    # Variance of the (smoothed) sign; exactly 1 - y_mean^2 = 1 for sigma = 0.
    if sigma == 0.0:
        return np.ones_like(cz_diag)
    return (2.0 / np.pi) * np.arcsin(cz_diag / (sigma**2 + cz_diag))


def _symmetrized_cz(D, C_x):
    C_z = D @ C_x @ D.T
    C_z = 0.5 * (C_z + C_z.T)
    C_z[np.diag_indices_from(C_z)] += 1.0
    return C_z


def _linearize_zero_mean(model):
    D, C_x = model.D, model.C_x
    M = D.shape[0]
    C_z = _symmetrized_cz(D, C_x)
    cz_diag = np.diag(C_z).copy()
    sz = np.sqrt(cz_diag)
    R = C_z / np.outer(sz, sz)
    np.fill_diagonal(R, 1.0)
    denom = np.sqrt(model.smoothing_sigma**2 + cz_diag)
    C_y = _arcsine_entry(C_z, denom[:, None], denom[None, :])
    np.fill_diagonal(C_y, _arcsine_diag(cz_diag, model.smoothing_sigma))
    E = np.sqrt(2.0 / np.pi) * (D @ C_x) / denom[:, None]
    zeros = np.zeros(M)
    return LinearizedQuantities(
        z_mean=zeros, C_z=C_z, c=zeros, R=R, y_mean=zeros.copy(), C_y=C_y, E=E
    )


def _linearize_general(model):
    D, C_x = model.D, model.C_x
    M = D.shape[0]
    z_mean = D @ model.x_mean + model.m
    C_z = _symmetrized_cz(D, C_x)
    sz = np.sqrt(np.diag(C_z))
    c = z_mean / sz
    R = C_z / np.outer(sz, sz)
    np.fill_diagonal(R, 1.0)

    y_mean = norm_cdf(c) - norm_cdf(-c)
    saturated = np.abs(c) > _SATURATION_C
    y_mean = np.where(saturated, np.sign(c) * (1.0 - 1e-16), y_mean)

    E = 2.0 * (norm_pdf(c) / sz)[:, None] * (D @ C_x)

    C_y = np.empty((M, M))
    if M > 1:
        iu, ju = np.triu_indices(M, k=1)
        rho = np.clip(R[iu, ju], -1.0, 1.0)
        off = sign_covariance(c[iu], c[ju], rho, y_mean[iu], y_mean[ju])
        C_y[iu, ju] = off
        C_y[ju, iu] = off
    # Saturated entries are near-deterministic: covariance with anything is 0.
    if np.any(saturated):
        C_y[saturated, :] = 0.0
        C_y[:, saturated] = 0.0
    np.fill_diagonal(C_y, 1.0 - y_mean**2)
    return LinearizedQuantities(
        z_mean=z_mean, C_z=C_z, c=c, R=R, y_mean=y_mean, C_y=C_y, E=E
    )


def linearize(model: GeneralProbitModel) -> LinearizedQuantities:
    """Compute the moment quantities that define the linear estimators.

    The zero-mean case (x_mean = 0, m = 0) uses the exact arcsine formula
    for C_y; the general case evaluates the bivariate normal CDF per pair.
    Dense only: C_y is a full M x M matrix.  For sparse designs use
    sparse_cy / lmmse_fit_sparse.
    """
    if scipy.sparse.issparse(model.D):
        raise ValueError(
            "linearize needs a dense design matrix; use lmmse_fit_sparse "
            "or sparse_cy for sparse models"
        )
    if model.is_zero_mean():
        return _linearize_zero_mean(model)
    return _linearize_general(model)


def _solve_spd(A, B):
    """Solve A X = B for symmetric positive semidefinite A with jitter escalation.

    Returns (X, jitter_used).  The jitter is a multiple of the mean diagonal,
    starting at 1e-10 and escalating by 10x up to 1e-6, after which the
    failure is raised with the attempted level.
    """
    scale = float(np.mean(np.diag(A)))
    if scale <= 0:
        scale = 1.0
    jitter = 0.0
    while True:
        try:
            cf = scipy.linalg.cho_factor(A + jitter * scale * np.eye(A.shape[0]))
            return scipy.linalg.cho_solve(cf, B), jitter
        except scipy.linalg.LinAlgError:
            jitter = _JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX:
                raise np.linalg.LinAlgError(
                    "covariance factorization failed even with jitter "
                    f"{_JITTER_MAX:g} * mean(diag)"
                )


def _check_pm_one(y, M):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape != (M,):
        raise ValueError(f"y has shape {y.shape}, expected ({M},)")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("y entries must be +1 or -1")
    return y


def lmmse_fit(
    model: GeneralProbitModel,
    y,
    *,
    lin: LinearizedQuantities | None = None,
    compute_mse: bool = True,
    materialize_weights: bool | None = None,
    weight_entry_budget: int = DEFAULT_WEIGHT_ENTRIES,
) -> LmmseSolution:
    """L-MMSE estimate x_hat = E^T C_y^{-1} (y - y_mean) + x_mean.

    Exact among linear estimators of x from the sign vector y.  Pass a
    precomputed `lin` to amortize the moment computation over repeated
    fits of the same model.
    """
    M, N = model.D.shape
    y = _check_pm_one(y, M)
    if lin is None:
        lin = linearize(model)

    if materialize_weights is None:
        materialize_weights = N * M <= weight_entry_budget

    W = b = None
    jitter = 0.0
    if materialize_weights:
        X, jitter = _solve_spd(lin.C_y, lin.E)  # X = C_y^{-1} E, M x N
        W = X.T
        b = model.x_mean - W @ lin.y_mean
        estimate = W @ y + b
    else:
        v, jitter = _solve_spd(lin.C_y, y - lin.y_mean)
        estimate = lin.E.T @ v + model.x_mean

    predicted_mse = per_component = None
    if compute_mse:
        if not materialize_weights:
            X, jitter = _solve_spd(lin.C_y, lin.E)
        per_component = np.diag(model.C_x) - np.einsum("mk,mk->k", lin.E, X)
        predicted_mse = float(np.sum(per_component))

    return LmmseSolution(
        estimate=estimate,
        predicted_mse=predicted_mse,
        per_component_mse=per_component,
        W=W,
        b=b,
        method="lmmse",
        jitter=jitter,
    )


def lmmse_predicted_mse(model: GeneralProbitModel, *, lin=None):
    """Exact MSE of the L-MMSE estimator: trace(C_x - E^T C_y^{-1} E).

    Data-independent.  Returns (total, per_component).
    """
    if lin is None:
        lin = linearize(model)
    X, _ = _solve_spd(lin.C_y, lin.E)
    per_component = np.diag(model.C_x) - np.einsum("mk,mk->k", lin.E, X)
    return float(np.sum(per_component)), per_component


def ls_fit(model: GeneralProbitModel, y, *, lin=None) -> LmmseSolution:
    """Least-squares estimate x_hat = C_x (E^T E)^{-1} E^T y (zero-mean only).

    Unlike the L-MMSE fit this inverts the forward map without shrinkage,
    so its MSE G C_y G^T - C_x (with G = C_x E^+) can exceed the prior
    variance at low SNR.
    """
    if not model.is_zero_mean():
        raise ValueError("ls_fit requires x_mean = 0 and m = 0")
    M, N = model.D.shape
    y = _check_pm_one(y, M)
    if M < N:
        raise ValueError(f"ls_fit needs M >= N, got M={M}, N={N}")
    if lin is None:
        lin = linearize(model)

    Q, Rtri = scipy.linalg.qr(lin.E, mode="economic")
    rdiag = np.abs(np.diag(Rtri))
    if np.min(rdiag) <= max(M, N) * np.finfo(float).eps * np.max(rdiag):
        raise np.linalg.LinAlgError("E is rank deficient; LS fit undefined")
    # E^+ = R^{-1} Q^T
    pinv_E = scipy.linalg.solve_triangular(Rtri, Q.T)
    G = model.C_x @ pinv_E
    estimate = G @ y

    cov_err = G @ lin.C_y @ G.T - model.C_x
    per_component = np.diag(cov_err).copy()
    predicted_mse = float(np.trace(cov_err))

    return LmmseSolution(
        estimate=estimate,
        predicted_mse=predicted_mse,
        per_component_mse=per_component,
        W=G,
        b=np.zeros(N),
        method="ls",
    )


def sparse_cy(model: GeneralProbitModel) -> scipy.sparse.csr_matrix:
    """Sparse C_y for zero-mean models with diagonal C_x.

    Off-diagonal entries are nonzero only where two rows of D share a
    nonzero coordinate (same user or same item in the Rasch case); all
    other correlations are exactly 0 and arcsin(0) = 0.  Stored values
    match the dense path bit for bit.
    """
    if not model.is_zero_mean():
        raise ValueError("sparse_cy requires x_mean = 0 and m = 0")
    C_x = model.C_x
    if np.any(C_x != np.diag(np.diag(C_x))):
        raise ValueError("sparse_cy requires diagonal C_x")
    prior_var = np.diag(C_x)

    D = scipy.sparse.csr_matrix(model.D)
    # C_z off-diagonals restricted to the shared-coordinate pattern.
    cz = (D.multiply(prior_var[None, :])) @ D.T
    cz = cz.tocsr()
    M = D.shape[0]
    cz_diag = cz.diagonal() + 1.0
    denom = np.sqrt(model.smoothing_sigma**2 + cz_diag)

    coo = cz.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    off = rows != cols
    off_part = scipy.sparse.coo_matrix(
        (
            _arcsine_entry(vals[off], denom[rows[off]], denom[cols[off]]),
            (rows[off], cols[off]),
        ),
        shape=(M, M),
    )
    # The diagonal is set for every row, including rows of D that are all
    # zero (pure-noise observations with unit sign variance).
    diag_part = scipy.sparse.diags(
        _arcsine_diag(cz_diag, model.smoothing_sigma), format="csr"
    )
    return (off_part + diag_part).tocsr()


def lmmse_fit_sparse(
    model: GeneralProbitModel,
    y,
    *,
    compute_mse: bool = False,
) -> LmmseSolution:
    """L-MMSE fit using the sparse C_y and conjugate gradients.

    Requires the zero-mean, diagonal-prior setting.  predicted_mse is
    skipped by default: it would take one CG solve per parameter.
    """
    M, N = model.D.shape
    y = _check_pm_one(y, M)
    C_y = sparse_cy(model)
    prior_var = np.diag(model.C_x)
    D = scipy.sparse.csr_matrix(model.D)
    cz_diag = np.asarray((D.multiply(D)) @ prior_var).ravel() + 1.0
    denom = np.sqrt(model.smoothing_sigma**2 + cz_diag)
    # E^T v = sqrt(2/pi) * C_x D^T (v / denom) without forming E densely.
    scale = np.sqrt(2.0 / np.pi)

    def Et(v):
        return scale * prior_var * (D.T @ (v / denom))

    v, info = scipy.sparse.linalg.cg(C_y, y, rtol=_CG_RTOL, atol=0.0, maxiter=50 * M)
    if info != 0:
        raise np.linalg.LinAlgError(f"conjugate gradients failed to converge (info={info})")
    estimate = Et(v)

    predicted_mse = per_component = None
    if compute_mse:
        # One CG solve per parameter; only sensible for small N.
        D_csc = D.tocsc()
        per_component = np.empty(N)
        for k in range(N):
            dk = np.zeros(M)
            col = D_csc[:, k].tocoo()
            dk[col.row] = col.data
            ek = scale * prior_var[k] * dk / denom
            sol, info = scipy.sparse.linalg.cg(
                C_y, ek, rtol=_CG_RTOL, atol=0.0, maxiter=50 * M
            )
            if info != 0:
                raise np.linalg.LinAlgError(
                    f"conjugate gradients failed to converge (info={info})"
                )
            per_component[k] = prior_var[k] - ek @ sol
        predicted_mse = float(np.sum(per_component))

    return LmmseSolution(
        estimate=estimate,
        predicted_mse=predicted_mse,
        per_component_mse=per_component,
        W=None,
        b=None,
        method="lmmse_sparse",
    )
