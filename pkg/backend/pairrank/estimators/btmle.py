"""
Bradley-Terry maximum likelihood.

Ratings are log-abilities with player 0 fixed at theta_0 = 0. The fit is a
damped Newton iteration on the concave binomial log-likelihood; the
curvature at the optimum gives the covariance of the free parameters, and
the anchor has zero variance by construction.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _graph_components
from scipy.special import expit, log_expit

from pairrank.errors import DisconnectedError, DivergentError, InputError, NotConvergedError
from pairrank.models.comparisons import (
    ComparisonDataset,
    PlayerId,
    connected_components,
    match_totals,
    win_totals,
)
from pairrank.schemas import FitSummary, SolverOptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    labels: Tuple[str, ...]
    theta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    grad_norm: float

    @property
    def p_plus_1(self) -> int:
        return int(self.theta.shape[0])

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.theta)

    @property
    def se_full(self) -> np.ndarray:
        """Standard errors for all players, 0 for the anchor."""
        return np.concatenate([[0.0], self.se])

    @property
    def cov_full(self) -> np.ndarray:
        """(p+1)x(p+1) covariance with an all-zero anchor row and column."""
        full = np.zeros((self.p_plus_1, self.p_plus_1))
        full[1:, 1:] = self.cov
        return full

    def summary(self) -> FitSummary:
        return FitSummary(
            labels=list(self.labels),
            theta=self.theta.tolist(),
            se=self.se.tolist(),
            loglik=self.loglik,
            converged=self.converged,
        )


def win_probability(theta_i, theta_j):
    """P(i beats j) = 1 / (1 + exp(-(theta_i - theta_j)))."""
    return expit(np.subtract(theta_i, theta_j))


def _check_theta(theta: np.ndarray, d: ComparisonDataset) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d.p_plus_1,):
        raise InputError(f"theta has shape {theta.shape}, expected ({d.p_plus_1},)")
    return theta


def log_likelihood(theta: np.ndarray, d: ComparisonDataset) -> float:
    """Binomial log-likelihood without the constant binomial-coefficient term."""
    theta = _check_theta(theta, d)
    if d.n_pairs == 0:
        return 0.0
    diff = theta[d.i] - theta[d.j]
    return float(np.sum(d.w_ij * log_expit(diff) + (d.n_ij - d.w_ij) * log_expit(-diff)))


def gradient(theta: np.ndarray, d: ComparisonDataset) -> np.ndarray:
    """Gradient of the log-likelihood with respect to all p+1 ratings."""
    theta = _check_theta(theta, d)
    resid = d.w_ij - d.n_ij * expit(theta[d.i] - theta[d.j])
    g = np.bincount(d.i, weights=resid, minlength=d.p_plus_1)
    g -= np.bincount(d.j, weights=resid, minlength=d.p_plus_1)
    return g


def hessian(theta: np.ndarray, d: ComparisonDataset) -> np.ndarray:
    """Hessian of the log-likelihood (negative semidefinite, kernel spanned by ones)."""
    theta = _check_theta(theta, d)
    pi = expit(theta[d.i] - theta[d.j])
    weight = d.n_ij * pi * (1.0 - pi)
    h = np.zeros((d.p_plus_1, d.p_plus_1))
    np.add.at(h, (d.i, d.j), weight)
    np.add.at(h, (d.j, d.i), weight)
    h[np.diag_indices_from(h)] = -h.sum(axis=1)
    return h


def separated_players(d: ComparisonDataset) -> np.ndarray:
    """Players who never lost or never won a match they played."""
    wins = win_totals(d)
    played = match_totals(d)
    return np.flatnonzero((played > 0) & ((wins == 0) | (wins == played)))


def unbounded_players(d: ComparisonDataset) -> np.ndarray:
    """
    Players whose rating has no finite MLE given the others.

    Empty iff the directed win graph (an edge i -> j when i beat j at least
    once) is strongly connected; otherwise everyone outside its largest
    strong component.
    """
    won = d.w_ij > 0
    lost = d.w_ij < d.n_ij
    rows = np.concatenate([d.i[won], d.j[lost]])
    cols = np.concatenate([d.j[won], d.i[lost]])
    graph = coo_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(d.p_plus_1, d.p_plus_1)).tocsr()
    count, membership = _graph_components(graph, directed=True, connection="strong")
    if count <= 1:
        return np.zeros(0, dtype=np.int64)
    main = int(np.argmax(np.bincount(membership)))
    return np.flatnonzero(membership != main)


def fit_mle(
    d: ComparisonDataset,
    opts: Optional[SolverOptions] = None,
    theta0: Optional[np.ndarray] = None,
) -> FitResult:
    opts = opts or SolverOptions()
    components = connected_components(d)
    if len(components) > 1:
        raise DisconnectedError(components)
    if opts.strict:
        culprits = separated_players(d)
        if len(culprits):
            raise DivergentError(culprits)

    p = d.p_plus_1
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    theta -= theta[0]
    ll = log_likelihood(theta, d)
    g = gradient(theta, d)[1:]
    grad_norm = float(np.max(np.abs(g))) if p > 1 else 0.0
    # float64 round-off floor on a gradient that sums n terms
    floor = 1e3 * np.finfo(float).eps * max(d.n, 1)
    iterations = 0
    stalled = False

    while grad_norm > opts.tol and iterations < opts.max_iter:
        iterations += 1
        neg_h = -hessian(theta, d)[1:, 1:]
        try:
            step = np.linalg.solve(neg_h, g)
        except np.linalg.LinAlgError:
            raise DivergentError(
                _drifting(theta, opts.theta_cap, d), "Hessian became singular; ratings diverge"
            ) from None

        accepted = _line_search(theta, step, ll, grad_norm, d)
        if accepted is None:
            stalled = True
            break
        theta, ll, g, t = accepted
        grad_norm = float(np.max(np.abs(g)))
        logger.debug("newton iter %d: loglik=%.10g grad=%.3e step=%g", iterations, ll, grad_norm, t)

        if np.max(np.abs(theta)) > opts.theta_cap:
            raise DivergentError(_drifting(theta, opts.theta_cap, d))

    converged = grad_norm <= opts.tol or (stalled and grad_norm <= max(opts.tol, floor))
    # a small gradient is also reached by ratings drifting off to infinity
    culprits = unbounded_players(d)
    if len(culprits):
        raise DivergentError(separated_players(d) if len(separated_players(d)) else culprits)
    if not converged:
        raise NotConvergedError(iterations, grad_norm, what="Newton")

    neg_h = -hessian(theta, d)[1:, 1:]
    try:
        cov = np.linalg.inv(neg_h) if p > 1 else np.zeros((0, 0))
    except np.linalg.LinAlgError:
        raise DivergentError(separated_players(d), "information matrix is singular") from None
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    theta[0] = 0.0
    return FitResult(
        labels=d.labels,
        theta=theta,
        se=se,
        cov=cov,
        loglik=ll,
        iterations=iterations,
        converged=True,
        grad_norm=grad_norm,
    )


def _line_search(theta, step, ll, grad_norm, d):
    """
    Halve the Newton step until the log-likelihood rises.

    Near the optimum the change in log-likelihood falls below round-off, so a
    step that leaves it flat within a few ulps is taken when it shrinks the
    gradient.
    """
    slack = 4.0 * np.finfo(float).eps * max(abs(ll), 1.0)
    t = 1.0
    while t >= 1e-10:
        candidate = theta.copy()
        candidate[1:] += t * step
        cand_ll = log_likelihood(candidate, d)
        if cand_ll >= ll - slack:
            cand_g = gradient(candidate, d)[1:]
            if cand_ll > ll or float(np.max(np.abs(cand_g))) < grad_norm:
                return candidate, cand_ll, cand_g, t
        t *= 0.5
    return None


def _drifting(theta: np.ndarray, cap: float, d: ComparisonDataset) -> np.ndarray:
    culprits = separated_players(d)
    if len(culprits):
        return culprits
    return np.flatnonzero(np.abs(theta) >= 0.5 * cap)


def pairwise_covariance(f: FitResult, i: Union[int, PlayerId], j: Union[int, PlayerId]) -> np.ndarray:
    """2x2 covariance block of (theta_i, theta_j); anchor rows are exactly zero."""
    i, j = (k.index if isinstance(k, PlayerId) else int(k) for k in (i, j))
    for k in (i, j):
        if not 0 <= k < f.p_plus_1:
            raise InputError(f"player index {k} out of range")
    if i == j:
        raise InputError("pairwise covariance needs two distinct players")

    def entry(a: int, b: int) -> float:
        if a == 0 or b == 0:
            return 0.0
        return float(f.cov[a - 1, b - 1])

    return np.array([[entry(i, i), entry(i, j)], [entry(j, i), entry(j, j)]])
