"""
Kiefer-Wolfowitz NPMLE of the ability distribution and the empirical Bayes
rules built on it.

The MLE ratings are treated as independent Gaussian observations
theta_hat_i ~ N(theta_i, sigma_hat_i^2) with theta_i ~ G, and G is estimated
on a fixed grid. Everything runs on the log-ability scale; ranks are
unchanged by the exp transform.

The anchor player (theta_0 = 0 exactly) is left out of the NPMLE fit and
keeps theta_0 = 0 as its posterior mean. In the rank integrals it is an
observation with variance 1e-10, the same floor that regularizes singular
2x2 covariance blocks.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import nnls
from scipy.special import logsumexp, softmax
from scipy.stats import norm

from pairrank.errors import InputError, NotConvergedError
from pairrank.estimators.btmle import FitResult
from pairrank.schemas import GridSpec, NpmleOptions, PosteriorOptions

logger = logging.getLogger(__name__)

ANCHOR_VARIANCE = 1e-10
SCALE_NOTE = "empirical Bayes on log-abilities (theta); ranks are scale invariant"


@dataclass(frozen=True)
class MixingDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
            raise InputError("atoms and weights must be nonempty vectors of equal length")
        if np.any(np.diff(atoms) <= 0):
            raise InputError("atoms must be strictly increasing")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InputError("weights must be a probability vector")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, mu: float) -> "MixingDistribution":
        return cls(np.array([mu]), np.array([1.0]))

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        keep = self.weights > 0
        return self.atoms[keep], self.weights[keep]

    @property
    def mean(self) -> float:
        return float(self.atoms @ self.weights)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"atom": self.atoms, "weight": self.weights})


@dataclass(frozen=True)
class GaussianObservations:
    theta_hat: np.ndarray
    sigma_hat: np.ndarray

    def __post_init__(self):
        theta_hat = np.atleast_1d(np.asarray(self.theta_hat, dtype=float))
        sigma_hat = np.atleast_1d(np.asarray(self.sigma_hat, dtype=float))
        if theta_hat.shape != sigma_hat.shape:
            raise InputError("theta_hat and sigma_hat differ in length")
        if np.any(sigma_hat <= 0) or not np.all(np.isfinite(theta_hat)):
            raise InputError("sigma_hat must be positive and theta_hat finite")
        object.__setattr__(self, "theta_hat", theta_hat)
        object.__setattr__(self, "sigma_hat", sigma_hat)

    @property
    def p(self) -> int:
        return int(self.theta_hat.shape[0])

    @classmethod
    def from_fit(cls, fit: FitResult) -> "GaussianObservations":
        """The p free ratings and their standard errors."""
        return cls(fit.theta[1:], fit.se)


@dataclass(frozen=True)
class PosteriorSummary:
    labels: Tuple[str, ...]
    theta_hat: np.ndarray
    se: np.ndarray
    post_mean: np.ndarray
    post_mean_smoothed: np.ndarray
    bandwidth: float
    post_rank: np.ndarray
    tie_rule: str
    metadata: Dict[str, str] = field(default_factory=lambda: {"scale": SCALE_NOTE})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "label": list(self.labels),
                "theta_hat": self.theta_hat,
                "se": self.se,
                "post_mean": self.post_mean,
                "post_mean_smoothed": self.post_mean_smoothed,
                "post_rank": self.post_rank,
            }
        )


def make_grid(obs: GaussianObservations, grid: Optional[GridSpec] = None) -> np.ndarray:
    grid = grid or GridSpec()
    if grid.lo is not None:
        return np.linspace(grid.lo, grid.hi, grid.n_atoms)
    pad = grid.span * float(obs.sigma_hat.max())
    return np.linspace(obs.theta_hat.min() - pad, obs.theta_hat.max() + pad, grid.n_atoms)


def _log_kernel(theta_hat: np.ndarray, sigma_hat: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    """log phi_sigma_i(theta_hat_i - t_k), shape (p, m)."""
    return norm.logpdf(theta_hat[:, None], loc=atoms[None, :], scale=sigma_hat[:, None])


def _scaled_kernel(obs: GaussianObservations, atoms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-scaled likelihood matrix (each row max 1) and the per-row log scale."""
    logk = _log_kernel(obs.theta_hat, obs.sigma_hat, atoms)
    scale = logk.max(axis=1)
    return np.exp(logk - scale[:, None]), scale


def marginal_density(g: MixingDistribution, theta_hat, sigma_hat):
    """f_G(theta_hat) = sum_k g_k phi_sigma(theta_hat - t_k)."""
    atoms, weights = g.support()
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    sd = np.broadcast_to(np.asarray(sigma_hat, dtype=float), th.shape)
    if np.any(sd <= 0):
        raise InputError("sigma_hat must be positive")
    dens = np.exp(logsumexp(_log_kernel(th, sd, atoms) + np.log(weights)[None, :], axis=1))
    return float(dens[0]) if np.ndim(theta_hat) == 0 else dens


def mixture_log_likelihood(g: MixingDistribution, obs: GaussianObservations) -> float:
    atoms, weights = g.support()
    logk = _log_kernel(obs.theta_hat, obs.sigma_hat, atoms)
    return float(np.sum(logsumexp(logk + np.log(weights)[None, :], axis=1)))


def gradient_functional(g: MixingDistribution, obs: GaussianObservations) -> np.ndarray:
    """D(t) = sum_i phi_sigma_i(theta_hat_i - t) / f_G(theta_hat_i) at every atom of g."""
    A, _ = _scaled_kernel(obs, g.atoms)
    return A.T @ (1.0 / (A @ g.weights))


def kkt_gap(g: MixingDistribution, obs: GaussianObservations) -> float:
    """max_t D(t) / p - 1; zero at the NPMLE, and D(t) = p on its support."""
    return float(gradient_functional(g, obs).max() / obs.p - 1.0)


def fit_npmle(
    obs: GaussianObservations,
    grid: Optional[GridSpec] = None,
    opts: Optional[NpmleOptions] = None,
) -> MixingDistribution:
    """Maximize sum_i log f_G(theta_hat_i) over G supported on a fixed grid."""
    opts = opts or NpmleOptions()
    if obs.p < 1:
        raise InputError("the NPMLE needs at least one observation")
    atoms = make_grid(obs, grid)
    A, _ = _scaled_kernel(obs, atoms)
    if opts.method == "em":
        weights, iterations, gap = _fit_em(A, opts.tol, opts.em_max_iter)
    else:
        weights, iterations, gap = _fit_cnm(A, opts.tol, opts.max_iter)
    if gap > opts.tol:
        raise NotConvergedError(iterations, gap, what=f"NPMLE ({opts.method})")
    logger.debug("NPMLE %s: %d iterations, KKT gap %.2e, %d atoms", opts.method, iterations, gap, int(np.sum(weights > 0)))
    return MixingDistribution(atoms, weights / weights.sum())


def _fit_em(A: np.ndarray, tol: float, max_iter: int) -> Tuple[np.ndarray, int, float]:
    p, m = A.shape
    w = np.full(m, 1.0 / m)
    gap = np.inf
    for iteration in range(1, max_iter + 1):
        D = A.T @ (1.0 / (A @ w))
        gap = D.max() / p - 1.0
        if gap <= tol:
            return w, iteration, gap
        w = w * D / p
        w /= w.sum()
    return w, max_iter, gap


def _fit_cnm(A: np.ndarray, tol: float, max_iter: int) -> Tuple[np.ndarray, int, float]:
    """
    Constrained Newton method with support reduction.

    Each step adds the local maxima of D to the support, solves the quadratic
    model  min ||S v - 2||^2, v >= 0, sum(v) = 1  with S = A / f by NNLS (the
    sum constraint as a heavily weighted extra row), then backtracks along
    the segment to the new weights.
    """
    p, m = A.shape
    w = np.full(m, 1.0 / m)
    f = A @ w
    ll = float(np.sum(np.log(f)))
    gap = np.inf
    for iteration in range(1, max_iter + 1):
        D = A.T @ (1.0 / f)
        gap = D.max() / p - 1.0
        if gap <= tol:
            return w, iteration, gap
        padded = np.concatenate([[-np.inf], D, [-np.inf]])
        peaks = (D >= padded[:-2]) & (D >= padded[2:]) & (D > p)
        idx = np.flatnonzero((w > 0) | peaks)

        S = A[:, idx] / f[:, None]
        heavy = 1e4 * np.sqrt(p)
        lhs = np.vstack([S, np.full((1, idx.size), heavy)])
        rhs = np.concatenate([np.full(p, 2.0), [heavy]])
        v, _ = nnls(lhs, rhs, maxiter=50 * idx.size)
        if v.sum() <= 0:
            break
        target = np.zeros(m)
        target[idx] = v / v.sum()

        direction = target - w
        slope = float(D @ direction)
        t = 1.0
        while t > 1e-12:
            cand = w + t * direction
            f_cand = A @ cand
            if np.all(f_cand > 0):
                ll_cand = float(np.sum(np.log(f_cand)))
                if ll_cand >= ll + t * slope / 3.0:
                    break
            t *= 0.5
        else:
            break
        cand[cand < 1e-14 * cand.max()] = 0.0
        w = cand / cand.sum()
        f = A @ w
        ll = float(np.sum(np.log(f)))
    else:
        D = A.T @ (1.0 / f)
        gap = D.max() / p - 1.0
        return w, max_iter, gap
    # stalled: finish with EM, which cannot decrease the likelihood
    return _fit_em_from(A, w, tol, 20000, iteration)


def _fit_em_from(A: np.ndarray, w: np.ndarray, tol: float, max_iter: int, start: int) -> Tuple[np.ndarray, int, float]:
    p = A.shape[0]
    gap = np.inf
    for iteration in range(max_iter):
        D = A.T @ (1.0 / (A @ w))
        gap = D.max() / p - 1.0
        if gap <= tol:
            break
        w = w * D / p
        w /= w.sum()
    return w, start + iteration, gap


def _posterior_weights(g: MixingDistribution, theta_hat: np.ndarray, sigma_hat: np.ndarray):
    atoms, weights = g.support()
    logpost = _log_kernel(theta_hat, sigma_hat, atoms) + np.log(weights)[None, :]
    return atoms, softmax(logpost, axis=1)


def posterior_mean(g: MixingDistribution, theta_hat, sigma_hat):
    """E[theta | theta_hat] under prior g; a convex combination of the atoms."""
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    sd = np.broadcast_to(np.asarray(sigma_hat, dtype=float), th.shape)
    if np.any(sd <= 0):
        raise InputError("sigma_hat must be positive")
    atoms, post = _posterior_weights(g, th, sd)
    means = post @ atoms
    return float(means[0]) if np.ndim(theta_hat) == 0 else means


def default_bandwidth(obs: GaussianObservations) -> float:
    """Silverman's rule 1.06 * sd * p^(-1/5); falls back to the mean se when sd is 0."""
    spread = float(np.std(obs.theta_hat, ddof=1)) if obs.p > 1 else 0.0
    if spread <= 0:
        spread = float(obs.sigma_hat.mean())
    return 1.06 * spread * obs.p ** (-0.2)


def smoothed_posterior_mean(g: MixingDistribution, obs: GaussianObservations, bandwidth: float) -> np.ndarray:
    """
    Posterior means when each atom is spread into a N(t_k, h^2) bump.

    Given atom k the posterior is Gaussian with mean t_k + h^2/(s^2+h^2) *
    (theta_hat - t_k), and atoms are weighted with kernel variance s^2 + h^2.
    """
    if bandwidth <= 0:
        raise InputError("bandwidth must be positive")
    total_sd = np.sqrt(obs.sigma_hat ** 2 + bandwidth ** 2)
    atoms, post = _posterior_weights(g, obs.theta_hat, total_sd)
    shrink = bandwidth ** 2 / total_sd ** 2
    conditional = atoms[None, :] + shrink[:, None] * (obs.theta_hat[:, None] - atoms[None, :])
    return np.sum(post * conditional, axis=1)


def smooth_mixing(g: MixingDistribution, bandwidth: float) -> MixingDistribution:
    """g convolved with N(0, h^2) and re-discretized on its own atoms."""
    if bandwidth <= 0:
        raise InputError("bandwidth must be positive")
    kernel = norm.pdf(g.atoms[:, None], loc=g.atoms[None, :], scale=bandwidth)
    weights = kernel @ g.weights
    return MixingDistribution(g.atoms, weights / weights.sum())


def _rank_chunk(
    pairs: np.ndarray,
    theta: np.ndarray,
    cov: np.ndarray,
    atoms: np.ndarray,
    log_w: np.ndarray,
    tie_rule: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """P(alpha_i >= alpha_j) and P(alpha_j >= alpha_i) for a block of pairs."""
    i, j = pairs[:, 0], pairs[:, 1]
    vi, vj, c = cov[i, i].copy(), cov[j, j].copy(), cov[i, j]
    det = vi * vj - c * c
    singular = det <= 0
    vi[singular] += ANCHOR_VARIANCE
    vj[singular] += ANCHOR_VARIANCE
    det = vi * vj - c * c

    dx = (theta[i][:, None] - atoms[None, :])[:, :, None]
    dy = (theta[j][:, None] - atoms[None, :])[:, None, :]
    quad = (vj[:, None, None] * dx ** 2 - 2.0 * c[:, None, None] * dx * dy + vi[:, None, None] * dy ** 2)
    logw = log_w[None, :, None] + log_w[None, None, :] - 0.5 * quad / det[:, None, None]
    logw -= logw.max(axis=(1, 2), keepdims=True)
    weight = np.exp(logw)
    total = weight.sum(axis=(1, 2))

    greater = (atoms[:, None] > atoms[None, :]).astype(float)
    tied = np.eye(atoms.size)
    tie_share = 1.0 if tie_rule == "weak" else 0.5
    i_wins = greater + tie_share * tied
    j_wins = greater.T + tie_share * tied
    p_ij = np.einsum("pkl,kl->p", weight, i_wins) / total
    p_ji = np.einsum("pkl,kl->p", weight, j_wins) / total
    return p_ij, p_ji


def posterior_mean_ranks(
    g: MixingDistribution,
    fit: FitResult,
    tie_rule: str = "weak",
    threads: int = 1,
) -> np.ndarray:
    """
    R_i = sum_{j != i} P(alpha_i >= alpha_j | data) for every player.

    Each pairwise probability is a ratio of double sums over the atoms of g
    weighted by the bivariate Gaussian likelihood of (theta_hat_i, theta_hat_j)
    with the MLE covariance block. Under the weak rule shared atoms count
    for both players; the half rule splits them and makes sum(R) = P(P-1)/2.
    """
    if tie_rule not in ("weak", "half"):
        raise InputError(f"unknown tie rule {tie_rule!r}")
    size = fit.p_plus_1
    ranks = np.zeros(size)
    if size < 2:
        return ranks
    atoms, weights = g.support()
    log_w = np.log(weights)
    cov = fit.cov_full
    a, b = np.triu_indices(size, k=1)
    pairs = np.column_stack([a, b])
    per_chunk = max(1, int(4_000_000 // max(atoms.size ** 2, 1)))
    chunks: List[np.ndarray] = [pairs[s : s + per_chunk] for s in range(0, len(pairs), per_chunk)]

    def work(chunk: np.ndarray):
        return _rank_chunk(chunk, fit.theta, cov, atoms, log_w, tie_rule)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(chunk) for chunk in chunks]

    for chunk, (p_ij, p_ji) in zip(chunks, results):
        np.add.at(ranks, chunk[:, 0], p_ij)
        np.add.at(ranks, chunk[:, 1], p_ji)
    return ranks


def posterior_summary(
    fit: FitResult,
    grid: Optional[GridSpec] = None,
    npmle_opts: Optional[NpmleOptions] = None,
    opts: Optional[PosteriorOptions] = None,
) -> Tuple[PosteriorSummary, MixingDistribution]:
    """Fit G to the free ratings and compute KWPM, KWPMs and KWPR for all players."""
    opts = opts or PosteriorOptions()
    obs = GaussianObservations.from_fit(fit)
    g = fit_npmle(obs, grid, npmle_opts)
    bandwidth = opts.bandwidth or default_bandwidth(obs)

    # the anchor's rating is exact, so its posterior mean is theta_0 = 0
    post_mean = np.concatenate([[0.0], posterior_mean(g, obs.theta_hat, obs.sigma_hat)])
    post_smoothed = np.concatenate([[0.0], smoothed_posterior_mean(g, obs, bandwidth)])
    prior = smooth_mixing(g, bandwidth) if opts.smoothed_prior else g
    post_rank = posterior_mean_ranks(prior, fit, opts.tie_rule, opts.threads)

    summary = PosteriorSummary(
        labels=fit.labels,
        theta_hat=fit.theta,
        se=fit.se_full,
        post_mean=np.asarray(post_mean),
        post_mean_smoothed=post_smoothed,
        bandwidth=bandwidth,
        post_rank=post_rank,
        tie_rule=opts.tie_rule,
        metadata={"scale": SCALE_NOTE, "rank_prior": "smoothed" if opts.smoothed_prior else "raw"},
    )
    return summary, g
