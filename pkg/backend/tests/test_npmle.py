import numpy as np
import pytest
from scipy.stats import norm

from pairrank.errors import InputError
from pairrank.estimators.btmle import FitResult, fit_mle
from pairrank.estimators.npmle import (
    ANCHOR_VARIANCE,
    GaussianObservations,
    MixingDistribution,
    default_bandwidth,
    fit_npmle,
    kkt_gap,
    make_grid,
    marginal_density,
    mixture_log_likelihood,
    posterior_mean,
    posterior_mean_ranks,
    posterior_summary,
    smooth_mixing,
    smoothed_posterior_mean,
)
from pairrank.schemas import GridSpec, NpmleOptions, PosteriorOptions

GRID = GridSpec(n_atoms=301, lo=-6.0, hi=6.0)


def two_point_problem(rng, p=200):
    truth = MixingDistribution(np.array([-2.0, 2.0]), np.array([0.5, 0.5]))
    theta = rng.choice(truth.atoms, size=p)
    sigma = rng.uniform(0.5, 1.5, size=p)
    return truth, GaussianObservations(theta + sigma * rng.standard_normal(p), sigma)


def hand_fit(theta, cov) -> FitResult:
    theta = np.asarray(theta, dtype=float)
    cov = np.asarray(cov, dtype=float)
    return FitResult(
        labels=tuple(str(k) for k in range(theta.shape[0])),
        theta=theta,
        se=np.sqrt(np.diag(cov)),
        cov=cov,
        loglik=0.0,
        iterations=0,
        converged=True,
        grad_norm=0.0,
    )


def enumerate_ranks(g, fit, tie_rule):
    """Posterior mean ranks by direct summation over pairs of atoms."""
    atoms, weights = g.support()
    full = fit.cov_full
    share = 1.0 if tie_rule == "weak" else 0.5
    ranks = np.zeros(fit.p_plus_1)
    for i in range(fit.p_plus_1):
        for j in range(fit.p_plus_1):
            if i == j:
                continue
            block = full[np.ix_([i, j], [i, j])].copy()
            if np.linalg.det(block) <= 0:
                block[np.diag_indices(2)] += ANCHOR_VARIANCE
            inverse = np.linalg.inv(block)
            num = den = 0.0
            for tk, wk in zip(atoms, weights):
                for tl, wl in zip(atoms, weights):
                    r = np.array([fit.theta[i] - tk, fit.theta[j] - tl])
                    like = wk * wl * np.exp(-0.5 * r @ inverse @ r)
                    den += like
                    if tk > tl:
                        num += like
                    elif tk == tl:
                        num += share * like
            ranks[i] += num / den
    return ranks


class TestMixingDistribution:
    def test_rejects_bad_weights(self):
        with pytest.raises(InputError):
            MixingDistribution(np.array([0.0, 1.0]), np.array([0.7, 0.7]))
        with pytest.raises(InputError):
            MixingDistribution(np.array([1.0, 0.0]), np.array([0.5, 0.5]))

    def test_marginal_of_point_mass_is_normal(self):
        g = MixingDistribution.point_mass(1.0)
        assert marginal_density(g, 0.3, 0.7) == pytest.approx(norm.pdf(0.3, 1.0, 0.7))

    def test_grid_spans_three_standard_errors(self):
        obs = GaussianObservations(np.array([-1.0, 2.0]), np.array([0.5, 1.0]))
        grid = make_grid(obs)
        assert grid.shape == (301,)
        assert grid[0] == pytest.approx(-4.0)
        assert grid[-1] == pytest.approx(5.0)


class TestFitNpmle:
    def test_kkt_and_likelihood_dominance(self, rng):
        for _ in range(10):
            truth, obs = two_point_problem(rng)
            g = fit_npmle(obs, GRID)
            assert kkt_gap(g, obs) <= 1e-6
            best = mixture_log_likelihood(g, obs)
            assert best >= mixture_log_likelihood(truth, obs) - 1e-3
            for _ in range(10):
                candidate = MixingDistribution(g.atoms, rng.dirichlet(np.full(g.atoms.size, 0.2)))
                assert best >= mixture_log_likelihood(candidate, obs) - 1e-3

    def test_em_agrees_with_cnm(self, rng):
        _, obs = two_point_problem(rng, p=60)
        coarse = GridSpec(n_atoms=81, lo=-6.0, hi=6.0)
        cnm = fit_npmle(obs, coarse)
        em = fit_npmle(obs, coarse, NpmleOptions(method="em", tol=1e-4))
        assert mixture_log_likelihood(em, obs) == pytest.approx(mixture_log_likelihood(cnm, obs), abs=60 * 1e-4)

    def test_identical_observations(self):
        obs = GaussianObservations(np.zeros(5), np.ones(5))
        g = fit_npmle(obs)
        assert g.mean == pytest.approx(0.0, abs=1e-3)
        assert posterior_mean(g, 0.0, 1.0) == pytest.approx(0.0, abs=1e-3)


class TestPosteriorMeans:
    def test_point_mass_prior(self):
        g = MixingDistribution.point_mass(0.4)
        np.testing.assert_allclose(posterior_mean(g, np.array([-3.0, 5.0]), 1.0), [0.4, 0.4])

    def test_two_atom_closed_form(self):
        g = MixingDistribution(np.array([-1.0, 1.0]), np.array([0.3, 0.7]))
        x, s = 0.2, 0.8
        lo, hi = 0.3 * norm.pdf(x, -1.0, s), 0.7 * norm.pdf(x, 1.0, s)
        assert posterior_mean(g, x, s) == pytest.approx((hi - lo) / (hi + lo))

    def test_monotone_under_equal_variance(self, rng):
        for _ in range(25):
            theta_hat = rng.normal(0.0, 1.5, size=30)
            obs = GaussianObservations(theta_hat, np.full(30, 0.6))
            g = fit_npmle(obs)
            means = posterior_mean(g, obs.theta_hat, obs.sigma_hat)
            ordered = means[np.argsort(theta_hat)]
            assert np.all(np.diff(ordered) >= -1e-10)

    def test_smoothed_point_mass(self):
        g = MixingDistribution.point_mass(1.0)
        obs = GaussianObservations(np.array([3.0]), np.array([1.0]))
        h = 0.5
        expected = 1.0 + h**2 / (1.0 + h**2) * 2.0
        np.testing.assert_allclose(smoothed_posterior_mean(g, obs, h), [expected])

    def test_smoothed_approaches_raw_as_bandwidth_vanishes(self, rng):
        _, obs = two_point_problem(rng, p=40)
        g = fit_npmle(obs, GRID)
        np.testing.assert_allclose(
            smoothed_posterior_mean(g, obs, 1e-6), posterior_mean(g, obs.theta_hat, obs.sigma_hat), atol=1e-6
        )
        with pytest.raises(InputError):
            smoothed_posterior_mean(g, obs, 0.0)

    def test_default_bandwidth(self):
        obs = GaussianObservations(np.array([0.0, 1.0, 2.0, 3.0]), np.full(4, 0.5))
        expected = 1.06 * np.std(obs.theta_hat, ddof=1) * 4 ** (-0.2)
        assert default_bandwidth(obs) == pytest.approx(expected)
        flat = GaussianObservations(np.zeros(4), np.full(4, 0.5))
        assert default_bandwidth(flat) == pytest.approx(1.06 * 0.5 * 4 ** (-0.2))

    def test_smooth_mixing_keeps_atoms(self):
        g = MixingDistribution(np.linspace(-2, 2, 41), np.eye(41)[20])
        smooth = smooth_mixing(g, 0.3)
        np.testing.assert_array_equal(smooth.atoms, g.atoms)
        assert smooth.weights.sum() == pytest.approx(1.0)
        assert smooth.mean == pytest.approx(0.0, abs=1e-12)
        assert np.count_nonzero(smooth.weights) > 1


class TestPosteriorMeanRanks:
    @pytest.mark.parametrize("tie_rule", ["weak", "half"])
    def test_matches_enumeration(self, rng, tie_rule):
        for _ in range(5):
            atoms = np.array([-1.0, 0.0, 0.5, 1.2])
            g = MixingDistribution(atoms, rng.dirichlet(np.ones(4)))
            a = rng.uniform(0.05, 0.3, size=2)
            c = 0.5 * np.sqrt(a[0] * a[1]) * rng.uniform(-1, 1)
            fit = hand_fit([0.0, rng.normal(), rng.normal()], [[a[0], c], [c, a[1]]])
            np.testing.assert_allclose(
                posterior_mean_ranks(g, fit, tie_rule), enumerate_ranks(g, fit, tie_rule), atol=1e-10
            )

    def test_half_rule_ranks_sum_to_pair_count(self, three_players):
        fit = fit_mle(three_players)
        g = MixingDistribution(np.array([-0.5, 0.0, 0.5]), np.array([0.2, 0.5, 0.3]))
        assert posterior_mean_ranks(g, fit, "half").sum() == pytest.approx(3.0)

    def test_threads_do_not_change_result(self, dominant_dataset):
        fit = fit_mle(dominant_dataset)
        g = smooth_mixing(fit_npmle(GaussianObservations.from_fit(fit)), 0.2)
        single = posterior_mean_ranks(g, fit, threads=1)
        pooled = posterior_mean_ranks(g, fit, threads=4)
        np.testing.assert_array_equal(single, pooled)

    def test_unknown_tie_rule(self, three_players):
        with pytest.raises(InputError):
            posterior_mean_ranks(MixingDistribution.point_mass(0.0), fit_mle(three_players), "strong")


class TestPosteriorSummary:
    def test_covers_every_player(self, dominant_dataset):
        fit = fit_mle(dominant_dataset)
        summary, g = posterior_summary(fit, opts=PosteriorOptions(smoothed_prior=True))
        size = dominant_dataset.p_plus_1
        for column in (summary.post_mean, summary.post_mean_smoothed, summary.post_rank, summary.se):
            assert column.shape == (size,)
        assert summary.post_mean[0] == 0.0
        assert summary.bandwidth > 0
        assert summary.metadata["rank_prior"] == "smoothed"
        assert list(summary.to_frame().columns) == [
            "label", "theta_hat", "se", "post_mean", "post_mean_smoothed", "post_rank",
        ]
        assert g.weights.sum() == pytest.approx(1.0)


class TestDegenerateCases:
    def test_single_observation_puts_all_mass_on_it(self):
        g = fit_npmle(GaussianObservations(np.array([1.7]), np.array([0.4])))
        atoms, weights = g.support()
        assert atoms[np.argmax(weights)] == pytest.approx(1.7)
        assert weights.max() >= 0.99
        assert g.mean == pytest.approx(1.7, abs=1e-3)

    def test_point_mass_prior_makes_everyone_tie(self, dominant_dataset):
        fit = fit_mle(dominant_dataset)
        ranks = posterior_mean_ranks(MixingDistribution.point_mass(0.3), fit, "weak")
        np.testing.assert_allclose(ranks, dominant_dataset.p_plus_1 - 1)

    @pytest.mark.parametrize("tie_rule", ["weak", "half"])
    def test_exchangeable_pair(self, tie_rule):
        # players 1 and 2 share estimate and variance; the anchor sits on the middle atom
        g = MixingDistribution(np.array([-1.0, 0.0, 1.0]), np.array([0.3, 0.4, 0.3]))
        fit = hand_fit([0.0, 0.0, 0.0], [[0.5, 0.0], [0.0, 0.5]])
        ranks = posterior_mean_ranks(g, fit, tie_rule)
        assert ranks[1] == pytest.approx(ranks[2])

        like = g.weights * norm.pdf(0.0, g.atoms, np.sqrt(0.5))
        post = like / like.sum()
        tie = float(np.sum(post**2))
        versus_anchor = post[2] + (1.0 if tie_rule == "weak" else 0.5) * post[1]
        versus_other = (1.0 + tie) / 2.0 if tie_rule == "weak" else 0.5
        assert ranks[1] == pytest.approx(versus_anchor + versus_other, abs=1e-8)
