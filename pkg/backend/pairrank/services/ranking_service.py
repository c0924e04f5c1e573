import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from pairrank.errors import EstimationError, InputError
from pairrank.estimators import fusedlasso, npmle
from pairrank.estimators.btmle import FitResult, fit_mle
from pairrank.estimators.scores import Method, RankingTable, borda, rank_all, weighted_borda
from pairrank.models.comparisons import ComparisonDataset
from pairrank.schemas import (
    GridSpec,
    LassoOptions,
    NpmleOptions,
    PosteriorOptions,
    SolverOptions,
)

logger = logging.getLogger(__name__)


class RankingService:
    """Scores players of one dataset under any of the seven methods, sharing fits between them."""

    def __init__(
        self,
        dataset: ComparisonDataset,
        solver: Optional[SolverOptions] = None,
        lasso: Optional[LassoOptions] = None,
        grid: Optional[GridSpec] = None,
        npmle_opts: Optional[NpmleOptions] = None,
        posterior: Optional[PosteriorOptions] = None,
        lambda_grid_size: int = 51,
    ):
        self.dataset = dataset
        self.solver = solver or SolverOptions()
        self.lasso = lasso or LassoOptions()
        self.grid = grid or GridSpec()
        self.npmle_opts = npmle_opts or NpmleOptions()
        self.posterior_opts = posterior or PosteriorOptions()
        self.lambda_grid_size = lambda_grid_size
        self._fit: Optional[FitResult] = None
        self._posterior: Optional[Tuple[npmle.PosteriorSummary, npmle.MixingDistribution]] = None
        self._path: Optional[fusedlasso.LassoPath] = None
        self._failed: Dict[str, EstimationError] = {}

    def fit(self) -> FitResult:
        if self._fit is None:
            self._fit = self._once("fit", lambda: fit_mle(self.dataset, self.solver))
        return self._fit

    def posterior(self) -> Tuple[npmle.PosteriorSummary, npmle.MixingDistribution]:
        if self._posterior is None:
            if self.dataset.p_plus_1 < 2:
                raise InputError("empirical Bayes needs at least two players")
            self._posterior = self._once(
                "posterior",
                lambda: npmle.posterior_summary(
                    self.fit(), self.grid, self.npmle_opts, self.posterior_opts
                ),
            )
        return self._posterior

    def lasso_path(self, lambdas: Optional[Sequence[float]] = None) -> fusedlasso.LassoPath:
        if lambdas is not None:
            return fusedlasso.solve_path(self.dataset, lambdas, self.lasso)
        if self._path is None:
            grid = fusedlasso.default_lambda_grid(self.dataset, self.lambda_grid_size)
            self._path = self._once("path", lambda: fusedlasso.solve_path(self.dataset, grid, self.lasso))
        return self._path

    def _once(self, key: str, compute):
        # a failed computation is not retried for the other methods that need it
        if key in self._failed:
            raise self._failed[key]
        try:
            return compute()
        except EstimationError as exc:
            self._failed[key] = exc
            raise

    def score(self, method: Method) -> np.ndarray:
        method = Method(method)
        if method is Method.MLE:
            return self.fit().theta
        if method is Method.B:
            return borda(self.dataset)
        if method is Method.WB:
            return weighted_borda(self.dataset)
        if method is Method.RMLE:
            return fusedlasso.select_lambda(self.lasso_path()).theta
        summary, _ = self.posterior()
        if method is Method.KWPM:
            return summary.post_mean
        if method is Method.KWPMS:
            return summary.post_mean_smoothed
        return summary.post_rank

    def scores(self, methods: Iterable[str]) -> Tuple[Dict[Method, np.ndarray], Dict[Method, EstimationError]]:
        """Scores per method; a numerical failure in one method does not stop the others."""
        results: Dict[Method, np.ndarray] = {}
        errors: Dict[Method, EstimationError] = {}
        for name in methods:
            method = Method(name)
            try:
                results[method] = self.score(method)
            except EstimationError as exc:
                logger.warning("%s failed: %s", method, exc.detail)
                errors[method] = exc
        return results, errors

    def rank(self, methods: Iterable[str]) -> Tuple[List[RankingTable], Dict[Method, EstimationError]]:
        results, errors = self.scores(methods)
        return rank_all(self.dataset.labels, results), errors
