import logging
from typing import Optional, Sequence, Tuple

import pandas as pd

from pairrank.estimators.fusedlasso import (
    LassoPath,
    LassoSolution,
    default_lambda_grid,
    lambda_max,
    select_lambda,
    solve_path,
)
from pairrank.models.comparisons import ComparisonDataset
from pairrank.schemas import LassoOptions

logger = logging.getLogger(__name__)


class PathService:

    def __init__(self, dataset: ComparisonDataset, opts: Optional[LassoOptions] = None):
        self.dataset = dataset
        self.opts = opts or LassoOptions()

    def grid(self, size: int = 51) -> list:
        return default_lambda_grid(self.dataset, size).tolist()

    def run(self, lambdas: Optional[Sequence[float]] = None) -> Tuple[LassoPath, LassoSolution]:
        grid = self.grid() if lambdas is None else list(lambdas)
        logger.info(
            "grouped lasso path: %d lambdas in [%g, %g], lambda_max=%g",
            len(grid), min(grid), max(grid), lambda_max(self.dataset),
        )
        path = solve_path(self.dataset, grid, self.opts)
        chosen = select_lambda(path)
        logger.info("BIC selects lambda=%g with %d group(s)", chosen.lambda_, chosen.k)
        return path, chosen

    def frames(self, lambdas: Optional[Sequence[float]] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Player trajectories and the per-lambda summary."""
        path, _ = self.run(lambdas)
        return path.players_frame(), path.summary_frame()
