import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from pairrank.errors import InputError
from pairrank.estimators.scores import kendall_tau
from pairrank.models.comparisons import aggregate
from pairrank.schemas import AbilityLawSpec, SimConfig
from pairrank.services.ranking_service import RankingService
from pairrank.services.simlab import MatchingDesign, draw_abilities, draw_matches

logger = logging.getLogger(__name__)

ORACLE = "ORACLE"
RESULT_COLUMNS = ["law", "design", "n", "method", "replication", "tau", "status"]
SUMMARY_COLUMNS = ["law", "design", "n", "method", "mean_tau", "se_tau", "n_ok"]
FAILURE_COLUMNS = ["law", "design", "n", "replication", "attempt", "entropy", "method", "error"]


@dataclass(frozen=True)
class SimResult:
    records: pd.DataFrame
    failures: pd.DataFrame
    seed: int

    def summary(self) -> pd.DataFrame:
        """Mean and standard error of tau per (law, design, n, method) over successful replications."""
        if self.records.empty:
            return pd.DataFrame(columns=SUMMARY_COLUMNS)
        rows = []
        keys = ["law", "design", "n", "method"]
        for key, group in self.records.groupby(keys, sort=False):
            ok = group.loc[group["status"] == "ok", "tau"].to_numpy(dtype=float)
            n_ok = int(ok.size)
            mean = float(ok.mean()) if n_ok else float("nan")
            se = float(ok.std(ddof=1) / np.sqrt(n_ok)) if n_ok > 1 else float("nan")
            rows.append(dict(zip(keys, key), mean_tau=mean, se_tau=se, n_ok=n_ok))
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def failed_cells(self) -> List[Tuple[str, str, int]]:
        """Cells in which no replication produced any tau."""
        if self.records.empty:
            return []
        ok = self.records.assign(ok=self.records["status"] == "ok")
        per_cell = ok.groupby(["law", "design", "n"], sort=False)["ok"].any()
        return [cell for cell, any_ok in per_cell.items() if not any_ok]


def law_code(law: AbilityLawSpec) -> int:
    """Stable integer identifying an ability law, used in RNG stream keys."""
    digest = hashlib.sha256(json.dumps(law.model_dump(), sort_keys=True).encode()).hexdigest()
    return int(digest[:8], 16)


def replication_entropy(seed: int, law: AbilityLawSpec, design: str, n: int, replication: int, attempt: int) -> List[int]:
    return [seed, law_code(law), 0 if design == "RS" else 1, n, replication, attempt]


def run_replication(task: Dict[str, Any]) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """
    One replication of one cell: draw abilities and matches, score every
    method, and compare each score vector with the true abilities. Estimators
    see only the aggregated match data. A replication with a numerical
    failure is redrawn once from a fresh stream before the failure is kept.
    """
    law: AbilityLawSpec = task["law"]
    design = MatchingDesign(task["design"], task["ls_window"])
    n, rep, methods = task["n"], task["replication"], task["methods"]
    estimators = [m for m in methods if m != ORACLE]
    failures: List[Dict[str, Any]] = []
    cell = {"law": law.kind, "design": design.kind, "n": n}

    for attempt in (0, 1):
        entropy = replication_entropy(task["seed"], law, design.kind, n, rep, attempt)
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        alpha = draw_abilities(law, task["p_plus_1"], rng)
        matches = draw_matches(alpha, design, n, rng)
        dataset = aggregate(matches, task["p_plus_1"])
        service = RankingService(dataset, lambda_grid_size=task["rmle_grid_size"])
        scores, errors = service.scores(estimators)
        for method, exc in errors.items():
            failures.append(
                dict(cell, replication=rep, attempt=attempt, entropy=" ".join(map(str, entropy)),
                     method=str(method), error=exc.detail)
            )
        if not errors:
            break
        if attempt == 0:
            logger.warning("replication %d of %s/%s/n=%d failed; redrawing", rep, law.kind, design.kind, n)

    if ORACLE in methods:
        scores[ORACLE] = alpha
    rows = []
    for method in methods:
        key = method if method == ORACLE else next((m for m in scores if str(m) == method), None)
        if key is None:
            rows.append(dict(cell, method=method, replication=rep, tau=float("nan"), status="failed"))
            continue
        try:
            tau = kendall_tau(alpha, scores[key])
            status = "ok"
        except InputError as exc:
            tau, status = float("nan"), "undefined"
            logger.warning("tau undefined for %s in replication %d: %s", method, rep, exc.detail)
        rows.append(dict(cell, method=method, replication=rep, tau=tau, status=status))
    return rows, failures


class SimulationService:
    """Runs the Monte Carlo comparison of ranking methods described by a SimConfig."""

    def __init__(self, config: SimConfig):
        self.config = config

    def _tasks(self, law: AbilityLawSpec, design: str, n: int) -> List[Dict[str, Any]]:
        cfg = self.config
        return [
            {
                "law": law,
                "design": design,
                "n": n,
                "replication": rep,
                "methods": list(cfg.methods),
                "seed": cfg.seed,
                "p_plus_1": cfg.p_plus_1,
                "ls_window": cfg.ls_window,
                "rmle_grid_size": cfg.rmle_grid_size,
            }
            for rep in range(cfg.replications)
        ]

    def _execute(self, tasks: Sequence[Dict[str, Any]]) -> SimResult:
        if self.config.threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.config.threads) as pool:
                outputs = list(pool.map(run_replication, tasks))
        else:
            outputs = [run_replication(t) for t in tasks]
        records = [row for rows, _ in outputs for row in rows]
        failures = [row for _, rows in outputs for row in rows]
        return SimResult(
            records=pd.DataFrame(records, columns=RESULT_COLUMNS),
            failures=pd.DataFrame(failures, columns=FAILURE_COLUMNS),
            seed=self.config.seed,
        )

    def run_cell(self, law: AbilityLawSpec, design: str, n: int) -> SimResult:
        logger.info("cell %s/%s/n=%d: %d replications", law.kind, design, n, self.config.replications)
        return self._execute(self._tasks(law, design, n))

    def run_grid(self) -> SimResult:
        """Every law x design x sample size cell of the config, in config order."""
        cfg = self.config
        tasks: List[Dict[str, Any]] = []
        for law in cfg.laws:
            for design in cfg.designs:
                for n in cfg.sample_sizes:
                    tasks.extend(self._tasks(law, design, n))
        logger.info(
            "simulation grid: %d cells, %d replications each",
            len(cfg.laws) * len(cfg.designs) * len(cfg.sample_sizes),
            cfg.replications,
        )
        result = self._execute(tasks)
        for cell in result.failed_cells():
            logger.warning("cell %s wholly failed", cell)
        return result


def run_cell(
    law: AbilityLawSpec,
    design: str,
    n: int,
    methods: Sequence[str],
    replications: int,
    seed: int,
    config: Optional[SimConfig] = None,
) -> SimResult:
    """One cell with the remaining settings taken from `config` (defaults otherwise)."""
    base = (config or SimConfig()).model_dump()
    base.update(methods=list(methods), replications=replications, seed=seed, laws=[law.model_dump()],
                designs=[design], sample_sizes=[n])
    return SimulationService(SimConfig.model_validate(base)).run_cell(law, design, n)
