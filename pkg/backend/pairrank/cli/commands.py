import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from pairrank.config import THREADS
from pairrank.errors import InputError
from pairrank.estimators.scores import Method
from pairrank.schemas import (
    METHOD_IDS,
    GridSpec,
    LassoOptions,
    NpmleOptions,
    PosteriorOptions,
    SimConfig,
    SolverOptions,
)
from pairrank.services import (
    ExportService,
    IngestService,
    PathService,
    RankingService,
    SimulationService,
)
from pairrank.services.ingest_service import load_dataset, read_labels

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parents[2] / "presets"
EB_METHODS = {Method.KWPM, Method.KWPMS, Method.KWPR}
FIT_METHODS = EB_METHODS | {Method.MLE}


def validation_error(exc: ValidationError, what: str) -> InputError:
    keys = sorted({".".join(str(part) for part in err["loc"]) or "<root>" for err in exc.errors()})
    return InputError(f"invalid {what}: offending keys {', '.join(keys)}")


def build(model, what: str, **values):
    try:
        return model(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as exc:
        raise validation_error(exc, what) from exc


def parse_methods(text: Optional[str]) -> List[str]:
    if not text:
        return list(METHOD_IDS)
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHOD_IDS]
    if unknown:
        raise InputError(f"unknown methods {unknown}; choose from {', '.join(METHOD_IDS)}")
    return methods


def parse_lambdas(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--lambdas must be comma separated numbers, got {text!r}") from None


def cmd_ingest(args: argparse.Namespace) -> int:
    labels = read_labels(args.labels) if args.labels else None
    dataset, summary = IngestService(labels).ingest(args.input, args.input_format)
    export = ExportService(args.out_dir, args.format)
    export.write_dataset(dataset)
    export.write_json("summary", summary)
    inputs = [args.input] + ([args.labels] if args.labels else [])
    export.write_manifest("ingest", {"input_format": args.input_format}, None, inputs)
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    methods = parse_methods(args.methods)
    posterior = build(
        PosteriorOptions,
        "posterior options",
        bandwidth=args.bandwidth,
        tie_rule=args.tie_rule,
        smoothed_prior=args.smoothed_prior,
        threads=args.threads or THREADS,
    )
    service = RankingService(
        dataset,
        solver=build(SolverOptions, "solver options", strict=args.strict),
        grid=build(GridSpec, "grid", n_atoms=args.grid_size),
        npmle_opts=build(NpmleOptions, "NPMLE options", method=args.npmle_method),
        posterior=posterior,
    )
    tables, errors = service.rank(methods)

    export = ExportService(args.out_dir, args.format)
    if tables:
        export.write_table("rankings", pd.concat([t.to_frame() for t in tables], ignore_index=True))
    if FIT_METHODS & {t.method for t in tables}:
        export.write_json("fit", service.fit().summary())
    if EB_METHODS & {t.method for t in tables}:
        summary, mixing = service.posterior()
        export.write_table("posterior", summary.to_frame())
        export.write_table("mixing", mixing.to_frame())
    if errors:
        export.write_json("errors", {str(m): exc.to_dict() for m, exc in errors.items()})
    config = {"methods": methods, "posterior": posterior.model_dump(), "grid_size": args.grid_size,
              "npmle_method": args.npmle_method, "strict": args.strict}
    export.write_manifest("rank", config, None, [args.dataset])
    for method, exc in errors.items():
        logger.error("%s: %s", method, exc.detail)
    return max((exc.exit_code for exc in errors.values()), default=0)


def cmd_path(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    service = PathService(dataset, build(LassoOptions, "lasso options", tol=args.tol))
    lambdas = parse_lambdas(args.lambdas)
    if lambdas is None:
        lambdas = service.grid(args.grid_size)
    path, chosen = service.run(lambdas)
    export = ExportService(args.out_dir, args.format)
    export.write_table("path_players", path.players_frame())
    export.write_table("path_summary", path.summary_frame())
    export.write_manifest(
        "path",
        {"lambdas": lambdas, "tol": service.opts.tol},
        None,
        [args.dataset],
        metadata={"selected_lambda": repr(chosen.lambda_), "selected_k": str(chosen.k)},
    )
    return 0


def load_sim_config(args: argparse.Namespace) -> SimConfig:
    if args.preset and args.config:
        raise InputError("give either a config file or --preset, not both")
    if args.preset:
        source = PRESET_DIR / f"{args.preset}.json"
        if not source.is_file():
            known = sorted(p.stem for p in PRESET_DIR.glob("*.json"))
            raise InputError(f"unknown preset {args.preset!r}; available: {', '.join(known)}")
    elif args.config:
        source = Path(args.config)
    else:
        raise InputError("simulate needs a config file or --preset")
    try:
        payload: Dict[str, Any] = json.loads(source.read_text())
    except FileNotFoundError:
        raise InputError(f"config file {str(source)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(payload, dict):
        raise InputError("config must be a JSON object")
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.threads is not None:
        payload["threads"] = args.threads
    else:
        payload.setdefault("threads", THREADS)
    try:
        return SimConfig.model_validate(payload)
    except ValidationError as exc:
        raise validation_error(exc, "simulation config") from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_sim_config(args)
    result = SimulationService(config).run_grid()
    export = ExportService(args.out_dir, args.format)
    export.write_table("sim_results", result.records)
    export.write_table("sim_summary", result.summary())
    export.write_table("sim_failures", result.failures)
    inputs = [args.config] if args.config else []
    metadata = {"preset": args.preset} if args.preset else {}
    export.write_manifest("simulate", config.model_dump(exclude={"threads"}), config.seed, inputs, metadata)
    failed = result.failed_cells()
    if failed:
        logger.error("%d cell(s) produced no result: %s", len(failed), failed)
        return 3
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "rank": cmd_rank,
    "path": cmd_path,
    "simulate": cmd_simulate,
}
