from typing import Any, Dict, Optional, Sequence


class PairRankError(Exception):
    """Base error. `exit_code` is what the CLI returns for it."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "detail": self.detail}


class InputError(PairRankError):
    """Bad input file, bad option or mismatched dimensions."""

    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None, label: Optional[str] = None):
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
        self.line = line
        self.label = label


class EstimationError(PairRankError):
    """Numerical failure inside an estimator."""

    exit_code = 3


class DisconnectedError(EstimationError):

    def __init__(self, components: Sequence[Sequence[int]]):
        self.components = [list(c) for c in components]
        sizes = ", ".join(str(len(c)) for c in self.components)
        super().__init__(
            f"comparison graph has {len(self.components)} components (sizes {sizes}); "
            "ratings are not identifiable"
        )


class DivergentError(EstimationError):

    def __init__(self, players: Sequence[int], detail: Optional[str] = None):
        self.players = sorted(int(p) for p in players)
        super().__init__(
            detail or f"ratings diverge for players {self.players} (all wins or all losses)"
        )


class NotConvergedError(EstimationError):

    def __init__(self, iterations: int, gap: float, what: str = "solver"):
        self.iterations = iterations
        self.gap = gap
        super().__init__(f"{what} did not converge after {iterations} iterations (gap {gap:.3e})")


class PathError(EstimationError):
    """A fit on a lambda path failed; wraps the cause."""

    def __init__(self, lambda_: float, cause: EstimationError):
        self.lambda_ = lambda_
        self.cause = cause
        super().__init__(f"lambda={lambda_:g}: {cause.detail}")

