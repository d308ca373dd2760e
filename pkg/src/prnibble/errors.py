"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters or inputs (CLI exit code 2)."""


class GraphFormatError(ValidationError):
    """Malformed graph file; the message carries the offending line number."""

    def __init__(self, lineno: int, msg: str) -> None:
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class NonConvergenceError(RuntimeError):
    """Power iteration hit max_iter before reaching the tolerance (CLI exit code 3)."""


class SamplerBudgetError(ValidationError):
    """Expected tree size of the exact limit sampler exceeds the node budget."""
