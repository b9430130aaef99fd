"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid system or scenario configuration."""


class GridMismatchError(ValueError):
    """Operands were evaluated on different frequency grids."""


class IllConditionedError(RuntimeError):
    """Normal equations are numerically singular; retry with ridge > 0."""


class InfeasibleConstraintError(RuntimeError):
    """A masked-power bound cannot be met by any solution."""

    def __init__(self, mask_name: str, bound: float, best: float):
        self.mask_name = mask_name
        self.bound = bound
        self.best = best
        super().__init__(
            f"constraint '{mask_name}' infeasible: bound {bound:.6g}, "
            f"best attainable {best:.6g}"
        )
