"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input lies outside the domain of a physical operation."""


class IntegrationError(RuntimeError):
    """The trajectory integrator left its numerical sanity bounds."""


class UnderdeterminedError(DomainError):
    """Tomography design matrix has rank below three."""

    def __init__(self, rank: int, message: str | None = None):
        self.rank = rank
        super().__init__(message or f"design matrix has rank {rank} < 3")
