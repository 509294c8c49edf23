"""Exception types shared across the package."""


class PowerPathError(Exception):
    """Base class for all package errors."""


class DomainError(PowerPathError):
    """Coordinates outside the domain, or an invalid domain description."""


class DensityContractError(PowerPathError):
    """A density violated its declared bounds or normalization."""


class ParameterError(PowerPathError):
    """Invalid numeric parameter (nonpositive intensity, bad power, ...)."""


class UnsupportedDomainError(PowerPathError):
    """Operation not defined for this domain kind (e.g. tubes on a torus)."""


class GridError(PowerPathError):
    """Invalid cost grid (nonpositive cells, resolution too small, ...)."""


class ExplosionError(PowerPathError):
    """Branching-process population exceeded the configured cap."""

    def __init__(self, generation: int, size: int, cap: int):
        self.generation = generation
        self.size = size
        self.cap = cap
        super().__init__(
            f"generation {generation} population {size} exceeds cap {cap}"
        )


class ConfigError(PowerPathError):
    """Experiment configuration failed validation.

    Collects every violated field at once; ``problems`` is a list of
    human-readable messages.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
