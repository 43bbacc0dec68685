"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class TruncationError(ArithmeticError):
    """A truncated photon-number sum would drop more than the allowed tail mass."""


class NoRootError(ArithmeticError):
    """A bracketing root search found no sign change."""


class DegenerateCrossover(DomainError):
    """I_CMP(1) is identically I_SI, so there is no crossover to find."""


class InsufficientDataError(ValueError):
    """Not enough events to form an estimate."""


class ConfigError(ValueError):
    """Invalid simulation or preset configuration."""


class PresetNotFound(KeyError):
    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(name)

    def __str__(self):
        return f"unknown preset {self.name!r}; available: {', '.join(self.available)}"
