class GridError(ValueError):
    """A phase-space or spatial grid violates its construction rules."""


class RepresentationError(ValueError):
    """States live on different grids or in different representations."""


class NonFiniteError(ValueError):
    """A NaN or Inf showed up in a field."""


class NormalizationError(ValueError):
    """An operation that needs a normalized state got an unnormalized one."""


class UnsupportedPotentialError(ValueError):
    pass


class TrajectoryError(ValueError):
    """Too few snapshots or a non-uniform recording interval."""


class ConfigError(ValueError):
    """Scenario configuration problems, all of them at once."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))
