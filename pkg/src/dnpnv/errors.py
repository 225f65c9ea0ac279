"""Exception types shared across the package."""


class DnpError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DnpError):
    """A run configuration is malformed or self-inconsistent."""


class LatticeError(DnpError):
    """Lattice sampling produced an unusable site list."""


class DegenerateSteadyStateError(DnpError):
    """The Liouvillian kernel is (numerically) more than one-dimensional.

    Carries the two smallest singular values so the caller can see how
    degenerate the generator actually is.
    """

    def __init__(self, message, smallest=None, second_smallest=None):
        super().__init__(message)
        self.smallest = smallest
        self.second_smallest = second_smallest


class NumericalError(DnpError):
    """A linear solve or propagation produced non-finite or invalid output."""


class NonConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget.

    Carries the last residual and iterate for post-mortem inspection.
    """

    def __init__(self, message, residual=None, iterations=None, iterate=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.iterate = iterate


class FrozenSpinError(DnpError):
    """All flip rates vanish, so no unique spin steady state exists."""
