"""Exception types shared across the package."""


class SympdistError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SympdistError, ValueError):
    """Grid arrays do not match the model's shape or each other."""


class ClosednessError(SympdistError, ValueError):
    """A 1-form required to be closed has too large an exterior derivative.

    Carries the measured relative residual in ``residual``.
    """

    def __init__(self, residual, tol, message=None):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(
            message
            or f"form is not closed at grid scale: residual {self.residual:.3e} > tol {self.tol:.3e}"
        )


class ExactnessError(SympdistError, ValueError):
    """A 1-form required to be exact has a nonzero harmonic part."""

    def __init__(self, harmonic_norm, tol):
        self.harmonic_norm = float(harmonic_norm)
        self.tol = float(tol)
        super().__init__(
            f"form is not exact: harmonic part {self.harmonic_norm:.3e} > tol {self.tol:.3e}"
        )


class ResolutionError(SympdistError, ValueError):
    """Spectral content too close to the grid Nyquist scale; refine the grid."""

    def __init__(self, tail_fraction, tol):
        self.tail_fraction = float(tail_fraction)
        self.tol = float(tol)
        super().__init__(
            f"spectral tail fraction {self.tail_fraction:.3e} exceeds {self.tol:.3e}; "
            "use a finer grid resolution"
        )


class IntegrationError(SympdistError, RuntimeError):
    """Flow integration failed a stability or accuracy check."""


class InfeasibleTargetError(SympdistError, RuntimeError):
    """Optimization could not reach the target endpoint within tolerance.

    Carries the best endpoint residual achieved in ``residual``.
    """

    def __init__(self, residual, tol):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(
            f"endpoint residual {self.residual:.3e} > feasibility tolerance {self.tol:.3e}"
        )


class UnsupportedRankError(SympdistError, ValueError):
    """Lattice rank too large for exact enumeration."""


class ConfigError(SympdistError, ValueError):
    """Scenario configuration violates the schema.

    ``pointer`` locates the offending field, e.g. ``steps[2].kind``.
    """

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class DegenerateInputError(SympdistError, ValueError):
    """An input is degenerate for the requested probe (e.g. constant on the disc)."""
