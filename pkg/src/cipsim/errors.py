"""Exception types shared across the package."""


class CipError(Exception):
    """Base class for all domain errors raised by this package."""


class NonFiniteStateError(CipError):
    """A state vector left the finite range during integration."""

    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t = {t:.6g} s")
        self.t = t


class DegenerateRodError(CipError):
    """The pendulum tips are (numerically) coincident; the rod direction is undefined."""


class SingularMassMatrixError(CipError):
    """The per-pendulum mass matrix is numerically singular."""


class ConstraintInfeasibleError(CipError):
    """The rigid-rod reconstruction has no real solution for the given measurement."""


class TableFormatError(CipError):
    """A classifier table file is malformed (bad magic, bad header, unknown version)."""


class TruncatedTableError(TableFormatError):
    """A classifier table file ends before the declared payload is complete."""


class DigestMismatchError(CipError):
    """A loaded table was built from different parameters than the caller supplied."""

    def __init__(self, expected: str, actual: str):
        super().__init__(
            f"table parameter digest mismatch: expected {expected}, file has {actual}"
        )
        self.expected = expected
        self.actual = actual
