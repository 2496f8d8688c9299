"""Exception types raised across the package."""

from __future__ import annotations


class MBDesignError(Exception):
    """Base class for all package errors."""


class GraphError(MBDesignError, ValueError):
    """Malformed open graph."""


class DegenerateLength(MBDesignError, ValueError):
    pass


class NoSuchVertex(MBDesignError, KeyError):
    pass


class InputVertex(MBDesignError, ValueError):
    pass


class BadInputDimension(MBDesignError, ValueError):
    pass


class TooLarge(MBDesignError, ValueError):
    pass


class InputInFusionSet(MBDesignError, ValueError):
    pass


class BadNeighborChoice(MBDesignError, ValueError):
    pass


class NoValidNeighbor(MBDesignError, ValueError):
    pass


class UnsupportedPlane(MBDesignError, ValueError):
    """A local Clifford would move a measurement outside the XY/ZY planes."""


class NonUnitaryBranch(MBDesignError, ValueError):
    def __init__(self, outcome: int, deviation: float) -> None:
        super().__init__(f"branch {outcome} is not proportional to a unitary (deviation {deviation:.3g})")
        self.outcome = outcome
        self.deviation = deviation


class BadGraphIO(MBDesignError, ValueError):
    pass


class EmptyEnsemble(MBDesignError, ValueError):
    pass


class NumericalError(MBDesignError, ArithmeticError):
    pass


class Unsupported(MBDesignError, ValueError):
    pass


class OutOfFamily(MBDesignError, ValueError):
    pass


class BadArity(MBDesignError, ValueError):
    pass


class BadWiring(MBDesignError, ValueError):
    pass
