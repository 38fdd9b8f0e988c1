"""Exception hierarchy shared by every module."""


class ShrinkageError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(ShrinkageError, ValueError):
    """An argument is outside the domain of the requested operation."""


class InvalidDimension(InvalidInput):
    """Vector lengths or dimensions are inconsistent or too small."""


class MissingHyperparameter(InvalidInput):
    """The prior variance is required but was declared unknown."""


class DivisionByZero(InvalidInput, ZeroDivisionError):
    """A shrinkage factor would divide by a zero norm."""


class NonConvergence(ShrinkageError, ArithmeticError):
    """A numerical routine did not reach the requested accuracy."""


class InternalConsistencyError(ShrinkageError, RuntimeError):
    """A computed quantity violated a bound it is guaranteed to satisfy."""
