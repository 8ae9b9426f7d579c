"""
Exception types shared across the package.

The command line maps these onto process exit codes (see ``ssmkit.cli``),
so library code should raise the most specific type that applies.
"""


class SsmError(Exception):
    """Base class for all errors raised by ssmkit."""


class ValidationError(SsmError):
    """Bad input: shapes, formats, missing files, contract violations."""


class NumericalError(SsmError):
    """A computation ran but failed: no convergence, bad residual, etc."""


class OuterResonanceError(NumericalError):
    """
    An eigenvalue sum of the master spectrum collides with an eigenvalue
    outside it. The invariant manifold does not exist in that case, so
    normal-form computations abort rather than return garbage.
    """

    def __init__(self, message, pairs=None):
        super().__init__(message)
        self.pairs = list(pairs) if pairs is not None else []
