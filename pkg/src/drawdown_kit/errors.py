"""Exception taxonomy shared by all modules.

DomainError covers precondition violations (bad parameters, points outside
the state space, unsupported model/operation combinations); NumericalError
covers quadrature or solver failures.  Divergent improper integrals are NOT
errors -- they are reported as a regular outcome, see quadrature.QuadResult.
"""


class DrawdownKitError(Exception):
    pass


class DomainError(DrawdownKitError, ValueError):
    """A documented precondition was violated; message names it."""


class UnknownModelError(DomainError):
    """Catalog lookup failed."""


class NumericalError(DrawdownKitError, RuntimeError):
    """Quadrature/solver did not converge or produced NaN."""
