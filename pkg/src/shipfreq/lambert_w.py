"""Real branches of the Lambert W function.

``W(x)`` solves ``w * exp(w) = x``. For ``-1/e <= x < 0`` there are two real
solutions: the principal branch ``W0 >= -1`` and the lower branch
``W-1 <= -1``.
"""

import enum
import math

from . import kernels

__all__ = ["Branch", "LambertWDomainError", "lambert_w", "BRANCH_POINT"]

BRANCH_POINT = -math.exp(-1.0)


class Branch(enum.Enum):
    PRINCIPAL = 0
    LOWER = -1


class LambertWDomainError(ValueError):
    """Argument outside the real domain of the requested branch."""


def lambert_w(argument, branch=Branch.PRINCIPAL):
    """Evaluate a real branch of Lambert W.

    Halley iteration from a branch-specific seed, stopped when the step falls
    below ``1e-15 * (1 + |w|)`` or after 50 iterations. Arguments within
    ``1e-12`` of ``-1/e`` return exactly ``-1``.

    Parameters
    ----------
    argument : float
    branch : Branch or {0, -1}

    Returns
    -------
    float

    Raises
    ------
    LambertWDomainError
        If ``argument < -1/e``, or the lower branch is requested with
        ``argument >= 0``.
    """
    b = Branch(branch).value
    try:
        return kernels.lambert_w(float(argument), b)
    except ValueError as exc:
        raise LambertWDomainError(str(exc)) from None
