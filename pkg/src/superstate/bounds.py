"""Sample-size calculator for the learning guarantee.

Evaluated in decimal arithmetic, with precision grown to the size of the
result, so the ceiling is exact even far beyond the float range.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_CEILING, Decimal, localcontext

from .errors import ParameterError

_PREC = 60


@dataclass(frozen=True)
class SampleSize:
    T_bound: int
    K_bound: int


def _ceil(x: Decimal) -> int:
    return int(x.to_integral_value(rounding=ROUND_CEILING))


def theoretical_sample_size(
    eps: float,
    delta: float,
    m: int,
    S: int,
    A: int,
    O: int,
    alpha: float,
    beta: float,
    gamma: float,
) -> SampleSize:
    """Trajectory length T and iteration count K sufficient for the guarantee.

    T = ceil(8 A^{2m} (m+1)^2 / (alpha^2 S^2 beta^{2m} eps^2) * log(24 A^{2m+1} O^{2m} / delta))
    K = max(1, ceil(log(2 (1 - gamma) / eps) / (1 - gamma)))
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    if not (alpha > 0 and beta > 0):
        raise ParameterError("alpha and beta must be positive")
    if not 0 < gamma < 1:
        raise ParameterError("gamma must lie in (0, 1)")
    if m < 1 or min(S, A, O) < 1:
        raise ParameterError("m, S, A, O must be positive")

    with localcontext() as ctx:
        # enough digits for every integer digit of T plus guard digits
        ctx.prec = _PREC
        al, be, e = (Decimal(float(x)) for x in (alpha, beta, eps))
        mag = (8 * Decimal(A) ** (2 * m) * (m + 1) ** 2 / (al**2 * S**2 * be ** (2 * m) * e**2)).adjusted()
        ctx.prec = _PREC + max(0, mag + 4)
        e, d, al, be, g = (Decimal(float(x)) for x in (eps, delta, alpha, beta, gamma))
        A_, O_, S_ = Decimal(A), Decimal(O), Decimal(S)
        lead = 8 * A_ ** (2 * m) * Decimal(m + 1) ** 2 / (al**2 * S_**2 * be ** (2 * m) * e**2)
        log_term = (24 * A_ ** (2 * m + 1) * O_ ** (2 * m) / d).ln()
        T = _ceil(lead * log_term)
        one_minus = 1 - g
        K = max(1, _ceil((2 * one_minus / e).ln() / one_minus))
    return SampleSize(T_bound=T, K_bound=K)
