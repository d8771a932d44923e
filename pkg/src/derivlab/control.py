"""Control functions and their rescaled series.

The power family ``phi(x, y) = theta (||x||^r + ||y||^r)`` gets exact
geometric tails. A ``custom_tabulated`` control function wraps an
arbitrary callable and may declare scaling factors

    phi(x/2, y/2) <= halving_factor * phi(x, y)
    phi(2x, 2y)   <= doubling_factor * phi(x, y)

from which rigorous tail bounds follow; without them its series are
summed to a fixed length and reported as not converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .algebra import Element, NormKind, as_element, norm

TAIL_RTOL = 1e-12
MAX_TERMS = 200


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlFunction:
    family: str = "power"
    theta: float = 0.0
    r: float = 3.0
    norm_kind: NormKind = NormKind.FROBENIUS
    func: Optional[Callable[[Element, Element], float]] = None
    halving_factor: Optional[float] = None
    doubling_factor: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("power", "custom_tabulated"):
            raise ValueError(f"unknown control family {self.family!r}")
        if self.family == "custom_tabulated" and self.func is None:
            raise ValueError("custom_tabulated control function needs func")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        object.__setattr__(self, "norm_kind", NormKind(self.norm_kind))

    def __call__(self, x, y) -> float:
        return phi(self, x, y)

    def with_theta(self, theta: float) -> "ControlFunction":
        return ControlFunction(self.family, theta, self.r, self.norm_kind, self.func,
                               self.halving_factor, self.doubling_factor)

    def to_dict(self):
        if self.family != "power":
            return {"family": self.family}
        return {"family": "power", "theta": self.theta, "r": self.r, "norm_kind": self.norm_kind.value}


def _pow(t: float, r: float) -> float:
    if t == 0.0:
        if r < 0:
            raise DomainError("zero argument with negative exponent")
        return 1.0 if r == 0 else 0.0
    return t**r


def phi(cf: ControlFunction, x, y) -> float:
    if cf.family == "custom_tabulated":
        return float(cf.func(x, y))
    x = as_element(x)
    y = as_element(y)
    if cf.theta == 0.0 and cf.r >= 0:
        return 0.0
    return cf.theta * (_pow(norm(x, cf.norm_kind), cf.r) + _pow(norm(y, cf.norm_kind), cf.r))


@dataclass(frozen=True)
class SeriesResult:
    partial_sum: float
    tail_bound: float
    terms_used: int
    converged: bool
    ratio: Optional[float] = None

    @property
    def value(self) -> float:
        """``partial_sum + tail_bound``; exact for the power family."""
        return self.partial_sum + self.tail_bound


def _term_ratio(cf: ControlFunction, weight: str) -> Optional[float]:
    # ratio of consecutive series terms (upper bound for custom functions)
    if cf.family == "power":
        if weight == "4j":
            return 4.0 * 2.0 ** (-cf.r)
        if weight == "2jm1":
            return 2.0 * 2.0 ** (-cf.r)
        return 2.0 ** (cf.r - 1.0)
    if weight in ("4j", "2jm1"):
        if cf.halving_factor is None:
            return None
        return (4.0 if weight == "4j" else 2.0) * cf.halving_factor
    if cf.doubling_factor is None:
        return None
    return cf.doubling_factor / 2.0


def _sum(cf, x, y, weight: str, first: int) -> SeriesResult:
    ratio = _term_ratio(cf, weight)
    expansive = weight == "expansive"
    partial = 0.0
    term = 0.0
    k = 0
    for j in range(first, first + MAX_TERMS):
        scale = math.ldexp(1.0, j) if expansive else math.ldexp(1.0, -j)
        if weight == "4j":
            w = math.ldexp(1.0, 2 * j)
        elif weight == "2jm1":
            w = math.ldexp(1.0, j - 1)
        else:
            w = math.ldexp(1.0, -j)
        try:
            term = w * phi(cf, x * scale, y * scale)
        except OverflowError:
            term = math.inf
        partial += term
        k += 1
        if not math.isfinite(partial):
            break
        if ratio is not None and ratio < 1.0:
            tail = term * ratio / (1.0 - ratio)
            if tail < TAIL_RTOL * max(1.0, partial):
                break
    if ratio is None or ratio >= 1.0 or not math.isfinite(partial):
        return SeriesResult(partial, math.inf, k, False, ratio)
    return SeriesResult(partial, term * ratio / (1.0 - ratio), k, True, ratio)


def sum_contractive_series(cf: ControlFunction, x, y, weight: str = "2jm1") -> SeriesResult:
    """``sum_{j>=1} w(j) phi(x/2^j, y/2^j)`` with ``w(j) = 4^j`` or ``2^(j-1)``."""
    if weight not in ("4j", "2jm1"):
        raise ValueError("weight must be '4j' or '2jm1'")
    return _sum(cf, x, y, weight, 1)


def sum_expansive_series(cf: ControlFunction, x, y) -> SeriesResult:
    """``Phi(x, y) = sum_{j>=0} 2^-j phi(2^j x, 2^j y)``; halve ``.value`` for the stability bound."""
    return _sum(cf, x, y, "expansive", 0)


def contraction_constant(cf: ControlFunction, mode: str) -> Optional[float]:
    """Smallest ``L`` satisfying the scaling hypothesis of the fixed-point method.

    ``contractive``: ``phi(x/2, y/2) <= (L/4) phi(x, y)``, giving ``2^(2-r)``.
    ``expansive``: ``1/2 phi(2x, 2x) <= L phi(x, x)``, giving ``2^(r-1)``.
    Returns ``None`` when no ``L < 1`` exists.
    """
    if mode not in ("contractive", "expansive"):
        raise ValueError("mode must be 'contractive' or 'expansive'")
    if cf.family == "power":
        L = 2.0 ** (2.0 - cf.r) if mode == "contractive" else 2.0 ** (cf.r - 1.0)
    elif mode == "contractive" and cf.halving_factor is not None:
        L = 4.0 * cf.halving_factor
    elif mode == "expansive" and cf.doubling_factor is not None:
        L = cf.doubling_factor / 2.0
    else:
        return None
    return L if L < 1.0 else None


def corollary_contraction_constant(cf: ControlFunction, mode: str) -> Optional[float]:
    """The constant used when specialising to the power family: ``2^(1-r)`` / ``2^(r-1)``.

    For ``contractive`` this differs from :func:`contraction_constant`; it is
    the Lipschitz constant actually realised by ``J`` on the power family,
    but it does not satisfy ``phi(x/2, y/2) <= (L/4) phi(x, y)``.
    """
    if cf.family != "power":
        return None
    L = 2.0 ** (1.0 - cf.r) if mode == "contractive" else 2.0 ** (cf.r - 1.0)
    return L if L < 1.0 else None


def regime_of(r: float) -> Optional[str]:
    if r > 2:
        return "contractive"
    if r < 1:
        return "expansive"
    return None
