"""F distribution: CDF, survival function and quantile.

Built on the regularized incomplete beta function, evaluated with a
continued fraction (modified Lentz).  Everything is scalar and dependency
free so the significance tests never need lookup tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_ITER = 300
CF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), Lentz's method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((qap + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )


def _front(a: float, b: float, x: float, y: float) -> float:
    # x**a * y**b / (a * B(a, b)), with y = 1 - x supplied by the caller
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return math.exp(a * math.log(x) + b * math.log(y) - log_beta) / a


def betainc_pair(a: float, b: float, x: float, y: float) -> tuple[float, float]:
    """Return ``(I_x(a, b), 1 - I_x(a, b))``.

    ``y`` must equal ``1 - x``; passing it separately lets callers keep full
    precision when ``x`` is close to one.  Whichever tail lies on the
    convergent side of the continued fraction is computed directly and the
    other is its complement, so the smaller of the two is never obtained by
    cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0, 1.0
    if y <= 0.0:
        return 1.0, 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        p = _front(a, b, x, y) * _betacf(a, b, x)
        return p, 1.0 - p
    q = _front(b, a, y, x) * _betacf(b, a, y)
    return 1.0 - q, q


def _check_df(d1: float, d2: float) -> None:
    if not (d1 > 0 and d2 > 0) or math.isinf(d1) or math.isinf(d2):
        raise ValueError(f"degrees of freedom must be positive and finite, got ({d1}, {d2})")


def _cdf_sf(x: float, d1: float, d2: float) -> tuple[float, float]:
    _check_df(d1, d2)
    if math.isnan(x):
        raise ValueError("x is NaN")
    if x <= 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    denom = d1 * x + d2
    return betainc_pair(0.5 * d1, 0.5 * d2, d1 * x / denom, d2 / denom)


def f_cdf(x: float, d1: float, d2: float) -> float:
    """P(F <= x) for F ~ F(d1, d2)."""
    return _cdf_sf(x, d1, d2)[0]


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper-tail probability P(F > x) for F ~ F(d1, d2)."""
    return _cdf_sf(x, d1, d2)[1]


def f_pdf(x: float, d1: float, d2: float) -> float:
    _check_df(d1, d2)
    if x < 0.0:
        return 0.0
    if x == 0.0:
        if d1 < 2:
            return math.inf
        return 1.0 if d1 == 2 else 0.0
    a, b = 0.5 * d1, 0.5 * d2
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    logp = (
        a * math.log(d1 / d2)
        + (a - 1.0) * math.log(x)
        - (a + b) * math.log1p(d1 * x / d2)
        - log_beta
    )
    return math.exp(logp)


def f_quantile(q: float, d1: float, d2: float, xtol: float = 1e-12) -> float:
    """Inverse CDF of F(d1, d2).

    Bracketed bisection with Newton steps taken whenever they land inside
    the current bracket.
    """
    _check_df(d1, d2)
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")

    lo, hi = 0.0, 1.0
    while f_cdf(hi, d1, d2) < q:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ArithmeticError("failed to bracket the F quantile")

    x = 0.5 * (lo + hi)
    for _ in range(400):
        p = f_cdf(x, d1, d2)
        err = p - q
        if err == 0.0:
            return x
        if err > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= xtol * max(1.0, hi):
            break
        dens = f_pdf(x, d1, d2)
        step_ok = False
        if dens > 0.0 and math.isfinite(dens):
            cand = x - err / dens
            if lo < cand < hi:
                if abs(cand - x) <= xtol * max(1.0, x):
                    return cand
                x = cand
                step_ok = True
        if not step_ok:
            x = 0.5 * (lo + hi)
    return 0.5 * (lo + hi) if hi - lo <= xtol * max(1.0, hi) else x


@dataclass(frozen=True)
class FParams:
    """Degrees of freedom of an F reference distribution."""

    d1: float
    d2: float

    def __post_init__(self):
        _check_df(self.d1, self.d2)

    def cdf(self, x: float) -> float:
        return f_cdf(x, self.d1, self.d2)

    def sf(self, x: float) -> float:
        return f_sf(x, self.d1, self.d2)

    def ppf(self, q: float) -> float:
        return f_quantile(q, self.d1, self.d2)
