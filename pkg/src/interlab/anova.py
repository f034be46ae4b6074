"""Sum-of-squares decomposition, ANOVA tables, F-tests and precision estimates.

The total variation splits exactly into residual (E), between-laboratory
(L) and regression (R) parts, and L further into intercept (A) and slope
(B) parts.  Mean squares feed three F-tests and the method-of-moments
estimates of the repeatability and between-laboratory variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import fdist
from .ingest import Dataset
from .model import Design, LabEffects, OverallFit, fit

DECOMP_RTOL = 1e-9
# sums of squares below this multiple of n_obs * mean(Y^2) are rounding noise
_NOISE_FACTOR = (64 * np.finfo(float).eps) ** 2

TEST_NAMES = ("regression", "intercepts", "slopes")


class DecompositionError(ArithmeticError):
    """The sum-of-squares identity failed to hold numerically."""


class UndefinedTestError(ArithmeticError):
    """An F statistic has a zero denominator mean square."""

    def __init__(self, test: str, denominator: str):
        self.test = test
        self.denominator = denominator
        super().__init__(f"{test} test undefined: mean square V_{denominator} is zero")


@dataclass(frozen=True)
class SumsOfSquares:
    S_T: float
    S_E: float
    S_L: float
    S_R: float
    S_A: float
    S_B: float
    m: int
    n: int

    @property
    def phi_T(self) -> int:
        return self.m * self.n - 1

    @property
    def phi_E(self) -> int:
        return self.m * self.n - 2 * self.m

    @property
    def phi_L(self) -> int:
        return 2 * (self.m - 1)

    @property
    def phi_R(self) -> int:
        return 1

    @property
    def phi_A(self) -> int:
        return self.m - 1

    @property
    def phi_B(self) -> int:
        return self.m - 1

    def S(self, factor: str) -> float:
        return getattr(self, "S_" + factor)

    def phi(self, factor: str) -> int:
        return getattr(self, "phi_" + factor)

    def V(self, factor: str) -> float:
        return self.S(factor) / self.phi(factor)


def sums_of_squares(
    data: Dataset, design: Design, overall: OverallFit, effects: LabEffects
) -> SumsOfSquares:
    """Compute every sum of squares and check the decomposition identities.

    Raises
    ------
    DecompositionError
        If S_T = S_E + S_L + S_R or S_L = S_A + S_B fails beyond rounding.
        Both hold algebraically for any balanced, centered design, so a
        failure means the inputs were not computed from the same data.
    """
    y = data.y
    m, n = y.shape
    s_t = math.fsum(((y - overall.a0_hat) ** 2).ravel())
    s_e = math.fsum((effects.residuals**2).ravel())
    s_r = overall.S_xyT**2 / design.S_xxT
    s_a = n * math.fsum(effects.alpha**2)
    s_b = design.S_xxL * math.fsum(effects.beta**2)
    s_l = s_a + s_b

    noise = _NOISE_FACTOR * math.fsum((y * y).ravel())
    if s_t <= noise:
        # constant data up to rounding
        return SumsOfSquares(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, m, n)

    gap = abs(s_t - (s_e + s_l + s_r))
    if gap > DECOMP_RTOL * s_t + noise:
        raise DecompositionError(
            f"S_T={s_t!r} differs from S_E+S_L+S_R={s_e + s_l + s_r!r}"
        )
    # direct form: sum over cells of (fitted lab line - overall line)^2
    lab_dev = effects.alpha[:, None] + effects.beta[:, None] * design.x[None, :]
    s_l_direct = math.fsum((lab_dev**2).ravel())
    if abs(s_l_direct - s_l) > DECOMP_RTOL * max(s_l, s_t) + noise:
        raise DecompositionError(f"S_L={s_l_direct!r} differs from S_A+S_B={s_l!r}")
    return SumsOfSquares(s_t, s_e, s_l, s_r, s_a, s_b, m, n)


@dataclass(frozen=True)
class FTest:
    name: str
    numerator: str
    denominator: str
    df1: int
    df2: int
    alpha: float
    F0: float | None = None
    p_value: float | None = None
    undefined_reason: str | None = None

    @property
    def defined(self) -> bool:
        return self.F0 is not None

    @property
    def significant(self) -> bool | None:
        if self.p_value is None:
            return None
        return self.p_value < self.alpha


# test name -> (numerator factor, denominator factor)
_TESTS = {
    "regression": ("R", "B"),
    "intercepts": ("A", "E"),
    "slopes": ("B", "E"),
}


def f_test(ss: SumsOfSquares, name: str, alpha: float = 0.05) -> FTest:
    """One of the three F-tests.

    ``regression`` uses V_R / V_B on (1, m-1) df, ``intercepts`` V_A / V_E
    and ``slopes`` V_B / V_E, both on (m-1, mn-2m) df.
    """
    if name not in _TESTS:
        raise ValueError(f"unknown test {name!r}; choose from {TEST_NAMES}")
    num, den = _TESTS[name]
    v_den = ss.V(den)
    if v_den <= 0.0:
        raise UndefinedTestError(name, den)
    df1, df2 = ss.phi(num), ss.phi(den)
    f0 = ss.V(num) / v_den
    return FTest(name, num, den, df1, df2, alpha, f0, fdist.f_sf(f0, df1, df2))


def run_f_tests(ss: SumsOfSquares, alpha: float = 0.05) -> tuple[FTest, FTest, FTest]:
    return tuple(f_test(ss, name, alpha) for name in TEST_NAMES)


@dataclass(frozen=True)
class AnovaRow:
    factor: str
    S: float
    phi: int
    V: float | None


@dataclass(frozen=True)
class AnovaResult:
    kind: str
    rows: tuple[AnovaRow, ...]
    tests: tuple[FTest, ...] = ()
    alpha: float | None = None

    def row(self, factor: str) -> AnovaRow:
        for r in self.rows:
            if r.factor == factor:
                return r
        raise KeyError(factor)

    def test(self, name: str) -> FTest:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)


def _rows(ss: SumsOfSquares, factors: Iterable[str]) -> tuple[AnovaRow, ...]:
    out = [AnovaRow(f, ss.S(f), ss.phi(f), ss.V(f)) for f in factors]
    out.append(AnovaRow("T", ss.S_T, ss.phi_T, None))
    return tuple(out)


def basic_table(ss: SumsOfSquares) -> AnovaResult:
    return AnovaResult("basic", _rows(ss, "LRE"))


def detailed_table(ss: SumsOfSquares, alpha: float = 0.05) -> AnovaResult:
    """Table with L split into intercept (A) and slope (B) rows, plus tests.

    Degenerate tests (zero denominator) are kept in the result and marked
    undefined instead of raising.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    tests = []
    for name in TEST_NAMES:
        try:
            tests.append(f_test(ss, name, alpha))
        except UndefinedTestError as exc:
            num, den = _TESTS[name]
            tests.append(
                FTest(name, num, den, ss.phi(num), ss.phi(den), alpha, undefined_reason=str(exc))
            )
    return AnovaResult("detailed", _rows(ss, "ABRE"), tuple(tests), alpha)


@dataclass(frozen=True)
class VarianceComponents:
    sigma2_r: float
    sigma2_A_raw: float
    sigma2_B_raw: float
    sigma2_L_raw: float

    @property
    def sigma2_A(self) -> float:
        return max(self.sigma2_A_raw, 0.0)

    @property
    def sigma2_B(self) -> float:
        return max(self.sigma2_B_raw, 0.0)

    @property
    def sigma2_L(self) -> float:
        return max(self.sigma2_L_raw, 0.0)

    @property
    def sigma2_R_repro(self) -> float:
        """Reproducibility variance (between-laboratory plus repeatability)."""
        return self.sigma2_L + self.sigma2_r

    @property
    def negative(self) -> dict[str, bool]:
        return {
            "sigma2_A": self.sigma2_A_raw < 0,
            "sigma2_B": self.sigma2_B_raw < 0,
            "sigma2_L": self.sigma2_L_raw < 0,
        }


def variance_components(ss: SumsOfSquares, design: Design) -> VarianceComponents:
    n = ss.n
    v_e = ss.V("E")
    return VarianceComponents(
        sigma2_r=v_e,
        sigma2_A_raw=(ss.V("A") - v_e) / n,
        sigma2_B_raw=(ss.V("B") - v_e) / design.S_xxL,
        sigma2_L_raw=(2.0 / n) * (ss.V("L") - v_e),
    )


@dataclass(frozen=True)
class PrecisionProfile:
    """Dose-specific between-laboratory variance tau2(x) = s2_A + x^2 s2_B."""

    sigma2_A: float
    sigma2_B: float
    x: np.ndarray
    tau2: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.tau2.tolist()))

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.sigma2_A + x * x * self.sigma2_B

    def design_average(self, design_x: Sequence[float]) -> float:
        """Replication-weighted mean of tau2 over the study dose vector."""
        return math.fsum(self.at(design_x)) / len(design_x)


def precision_profile(
    vc: VarianceComponents,
    design: Design,
    query_x: Sequence[float] | None = None,
    include_design: bool = True,
) -> PrecisionProfile:
    """Evaluate tau2 at the distinct design doses and any extra query doses.

    Zero-truncated components are used, so the profile is never negative.
    """
    pts = []
    if include_design:
        pts.extend(np.unique(design.x).tolist())
    if query_x is not None:
        pts.extend(float(v) for v in query_x)
    x = np.array(pts, dtype=float)
    tau2 = vc.sigma2_A + x * x * vc.sigma2_B
    return PrecisionProfile(vc.sigma2_A, vc.sigma2_B, x, tau2)


def expected_mean_squares(
    design: Design, b0: float, sigma2_A: float, sigma2_B: float, sigma2_E: float
) -> dict[str, float]:
    """Expected mean squares under the mixed model for a balanced design."""
    n = design.n
    sigma2_L = sigma2_A + design.S_xxL / n * sigma2_B
    return {
        "A": n * sigma2_A + sigma2_E,
        "B": design.S_xxL * sigma2_B + sigma2_E,
        "L": n / 2.0 * sigma2_L + sigma2_E,
        "R": b0 * b0 * design.S_xxT + design.S_xxL * sigma2_B + sigma2_E,
        "E": sigma2_E,
    }


@dataclass(frozen=True)
class Analysis:
    """Everything derived from one dataset."""

    data: Dataset
    design: Design
    overall: OverallFit
    effects: LabEffects
    ss: SumsOfSquares
    basic: AnovaResult
    detailed: AnovaResult
    components: VarianceComponents
    profile: PrecisionProfile
    warnings: list[str] = field(default_factory=list)


def analyze(data: Dataset, alpha: float = 0.05, query_x=None) -> Analysis:
    design, overall, effects = fit(data)
    ss = sums_of_squares(data, design, overall, effects)
    vc = variance_components(ss, design)
    warnings = []
    for name, neg in vc.negative.items():
        if neg:
            warnings.append(f"{name} estimate is negative ({getattr(vc, name + '_raw'):.4g}); truncated to 0")
    detailed = detailed_table(ss, alpha)
    for t in detailed.tests:
        if not t.defined:
            warnings.append(t.undefined_reason)
    return Analysis(
        data=data,
        design=design,
        overall=overall,
        effects=effects,
        ss=ss,
        basic=basic_table(ss),
        detailed=detailed,
        components=vc,
        profile=precision_profile(vc, design, query_x),
        warnings=warnings,
    )
