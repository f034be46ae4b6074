"""Seeded simulation of interlaboratory line data and Monte Carlo checks.

Every random draw comes from a substream keyed by (seed, replicate, role),
where role is one of the intercept effects, slope effects or residual
errors.  A replicate can therefore be regenerated on its own, in any order
or in another process, and always yields the same numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from . import fdist
from .anova import TEST_NAMES, expected_mean_squares, sums_of_squares, variance_components
from .ingest import CENTER_TOL, Dataset
from .model import Design, design_stats, fit_overall, lab_effects

ROLES = {"A": 0, "B": 1, "E": 2}
MEAN_SQUARES = ("A", "B", "L", "R", "E")

# columns of the per-replicate statistics matrix
_COLS = ("V_A", "V_B", "V_L", "V_R", "V_E", "sigma2_r", "sigma2_L_raw", "a0_hat", "b0_hat",
         "F_regression", "F_intercepts", "F_slopes")
_COL = {name: k for k, name in enumerate(_COLS)}

_NULLS = {"regression": "b0", "intercepts": "sigma_A", "slopes": "sigma_B"}


class NullViolationError(ValueError):
    """Model parameters do not satisfy the null hypothesis of a test."""


@dataclass(frozen=True)
class ModelParams:
    a0: float = 0.0
    b0: float = 1.0
    sigma_A: float = 0.0
    sigma_B: float = 0.0
    sigma_E: float = 1.0

    def __post_init__(self):
        for name in ("sigma_A", "sigma_B", "sigma_E"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v}")
        for name in ("a0", "b0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class SimConfig:
    design: Design
    params: ModelParams
    replications: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        x = self.design.x
        if abs(math.fsum(x)) / len(x) > CENTER_TOL:
            raise ValueError("simulation design dose vector must be centered")
        if len(x) < 3:
            raise ValueError("simulation design needs at least 3 observations per lab")


def reference_design(m: int = 5, replicates: int = 5) -> Design:
    """Four centered log-dose levels (-0.75, -0.25, 0.25, 0.75), replicated."""
    x = np.repeat([-0.75, -0.25, 0.25, 0.75], replicates)
    return design_stats(x, m)


def _normals(seed: int, replicate: int, role: str, size: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(replicate, ROLES[role]))
    gen = np.random.Generator(np.random.Philox(ss))
    # 53-bit uniforms on the open interval (0, 1), then inverse normal CDF
    u = (gen.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) * 2.0**-53
    return ndtri(u)


def simulate_dataset(cfg: SimConfig, replicate_index: int) -> Dataset:
    p = cfg.params
    design = cfg.design
    m, n = design.m, design.n
    a = p.sigma_A * _normals(cfg.seed, replicate_index, "A", m)
    b = p.sigma_B * _normals(cfg.seed, replicate_index, "B", m)
    e = p.sigma_E * _normals(cfg.seed, replicate_index, "E", m * n).reshape(m, n)
    x = design.x
    y = (p.a0 + a)[:, None] + (p.b0 + b)[:, None] * x[None, :] + e
    y.setflags(write=False)
    labs = tuple(f"L{i + 1}" for i in range(m))
    return Dataset(labs, x, y)


def _replicate_row(cfg: SimConfig, k: int) -> list[float]:
    data = simulate_dataset(cfg, k)
    design = cfg.design
    overall = fit_overall(data, design)
    effects = lab_effects(data, design, overall)
    ss = sums_of_squares(data, design, overall, effects)
    vc = variance_components(ss, design)
    v = {f: ss.V(f) for f in MEAN_SQUARES}

    def ratio(num, den):
        return v[num] / v[den] if v[den] > 0 else math.nan

    return [
        v["A"], v["B"], v["L"], v["R"], v["E"],
        vc.sigma2_r, vc.sigma2_L_raw, overall.a0_hat, overall.b0_hat,
        ratio("R", "B"), ratio("A", "E"), ratio("B", "E"),
    ]


def _chunk(args):
    cfg, start, stop = args
    return start, [_replicate_row(cfg, k) for k in range(start, stop)]


def replicate_statistics(cfg: SimConfig, workers: int = 1) -> dict[str, np.ndarray]:
    """Per-replicate mean squares, estimates and F ratios.

    Rows are indexed by replicate number, so the result does not depend on
    ``workers`` or on scheduling.
    """
    R = cfg.replications
    out = np.empty((R, len(_COLS)))
    if workers <= 1 or R < 2 * workers:
        for k in range(R):
            out[k] = _replicate_row(cfg, k)
    else:
        step = -(-R // (4 * workers))
        jobs = [(cfg, s, min(s + step, R)) for s in range(0, R, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, rows in pool.map(_chunk, jobs):
                out[start:start + len(rows)] = rows
    return {name: out[:, k] for name, k in _COL.items()}


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    theory: float

    @property
    def z(self) -> float:
        if self.se == 0:
            return 0.0 if self.mean == self.theory else math.inf
        return (self.mean - self.theory) / self.se

    def within(self, k: float = 3.0) -> bool:
        return abs(self.mean - self.theory) <= k * self.se + 1e-12 * max(1.0, abs(self.theory))


def mean_and_se(values) -> tuple[float, float]:
    """Sample mean and its standard error, with exactly rounded sums."""
    values = np.asarray(values, dtype=float)
    R = len(values)
    mean = math.fsum(values) / R
    if R < 2:
        return mean, math.nan
    var = math.fsum((values - mean) ** 2) / (R - 1)
    return mean, math.sqrt(var / R)


def monte_carlo_mean_squares(cfg: SimConfig, workers: int = 1, stats=None) -> dict[str, MCEstimate]:
    """Empirical means of V_A, V_B, V_L, V_R, V_E against their expectations."""
    if cfg.replications < 100:
        raise ValueError("mean-square validation needs at least 100 replications")
    stats = stats if stats is not None else replicate_statistics(cfg, workers)
    p = cfg.params
    theory = expected_mean_squares(cfg.design, p.b0, p.sigma_A**2, p.sigma_B**2, p.sigma_E**2)
    out = {}
    for f in MEAN_SQUARES:
        mean, se = mean_and_se(stats["V_" + f])
        out[f] = MCEstimate(mean, se, theory[f])
    return out


def monte_carlo_estimators(cfg: SimConfig, workers: int = 1, stats=None) -> dict[str, MCEstimate]:
    """Bias check for the repeatability and raw between-laboratory estimates."""
    stats = stats if stats is not None else replicate_statistics(cfg, workers)
    p = cfg.params
    d = cfg.design
    targets = {
        "sigma2_r": p.sigma_E**2,
        "sigma2_L_raw": p.sigma_A**2 + d.S_xxL / d.n * p.sigma_B**2,
        "a0_hat": p.a0,
        "b0_hat": p.b0,
    }
    return {k: MCEstimate(*mean_and_se(stats[k]), t) for k, t in targets.items()}


def check_null(params: ModelParams, test: str) -> None:
    if test not in _NULLS:
        raise ValueError(f"unknown test {test!r}; choose from {TEST_NAMES}")
    name = _NULLS[test]
    if getattr(params, name) != 0:
        raise NullViolationError(
            f"{test} test null requires {name} = 0, got {getattr(params, name)}"
        )
    denom_sd = params.sigma_E if test != "regression" else max(params.sigma_E, params.sigma_B)
    if denom_sd == 0:
        raise ValueError(f"{test} test is undefined when its denominator variance is zero")


@dataclass(frozen=True)
class RejectionRate:
    test: str
    alpha: float
    rate: float
    se: float
    replications: int

    def within(self, k: float = 3.0) -> bool:
        return abs(self.rate - self.alpha) <= k * self.se


def _critical_value(cfg: SimConfig, test: str, alpha: float) -> float:
    m, n = cfg.design.m, cfg.design.n
    df = {"regression": (1, m - 1), "intercepts": (m - 1, m * n - 2 * m),
          "slopes": (m - 1, m * n - 2 * m)}[test]
    return fdist.f_quantile(1.0 - alpha, *df)


def rejection_rate(cfg: SimConfig, test: str, alpha: float = 0.05, workers: int = 1,
                   stats=None) -> RejectionRate:
    """Fraction of replicates in which ``test`` rejects at level ``alpha``.

    No null check; see :func:`null_rejection_rate` for size calibration.
    """
    if test not in _NULLS:
        raise ValueError(f"unknown test {test!r}; choose from {TEST_NAMES}")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    stats = stats if stats is not None else replicate_statistics(cfg, workers)
    crit = _critical_value(cfg, test, alpha)
    f0 = stats["F_" + test]
    R = len(f0)
    rate = int(np.count_nonzero(f0 > crit)) / R
    return RejectionRate(test, alpha, rate, math.sqrt(rate * (1 - rate) / R), R)


def null_rejection_rate(cfg: SimConfig, test: str, alpha: float = 0.05, workers: int = 1,
                        stats=None) -> RejectionRate:
    """Empirical size of ``test``; parameters must satisfy its null."""
    check_null(cfg.params, test)
    res = rejection_rate(cfg, test, alpha, workers, stats)
    # band under the null: binomial SE at the nominal level
    return replace(res, se=math.sqrt(alpha * (1 - alpha) / res.replications))


def power_curve(cfg: SimConfig, sigma_B_grid, test: str = "slopes", alpha: float = 0.05,
                workers: int = 1) -> list[tuple[float, RejectionRate]]:
    out = []
    for sb in sigma_B_grid:
        c = replace(cfg, params=replace(cfg.params, sigma_B=float(sb)))
        out.append((float(sb), rejection_rate(c, test, alpha, workers)))
    return out
