"""Closed-form fit of the random intercept / random slope line model.

With a common, centered dose vector every quantity has a closed form: the
overall line comes from the grand mean and the pooled cross-product, and
each laboratory is described by its deviation from that line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest import Dataset


class DegenerateDesignError(ValueError):
    pass


@dataclass(frozen=True)
class Design:
    x: np.ndarray
    m: int
    S_xxL: float
    S_xxT: float

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class OverallFit:
    a0_hat: float
    b0_hat: float
    S_xyT: float


@dataclass(frozen=True)
class LabEffects:
    alpha: np.ndarray
    beta: np.ndarray
    S_xyL: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray

    def intercepts(self, overall: OverallFit) -> np.ndarray:
        """Absolute per-lab intercepts, a0_hat + alpha_i."""
        return overall.a0_hat + self.alpha

    def slopes(self, overall: OverallFit) -> np.ndarray:
        return overall.b0_hat + self.beta


def design_stats(x, m: int) -> Design:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("dose vector must be one-dimensional")
    if m < 1:
        raise ValueError("lab count must be positive")
    s_xxl = math.fsum(x * x)
    if s_xxl <= 0.0:
        raise DegenerateDesignError("dose vector has zero spread (S_xxL = 0)")
    x = x.copy()
    x.setflags(write=False)
    return Design(x=x, m=int(m), S_xxL=s_xxl, S_xxT=m * s_xxl)


def _cross(x, y_row):
    return math.fsum(x * y_row)


def fit_overall(data: Dataset, design: Design) -> OverallFit:
    y = data.y
    a0 = math.fsum(y.ravel()) / y.size
    # lab-major, then design order
    s_xyt = math.fsum((y * design.x).ravel())
    return OverallFit(a0_hat=a0, b0_hat=s_xyt / design.S_xxT, S_xyT=s_xyt)


def lab_effects(data: Dataset, design: Design, overall: OverallFit) -> LabEffects:
    y = data.y
    n = design.n
    x = design.x
    lab_means = np.array([math.fsum(row) / n for row in y])
    s_xyl = np.array([_cross(x, row) for row in y])
    alpha = lab_means - overall.a0_hat
    beta = s_xyl / design.S_xxL - overall.b0_hat
    fitted = (overall.a0_hat + alpha)[:, None] + (overall.b0_hat + beta)[:, None] * x[None, :]
    residuals = y - fitted
    for arr in (alpha, beta, s_xyl, fitted, residuals):
        arr.setflags(write=False)
    return LabEffects(alpha=alpha, beta=beta, S_xyL=s_xyl, fitted=fitted, residuals=residuals)


def fit(data: Dataset):
    """Convenience wrapper returning ``(design, overall, effects)``."""
    design = design_stats(data.x, data.m)
    overall = fit_overall(data, design)
    return design, overall, lab_effects(data, design, overall)
