"""Numerical kernel shared by every other module.

Hermitian eigendecomposition, quadrature for densities with square-root
edges, seeded random streams and log-log regression. Exact rationals are
``fractions.Fraction`` throughout the package (re-exported here as
``Rational``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Rational = Fraction

HERMITIAN_TOL = 1e-12


class NumericsError(ValueError):
    pass


def parse_rational(text: str | int | float | Fraction) -> Fraction:
    """Parse ``"a/b"``, an integer or a decimal string into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(text).limit_denominator(10**12)
    return Fraction(text.strip())


# ---------------------------------------------------------------------------
# Hermitian eigenproblems
# ---------------------------------------------------------------------------

def _check_hermitian(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericsError("matrix has non-finite entries")
    if g.size == 0:
        return g.astype(float)
    scale = np.max(np.abs(g))
    asym = np.max(np.abs(g - g.conj().T))
    if asym > HERMITIAN_TOL * scale:
        raise NumericsError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    g = 0.5 * (g + g.conj().T)
    if np.iscomplexobj(g) and not np.any(g.imag):
        g = g.real
    return g


def herm_eig(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a Hermitian matrix.

    The input is symmetrized as ``(g + g^H)/2`` first, which absorbs the
    roundoff left over from forming Gram products.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Orthonormal eigenvectors, ``v[:, i]`` pairs with ``w[i]``.
    """
    g = _check_hermitian(g)
    if g.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    w, v = np.linalg.eigh(g)
    return w, v


def herm_eigvals(g: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues only (same contract as :func:`herm_eig`)."""
    g = _check_hermitian(g)
    if g.size == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(g)


def logdet_pd(g: np.ndarray) -> float:
    """Natural log-determinant of a positive-definite Hermitian matrix."""
    w = herm_eigvals(g)
    if w.size and w[0] <= 0:
        return -math.inf
    return float(np.sum(np.log(w)))


def inv_trace_pd(g: np.ndarray) -> float:
    """Trace of the inverse of a positive-definite Hermitian matrix."""
    w = herm_eigvals(g)
    if w.size and w[0] <= 0:
        return math.inf
    return float(np.sum(1.0 / w))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _vectorize(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def call(x: np.ndarray) -> np.ndarray:
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.array([float(f(t)) for t in x])

    return call


def _simpson_theta(g: Callable, lo: float, hi: float, panels: int) -> float:
    theta = np.linspace(0.0, 0.5 * math.pi, panels + 1)
    x = lo + (hi - lo) * np.sin(theta) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        y = g(x) * (hi - lo) * np.sin(2.0 * theta)
    # inverse-square-root edges leave 0*inf at the endpoints; the transformed
    # integrand is finite there, so extrapolate from the interior
    if not np.isfinite(y[0]):
        y[0] = 3.0 * y[1] - 3.0 * y[2] + y[3]
    if not np.isfinite(y[-1]):
        y[-1] = 3.0 * y[-2] - 3.0 * y[-3] + y[-4]
    if not np.all(np.isfinite(y)):
        raise NumericsError("integrand is not finite inside the interval")
    h = theta[1] - theta[0]
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def integrate_edge_singular(
    f: Callable,
    lo: float,
    hi: float,
    abs_tol: float = 1e-10,
    panels: int = 2**14,
    max_panels: int = 2**22,
) -> float:
    """Integrate ``f`` over ``[lo, hi]`` allowing inverse-square-root edges.

    Substitutes ``x = lo + (hi - lo) sin^2(theta)`` and applies composite
    Simpson in ``theta``, doubling the panel count until two successive
    estimates agree within ``abs_tol``.
    """
    if not lo < hi:
        raise NumericsError(f"need lo < hi, got [{lo}, {hi}]")
    if abs_tol <= 0:
        raise NumericsError("abs_tol must be positive")
    g = _vectorize(f)
    prev = _simpson_theta(g, lo, hi, panels)
    while panels < max_panels:
        panels *= 2
        cur = _simpson_theta(g, lo, hi, panels)
        if abs(cur - prev) <= abs_tol:
            return cur
        prev = cur
    log.warning("quadrature on [%g, %g] did not reach tolerance %g", lo, hi, abs_tol)
    return prev


def simpson(
    f: Callable, a: float, b: float, abs_tol: float = 1e-10, panels: int = 256, max_panels: int = 2**20
) -> float:
    """Composite Simpson on a bounded, smooth integrand with panel doubling."""
    if b <= a:
        return 0.0
    g = _vectorize(f)

    def rule(n):
        x = np.linspace(a, b, n + 1)
        y = g(x)
        return (b - a) / n / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())

    prev = rule(panels)
    while panels < max_panels:
        panels *= 2
        cur = rule(panels)
        if abs(cur - prev) <= abs_tol:
            return float(cur)
        prev = cur
    log.warning("simpson on [%g, %g] did not reach tolerance %g", a, b, abs_tol)
    return float(prev)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream.

    The generator is numpy's counter-based Philox keyed by
    ``SeedSequence(master_seed, spawn_key=(stream_index,))``. Two streams with
    the same pair always yield identical samples; different ``stream_index``
    values give independent streams.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not 0 <= v < 2**64:
                raise NumericsError(f"{name} must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, *indices: int) -> "RngStream":
        """Stream for a nested task; ``indices`` are packed in 16-bit lanes."""
        idx = self.stream_index
        for i in indices:
            if not 0 <= i < 2**16:
                raise NumericsError("derived index must fit in 16 bits")
            idx = ((idx << 16) | i) & (2**64 - 1)
        return RngStream(self.master_seed, idx)


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "r_squared": self.r_squared,
        }


def ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Least squares with coefficient standard errors and R^2."""
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = design.shape
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    dof = n - k
    sigma2 = ssr / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.pinv(design.T @ design)
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    r2 = 1.0 if sst == 0 or ssr <= 1e-30 * max(sst, 1.0) else 1.0 - ssr / sst
    return coef, stderr, min(max(r2, 0.0), 1.0)


def _log_positive(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise NumericsError(f"{name} must be strictly positive and finite")
    return np.log(arr)


def loglog_fit(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Fit ``ln y = intercept + slope * ln x`` by ordinary least squares."""
    if len(xs) != len(ys):
        raise NumericsError("xs and ys differ in length")
    if len(xs) < 3:
        raise NumericsError("need at least 3 points")
    lx = _log_positive(xs, "xs")
    ly = _log_positive(ys, "ys")
    design = np.column_stack([np.ones_like(lx), lx])
    coef, stderr, r2 = ols(design, ly)
    # an exact power law leaves only roundoff in the residuals
    se = float(stderr[1]) if stderr[1] > 1e-13 * max(1.0, abs(coef[1])) else 0.0
    return FitResult(float(coef[1]), float(coef[0]), se, r2)


def loglog_fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> dict:
    """Fit ``ln y = c - b ln x - a ln ln x``; returns b, a and their errors."""
    if len(xs) != len(ys) or len(xs) < 4:
        raise NumericsError("need matching lists with at least 4 points")
    lx = _log_positive(xs, "xs")
    if np.any(lx <= 0):
        raise NumericsError("xs must exceed 1 for the ln ln x regressor")
    ly = _log_positive(ys, "ys")
    design = np.column_stack([np.ones_like(lx), lx, np.log(lx)])
    coef, stderr, r2 = ols(design, ly)
    return {
        "b": float(-coef[1]),
        "b_stderr": float(stderr[1]),
        "a": float(-coef[2]),
        "a_stderr": float(stderr[2]),
        "intercept": float(coef[0]),
        "r_squared": r2,
    }


def fsum(values) -> float:
    return math.fsum(values)
