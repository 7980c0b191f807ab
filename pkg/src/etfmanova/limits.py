"""Limiting spectral laws: Marchenko-Pastur and Wachter's MANOVA law.

Both laws describe the eigenvalue distribution of a sub-frame Gram matrix,
normalized per selected column (so the mean is 1). The MANOVA law lives on
``[lambda_-, lambda_+]`` with a possible atom at ``1/gamma``; when the
sub-frame is wider than tall (``beta > 1``) the rank-deficient Gram adds an
atom at zero of mass ``1 - 1/beta``.

``moment`` returns the frame-normalized moment ``(1/n) E tr(G_S^r)`` through
Narayana polynomials; divide by ``p`` for the per-column normalization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .numerics import integrate_edge_singular, simpson

CDF_TABLE_POINTS = 4096


class LawError(ValueError):
    pass


def narayana(j: int, i: int) -> int:
    """Narayana number ``N(j, i) = C(j, i) C(j, i-1) / j``."""
    if not 1 <= i <= j:
        return 0
    return math.comb(j, i) * math.comb(j, i - 1) // j


def catalan(j: int) -> int:
    return math.comb(2 * j, j) // (j + 1)


@dataclass(frozen=True)
class NarayanaTable:
    max_order: int
    entries: dict = field(init=False, repr=False)

    def __post_init__(self):
        table = {
            (j, i): Fraction(narayana(j, i))
            for j in range(1, self.max_order + 1)
            for i in range(1, j + 1)
        }
        object.__setattr__(self, "entries", table)

    def row_sum(self, j: int) -> Fraction:
        return sum((self.entries[j, i] for i in range(1, j + 1)), Fraction(0))


@dataclass(frozen=True)
class LimitLaw:
    """A limiting spectral law.

    Parameters
    ----------
    family : {"mp", "manova"}
    gamma : frame aspect ratio ``m/n`` (MANOVA only)
    beta : sub-frame aspect ratio ``k/m``
    """

    family: str
    beta: float | Fraction
    gamma: float | Fraction | None = None

    def __post_init__(self):
        if self.family not in ("mp", "manova"):
            raise LawError(f"unknown law family {self.family!r}")
        if not self.beta > 0:
            raise LawError("beta must be positive")
        if self.family == "manova":
            if self.gamma is None or not 0 < self.gamma <= 1:
                raise LawError("manova needs 0 < gamma <= 1")
            if self.beta * self.gamma > 1 + 1e-15:
                raise LawError("manova needs p = beta * gamma <= 1")

    # ---- parameters -----------------------------------------------------

    @property
    def p(self) -> float | None:
        if self.family != "manova":
            return None
        return self.beta * self.gamma

    @cached_property
    def edges(self) -> tuple[float, float]:
        b = float(self.beta)
        if self.family == "mp":
            return (1 - math.sqrt(b)) ** 2, (1 + math.sqrt(b)) ** 2
        g = float(self.gamma)
        a = math.sqrt(b * (1 - g))
        c = math.sqrt(max(1 - b * g, 0.0))
        return (a - c) ** 2, (a + c) ** 2

    @property
    def lambda_minus(self) -> float:
        return self.edges[0]

    @property
    def lambda_plus(self) -> float:
        return self.edges[1]

    @property
    def atom_location(self) -> float | None:
        return 1.0 / float(self.gamma) if self.family == "manova" else None

    @property
    def atom_mass(self) -> float:
        if self.family != "manova":
            return 0.0
        b, g = float(self.beta), float(self.gamma)
        return max(0.0, 1 + 1 / b - 1 / (b * g))

    @property
    def zero_atom_mass(self) -> float:
        return max(0.0, 1 - 1 / float(self.beta))

    @property
    def continuous_mass_expected(self) -> float:
        return 1.0 - self.atom_mass - self.zero_atom_mass

    @property
    def has_continuous_part(self) -> bool:
        lo, hi = self.edges
        return hi - lo > 1e-14 * max(hi, 1.0)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "gamma": None if self.gamma is None else float(self.gamma),
            "beta": float(self.beta),
            "p": None if self.p is None else float(self.p),
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
            "atom_location": self.atom_location,
            "atom_mass": self.atom_mass,
            "zero_atom_mass": self.zero_atom_mass,
        }

    # ---- density and CDF ------------------------------------------------

    def density(self, x):
        """Continuous part of the density (atoms are reported separately)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.edges
        b = float(self.beta)
        inside = (x >= lo) & (x <= hi) & (x > 0)
        out = np.zeros_like(x)
        xi = x[inside]
        root = np.sqrt(np.clip((hi - xi) * (xi - lo), 0.0, None))
        if self.family == "mp":
            out[inside] = root / (2 * math.pi * b * xi)
        else:
            g = float(self.gamma)
            out[inside] = root / (2 * b * math.pi * xi * (1 - g * xi))
        return out if out.ndim else float(out)

    def theta_weight(self, theta):
        """Density times ``dx/dtheta`` under ``x = lo + (hi - lo) sin^2 theta``.

        The square-root edges, a hard edge at zero and a pole sitting on the
        upper edge all cancel analytically, so the result is bounded.
        """
        t = np.asarray(theta, dtype=float)
        lo, hi = self.edges
        w = hi - lo
        s2, c2 = np.sin(t) ** 2, np.cos(t) ** 2
        b = float(self.beta)
        # s^2 / x with x = lo + w s^2
        with np.errstate(divide="ignore", invalid="ignore"):
            s2_over_x = 1.0 / w if lo == 0.0 else s2 / (lo + w * s2)
            val = w * c2 * s2_over_x / (math.pi * b) * w
            if self.family == "manova":
                g = float(self.gamma)
                gap = 1.0 - g * hi
                if abs(gap) < 1e-12:
                    # pole on the upper edge: 1 - g x = g w c^2
                    val = w * s2_over_x / (math.pi * b * g)
                else:
                    val = val / (gap + g * w * c2)
        val = np.broadcast_to(val, t.shape).astype(float)
        out = np.where(np.isfinite(val), val, 0.0)
        return out if out.ndim else float(out)

    def x_of_theta(self, theta):
        lo, hi = self.edges
        return lo + (hi - lo) * np.sin(np.asarray(theta, dtype=float)) ** 2

    def theta_of_x(self, x):
        lo, hi = self.edges
        u = np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
        return np.arcsin(np.sqrt(u))

    @cached_property
    def _cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        theta = np.linspace(0.0, 0.5 * math.pi, CDF_TABLE_POINTS + 1)
        y = self.theta_weight(theta)
        cum = np.maximum.accumulate(cumulative_simpson(y, x=theta, initial=0.0))
        theta.setflags(write=False)
        cum.setflags(write=False)
        return theta, cum

    def _continuous_cdf_table(self, x: np.ndarray) -> np.ndarray:
        theta, cum = self._cdf_table
        return np.interp(self.theta_of_x(x), theta, cum)

    def _atoms_below(self, x: np.ndarray) -> np.ndarray:
        out = self.zero_atom_mass * (x >= 0.0)
        if self.atom_mass > 0:
            out = out + self.atom_mass * (x >= self.atom_location)
        return out

    def cdf(self, x, abs_tol: float = 1e-6):
        """Distribution function, atoms included.

        Uses the cached table (error well below 1e-6); smaller ``abs_tol``
        falls back to direct quadrature.
        """
        xa = np.asarray(x, dtype=float)
        out = self._atoms_below(xa).astype(float)
        if self.has_continuous_part:
            if abs_tol >= 1e-6:
                out = out + self._continuous_cdf_table(xa)
            else:
                flat = np.atleast_1d(xa).ravel()
                cont = np.array([self.continuous_cdf_direct(v, abs_tol) for v in flat])
                out = out + cont.reshape(xa.shape)
        return out if out.ndim else float(out)

    def continuous_cdf_direct(self, x: float, abs_tol: float = 1e-10) -> float:
        lo, hi = self.edges
        if x <= lo or not self.has_continuous_part:
            return 0.0
        return simpson(self.theta_weight, 0.0, float(self.theta_of_x(x)), abs_tol)

    def integrate(self, g: Callable, abs_tol: float = 1e-10) -> float:
        """``int g(x) f(x) dx`` over the continuous part only."""
        if not self.has_continuous_part:
            return 0.0

        def integrand(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                return g(self.x_of_theta(t)) * self.theta_weight(t)

        # a second sin^2 substitution tames log singularities at a hard edge
        return integrate_edge_singular(integrand, 0.0, 0.5 * math.pi, abs_tol)

    def continuous_mass(self, abs_tol: float = 1e-10) -> float:
        if not self.has_continuous_part:
            return 0.0
        return simpson(self.theta_weight, 0.0, 0.5 * math.pi, abs_tol)

    def sample_grid(self, points: int = CDF_TABLE_POINTS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = self.edges
        theta = np.linspace(0.0, 0.5 * math.pi, points + 1)
        x = lo + (hi - lo) * np.sin(theta) ** 2
        return x, self.density(x), self.cdf(x)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def _manova_moment(gamma, p, r: int):
    one = type(p)(1) if isinstance(p, Fraction) else 1.0
    x = one / gamma - 1
    q = 1 - p
    total = p * (x + 1) ** (r - 1)
    for j in range(r - 1):
        # (1-p)^(2+j) N_{j+1}(x p / (1-p)) expanded termwise: no division by 1-p
        inner = sum(
            narayana(j + 1, i) * (x * p) ** i * q ** (2 + j - i) for i in range(1, j + 2)
        )
        total -= (x + 1) ** (r - 2 - j) * inner
    return total


def manova_moment(gamma, p, r: int, exact: bool = True):
    """Frame-normalized MANOVA moment as a function of ``gamma`` and ``p``."""
    if r < 1:
        raise LawError("moment order must be >= 1")
    if exact:
        return _manova_moment(Fraction(gamma), Fraction(p), r)
    return float(_manova_moment(float(gamma), float(p), r))


def mp_moment(beta, r: int, exact: bool = True):
    """Per-column MP moment ``sum_i N(r, i) beta^(i-1)``."""
    if r < 1:
        raise LawError("moment order must be >= 1")
    b = Fraction(beta) if exact else float(beta)
    total = sum(narayana(r, i) * b ** (i - 1) for i in range(1, r + 1))
    return total if exact else float(total)


def moment(law: LimitLaw, r: int, exact: bool = False, normalization: str = "frame"):
    """Moment of order ``r``.

    ``normalization="frame"`` (MANOVA only) gives ``(1/n) E tr(G_S^r)``, whose
    first moment is ``p``; ``"law"`` gives ``int x^r d mu``.
    """
    if law.family == "mp":
        if normalization != "law":
            raise LawError("the MP law only has the per-column normalization")
        return mp_moment(law.beta, r, exact)
    if exact:
        g, p = Fraction(law.gamma), Fraction(law.beta) * Fraction(law.gamma)
    else:
        g, p = float(law.gamma), float(law.beta) * float(law.gamma)
    val = manova_moment(g, p, r, exact)
    return val if normalization == "frame" else val / p


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralResult:
    value: float
    infinite: bool = False

    def to_dict(self) -> dict:
        return {"value": self.value, "infinite": self.infinite}


def functional_integral(
    law: LimitLaw, kind: str | Callable = "mse", abs_tol: float = 1e-9
) -> IntegralResult:
    """``int g(x) d mu(x)`` over the continuous part plus the atoms.

    ``kind`` is ``"mse"`` (``g = 1/x``), ``"shannon"`` (``g = ln x``) or a
    callable. Near a hard edge at zero the density behaves like
    ``x^(-1/2)``, so ``1/x`` diverges there while ``ln x`` stays integrable;
    an atom at zero makes both diverge.
    """
    lo, hi = law.edges
    if kind == "mse":
        g = lambda x: 1.0 / x  # noqa: E731
        if law.zero_atom_mass > 0 or (law.has_continuous_part and lo <= 1e-14):
            return IntegralResult(math.inf, True)
    elif kind == "shannon":
        g = np.log
        if law.zero_atom_mass > 0:
            return IntegralResult(-math.inf, True)
    elif callable(kind):
        g = kind
    else:
        raise LawError(f"unknown functional {kind!r}")
    total = law.integrate(g, abs_tol)
    if law.atom_mass > 0:
        total += float(g(law.atom_location)) * law.atom_mass
    if law.zero_atom_mass > 0:
        total += float(g(0.0)) * law.zero_atom_mass
    return IntegralResult(float(total), not math.isfinite(total))


def export_csv(law: LimitLaw, path: str | Path, points: int = CDF_TABLE_POINTS) -> None:
    """Write law parameters (as ``#`` comments) and a tabulated density/CDF."""
    x, dens, cdf = law.sample_grid(points)
    with open(path, "w", newline="") as fh:
        for key, val in law.to_dict().items():
            fh.write(f"# {key}={val}\n")
        w = csv.writer(fh)
        w.writerow(["x", "density", "cdf"])
        for row in zip(x, dens, cdf):
            w.writerow([f"{v:.17g}" for v in row])
