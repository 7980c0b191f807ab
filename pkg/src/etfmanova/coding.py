"""Application measures: the analog sampling codec, NOMA capacity and the STC bound.

The codec encodes a source sampled on the subset ``S`` into ``m`` frequency
coefficients by least squares, then quantizes with entropy-coded dithered
quantization (modeled as additive noise of variance ``D``). Its rate depends
on the sub-frame only through the noise-amplification functional
``Psi_MSE``.

All rates and capacities are in bits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .frames import Frame
from .numerics import RngStream, herm_eigvals
from .spectra import SINGULAR_RTOL, functional
from .subsets import SelectionMask, SelectionModel, draw, enumerate_masks, subframe_gram


class CodingError(ValueError):
    pass


@dataclass(frozen=True)
class RdfConfig:
    """Source variance, distortion and (optionally) the aspect ratios.

    ``beta`` and ``p`` are implied by the frame and the subset; when given
    they are checked against them.
    """

    sigma_x2: float
    distortion: float
    beta: float | None = None
    p: float | None = None
    estimator: str = "ls"

    def __post_init__(self):
        if not self.sigma_x2 > 0 or not self.distortion > 0:
            raise CodingError("sigma_x2 and distortion must be positive")
        if self.estimator != "ls":
            raise CodingError("only the least-squares estimator is implemented")

    @property
    def sdr(self) -> float:
        return self.sigma_x2 / self.distortion


@dataclass(frozen=True)
class CapacityConfig:
    snr: float
    k: int
    mode: str = "regular"

    def __post_init__(self):
        if not self.snr > 0:
            raise CodingError("snr must be positive")
        if self.k < 1:
            raise CodingError("k must be at least 1")
        if self.mode not in ("regular", "practical"):
            raise CodingError(f"unknown capacity mode {self.mode!r}")


def _gram_eigs(f: Frame, s: SelectionMask) -> np.ndarray:
    return herm_eigvals(subframe_gram(f, s).gram)


def ls_encode(f: Frame, s: SelectionMask, x_s) -> np.ndarray:
    """Minimum-norm solution of ``F_S^H x = x_s``: ``x = F_S (F_S^H F_S)^{-1} x_s``."""
    k = len(s)
    if k > f.m:
        raise CodingError(f"LS encoding needs |S| <= m, got {k} > {f.m}")
    x_s = np.asarray(x_s, dtype=complex).ravel()
    if x_s.size != k:
        raise CodingError("x_s length does not match the subset size")
    fs = f.columns(s.array)
    g = subframe_gram(f, s).gram
    lam = herm_eigvals(g)
    if lam[0] <= SINGULAR_RTOL * lam[-1]:
        raise CodingError("sub-frame Gram is singular")
    x = fs @ np.linalg.solve(g, x_s)
    resid = np.linalg.norm(fs.conj().T @ x - x_s)
    if resid > 1e-9 * max(np.linalg.norm(x_s), 1e-300):
        raise CodingError(f"LS residual {resid:.3e} too large")
    return x


@dataclass(frozen=True)
class RateResult:
    value: float
    infinite: bool = False


def _check_ratios(f: Frame, s: SelectionMask, cfg: RdfConfig) -> tuple[float, float]:
    k = len(s)
    beta, p = k / f.m, k / f.n
    for name, want, got in (("beta", cfg.beta, beta), ("p", cfg.p, p)):
        if want is not None and abs(want - got) > 1e-12:
            raise CodingError(f"config {name}={want} but the subset gives {got}")
    return beta, p


def ecdq_rate(f: Frame, s: SelectionMask, cfg: RdfConfig) -> RateResult:
    """ECDQ rate ``(p / 2 beta) log2(1 + (sigma_x2 / D) beta Psi_MSE)`` in bits per sample."""
    if len(s) > f.m:
        raise CodingError("the analog codec needs k <= m")
    beta, p = _check_ratios(f, s, cfg)
    psi = functional(f, s, "mse")
    if psi.infinite:
        return RateResult(math.inf, True)
    return RateResult(p / (2 * beta) * math.log2(1 + cfg.sdr * beta * psi.value))


def ecdq_rate_direct(f: Frame, s: SelectionMask, cfg: RdfConfig) -> RateResult:
    """Same rate from the encoder power: ``(m/2n) log2(1 + E|x|^2 / (m D))``.

    ``E|x|^2 = sigma_x2 tr(G_S^{-1})`` for a white source.
    """
    lam = _gram_eigs(f, s)
    if lam[0] <= SINGULAR_RTOL * lam[-1]:
        return RateResult(math.inf, True)
    power = cfg.sigma_x2 * math.fsum(1.0 / lam)
    return RateResult(f.m / (2 * f.n) * math.log2(1 + power / (f.m * cfg.distortion)))


@dataclass(frozen=True)
class AveragedValue:
    """Subset average plus the raw per-subset samples.

    Singular subsets are excluded from ``finite_mean`` and counted in
    ``infinite_count`` (weight ``infinite_fraction``); ``mean`` is infinite
    whenever any subset is.
    """

    mean: float
    finite_mean: float
    half_width: float
    infinite_count: int
    infinite_fraction: float
    samples: tuple[float, ...]
    exact: bool

    def to_dict(self, with_samples: bool = False) -> dict:
        out = asdict(self)
        if not with_samples:
            out.pop("samples")
        return out


def _average(f: Frame, model: SelectionModel, fn, exact: bool, trials, rng) -> AveragedValue:
    if exact:
        pairs = [(w, fn(s)) for s, w in enumerate_masks(model, f.n) if len(s)]
    else:
        if trials is None or trials < 1:
            raise CodingError("Monte-Carlo averaging needs trials >= 1")
        if rng is None:
            raise CodingError("Monte-Carlo averaging needs an RngStream")
        masks = (draw(model, f.n, rng.derive(i)) for i in range(trials))
        pairs = [(1.0, fn(s)) for s in masks if len(s)]
    if not pairs:
        raise CodingError("no nonempty subsets")
    w = np.array([p[0] for p in pairs])
    v = np.array([p[1] for p in pairs], dtype=float)
    w = w / math.fsum(w)
    bad = ~np.isfinite(v)
    inf_frac = math.fsum(w[bad])
    good_w = w[~bad]
    finite_mean = math.fsum(good_w * v[~bad]) / math.fsum(good_w) if good_w.size else math.nan
    mean = float(v[bad][0]) if np.any(bad) else finite_mean
    half = 0.0
    if not exact and np.sum(~bad) >= 2:
        half = 1.96 * float(np.std(v[~bad], ddof=1)) / math.sqrt(np.sum(~bad))
    return AveragedValue(mean, finite_mean, half, int(bad.sum()), inf_frac, tuple(v.tolist()), exact)


def operational_rdf(
    f: Frame,
    model: SelectionModel,
    cfg: RdfConfig,
    exact: bool = False,
    trials: int | None = None,
    rng: RngStream | None = None,
) -> AveragedValue:
    """Average ECDQ rate over random subsets, with the per-subset rates kept."""
    if model.mode != "combinatorial":
        raise CodingError("the operational RDF averages over k-subsets")
    return _average(f, model, lambda s: ecdq_rate(f, s, cfg).value, exact, trials, rng)


def write_histogram_csv(result: AveragedValue, path: str | Path, bins: int = 50) -> None:
    """Histogram of the finite per-subset values (bin edges and counts)."""
    vals = np.array([v for v in result.samples if math.isfinite(v)])
    with open(path, "w", newline="") as fh:
        fh.write(f"# infinite_count={result.infinite_count}\n")
        w = csv.writer(fh)
        w.writerow(["left", "right", "count"])
        if vals.size:
            counts, edges = np.histogram(vals, bins=bins)
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c)])


def subset_capacity(f: Frame, s: SelectionMask, snr: float, mode: str = "regular") -> float:
    """``(1/m) log2 det(I + snr G_S)``, or ``(1/m) log2 det(snr G_S)`` in practical mode."""
    lam = _gram_eigs(f, s)
    if mode == "regular":
        return math.fsum(np.log2(1 + snr * lam)) / f.m
    if len(s) > f.m:
        raise CodingError("practical mode needs k <= m")
    if lam[0] <= SINGULAR_RTOL * lam[-1]:
        return -math.inf
    return math.fsum(np.log2(snr * lam)) / f.m


def noma_capacity(
    f: Frame,
    cfg: CapacityConfig,
    model: SelectionModel | None = None,
    exact: bool = False,
    trials: int | None = None,
    rng: RngStream | None = None,
) -> AveragedValue:
    """Average sum capacity per resource over random sets of ``k`` active users."""
    model = model or SelectionModel.combinatorial(cfg.k)
    if cfg.mode == "practical" and model.mode == "combinatorial" and model.k > f.m:
        raise CodingError("practical mode needs k <= m")
    return _average(f, model, lambda s: subset_capacity(f, s, cfg.snr, cfg.mode), exact, trials, rng)


def stc_bound(
    f: Frame,
    k: int,
    snr: float,
    exact: bool = False,
    trials: int | None = None,
    rng: RngStream | None = None,
) -> AveragedValue:
    """Average pairwise-error bound ``snr^(-m) / det(F_S F_S^H)`` over k-subsets."""
    if k < f.m:
        raise CodingError("the STC bound needs k >= m")
    if not snr > 0:
        raise CodingError("snr must be positive")

    def one(s):
        lam = herm_eigvals(subframe_gram(f, s).hessian)
        if lam[0] <= SINGULAR_RTOL * lam[-1]:
            return math.inf
        # work in logs: snr^-m and the determinant can both overflow
        return math.exp(-f.m * math.log(snr) - math.fsum(np.log(lam)))

    return _average(f, SelectionModel.combinatorial(k), one, exact, trials, rng)
