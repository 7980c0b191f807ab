"""Empirical spectra of sub-frames and the performance functionals built on them.

An :class:`Esd` is the ascending eigenvalue list of a sub-frame Gram
``F_S^H F_S`` (k x k) or Hessian ``F_S F_S^H`` (m x m). On top of it sit the
empirical moments, spectral variance and kurtosis, the per-subset
functionals (noise amplification, Shannon ratio, RIP, condition number) and
their subset averages, and the Kolmogorov-Smirnov distance to a limit law or
another spectrum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .frames import Frame
from .limits import LimitLaw
from .numerics import RngStream, herm_eigvals
from .subsets import SelectionMask, SelectionModel, draw, enumerate_masks, subframe_gram

NEG_CLIP = 1e-9
SINGULAR_RTOL = 1e-12
ESV_FLOOR = 1e-12
SNAP_RTOL = 1e-9

KINDS = ("mse", "shannon", "rip", "cond", "strip_indicator")


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class Esd:
    """Ascending eigenvalues of a sub-frame matrix.

    Values in ``[-1e-9, 0)`` are roundoff and are clipped to zero; anything
    more negative is rejected.
    """

    eigenvalues: np.ndarray
    ambient: str = "gram"

    def __post_init__(self):
        lam = np.sort(np.asarray(self.eigenvalues, dtype=float).ravel())
        if not np.all(np.isfinite(lam)):
            raise SpectrumError("eigenvalues must be finite")
        if lam.size and lam[0] < -NEG_CLIP:
            raise SpectrumError(f"eigenvalue {lam[0]:.3e} is negative beyond roundoff")
        lam = np.where(lam < 0, 0.0, lam)
        lam.setflags(write=False)
        if self.ambient not in ("gram", "hessian"):
            raise SpectrumError(f"ambient must be gram or hessian, not {self.ambient!r}")
        object.__setattr__(self, "eigenvalues", lam)

    def __len__(self) -> int:
        return self.eigenvalues.size

    def cdf(self, x, left: bool = False):
        """Empirical CDF ``(1/k) #{lambda_i <= x}`` (``< x`` when ``left``)."""
        side = "left" if left else "right"
        return np.searchsorted(self.eigenvalues, x, side=side) / len(self)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# ambient={self.ambient}\n")
            w = csv.writer(fh)
            w.writerow(["eigenvalue"])
            for v in self.eigenvalues:
                w.writerow([f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Esd":
        ambient, vals = "gram", []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("# ambient="):
                    ambient = line.split("=", 1)[1]
                elif line and not line.startswith("#") and line != "eigenvalue":
                    vals.append(float(line))
        return cls(np.array(vals), ambient)


def esd_of(f: Frame, s: SelectionMask, side: str = "auto") -> Esd:
    """Spectrum of the selected sub-frame; ``auto`` uses the smaller of Gram and Hessian."""
    if not len(s):
        raise SpectrumError("empty selection has no spectrum")
    if side == "auto":
        side = "gram" if len(s) <= f.m else "hessian"
    sub = subframe_gram(f, s)
    mat = sub.gram if side == "gram" else sub.hessian
    return Esd(herm_eigvals(mat), side)


def moment_of(e: Esd, r: int, normalizer: int) -> float:
    """``(1/normalizer) sum_i lambda_i^r``; the normalizer is n, k or m."""
    if r < 1:
        raise SpectrumError("moment order must be >= 1")
    if normalizer < 1:
        raise SpectrumError("normalizer must be a positive count")
    return math.fsum(e.eigenvalues**r) / normalizer


@dataclass(frozen=True)
class SpectralSummary:
    moments: tuple[float, ...]
    esv: float
    esk: float | None
    lambda_min: float
    lambda_max: float

    @property
    def esk_defined(self) -> bool:
        return self.esk is not None

    def to_dict(self) -> dict:
        out = {f"m{i + 1}": v for i, v in enumerate(self.moments)}
        out.update(
            esv=self.esv,
            esk=self.esk,
            esk_defined=self.esk_defined,
            lambda_min=self.lambda_min,
            lambda_max=self.lambda_max,
        )
        return out


def summary(e: Esd, normalizer: int | None = None) -> SpectralSummary:
    """Moments 1..6, spectral variance and kurtosis of an ESD.

    Kurtosis is left undefined (``None``) when the variance is below 1e-12.
    """
    norm = len(e) if normalizer is None else normalizer
    m = tuple(moment_of(e, r, norm) for r in range(1, 7))
    m1, m2, m3, m4 = m[:4]
    esv = m2 - m1**2
    esk = None
    if esv > ESV_FLOOR:
        esk = (m4 - 4 * m3 * m1 + 6 * m2 * m1**2 - 3 * m1**4) / esv**2
    lam = e.eigenvalues
    return SpectralSummary(m, esv, esk, float(lam[0]), float(lam[-1]))


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalResult:
    kind: str
    value: float
    infinite: bool = False
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _singular(lam: np.ndarray) -> bool:
    top = lam[-1]
    return top <= 0 or lam[0] <= SINGULAR_RTOL * top


def _log(x: float, base: float | None) -> float:
    return math.log(x) if base is None else math.log(x, base)


def functional(
    f: Frame,
    s: SelectionMask,
    kind: str,
    delta: float | None = None,
    base: float | None = None,
) -> FunctionalResult:
    """One performance functional of a sub-frame.

    Parameters
    ----------
    kind : {"mse", "shannon", "rip", "cond", "strip_indicator"}
        ``mse`` is the arithmetic-to-harmonic mean ratio of the eigenvalues
        (Gram side when ``k <= m``, Hessian side otherwise). ``shannon`` is
        the log of the geometric-to-arithmetic mean ratio of the m Hessian
        eigenvalues and needs ``k >= m``. ``rip`` is the spectral radius of
        ``G_S - I``, ``cond`` is ``lambda_max / lambda_min`` of the Gram, and
        ``strip_indicator`` is ``1{rip <= delta}``.
    delta : float
        Threshold for ``strip_indicator``.
    base : float, optional
        Logarithm base for ``shannon``; natural log by default.
    """
    if not len(s):
        raise SpectrumError("empty selection")
    k = len(s)
    if kind == "mse":
        lam = esd_of(f, s, "gram" if k <= f.m else "hessian").eigenvalues
        if _singular(lam):
            return FunctionalResult(kind, math.inf, True)
        return FunctionalResult(kind, float(np.mean(lam) * np.mean(1.0 / lam)))
    if kind == "shannon":
        if k < f.m:
            raise SpectrumError("the Shannon functional needs k >= m")
        lam = esd_of(f, s, "hessian").eigenvalues
        params = {"base": "e" if base is None else base}
        if _singular(lam):
            return FunctionalResult(kind, -math.inf, True, params)
        log_ratio = float(np.mean(np.log(lam)) - math.log(np.mean(lam)))
        val = log_ratio if base is None else log_ratio / math.log(base)
        return FunctionalResult(kind, min(val, 0.0), False, params)
    if kind in ("rip", "strip_indicator"):
        lam = esd_of(f, s, "gram").eigenvalues
        rip = float(max(lam[-1] - 1.0, 1.0 - lam[0]))
        if kind == "rip":
            return FunctionalResult(kind, rip)
        if delta is None:
            raise SpectrumError("strip_indicator needs delta")
        return FunctionalResult(kind, float(rip <= delta), False, {"delta": delta})
    if kind == "cond":
        lam = esd_of(f, s, "gram").eigenvalues
        if _singular(lam):
            return FunctionalResult(kind, math.inf, True)
        return FunctionalResult(kind, float(lam[-1] / lam[0]))
    raise SpectrumError(f"unknown functional {kind!r}")


@dataclass(frozen=True)
class SubsetAverage:
    """Subset average of a functional.

    ``value`` is the average over all subsets (infinite if any subset is
    singular); ``finite_mean`` averages only the finite ones, and
    ``infinite_fraction`` is the weight of the singular ones.
    """

    kind: str
    value: float
    finite_mean: float
    half_width: float
    infinite_fraction: float
    trials: int | None
    exact: bool
    empty_fraction: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _per_subset(f: Frame, s: SelectionMask, kind: str, delta, base) -> float:
    if kind == "mse":
        res = functional(f, s, "mse")
        return res.value if res.infinite else math.log(res.value)
    return functional(f, s, kind, delta=delta, base=base).value


def subset_average(
    f: Frame,
    model: SelectionModel,
    kind: str,
    exact: bool = False,
    trials: int | None = None,
    rng: RngStream | None = None,
    delta: float | None = None,
    base: float | None = None,
) -> SubsetAverage:
    """Average a functional over random sub-frames.

    ``kind="mse"`` averages ``log Psi_MSE`` (the L_MSE measure),
    ``"shannon"`` averages ``Psi_Shannon`` (L_Shannon), ``"strip_indicator"``
    gives the fraction of good subsets. Exact mode enumerates every subset;
    Monte-Carlo mode draws ``trials`` masks, trial ``i`` from
    ``rng.derive(i)``, and reports a 95% half-width ``1.96 * stderr``.
    Empty Bernoulli masks are excluded and their weight reported.
    """
    if exact:
        weights, vals, empty = [], [], 0.0
        for mask, w in enumerate_masks(model, f.n):
            if not len(mask):
                empty += w
                continue
            weights.append(w)
            vals.append(_per_subset(f, mask, kind, delta, base))
        trials_used = None
    else:
        if trials is None or trials < 2:
            raise SpectrumError("Monte-Carlo averaging needs trials >= 2")
        if rng is None:
            raise SpectrumError("Monte-Carlo averaging needs an RngStream")
        weights, vals, empty = [], [], 0
        for i in range(trials):
            mask = draw(model, f.n, rng.derive(i))
            if not len(mask):
                empty += 1
                continue
            weights.append(1.0)
            vals.append(_per_subset(f, mask, kind, delta, base))
        empty = empty / trials
        trials_used = trials
    if not weights:
        raise SpectrumError("every selected subset was empty")
    w = np.asarray(weights) / math.fsum(weights)
    v = np.asarray(vals, dtype=float)
    bad = ~np.isfinite(v)
    inf_frac = math.fsum(w[bad])
    if np.any(~bad):
        wf = w[~bad] / math.fsum(w[~bad])
        finite_mean = math.fsum(wf * v[~bad])
    else:
        finite_mean = math.nan
    value = float(v[bad][0]) if np.any(bad) else finite_mean
    half = 0.0
    if not exact:
        good = v[~bad]
        if good.size >= 2:
            half = 1.96 * float(np.std(good, ddof=1)) / math.sqrt(good.size)
    return SubsetAverage(kind, value, finite_mean, half, inf_frac, trials_used, exact, float(empty))


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance
# ---------------------------------------------------------------------------

def _snap(lam: np.ndarray, points: list[float]) -> np.ndarray:
    # eigenvalues that should sit exactly on an atom come out a few ulps away;
    # leaving them there would make the step land on the wrong side of the jump
    out = lam.copy()
    scale = max(1.0, float(lam[-1]) if lam.size else 1.0)
    for a in points:
        out[np.abs(out - a) <= SNAP_RTOL * scale] = a
    return out


def ks_distance(e: Esd, other: LimitLaw | Esd) -> float:
    """Kolmogorov-Smirnov distance from an ESD to a limit law or another ESD."""
    if isinstance(other, Esd):
        pts = np.union1d(e.eigenvalues, other.eigenvalues)
        return float(np.max(np.abs(e.cdf(pts) - other.cdf(pts))))
    atoms = [0.0]
    if other.atom_location is not None and other.atom_mass > 0:
        atoms.append(other.atom_location)
    lam = _snap(e.eigenvalues, atoms)
    snapped = Esd(lam, e.ambient)
    pts = np.union1d(lam, np.asarray(atoms))
    left_pts = np.nextafter(pts, -np.inf)
    right = np.abs(snapped.cdf(pts) - other.cdf(pts))
    left = np.abs(snapped.cdf(pts, left=True) - other.cdf(left_pts))
    return float(max(right.max(), left.max()))


def summary_to_json(s: SpectralSummary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=2, sort_keys=True))
