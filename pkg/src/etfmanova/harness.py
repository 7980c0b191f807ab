"""Experiment orchestration: convergence ladders and the verification suite.

Reports are plain JSON with sorted keys and no timestamps, so the same
configuration and seed always give byte-identical output.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg

from . import frames as fr
from .limits import LimitLaw, functional_integral, manova_moment
from .limits import moment as law_moment
from .moments import (
    MomentContext,
    esv_esk_bounds,
    etf_expected_moment,
    etf_moment_variance,
    ewb_bound,
    manova_identity_check,
)
from .numerics import RngStream, loglog_fit, loglog_fit_loglog
from .spectra import Esd, esd_of, ks_distance, subset_average
from .subsets import (
    SelectionModel,
    draw,
    exact_mean_variance,
    mean_hessian,
    trace_power_stat,
)

log = logging.getLogger(__name__)

DSS_LADDER = (103, 199, 307, 499, 1019)
METRICS = ("ks", "mse", "shannon")
SCOPES = (
    "moments",
    "variances",
    "ewb",
    "esv_esk",
    "monotonicity_shannon",
    "monotonicity_mse",
    "lemma_avg",
    "identity_check",
)


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    measured: Any
    tolerance: Any
    detail: str = ""


@dataclass(frozen=True)
class ConvergenceRecord:
    family: str
    n: int
    m: int
    k: int
    gamma: float
    beta: float
    metric: str
    delta_mean: float
    delta_var: float
    trials: int
    reference: bool = False


@dataclass
class ExperimentReport:
    config: dict
    records: list[ConvergenceRecord] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": [asdict(r) for r in self.records],
            "fits": self.fits,
            "verdicts": [asdict(v) for v in self.verdicts],
            "skipped": self.skipped,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


# ---------------------------------------------------------------------------
# Convergence ladders
# ---------------------------------------------------------------------------

def frame_for_size(family: str, size: int, gamma: float, rng: RngStream | None) -> fr.Frame:
    """Build a ladder frame: ``size`` is ``q`` for dss/paley families, else ``n``."""
    if family == "dss":
        return fr.build("dss", {"q": size})
    if family in ("paley_real", "paley_complex"):
        return fr.build(family, {"q": size})
    m = max(1, round(gamma * size))
    return fr.build(family, {"m": m, "n": size}, rng)


def manova_ensemble_esd(m: int, n: int, k: int, gen: np.random.Generator) -> Esd:
    """Jacobi-ensemble reference spectrum at the sizes of a k-subset of an m x n frame.

    Solves ``B B^H v = lambda (A A^H + B B^H) v`` with complex Gaussian
    ``A`` (k x (n-m)) and ``B`` (k x m), then scales by ``n/m``.
    """
    if k >= n:
        raise HarnessError("the reference ensemble needs k < n")

    def gauss(rows, cols):
        return gen.standard_normal((rows, cols)) + 1j * gen.standard_normal((rows, cols))

    a, b = gauss(k, n - m), gauss(k, m)
    bb = b @ b.conj().T
    tot = a @ a.conj().T + bb
    lam = scipy.linalg.eigh(bb, tot, eigvals_only=True)
    lam = np.clip(lam, 0.0, 1.0) * (n / m)
    return Esd(lam, "gram")


def _delta(e: Esd, law: LimitLaw, metric: str, target: float | None) -> float:
    lam = e.eigenvalues
    if metric == "ks":
        return ks_distance(e, law)
    if metric == "mse":
        if lam[0] <= 0:
            return math.inf
        return abs(float(np.mean(1.0 / lam)) - target)
    if metric == "shannon":
        if lam[0] <= 0:
            return math.inf
        return abs(float(np.mean(np.log(lam))) - target)
    if metric.startswith("moment_"):
        r = int(metric.split("_", 1)[1])
        return abs(float(np.mean(lam**r)) - target)
    raise HarnessError(f"unknown metric {metric!r}")


def _target(law: LimitLaw, metric: str) -> float | None:
    if metric == "ks":
        return None
    if metric in ("mse", "shannon"):
        res = functional_integral(law, metric)
        if res.infinite:
            raise HarnessError(f"the {metric} functional of the limit law is infinite here")
        return res.value
    if metric.startswith("moment_"):
        return float(law_moment(law, int(metric.split("_", 1)[1]), normalization="law"))
    raise HarnessError(f"unknown metric {metric!r}")


def _record(family, n, m, k, metric, deltas, reference) -> ConvergenceRecord:
    d = np.asarray(deltas, dtype=float)
    return ConvergenceRecord(
        family, n, m, k, m / n, k / m, metric, float(d.mean()), float(d.var(ddof=1)), d.size, reference
    )


def _fit(records: list[ConvergenceRecord]) -> dict:
    ns = [r.n for r in records]
    means = [r.delta_mean for r in records]
    out: dict[str, Any] = {}
    if len(records) >= 3 and all(v > 0 and math.isfinite(v) for v in means):
        out["mean"] = loglog_fit(ns, means).to_dict()
        sds = [math.sqrt(r.delta_var) for r in records]
        if all(v > 0 for v in sds):
            out["std"] = loglog_fit(ns, sds).to_dict()
        if len(records) >= 4:
            out["mean_loglog"] = loglog_fit_loglog(ns, means)
    return out


def run_convergence(
    family: str,
    sizes,
    gamma: float = 0.5,
    beta: float = 0.8,
    metric: str = "ks",
    trials: int = 200,
    seed: int = 0,
    selection: str = "combinatorial",
    reference: bool = True,
) -> ExperimentReport:
    """Distance between sub-frame spectra and the MANOVA law along a size ladder.

    For each ladder size the frame's realized ``gamma = m/n`` and
    ``beta = k/m`` (``k = round(beta m)``) define the MANOVA law; ``trials``
    random subsets give the mean and variance of the chosen distance. A
    Jacobi-ensemble sample at the same ``(m, n, k)`` provides the reference
    sequence, and log-log fits of both are compared.
    """
    if trials < 2:
        raise HarnessError("trials must be at least 2")
    if metric not in METRICS and not metric.startswith("moment_"):
        raise HarnessError(f"unknown metric {metric!r}")
    config = {
        "family": family,
        "sizes": list(sizes),
        "gamma_target": gamma,
        "beta_target": beta,
        "metric": metric,
        "trials": trials,
        "seed": seed,
        "selection": selection,
    }
    report = ExperimentReport(config)
    root = RngStream(seed)
    subject, ref = [], []
    for si, size in enumerate(sizes):
        try:
            frame = frame_for_size(family, size, gamma, root.derive(si, 0xFFFF))
        except fr.FrameError as exc:
            report.skipped.append({"size": size, "reason": str(exc)})
            continue
        m, n = frame.m, frame.n
        k = max(1, round(beta * m))
        if selection == "combinatorial":
            model = SelectionModel.combinatorial(k)
        else:
            model = SelectionModel.bernoulli(k / n)
        law = LimitLaw("manova", k / m, m / n)
        target = _target(law, metric)
        deltas = []
        for t in range(trials):
            mask = draw(model, n, root.derive(si, t))
            deltas.append(_delta(esd_of(frame, mask, "gram"), law, metric, target))
        subject.append(_record(family, n, m, k, metric, deltas, False))
        if reference:
            ref_deltas = []
            for t in range(trials):
                gen = root.derive(si, t, 1).generator()
                ref_deltas.append(_delta(manova_ensemble_esd(m, n, k, gen), law, metric, target))
            ref.append(_record("manova_ensemble", n, m, k, metric, ref_deltas, True))
    report.records = subject + ref
    report.fits["subject"] = _fit(subject)
    if reference:
        report.fits["reference"] = _fit(ref)
    _convergence_verdicts(report, subject, ref)
    return report


def _convergence_verdicts(report, subject, ref) -> None:
    means = [r.delta_mean for r in subject]
    report.verdicts.append(
        Verdict(
            "delta_mean_decreasing",
            bool(len(means) >= 2 and all(b < a for a, b in zip(means, means[1:]))),
            means,
            "strict",
        )
    )
    fit = report.fits["subject"].get("mean")
    if fit is None:
        report.verdicts.append(Verdict("slope_negative", False, None, "|slope| > 2 stderr", "no fit"))
        return
    report.verdicts.append(
        Verdict(
            "slope_negative",
            bool(fit["slope"] < 0 and abs(fit["slope"]) > 2 * fit["slope_stderr"]),
            {"slope": fit["slope"], "stderr": fit["slope_stderr"]},
            "slope < 0 and |slope| > 2 stderr",
        )
    )
    rfit = report.fits.get("reference", {}).get("mean")
    if rfit is not None:
        combined = math.hypot(fit["slope_stderr"], rfit["slope_stderr"])
        diff = abs(fit["slope"] - rfit["slope"])
        report.verdicts.append(
            Verdict(
                "slope_matches_reference",
                bool(diff <= 3 * combined),
                {"subject": fit["slope"], "reference": rfit["slope"], "diff": diff},
                {"max_diff": 3 * combined},
            )
        )


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------

def oracle_etfs() -> dict[str, fr.Frame]:
    """Small ETFs with exact moments: 3x6 real, 3x7 harmonic, 6x12 and 5x10 Paley."""
    return {
        "pentagon_3x6": fr.pentagon_etf(),
        "dss_3x7": fr.build("dss", {"modulus": 7, "set": [1, 2, 4]}),
        "paley_complex_6x12": fr.build("paley_complex", {"q": 11}),
        "paley_real_5x10": fr.build("paley_real", {"q": 9}),
    }


def small_frames(seed: int, count_random: int = 12) -> dict[str, fr.Frame]:
    """Deterministic and seeded random frames with n <= 10 for exhaustive checks."""
    out = {
        "mercedes_2x3": fr.mercedes_benz(),
        "pentagon_3x6": fr.pentagon_etf(),
        "dss_3x7": fr.build("dss", {"modulus": 7, "set": [1, 2, 4]}),
        "paley_real_5x10": fr.build("paley_real", {"q": 9}),
        "steiner_3x9": fr.build("steiner_pairs", {"v": 3}),
        "lpf_3x6": fr.build("lpf", {"m": 3, "n": 6}),
        "lpf_4x9": fr.build("lpf", {"m": 4, "n": 9}),
        "spikes_fourier_4x8": fr.build("spikes_fourier", {"m": 4}),
        "spikes_hadamard_4x8": fr.build("spikes_hadamard", {"m": 4}),
        "repetition_3x6": fr.build("union_bases", {"m": 3, "copies": 2}),
    }
    root = RngStream(seed)
    fams = ("iid_gaussian", "haar", "rand_dft", "rand_dct")
    shapes = ((3, 6), (4, 8), (3, 7), (4, 10), (2, 5), (5, 9))
    for i in range(count_random):
        fam = fams[i % len(fams)]
        m, n = shapes[i % len(shapes)]
        params = {"m": m, "n": n}
        if fam == "iid_gaussian":
            params["real"] = i % 2 == 0
        out[f"{fam}_{m}x{n}_{i}"] = fr.build(fam, params, root.derive(i))
    return out


_P_GRID = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


def _check_moments(report, variances: bool) -> None:
    worst, where = 0.0, ""
    orders = (1, 2) if variances else (1, 2, 3, 4)
    for name, f in oracle_etfs().items():
        for p in _P_GRID:
            ctx = MomentContext.from_frame_size(f.m, f.n, p)
            mean, var = exact_mean_variance(f, SelectionModel.bernoulli(float(p)), trace_power_stat(orders))
            got = var if variances else mean
            for i, r in enumerate(orders):
                want = etf_moment_variance(ctx, r) if variances else etf_expected_moment(ctx, r)
                err = abs(float(got[i]) - float(want))
                if err >= worst:
                    worst, where = err, f"{name} p={p} r={r}"
    name = "variances" if variances else "moments"
    report.verdicts.append(Verdict(name, worst <= 1e-12, worst, 1e-12, f"worst at {where}"))


def _check_ewb(report, seed) -> None:
    rep = fr.build("union_bases", {"m": 3, "copies": 2})
    ctx = MomentContext.from_frame_size(3, 6, Fraction(1, 2))
    got = exact_mean_variance(rep, SelectionModel.bernoulli(0.5), trace_power_stat((2, 3, 4)))[0]
    gaps = [float(got[i]) - float(ewb_bound(ctx, r)) for i, r in enumerate((2, 3, 4))]
    report.verdicts.append(
        Verdict("ewb_tight_equality_r2_r3", abs(gaps[0]) <= 1e-12 and abs(gaps[1]) <= 1e-12, gaps[:2], 1e-12)
    )
    report.verdicts.append(Verdict("ewb_tight_strict_r4", gaps[2] >= 1e-6, gaps[2], ">= 1e-6"))
    g = fr.build("iid_gaussian", {"m": 4, "n": 8}, RngStream(seed).derive(1))
    ctx = MomentContext.from_frame_size(4, 8, Fraction(1, 2))
    m2 = float(exact_mean_variance(g, SelectionModel.bernoulli(0.5), "moment:2")[0])
    gap = m2 - float(ewb_bound(ctx, 2))
    report.verdicts.append(Verdict("ewb_iid_strict_r2", gap > 0, gap, "> 0"))


def _central4(m1, m2, m3, m4):
    return m4 - 4 * m3 * m1 + 6 * m2 * m1**2 - 3 * m1**4


def _check_esv_esk(report, seed) -> None:
    # the bounds are the MANOVA (tight-frame / ETF) values
    worst = Fraction(0)
    for g in (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)):
        for p in (Fraction(1, 5), Fraction(1, 2), Fraction(4, 5)):
            x = 1 / g - 1
            ms = [manova_moment(g, p, r) for r in (1, 2, 3, 4)]
            esv = ms[1] - ms[0] ** 2
            num = p + p**2 * (6 * x - 4) + p**3 * (6 * x**2 - 16 * x + 6) + p**4 * (x**3 - 7 * x**2 + 11 * x - 3)
            worst = max(worst, abs(esv - (p + (x - 1) * p**2)), abs(num - _central4(*ms)))
    report.verdicts.append(Verdict("esv_esk_bounds_are_manova_values", worst == 0, str(worst), "exact"))
    # finite frames: spectral variance/kurtosis of the expected moments
    checks = []
    frames = {
        "pentagon_3x6": (fr.pentagon_etf(), True),
        "repetition_3x6": (fr.build("union_bases", {"m": 3, "copies": 2}), True),
        "iid_4x8": (fr.build("iid_gaussian", {"m": 4, "n": 8}, RngStream(seed).derive(2)), False),
    }
    ok = True
    for name, (f, tight) in frames.items():
        p = Fraction(1, 2)
        ms = exact_mean_variance(f, SelectionModel.bernoulli(0.5), trace_power_stat((1, 2, 3, 4)))[0]
        m1, m2, m3, m4 = (float(v) for v in ms)
        esv = m2 - m1**2
        esv_b, esk_b = esv_esk_bounds(MomentContext.from_frame_size(f.m, f.n, p))
        esk = _central4(m1, m2, m3, m4) / esv**2
        good = esv >= esv_b - 1e-12 and (not tight or esk >= esk_b - 1e-12)
        ok &= good
        checks.append({"frame": name, "esv": esv, "esv_bound": esv_b, "esk": esk, "esk_bound": esk_b})
    report.verdicts.append(Verdict("esv_esk_finite_frames", ok, checks, 1e-12))


def _monotone(values, tol=1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))


def _check_monotonicity(report, seed, kind) -> None:
    failures, measured = [], {}
    for name, f in small_frames(seed).items():
        if kind == "shannon":
            ks = range(f.m, f.n + 1)
        else:
            ks = range(1, f.m + 1)
        vals = [
            subset_average(f, SelectionModel.combinatorial(k), kind, exact=True).value for k in ks
        ]
        measured[name] = vals
        if not _monotone(vals):
            failures.append(name)
        if kind == "mse" and abs(vals[0]) > 1e-12:
            failures.append(f"{name}: L_MSE(F,1)={vals[0]}")
        if kind == "shannon" and abs(vals[-1] - _full_shannon(f)) > 1e-10:
            failures.append(f"{name}: L_Shannon(F,n) mismatch")
    report.verdicts.append(
        Verdict(f"monotonicity_{kind}", not failures, measured, 1e-12, "; ".join(failures))
    )


def _full_shannon(f: fr.Frame) -> float:
    lam = np.linalg.eigvalsh(f.matrix @ f.matrix.conj().T)
    return float(np.mean(np.log(lam)) - math.log(np.mean(lam)))


def _check_lemma(report, seed) -> None:
    worst, count = 0.0, 0
    for name, f in small_frames(seed).items():
        for k in range(1, f.n + 1):
            avg = mean_hessian(f, SelectionModel.combinatorial(k))
            want = (k / f.n) * (f.matrix @ f.matrix.conj().T)
            worst = max(worst, float(np.max(np.abs(avg - want))))
            count += 1
    report.verdicts.append(Verdict("lemma_avg", worst <= 1e-10, worst, 1e-10, f"{count} (frame, k) cases"))


def _check_identity(report, r_max: int = 8) -> None:
    bad = []
    for g in (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)):
        for p in (Fraction(1, 5), Fraction(1, 2), Fraction(4, 5)):
            for v in manova_identity_check(MomentContext(g, p), r_max):
                if not v.equal:
                    bad.append(f"gamma={g} p={p} r={v.r}")
    report.verdicts.append(Verdict("identity_check", not bad, len(bad), "exact", ", ".join(bad)))


def run_verification_suite(scopes=SCOPES, seed: int = 0) -> ExperimentReport:
    """Run the named checks; failures become verdicts, never exceptions."""
    scopes = list(scopes)
    unknown = [s for s in scopes if s not in SCOPES]
    if unknown:
        raise HarnessError(f"unknown scopes: {', '.join(unknown)}")
    report = ExperimentReport({"scopes": scopes, "seed": seed})
    for scope in scopes:
        if scope == "moments":
            _check_moments(report, variances=False)
        elif scope == "variances":
            _check_moments(report, variances=True)
        elif scope == "ewb":
            _check_ewb(report, seed)
        elif scope == "esv_esk":
            _check_esv_esk(report, seed)
        elif scope == "monotonicity_shannon":
            _check_monotonicity(report, seed, "shannon")
        elif scope == "monotonicity_mse":
            _check_monotonicity(report, seed, "mse")
        elif scope == "lemma_avg":
            _check_lemma(report, seed)
        elif scope == "identity_check":
            _check_identity(report)
    return report
