"""Command-line interface: ``etfmanova <command> ...``.

Results go to stdout as JSON (tables to CSV files). The exit status is 1
when any verdict in the output fails, 2 on usage or input errors, else 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

import numpy as np

from . import coding, frames, harness, limits, moments, spectra
from .numerics import RngStream, parse_rational
from .subsets import SelectionModel, draw


def _emit(obj) -> None:
    print(json.dumps(harness._jsonable(obj), indent=2, sort_keys=True))


def _frac(text: str) -> Fraction:
    return parse_rational(text)


def _num(text: str) -> float:
    return float(parse_rational(text))


# ---------------------------------------------------------------------------
# handlers: each returns True when all its verdicts pass
# ---------------------------------------------------------------------------

def cmd_frame_build(a) -> bool:
    params = json.loads(a.params) if a.params else {}
    for key in ("q", "v", "m", "n", "modulus"):
        val = getattr(a, key)
        if val is not None:
            params[key] = val
    if a.set:
        params["set"] = [int(t) for t in a.set.split(",")]
    rng = RngStream(a.seed) if a.seed is not None else None
    f = frames.build(a.family, params, rng)
    frames.save_frame(f, a.out)
    _emit({"out": a.out, "m": f.m, "n": f.n, "family": f.family, "params": f.params})
    return True


def cmd_frame_check(a) -> bool:
    f = frames.load_frame(a.path)
    _emit(frames.diagnostics(f).to_dict())
    return True


def cmd_spectrum(a) -> bool:
    f = frames.load_frame(a.frame)
    model = SelectionModel.parse(a.select)
    root = RngStream(a.seed)
    eigs, sides = [], set()
    for t in range(a.trials):
        mask = draw(model, f.n, root.derive(t))
        if not len(mask):
            continue
        e = spectra.esd_of(f, mask, a.side)
        eigs.append(e.eigenvalues)
        sides.add(e.ambient)
    if not eigs:
        raise spectra.SpectrumError("every drawn subset was empty")
    if len(sides) > 1:
        raise spectra.SpectrumError("auto side switched between gram and hessian; pick one")
    pooled = spectra.Esd(np.concatenate(eigs), sides.pop())
    pooled.to_csv(a.out)
    out = {"out": a.out, "trials": a.trials, "nonempty": len(eigs), "eigenvalues": len(pooled)}
    out["summary"] = spectra.summary(pooled).to_dict()
    _emit(out)
    return True


def cmd_law(a) -> bool:
    gamma = None if a.gamma is None else _num(a.gamma)
    law = limits.LimitLaw(a.family, _num(a.beta), gamma)
    out = law.to_dict()
    if a.density is not None:
        out["density"] = {"x": _num(a.density), "value": law.density(_num(a.density))}
    if a.cdf is not None:
        out["cdf"] = {"x": _num(a.cdf), "value": law.cdf(_num(a.cdf))}
    if a.moment is not None:
        exact = limits.LimitLaw(
            a.family, _frac(a.beta), None if a.gamma is None else _frac(a.gamma)
        )
        val = limits.moment(exact, a.moment, exact=True, normalization="law")
        out["moment"] = {"r": a.moment, "value": str(val), "float": float(val)}
    _emit(out)
    return True


def _ctx(a, need_n: bool) -> moments.MomentContext:
    n = getattr(a, "n", None)
    if need_n and n is None:
        raise moments.MomentError("--n is required")
    return moments.MomentContext(_frac(a.gamma), _frac(a.p), n)


def cmd_moments(a) -> bool:
    if a.which in ("exact", "var"):
        ctx = _ctx(a, True)
        fn = moments.etf_expected_moment if a.which == "exact" else moments.etf_moment_variance
        val = fn(ctx, a.r)
        _emit({"kind": a.which, "r": a.r, "gamma": ctx.gamma, "p": ctx.p, "n": ctx.n, "value": val, "float": float(val)})
        return True
    ctx = _ctx(a, False)
    if a.which == "asymptotic":
        polys = {
            str(r): moments.poly_to_json(moments.asymptotic_moment(ctx, r, a.cap))
            for r in range(1, a.rmax + 1)
        }
        _emit({"gamma": ctx.gamma, "p_polynomials": polys})
        return True
    verdicts = moments.manova_identity_check(ctx, a.rmax, a.cap)
    _emit({"gamma": ctx.gamma, "p": ctx.p, "verdicts": [v.to_dict() for v in verdicts]})
    return all(v.equal for v in verdicts)


def cmd_rdf(a) -> bool:
    f = frames.load_frame(a.frame)
    model = SelectionModel.parse(a.select)
    cfg = coding.RdfConfig(sigma_x2=_num(a.sdr), distortion=1.0)
    res = coding.operational_rdf(f, model, cfg, exact=a.exact, trials=a.trials, rng=RngStream(a.seed))
    if a.hist:
        coding.write_histogram_csv(res, a.hist, a.bins)
    out = res.to_dict()
    out.update(sdr=_num(a.sdr), units="bits per sample", histogram=a.hist)
    _emit(out)
    return True


def cmd_capacity(a) -> bool:
    f = frames.load_frame(a.frame)
    cfg = coding.CapacityConfig(_num(a.snr), a.k, "practical" if a.practical else "regular")
    res = coding.noma_capacity(f, cfg, exact=a.exact, trials=a.trials, rng=RngStream(a.seed))
    out = res.to_dict()
    out.update(snr=cfg.snr, k=cfg.k, mode=cfg.mode, units="bits per resource")
    _emit(out)
    return True


def cmd_stc(a) -> bool:
    f = frames.load_frame(a.frame)
    res = coding.stc_bound(f, a.k, _num(a.snr), exact=a.exact, trials=a.trials, rng=RngStream(a.seed))
    out = res.to_dict()
    out.update(snr=_num(a.snr), k=a.k)
    _emit(out)
    return True


def cmd_converge(a) -> bool:
    sizes = [int(s) for s in a.sizes.split(",")]
    rep = harness.run_convergence(
        a.family,
        sizes,
        _num(a.gamma),
        _num(a.beta),
        a.metric,
        a.trials,
        a.seed,
        selection=a.selection,
        reference=not a.no_reference,
    )
    rep.write(a.out)
    _emit({"out": a.out, "passed": rep.passed, "verdicts": [v.__dict__ for v in rep.verdicts]})
    return rep.passed


def cmd_verify(a) -> bool:
    scopes = harness.SCOPES if a.scope == "all" else [s.strip() for s in a.scope.split(",")]
    rep = harness.run_verification_suite(scopes, a.seed)
    if a.out:
        rep.write(a.out)
    _emit({"out": a.out, "passed": rep.passed, "verdicts": {v.name: v.passed for v in rep.verdicts}})
    return rep.passed


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _mc_args(p: argparse.ArgumentParser, trials: int = 200) -> None:
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="enumerate every subset")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="etfmanova", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    frame = sub.add_parser("frame", help="build or check frames")
    fsub = frame.add_subparsers(dest="action", required=True)
    b = fsub.add_parser("build")
    b.add_argument("--family", required=True, choices=frames.FAMILIES)
    for key in ("q", "v", "m", "n", "modulus"):
        b.add_argument(f"--{key}", type=int)
    b.add_argument("--set", help="difference set, comma separated")
    b.add_argument("--params", help="extra parameters as JSON")
    b.add_argument("--seed", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_frame_build)
    c = fsub.add_parser("check")
    c.add_argument("path")
    c.set_defaults(func=cmd_frame_check)

    s = sub.add_parser("spectrum", help="pooled sub-frame eigenvalues")
    s.add_argument("--frame", required=True)
    s.add_argument("--select", required=True, help="comb:k or bern:p")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--side", choices=("gram", "hessian", "auto"), default="gram")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    law = sub.add_parser("law", help="MP / MANOVA limit laws")
    law.add_argument("--family", choices=("mp", "manova"), required=True)
    law.add_argument("--gamma")
    law.add_argument("--beta", required=True)
    law.add_argument("--density")
    law.add_argument("--cdf")
    law.add_argument("--moment", type=int)
    law.set_defaults(func=cmd_law)

    mo = sub.add_parser("moments", help="exact and asymptotic sub-frame moments")
    msub = mo.add_subparsers(dest="which", required=True)
    for name in ("exact", "var"):
        p = msub.add_parser(name)
        p.add_argument("--gamma", required=True)
        p.add_argument("--p", required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--r", type=int, required=True)
        p.set_defaults(func=cmd_moments)
    for name in ("asymptotic", "identity"):
        p = msub.add_parser(name)
        p.add_argument("--gamma", required=True)
        p.add_argument("--p", required=name == "identity", default="1/2")
        p.add_argument("--rmax", type=int, required=True)
        p.add_argument("--cap", type=int, default=moments.PARTITION_CAP)
        p.set_defaults(func=cmd_moments)

    r = sub.add_parser("rdf", help="operational rate of the analog codec")
    r.add_argument("--frame", required=True)
    r.add_argument("--select", required=True)
    r.add_argument("--sdr", required=True, help="sigma_x^2 / D")
    r.add_argument("--hist", help="histogram CSV path")
    r.add_argument("--bins", type=int, default=50)
    _mc_args(r)
    r.set_defaults(func=cmd_rdf)

    cap = sub.add_parser("capacity", help="NOMA sum capacity per resource")
    cap.add_argument("--frame", required=True)
    cap.add_argument("--k", type=int, required=True)
    cap.add_argument("--snr", required=True)
    cap.add_argument("--practical", action="store_true")
    _mc_args(cap)
    cap.set_defaults(func=cmd_capacity)

    st = sub.add_parser("stc", help="space-time code determinant bound")
    st.add_argument("--frame", required=True)
    st.add_argument("--k", type=int, required=True)
    st.add_argument("--snr", required=True)
    _mc_args(st)
    st.set_defaults(func=cmd_stc)

    cv = sub.add_parser("converge", help="convergence ladder against the MANOVA law")
    cv.add_argument("--family", required=True)
    cv.add_argument("--sizes", default=",".join(str(q) for q in harness.DSS_LADDER))
    cv.add_argument("--gamma", default="1/2")
    cv.add_argument("--beta", default="4/5")
    cv.add_argument("--metric", default="ks")
    cv.add_argument("--trials", type=int, default=200)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--selection", choices=("combinatorial", "bernoulli"), default="combinatorial")
    cv.add_argument("--no-reference", action="store_true")
    cv.add_argument("--out", required=True)
    cv.set_defaults(func=cmd_converge)

    v = sub.add_parser("verify", help="run the verification suite")
    v.add_argument("--scope", default="all", help="comma list of " + ",".join(harness.SCOPES))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        ok = args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
