import math

import numpy as np
import pytest

from etfmanova.coding import (
    CapacityConfig,
    CodingError,
    RdfConfig,
    ecdq_rate,
    ecdq_rate_direct,
    ls_encode,
    noma_capacity,
    operational_rdf,
    stc_bound,
    subset_capacity,
    write_histogram_csv,
)
from etfmanova.frames import build
from etfmanova.numerics import RngStream
from etfmanova.spectra import functional
from etfmanova.subsets import SelectionMask, SelectionModel, draw, enumerate_masks, subframe_gram


def cvec(gen, k):
    return gen.standard_normal(k) + 1j * gen.standard_normal(k)


def test_config_validation():
    with pytest.raises(CodingError):
        RdfConfig(0.0, 1.0)
    with pytest.raises(CodingError):
        RdfConfig(1.0, 1.0, estimator="mmse")
    with pytest.raises(CodingError):
        CapacityConfig(-1.0, 2)
    with pytest.raises(CodingError):
        CapacityConfig(1.0, 0)
    assert RdfConfig(10.0, 2.0).sdr == 5.0


def test_ls_encode_square_and_isometry():
    gen = np.random.default_rng(0)
    f = build("iid_gaussian", {"m": 4, "n": 8}, RngStream(1))
    s = SelectionMask(8, (0, 2, 5, 7))
    xs = cvec(gen, 4)
    x = ls_encode(f, s, xs)
    fs = f.columns(s.array)
    assert np.allclose(x, np.linalg.solve(fs.conj().T, xs), atol=1e-10)
    # orthonormal columns preserve the norm
    spikes = build("spikes_fourier", {"m": 4})
    xo = ls_encode(spikes, SelectionMask(8, (0, 1)), xs[:2])
    assert np.linalg.norm(xo) == pytest.approx(np.linalg.norm(xs[:2]))


def test_ls_encode_minimum_norm():
    gen = np.random.default_rng(2)
    f = build("dss", {"q": 11})
    s = SelectionMask(11, (0, 3, 4))
    x = ls_encode(f, s, cvec(gen, 3))
    fs = f.columns(s.array)
    proj = np.eye(f.m) - fs @ np.linalg.pinv(fs)
    for _ in range(100):
        z = proj @ cvec(gen, f.m)
        assert np.linalg.norm(x) <= np.linalg.norm(x + z) + 1e-12


def test_ls_encode_errors(pentagon):
    with pytest.raises(CodingError):
        ls_encode(pentagon, SelectionMask(6, (0, 1, 2, 3)), np.ones(4))
    rep = build("union_bases", {"m": 3, "copies": 2})
    with pytest.raises(CodingError):
        ls_encode(rep, SelectionMask(6, (0, 3)), np.ones(2))


def test_two_path_rate_identity():
    root = RngStream(20)
    fams = [("iid_gaussian", {"m": 6, "n": 12}), ("dss", {"q": 19}), ("haar", {"m": 5, "n": 11})]
    for i in range(300):
        fam, params = fams[i % 3]
        rng = root.derive(i)
        f = build(fam, params, rng.derive(0))
        gen = rng.derive(1).generator()
        k = int(gen.integers(1, f.m + 1))
        s = draw(SelectionModel.combinatorial(k), f.n, rng.derive(2))
        cfg = RdfConfig(float(gen.uniform(0.1, 100)), float(gen.uniform(0.01, 10)))
        a, b = ecdq_rate(f, s, cfg), ecdq_rate_direct(f, s, cfg)
        assert a.value == pytest.approx(b.value, abs=1e-12)


def test_rate_uniform_grid_lpf():
    f = build("lpf", {"m": 5, "n": 20})
    s = SelectionMask(20, (0, 4, 8, 12, 16))
    cfg = RdfConfig(30.0, 2.0)
    p = 5 / 20
    assert ecdq_rate(f, s, cfg).value == pytest.approx(p / 2 * math.log2(1 + 15.0), abs=1e-14)


def test_rate_limits_and_monotone(dss7):
    s = SelectionMask(7, (0, 1))
    assert ecdq_rate(dss7, s, RdfConfig(1e-12, 1.0)).value < 1e-11
    # at fixed k the rate orders subsets exactly as Psi_MSE does
    f = build("iid_gaussian", {"m": 4, "n": 9}, RngStream(4))
    cfg = RdfConfig(10.0, 1.0)
    pairs = [
        (functional(f, s, "mse").value, ecdq_rate(f, s, cfg).value)
        for s, _ in enumerate_masks(SelectionModel.combinatorial(3), 9)
    ]
    pairs.sort()
    rates = [r for _, r in pairs]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    with pytest.raises(CodingError):
        ecdq_rate(dss7, s, RdfConfig(10.0, 1.0, beta=0.9))
    rep = build("union_bases", {"m": 3, "copies": 2})
    assert ecdq_rate(rep, SelectionMask(6, (0, 3)), RdfConfig(1.0, 1.0)).infinite


def test_operational_rdf_orderings(tmp_path):
    n, m, k = 31, 15, 12
    etf = build("dss", {"q": n})
    lpf = build("lpf", {"m": m, "n": n})
    cfg = RdfConfig(100.0, 1.0)
    model = SelectionModel.combinatorial(k)
    a = operational_rdf(etf, model, cfg, trials=200, rng=RngStream(0))
    b = operational_rdf(lpf, model, cfg, trials=200, rng=RngStream(0))
    assert a.mean < b.finite_mean
    p = k / n
    assert a.mean >= p / 2 * math.log2(cfg.sdr)
    write_histogram_csv(a, tmp_path / "h.csv", bins=10)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "# infinite_count=0" and len(lines) == 12


def test_operational_rdf_full_selection_is_deterministic():
    f = build("lpf", {"m": 6, "n": 6})
    res = operational_rdf(f, SelectionModel.combinatorial(6), RdfConfig(3.0, 1.0), exact=True)
    assert len(res.samples) == 1 and res.half_width == 0.0


def test_capacity_orthonormal_and_small_snr():
    f = build("spikes_fourier", {"m": 4})
    s = SelectionMask(8, (0, 1, 2))
    assert subset_capacity(f, s, 7.0) == pytest.approx(3 / 4 * math.log2(8.0))
    assert subset_capacity(f, s, 1e-12) < 1e-11


def test_capacity_eig_vs_det_and_monotone():
    root = RngStream(30)
    f = build("iid_gaussian", {"m": 6, "n": 14}, root.derive(0))
    for t in range(40):
        s = draw(SelectionModel.combinatorial(5), f.n, root.derive(1, t))
        g = subframe_gram(f, s).gram
        _, logdet = np.linalg.slogdet(np.eye(5) + 10.0 * g)
        assert subset_capacity(f, s, 10.0) == pytest.approx(logdet / math.log(2) / f.m, abs=1e-9)
        assert subset_capacity(f, s, 20.0) >= subset_capacity(f, s, 10.0)
        extra = next(j for j in range(f.n) if j not in s.indices)
        bigger = SelectionMask(f.n, tuple(sorted(s.indices + (extra,))))
        assert subset_capacity(f, bigger, 10.0) >= subset_capacity(f, s, 10.0) - 1e-12


def test_capacity_practical_mode(pentagon):
    cfg = CapacityConfig(10.0, 2, "practical")
    res = noma_capacity(pentagon, cfg, exact=True)
    assert res.infinite_count == 0
    with pytest.raises(CodingError):
        noma_capacity(pentagon, CapacityConfig(10.0, 4, "practical"), exact=True)


def test_capacity_etf_beats_iid():
    etf = build("dss", {"q": 43})
    iid = build("iid_gaussian", {"m": 21, "n": 43}, RngStream(8))
    cfg = CapacityConfig(100.0, 21)
    a = noma_capacity(etf, cfg, trials=60, rng=RngStream(1))
    b = noma_capacity(iid, cfg, trials=60, rng=RngStream(1))
    assert a.mean > b.mean


def test_stc_bound(pentagon):
    snr = 10.0
    full = stc_bound(pentagon, 6, snr, exact=True)
    assert full.mean == pytest.approx(snr**-3 / 2.0**3, rel=1e-12)
    assert stc_bound(pentagon, 4, 1e8, exact=True).mean < 1e-20
    with pytest.raises(CodingError):
        stc_bound(pentagon, 2, snr, exact=True)
    # overflow-prone sizes stay finite
    big = build("dss", {"q": 103})
    assert math.isfinite(stc_bound(big, 103, 1e6, exact=True).mean)


def test_stc_etf_beats_lpf():
    n, m = 31, 15
    k = 28  # p ~ 0.9
    etf = build("dss", {"q": n})
    lpf = build("lpf", {"m": m, "n": n})
    a = stc_bound(etf, k, 10.0, trials=100, rng=RngStream(2))
    b = stc_bound(lpf, k, 10.0, trials=100, rng=RngStream(2))
    assert a.mean < b.finite_mean
