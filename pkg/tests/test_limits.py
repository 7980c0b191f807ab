import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from etfmanova.limits import (
    LawError,
    LimitLaw,
    NarayanaTable,
    catalan,
    export_csv,
    functional_integral,
    manova_moment,
    moment,
    mp_moment,
)

GAMMAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
BETAS = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.1, 1.3, 1.5]
GRID = [(g, b) for g in GAMMAS for b in BETAS if g * b <= 1]


def test_narayana_row_sums_are_catalan():
    table = NarayanaTable(12)
    for j in range(1, 13):
        assert table.row_sum(j) == catalan(j)


def test_moment_examples():
    g, p = Fraction(1, 2), Fraction(1, 2)
    assert manova_moment(g, p, 1) == p
    x = 1 / g - 1
    assert manova_moment(g, p, 2) == p + p * p * x
    assert manova_moment(g, p, 4) == Fraction(35, 16)  # 2.1875


def test_moment_at_p_one_is_finite():
    # p = 1 selects every column of a tight frame: G has eigenvalue 1/gamma
    g = Fraction(1, 3)
    for r in range(1, 7):
        assert manova_moment(g, Fraction(1), r) == 3 ** (r - 1)


def test_moment_rejects_order_zero():
    with pytest.raises(LawError):
        manova_moment(Fraction(1, 2), Fraction(1, 2), 0)


def test_law_validation():
    with pytest.raises(LawError):
        LimitLaw("wishart", 0.5)
    with pytest.raises(LawError):
        LimitLaw("manova", 1.5, 0.9)
    with pytest.raises(LawError):
        LimitLaw("mp", 0.0)


def test_atoms():
    law = LimitLaw("manova", 1.5, 0.6)
    assert law.atom_mass == pytest.approx(1 + 1 / 1.5 - 1 / 0.9)
    assert law.zero_atom_mass == pytest.approx(1 - 1 / 1.5)
    assert LimitLaw("manova", 0.5, 0.5).atom_mass == 0.0


@pytest.mark.parametrize("gamma,beta", GRID)
def test_mass_and_moments_grid(gamma, beta):
    law = LimitLaw("manova", beta, gamma)
    total = law.continuous_mass() + law.atom_mass + law.zero_atom_mass
    assert total == pytest.approx(1.0, abs=1e-6)
    for r in range(1, 7):
        quad = functional_integral(law, lambda x, r=r: x**r).value
        assert quad == pytest.approx(moment(law, r, normalization="law"), abs=1e-6)


@pytest.mark.parametrize("beta", BETAS)
def test_mp_degeneration(beta):
    # the gap is an exact O(gamma) effect growing with beta and r: relative
    # 1e-2 holds on the whole grid, absolute 1e-2 for beta <= 1/2
    mp = LimitLaw("mp", beta)
    man = LimitLaw("manova", beta, 1e-3)
    for r in range(1, 5):
        mp_quad = functional_integral(mp, lambda x, r=r: x**r).value
        assert mp_quad == pytest.approx(float(mp_moment(beta, r)), abs=1e-6)
        man_r = moment(man, r, normalization="law")
        assert man_r == pytest.approx(mp_quad, rel=1e-2)
        if beta <= 0.5:
            assert man_r == pytest.approx(mp_quad, abs=1e-2)


def test_cdf_examples():
    law = LimitLaw("manova", 1.0, 0.5)
    lo, hi = law.edges
    assert lo == pytest.approx(0.0, abs=1e-15)
    assert hi == pytest.approx(2.0)
    assert law.cdf(1.0) == pytest.approx(0.5, abs=1e-6)
    assert law.cdf(1.0, abs_tol=1e-9) == pytest.approx(0.5, abs=1e-8)
    assert law.cdf(-0.1) == 0.0
    assert law.cdf(hi + 1) == pytest.approx(1.0, abs=1e-6)


def test_cdf_monotone_with_atom_jump():
    law = LimitLaw("manova", 1.4, 0.6)
    xs = np.linspace(-0.5, 3.0, 2001)
    c = law.cdf(xs)
    assert np.all(np.diff(c) >= -1e-15)
    a = law.atom_location
    assert law.cdf(a) - law.cdf(a - 1e-9) == pytest.approx(law.atom_mass, abs=1e-6)
    assert law.cdf(0.0) == pytest.approx(law.zero_atom_mass)


def test_cdf_table_agrees_with_direct():
    law = LimitLaw("manova", 0.8, 0.3)
    lo, hi = law.edges
    for x in np.linspace(lo, hi, 9):
        assert law.cdf(x) == pytest.approx(law.cdf(x, abs_tol=1e-10), abs=1e-7)


def test_functional_examples():
    law = LimitLaw("manova", 0.8, 0.4)
    assert functional_integral(law, lambda x: np.ones_like(x)).value == pytest.approx(1.0, abs=1e-6)
    assert functional_integral(law, lambda x: x).value == pytest.approx(1.0, abs=1e-6)
    # hard edge at zero without an atom: 1/x diverges, log x does not
    sq = LimitLaw("manova", 1.0, 0.5)
    assert functional_integral(sq, "mse").infinite
    assert not functional_integral(sq, "shannon").infinite
    # MP with beta = 1: int ln x d mu = -1
    assert functional_integral(LimitLaw("mp", 1.0), "shannon").value == pytest.approx(-1.0, abs=1e-7)
    assert functional_integral(LimitLaw("mp", 1.0), "mse").infinite
    # zero atom: both diverge
    wide = LimitLaw("manova", 1.5, 0.5)
    assert functional_integral(wide, "mse").value == math.inf
    assert functional_integral(wide, "shannon").value == -math.inf


def test_mp_mse_closed_form():
    # int x^-1 d MP(beta) = 1 / (1 - beta) for beta < 1
    for beta in (0.2, 0.5, 0.8):
        val = functional_integral(LimitLaw("mp", beta), "mse").value
        assert val == pytest.approx(1 / (1 - beta), rel=1e-8)


def test_export_csv(tmp_path):
    law = LimitLaw("manova", 0.8, 0.5)
    path = tmp_path / "law.csv"
    export_csv(law, path, points=64)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# family=manova")
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    assert rows[0] == ["x", "density", "cdf"]
    assert len(rows) == 66
    assert float(rows[-1][2]) == pytest.approx(1.0, abs=1e-6)
