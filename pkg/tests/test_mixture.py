import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from kdfmise.errors import DomainError, PrecisionError
from kdfmise.mixture import (
    NormalMixture,
    ReferenceDistribution,
    abs_cf_squared,
    catalog,
    catalog_ids,
    load_distribution,
    mixture_cdf,
    mixture_pdf,
    mw,
    one_minus_abs_cf_squared,
    reference_cdf,
    reference_cf,
    reference_sf,
    roughness_F2r,
    sample,
    u_func,
    v0,
    v_func,
)

STD = NormalMixture.normal()
PAIR = NormalMixture([0.5, 0.5], [-1.0, 1.0], [1.0, 1.0])


def test_pdf_examples():
    assert mixture_pdf(STD, 0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert mixture_pdf(PAIR, 0.0) == pytest.approx(0.2419707245, abs=1e-10)
    direct = 0.5 * stats.norm(-1, 2 / 3).pdf(0) + 0.5 * stats.norm(1, 2 / 3).pdf(0)
    assert mixture_pdf(mw(6), 0.0) == pytest.approx(direct, rel=1e-14)


def test_cdf_examples():
    assert mixture_cdf(STD, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert mixture_cdf(PAIR, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert mixture_cdf(STD, 1.959964) == pytest.approx(0.975, abs=1e-7)


def test_constructor_validates():
    with pytest.raises(DomainError):
        NormalMixture([0.5, 0.6], [0, 1], [1, 1])
    with pytest.raises(DomainError):
        NormalMixture([1.0], [0.0], [0.0])


def test_sampling():
    assert sample(STD, 0, seed=1).size == 0
    x = sample(STD, 100_000, seed=7)
    assert abs(x.mean()) < 4 / math.sqrt(1e5)
    y = sample(mw(7), 100_000, seed=8)
    assert stats.kstest(y, lambda t: mixture_cdf(mw(7), t)).statistic < 0.01


def test_v0_examples():
    assert v0(STD) == pytest.approx(0.5641895835, abs=1e-10)
    assert v0(NormalMixture.normal(0, 2)) == pytest.approx(2 / math.sqrt(math.pi), abs=1e-12)
    F = lambda t: mixture_cdf(mw(6), t)
    quad = integrate.quad(lambda t: F(t) * (1 - F(t)), -12, 12, epsabs=1e-13, limit=200)[0]
    assert v0(mw(6)) == pytest.approx(quad, abs=1e-11)


def test_u_and_v_examples():
    assert u_func(STD, 0.0, 3) == pytest.approx(0.5641895835, abs=1e-10)
    assert u_func(STD, 1.0, 2) == pytest.approx(0.7978845608, abs=1e-10)
    assert v_func(STD, 1.0, 1, 2) == pytest.approx(0.1994711402, abs=1e-10)
    assert v_func(STD, 0.0, 2, 1) == 0.0
    for k in (2, 6, 10):
        for h, q in [(0.3, 1), (1.2, 2)]:
            assert v_func(mw(k), h, 0, q) == u_func(mw(k), h, q)


@pytest.mark.parametrize("k", range(1, 16))
def test_catalog_entries_have_unit_mass(k):
    nm = mw(k)
    assert nm.weights.sum() == pytest.approx(1.0, abs=1e-14)
    lo, hi = nm.support()
    mass = integrate.quad(lambda t: mixture_pdf(nm, t), lo, hi, points=list(nm.means), limit=500)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_catalog_identities():
    assert len(catalog_ids()) == 18
    assert np.allclose(mw(1).means, [0.0]) and np.allclose(mw(1).sds, [1.0])
    six = mw(6)
    assert np.allclose(six.weights, [0.5, 0.5])
    assert np.allclose(six.means, [-1, 1]) and np.allclose(six.sds, [2 / 3, 2 / 3])
    g = catalog("gamma21")
    assert (g.shape, g.scale) == (2.0, 1.0)
    with pytest.raises(DomainError):
        catalog("mw16")


def test_reference_cdf_examples():
    g = catalog("gamma21")
    assert reference_cdf(g, 2.0) == pytest.approx(1 - 3 * math.exp(-2), abs=1e-12)
    assert reference_cdf(g, 1e3) == pytest.approx(1.0, abs=1e-15)
    assert reference_cdf(g, -1.0) == 0.0
    assert reference_cdf(catalog("t3"), 0.0) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("ident", ["mw3", "mw10", "gamma21", "t3", "t4"])
def test_reference_sf_and_cf(ident):
    d = catalog(ident)
    x = np.linspace(-4, 8, 13)
    assert np.allclose(reference_sf(d, x), 1 - reference_cdf(d, x), atol=1e-14)
    # cf against direct Fourier integration of the density
    lo, hi = d.bounds() if d.kind != "student_t" else (-400.0, 400.0)
    pdf = {
        "normal_mixture": lambda s: mixture_pdf(d.mixture, s),
        "gamma": lambda s: stats.gamma(2.0).pdf(s),
        "student_t": lambda s: stats.t(d.dof).pdf(s),
    }[d.kind]
    for t in (0.3, 1.7):
        re = integrate.quad(lambda s: pdf(s) * math.cos(t * s), lo, hi, limit=2000, points=[0.0])[0]
        im = integrate.quad(lambda s: pdf(s) * math.sin(t * s), lo, hi, limit=2000, points=[0.0])[0]
        assert abs(reference_cf(d, t) - complex(re, im)) < 1e-6


def test_abs_cf_squared():
    assert abs_cf_squared(mw(4), 0.0) == pytest.approx(1.0, abs=1e-15)
    assert abs_cf_squared(STD, 1.0) == pytest.approx(0.3678794412, abs=1e-10)
    d = catalog("mw7")
    assert abs_cf_squared(d.mixture, 2.0) == pytest.approx(abs(reference_cf(d, 2.0)) ** 2, rel=1e-13)
    t = np.linspace(0, 60, 601)
    for k in range(1, 16):
        a = abs_cf_squared(mw(k), t)
        assert np.all(a >= -1e-15) and np.all(a <= 1 + 1e-15)
        assert abs_cf_squared(mw(k), 2000.0) < 1e-12
        assert np.allclose(one_minus_abs_cf_squared(mw(k), t), 1 - a, atol=1e-13)


def test_roughness():
    # R(F'') = integral of (f')^2 = 1 / (4 sqrt(pi)) for the standard normal
    quad = integrate.quad(lambda t: (t * stats.norm.pdf(t)) ** 2, -np.inf, np.inf)[0]
    assert roughness_F2r(STD, 1) == pytest.approx(quad, rel=1e-12)
    assert roughness_F2r(STD, 1) == pytest.approx(1 / (4 * math.sqrt(math.pi)), rel=1e-13)
    # MW2, r=2: integral of (f''')^2 via Hermite derivatives of each component
    nm = mw(2)

    def f3(t):
        z = (t - nm.means) / nm.sds
        return float(np.sum(nm.weights * -(z**3 - 3 * z) * stats.norm.pdf(z) / nm.sds**4))

    quad = integrate.quad(lambda t: f3(t) ** 2, -10, 10, limit=400, epsabs=1e-12)[0]
    assert roughness_F2r(nm, 2) == pytest.approx(quad, rel=1e-9)
    with pytest.raises(PrecisionError):
        roughness_F2r(STD, 16)


def test_affine_equivariance():
    nm = mw(8)
    moved = nm.affine(2.5, -1.0)
    x = np.linspace(-4, 4, 9)
    assert np.allclose(moved.cdf(2.5 * x - 1.0), nm.cdf(x), atol=1e-15)
    assert v0(moved) == pytest.approx(2.5 * v0(nm), rel=1e-13)


def test_load_distribution_from_json(tmp_path):
    path = tmp_path / "mix.json"
    path.write_text(json.dumps({"weights": [0.3, 0.7], "means": [0, 2], "sds": [1, 0.5]}))
    d = load_distribution(str(path))
    assert isinstance(d, ReferenceDistribution)
    assert d.mixture.m == 2
    assert load_distribution("MW3").mixture.m == 8
