import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heightlab.errors import (
    ConfigurationError,
    InvalidPotentialError,
    PotentialWindowError,
)
from heightlab.gibbs import enumerate_measure
from heightlab.lattice import build_lattice
from heightlab.potentials import (
    PotentialSpec,
    Tri,
    discrete_gaussian,
    get_potential,
    load_potential_table,
    quartic,
    sos,
    tilt,
)


def test_second_differences():
    assert sos().second_difference(0) == 2
    assert sos().second_difference(1) == 0
    dg = discrete_gaussian()
    assert all(dg.second_difference(k) == 2 for k in range(-10, 11))
    q = quartic(10)
    ks = np.arange(-9, 10)
    assert np.array_equal(q.second_difference(ks), 12 * ks**2 + 2)


def test_window_errors():
    V = sos(5)
    with pytest.raises(PotentialWindowError):
        V.evaluate(6)
    with pytest.raises(PotentialWindowError):
        V.second_difference(5)


def test_classification_examples():
    c = sos().classify()
    assert c.symmetric is Tri.HOLDS and c.lipschitz is Tri.HOLDS and c.abs_fkg is Tri.HOLDS
    c = discrete_gaussian().classify()
    assert c.symmetric and not c.lipschitz and c.abs_fkg
    c = quartic(10).classify()
    assert c.symmetric and not c.lipschitz and not c.abs_fkg


@pytest.mark.parametrize("w", [2, 3, 7, 64])
def test_builtins_are_abs_fkg_on_every_window(w):
    assert sos(w).classify().abs_fkg and discrete_gaussian(w).classify().abs_fkg


def test_non_convex_rejected():
    with pytest.raises(InvalidPotentialError):
        PotentialSpec("bump", lambda k: -np.abs(k), 5)
    with pytest.raises(ConfigurationError):
        sos(1).classify()


def test_asymmetric_potential_flags():
    V = PotentialSpec("lean", lambda k: np.where(k > 0, 2 * k, -k).astype(float), 8)
    c = V.classify()
    assert not c.symmetric and not c.lipschitz


def test_table_file(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("# sos on a small window\n" + "\n".join(f"{k} {abs(k)}" for k in range(-4, 5)) + "\n")
    V = load_potential_table(p)
    assert V.w_max == 4 and V.evaluate(-3) == 3 and V.classify().lipschitz
    with pytest.raises(PotentialWindowError):
        V.widened(6)
    half = tmp_path / "half.txt"
    half.write_text("\n".join(f"{k} {k * k}" for k in range(0, 6)))
    with pytest.raises(ConfigurationError):
        load_potential_table(half)
    assert load_potential_table(half, symmetric_completion=True).evaluate(-5) == 25
    assert get_potential(str(p)).w_max == 4
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0\n1 x\n")
    with pytest.raises(ConfigurationError):
        load_potential_table(bad)


def test_tilt_identity_and_horizontal_shift():
    lat, r = build_lattice("square", 1)
    T0 = tilt(sos(), lambda v: 0)
    for x, y in r.edges:
        for z in range(-5, 6):
            assert T0.edge_value(x, y, z) == abs(z)
    T = tilt(sos(), lambda v: v[0])
    ep = T.edge_potential((0, 0), (1, 0))
    assert [ep.evaluate(z) for z in range(-3, 4)] == [abs(z + 1) for z in range(-3, 4)]
    assert ep.classify().lipschitz
    assert T.classify().lipschitz


@given(st.dictionaries(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), st.integers(-4, 4)))
def test_tilt_consistency(a):
    """V'_xy(z) = V'_yx(-z) on every directed edge."""
    _, r = build_lattice("square", 2)
    T = tilt(discrete_gaussian(), a)
    for x, y in r.edges:
        assert T.offset(y, x) == -T.offset(x, y)
        for z in range(-4, 5):
            assert T.edge_value(x, y, z, oriented=True) == T.edge_value(y, x, -z, oriented=False)


@given(
    st.dictionaries(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), st.integers(-3, 3)),
    st.dictionaries(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), st.integers(-3, 3)),
)
def test_tilt_composes_additively(a, b):
    _, r = build_lattice("square", 1)
    V = sos()
    ab = {v: a.get(v, 0) + b.get(v, 0) for v in set(a) | set(b)}
    T1, T2 = tilt(tilt(V, a), b), tilt(V, ab)
    for x, y in r.edges:
        for z in range(-5, 6):
            assert T1.edge_value(x, y, z) == T2.edge_value(x, y, z)


def test_tilt_gibbs_invariance():
    """μ_V,ψ(φ) = μ_tilt(V,a),ψ-a(φ - a) on a 2-site region."""
    lat = build_lattice("square", 2)[0]
    r = lat.region([(0, 0), (1, 0)])
    a = {v: (v[0] + 2 * v[1]) % 3 - 1 for v in r.sites + r.boundary}
    psi = {v: (v[0] - v[1]) % 2 for v in r.boundary}
    M = 6
    V = sos()
    t1 = enumerate_measure(r, psi, V, 0.7, M)
    t2 = enumerate_measure(r, {v: psi[v] - a[v] for v in r.boundary}, tilt(V, a), 0.7, M)
    shift = np.array([a[v] for v in r.sites])
    # compare both laws restricted to a set inside both windows, renormalised
    common = [np.array(c) - (M - 2) for c in np.ndindex(2 * M - 3, 2 * M - 3)]
    p1 = np.array([t1.probability(c) for c in common])
    p2 = np.array([t2.probability(c - shift) for c in common])
    np.testing.assert_allclose(p1 / p1.sum(), p2 / p2.sum(), rtol=1e-12)
