import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heightlab.errors import EnumerationTooLargeError, PreconditionError
from heightlab.gibbs import abs_law, enumerate_measure
from heightlab.ising import (
    AbsHeightProfile,
    IsingLaw,
    SpinConfig,
    all_spins,
    couplings_from_abs,
    decomposition_weight,
    ising_partition_plus,
    sample_signs_fk,
    spin_correlation,
)
from heightlab.lattice import PlanarLattice, box_region
from heightlab.potentials import PotentialSpec, discrete_gaussian, quartic, sos
from heightlab.samplers import batch_means, make_rng, total_variation

LAT = PlanarLattice("square", 4)


def brute_ising(region, K):
    """Z^+ and per-configuration weights by direct loops."""
    sites = region.sites
    weights = {}
    for sig in itertools.product((1, -1), repeat=len(sites)):
        s = dict(zip(sites, sig))
        e = sum(k * s.get(x, 1) * s.get(y, 1) for (x, y), k in zip(region.edges, K))
        weights[sig] = math.exp(e)
    return math.fsum(weights.values()), weights


def test_coupling_examples():
    r = LAT.region([(0, 0)])
    xi = AbsHeightProfile.from_sites(r, [0], [3, 1, 0, 2])
    assert np.all(couplings_from_abs(xi, sos(), 1.0).K == 0)
    r2 = LAT.region([(0, 0), (1, 0)])
    xi = AbsHeightProfile.from_sites(r2, [1, 2], 0)
    K = couplings_from_abs(xi, sos(), 1.0).K
    inner = r2.edges.index(((0, 0), (1, 0)))
    assert K[inner] == 1.0
    for a in range(4):
        xi = AbsHeightProfile.from_sites(r2, [a, a], 0)
        assert couplings_from_abs(xi, discrete_gaussian(), 1.0).K[inner] == 2 * a * a


def symmetric_convex_tables():
    rng = np.random.default_rng(5)
    out = [sos(), discrete_gaussian(), quartic(12)]
    for _ in range(5):
        inc = np.cumsum(rng.random(12))  # increasing increments: convex on k >= 0
        v = np.concatenate([[0.0], np.cumsum(inc)])
        out.append(PotentialSpec("rand", None, 12, values=np.concatenate([v[:0:-1], v])))
    return out


@pytest.mark.parametrize("V", symmetric_convex_tables())
def test_couplings_nonnegative_and_monotone(V):
    r = LAT.region([(0, 0), (1, 0)])
    inner = r.edges.index(((0, 0), (1, 0)))
    K = np.zeros((5, 5))
    for a, b in itertools.product(range(5), repeat=2):
        xi = AbsHeightProfile.from_sites(r, [a, b], 0)
        K[a, b] = couplings_from_abs(xi, V, 1.0).K[inner]
    assert np.all(K >= -1e-12)
    assert np.all(np.diff(K, axis=0) >= -1e-12) and np.all(np.diff(K, axis=1) >= -1e-12)


def test_couplings_need_symmetric_potential():
    lean = PotentialSpec("lean", lambda k: np.where(k > 0, 2 * k, -k).astype(float), 8)
    xi = AbsHeightProfile.from_sites(LAT.region([(0, 0)]), [1], 0)
    with pytest.raises(PreconditionError):
        couplings_from_abs(xi, lean, 1.0)
    with pytest.raises(PreconditionError):
        AbsHeightProfile.from_sites(LAT.region([(0, 0)]), [-1], 0)


def test_partition_examples():
    r = LAT.region([(0, 0), (1, 0), (0, 1)])
    assert ising_partition_plus(r, 0.0) == pytest.approx(8)
    assert spin_correlation(r, 0.0, [(0, 0)]) == pytest.approx(0, abs=1e-15)
    single = LAT.region([(0, 0)])
    K = np.zeros(4)
    K[0] = 0.7
    assert spin_correlation(single, K, [(0, 0)]) == pytest.approx(math.tanh(0.7), rel=1e-12)
    assert spin_correlation(single, 0.3, [(0, 0)]) == pytest.approx(math.tanh(1.2), rel=1e-12)
    with pytest.raises(EnumerationTooLargeError):
        all_spins(25)


@given(st.lists(st.floats(0, 2), min_size=12, max_size=12))
def test_partition_matches_brute_force(K):
    r = box_region("square", 2, 2)
    Z, w = brute_ising(r, K)
    assert ising_partition_plus(r, K) == pytest.approx(Z, rel=1e-12)
    law = IsingLaw(r, K)
    for sig, p in zip(map(tuple, law.spins), law.probs):
        assert p == pytest.approx(w[sig] / Z, rel=1e-12)


@given(st.integers(1, 4), st.data())
def test_gks_inequalities(size, data):
    order = [(0, 0), (1, 0), (0, 1), (1, 1)]
    r = LAT.region(order[:size], root=(0, 0))
    E = len(r.edges)
    K = np.array(data.draw(st.lists(st.floats(0, 3), min_size=E, max_size=E)))
    H = np.array(data.draw(st.lists(st.floats(0, 1), min_size=E, max_size=E)))
    H2 = np.array(data.draw(st.lists(st.floats(0, 1), min_size=E, max_size=E)))
    law = IsingLaw(r, K)
    subsets = list(law.site_subsets())
    for A in subsets:
        a = law.correlation(A)
        assert a >= -1e-12
        for B in subsets:
            ab = law.expect(law.sigma_A(A) * law.sigma_A(B))
            assert ab >= a * law.correlation(B) - 1e-12
    e1, e2 = law.exp_bond_expectation(H), law.exp_bond_expectation(H2)
    assert e1 >= 1 - 1e-12
    assert law.exp_bond_expectation(H + H2) >= e1 * e2 * (1 - 1e-12)


def test_decomposition_weight_examples():
    r = LAT.region([(0, 0)])
    xi = AbsHeightProfile.from_sites(r, [2], 0)
    assert decomposition_weight(xi, sos(), 1.0) == pytest.approx(2 * math.exp(-8), rel=1e-14)
    t = enumerate_measure(r, 0, sos(), 1.0, 3)
    assert t.Z * (t.probability([2]) + t.probability([-2])) == pytest.approx(2 * math.exp(-8), rel=1e-12)
    r3 = LAT.region([(0, 0), (1, 0), (0, 1)])
    assert decomposition_weight(AbsHeightProfile.from_sites(r3, [0, 0, 0], 0), sos(), 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("V", [sos(), discrete_gaussian()])
def test_decomposition_sums_to_partition_function(V):
    r = LAT.region([(0, 0), (1, 0)])
    M = 3
    t = enumerate_measure(r, 0, V, 1.0, M)
    law = abs_law(t)
    total = []
    for xi in itertools.product(range(M + 1), repeat=2):
        w = decomposition_weight(AbsHeightProfile.from_sites(r, xi, 0), V, 1.0)
        assert w / t.Z == pytest.approx(law[xi], rel=1e-10)
        total.append(w)
    assert math.fsum(total) == pytest.approx(t.Z, rel=1e-10)


def test_zero_count_excludes_boundary():
    r = LAT.region([(0, 0), (1, 0)])
    assert AbsHeightProfile.from_sites(r, [0, 3], 0).zeros == 1


def test_fk_zero_coupling_gives_fair_signs():
    r = box_region("square", 2, 2)
    xi = AbsHeightProfile.from_sites(r, [1, 1, 1, 1], 0)
    rng = make_rng(11)
    draws = np.array([sample_signs_fk(xi, 0.0, rng).sigma for _ in range(4000)])
    assert np.all(np.abs(draws.mean(axis=0)) < 4 * 1 / math.sqrt(4000))
    s = sample_signs_fk(xi, 0.0, rng)
    assert np.all(s.full()[r.n_sites:] == 1)


def test_fk_strong_boundary_coupling_forces_plus():
    r = LAT.region([(0, 0)])
    xi = AbsHeightProfile.from_sites(r, [1], 0)
    K = np.zeros(4)
    K[0] = 40.0
    rng = make_rng(3)
    state = SpinConfig(r, np.array([-1]))
    hits = 0
    for _ in range(200):
        state = sample_signs_fk(xi, K, rng, state)
        hits += state.sigma[0] == 1
    assert hits >= 199


def test_fk_rejects_negative_couplings():
    r = LAT.region([(0, 0)])
    with pytest.raises(PreconditionError):
        sample_signs_fk(AbsHeightProfile.from_sites(r, [1], 0), -0.1, make_rng(0))


def test_fk_chain_matches_exact_ising():
    r = box_region("square", 2, 2)
    xi = AbsHeightProfile.from_sites(r, [1, 1, 1, 1], 0)
    K = couplings_from_abs(xi, sos(), 1.0)
    law = IsingLaw(r, K)
    rng = make_rng(2024)
    n = 100_000
    state = None
    codes = np.empty(n, dtype=np.int64)
    spins = np.empty((n, 4))
    for t in range(n):
        state = sample_signs_fk(xi, K, rng, state)
        spins[t] = state.sigma
        codes[t] = int("".join("0" if s == 1 else "1" for s in state.sigma), 2)
    emp = np.bincount(codes, minlength=16) / n
    assert total_variation(emp, law.probs) < 0.02
    for i, x in enumerate(r.sites):
        mean, se = batch_means(spins[:, i], 32)
        assert abs(mean - law.correlation([x])) < 3 * se
