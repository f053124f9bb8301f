import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heightlab.errors import ConfigurationError, PreconditionError
from heightlab.gibbs import abs_law, enumerate_measure, fold_abs, site_marginal
from heightlab.lattice import PlanarLattice, box_region, build_lattice
from heightlab.potentials import discrete_gaussian, sos, tilt
from heightlab.samplers import (
    Chain,
    ChainConfig,
    ChainState,
    TwoCopyState,
    batch_means,
    exact_cluster_move_apply,
    exact_sweep_apply,
    heat_bath_sweep,
    level_set_surround_probability,
    make_rng,
    run_chain,
    sign_cluster_move,
    total_variation,
    two_copy_run,
)

LAT = PlanarLattice("square", 4)


def test_zero_sweeps_is_identity():
    r = LAT.region([(0, 0), (1, 0)])
    s = ChainState.start(r, 0, seed=1, site_heights=[1, -1])
    before = s.phi.heights.copy()
    heat_bath_sweep(s, r, 0, sos(), 1.0, 3, n_sweeps=0)
    assert np.array_equal(s.phi.heights, before) and s.sweeps == 0


def test_sweeps_are_deterministic():
    r = box_region("square", 2, 2)
    runs = []
    for _ in range(2):
        s = ChainState.start(r, 1, seed=42)
        traj = []
        for _ in range(50):
            heat_bath_sweep(s, r, 1, sos(), 0.5, 4)
            sign_cluster_move(s, sos(), 0.5, M=4)
            traj.append(s.phi.heights.copy())
        runs.append(np.array(traj))
    assert np.array_equal(runs[0], runs[1])
    a = make_rng(7, 0).random(8)
    b = make_rng(7, 1).random(8)
    assert not np.allclose(a, b)
    assert np.array_equal(a, make_rng(7, 0).random(8))


def test_boundary_and_window_respected():
    r = box_region("square", 2, 2)
    s = ChainState.start(r, 2, seed=0)
    for _ in range(200):
        heat_bath_sweep(s, r, 2, sos(), 0.2, 3)
        assert np.all(np.abs(s.phi.sites) <= 3)
        assert np.all(s.phi.boundary == 2)


def test_cluster_move_preserves_abs():
    r = box_region("square", 2, 2)
    s = ChainState.start(r, 1, seed=9, site_heights=[2, -1, 0, 3])
    for _ in range(50):
        before = np.abs(s.phi.heights.copy())
        sign_cluster_move(s, sos(), 1.0, M=4)
        assert np.array_equal(np.abs(s.phi.heights), before)
    z = ChainState.start(r, 0, seed=1)
    sign_cluster_move(z, sos(), 1.0, M=2)
    assert np.all(z.phi.heights == 0)


def test_cluster_move_preconditions():
    r = LAT.region([(0, 0)])
    s = ChainState.start(r, -1, seed=0)
    with pytest.raises(PreconditionError):
        sign_cluster_move(s, sos(), 1.0, M=2)
    s = ChainState.start(r, 0, seed=0)
    with pytest.raises(PreconditionError):
        sign_cluster_move(s, tilt(sos(), lambda v: v[0]), 1.0, M=2)


STATIONARY_CASES = [
    (LAT.region([(0, 0), (1, 0)]), 0, sos(), 1.0, 3),
    (LAT.region([(0, 0), (1, 0), (0, 1)]), 1, discrete_gaussian(), 0.4, 2),
    (box_region("square", 2, 2), 0, sos(), 0.7, 2),
    (PlanarLattice("hexagonal", 4).region([(0, 0), (1, 0), (0, 1)]), 2, sos(), 0.3, 3),
]


@pytest.mark.parametrize("region,psi,V,beta,M", STATIONARY_CASES)
def test_exact_sweep_is_stationary(region, psi, V, beta, M):
    t = enumerate_measure(region, psi, V, beta, M)
    assert np.max(np.abs(exact_sweep_apply(t, t.probabilities) - t.probabilities)) < 1e-10


@pytest.mark.parametrize("region,psi,V,beta,M", STATIONARY_CASES)
def test_exact_cluster_move_reproduces_table(region, psi, V, beta, M):
    t = enumerate_measure(region, psi, V, beta, M)
    assert np.max(np.abs(exact_cluster_move_apply(t, t.probabilities) - t.probabilities)) < 1e-10


def test_exact_sweep_stationary_for_tilted_potential():
    r = LAT.region([(0, 0), (1, 0)])
    T = tilt(sos(), lambda v: v[0] - v[1])
    t = enumerate_measure(r, {v: v[0] - v[1] for v in r.boundary}, T, 0.8, 4)
    assert np.max(np.abs(exact_sweep_apply(t, t.probabilities) - t.probabilities)) < 1e-10


def test_exact_sweep_contracts():
    t = enumerate_measure(box_region("square", 2, 2), 0, sos(), 1.0, 2)
    p = np.zeros(t.shape)
    p[(4,) * 4] = 1.0
    d0 = total_variation(p.ravel(), t.probabilities.ravel())
    for _ in range(30):
        p = exact_sweep_apply(t, p)
    assert total_variation(p.ravel(), t.probabilities.ravel()) < 1e-3 * d0


def test_compiled_sweep_matches_exact_conditional():
    """From a fixed state, one-site updates of the compiled sweep follow the exact conditional."""
    r = LAT.region([(0, 0)])
    psi = [2, -1, 0, 1]
    t = enumerate_measure(r, psi, sos(), 0.8, 4)
    chain = Chain(r, psi, sos(), 0.8, 4, seed=5, cluster_every=0)
    roots, _ = chain.run(100_000)
    emp = np.bincount(roots + 4, minlength=9) / roots.size
    assert total_variation(emp, t.probabilities) < 0.01


def test_heat_bath_two_site_marginal():
    r = LAT.region([(0, 0), (1, 0)])
    t = enumerate_measure(r, 0, sos(), 1.0, 2)
    roots, _ = Chain(r, 0, sos(), 1.0, 2, seed=3, cluster_every=0).run(100_000)
    emp = np.bincount(roots + 2, minlength=5) / roots.size
    assert total_variation(emp, site_marginal(t, (0, 0)).probs) < 0.02


def test_run_chain_matches_exact_on_box():
    r = box_region("square", 2, 2)
    t = enumerate_measure(r, 0, sos(), 1.0, 6)
    exact = site_marginal(t, (0, 0)).second_moment
    s = run_chain(ChainConfig(beta=1.0, M=6, sweeps=100_000, seed=11), region=r)
    assert abs(s.second_moment - exact) < 3 * s.stderr
    again = run_chain(ChainConfig(beta=1.0, M=6, sweeps=100_000, seed=11), region=r)
    assert again.second_moment == s.second_moment and again.stderr == s.stderr


def test_run_chain_pinned_at_large_beta():
    s = run_chain(ChainConfig(n=6, beta=5.0, M=3, sweeps=2000, seed=0))
    assert s.second_moment - s.mean**2 < 0.2


def test_truncation_warning():
    s = run_chain(ChainConfig(n=1, beta=0.05, M=1, sweeps=2000, seed=0))
    assert s.truncation_warning and s.truncation_mass > 1e-4
    s = run_chain(ChainConfig(n=1, beta=3.0, M=4, sweeps=2000, seed=0))
    assert not s.truncation_warning


@pytest.mark.parametrize(
    "kw", [dict(burn_in=10), dict(batches=4), dict(sweeps=10), dict(beta=-1.0), dict(cluster_every=-1)]
)
def test_chain_config_validation(kw):
    with pytest.raises(ConfigurationError):
        run_chain(ChainConfig(**kw))


def test_batch_means_white_noise():
    x = np.random.default_rng(0).standard_normal(64_000)
    m, se = batch_means(x, 32)
    assert se == pytest.approx(1 / math.sqrt(x.size), rel=0.35)
    with pytest.raises(ConfigurationError):
        batch_means(x[:10], 32)


@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=12))
def test_two_copy_state_invariants(pairs):
    phi, phi2 = map(np.array, zip(*pairs))
    s = TwoCopyState(phi, phi2)
    s.check()
    z = s.zeta
    assert np.array_equal(np.isfinite(z), s.psi >= 0)
    eq = phi == phi2
    assert np.array_equal(z[eq], phi[eq])
    # ζ = a means (φ, φ') = (a, a) or (a - 1, k) with k >= a
    for p, q, zz in zip(phi, phi2, z):
        if np.isfinite(zz):
            a = int(zz)
            assert (p, q) == (a, a) or (p == a - 1 and q >= a)


def test_two_copy_forced_equal():
    cfg = ChainConfig(n=2, beta=0.5, M=6, sweeps=640, seed=3, record_every=10)
    st_ = two_copy_run(cfg, force_equal=True)
    assert st_.psi_mean == 0 and st_.p_nonneg == 1.0


def test_two_copy_symmetric_mean():
    cfg = ChainConfig(n=3, beta=0.5, M=12, sweeps=20_000, seed=4, record_every=5)
    s = two_copy_run(cfg)
    assert abs(s.psi_mean) < 3 * s.psi_stderr
    assert s.zeta_checks == s.samples


def test_two_copy_nonnegative_root_probability():
    b = math.log(2) / 8
    cfg = ChainConfig(n=8, beta=b, M=48, sweeps=20_000, seed=8, record_every=10)
    s = two_copy_run(cfg)
    assert s.p_nonneg >= 0.5 - 3 * s.p_nonneg_stderr


def test_level_set_surround_trivial_cases():
    cfg = ChainConfig(n=3, beta=8.0, M=2, sweeps=640, seed=0)
    p, _ = level_set_surround_probability(cfg, 0, ">=")
    assert p == 1.0
    p, _ = level_set_surround_probability(cfg, 1, ">=")
    assert p == 0.0


def test_sign_law_of_hybrid_chain_on_box():
    """Hybrid chain: the law of |φ| and of the signs both match the table."""
    r = box_region("square", 2, 2)
    t = enumerate_measure(r, 0, sos(), 1.0, 2)
    chain = Chain(r, 0, sos(), 1.0, 2, seed=21, cluster_every=1)
    chain.run(1000)
    counts = np.zeros(t.shape)
    for _ in range(20_000):
        chain.run(1)
        counts[tuple(chain.heights[:4] + 2)] += 1
    emp = counts / counts.sum()
    assert total_variation(fold_abs(emp, 2).ravel(), abs_law(t).ravel()) < 0.03
