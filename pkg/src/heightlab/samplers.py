"""Markov chain Monte Carlo for the truncated height model.

A sweep resamples every site of Λ, in region order, from its exact
conditional law. The hybrid schedule follows every ``cluster_every``-th sweep
with a sign-cluster move: keep |φ|, redraw the signs from the Ising law
through the Edwards-Sokal coupling.

Random numbers come from a Philox generator keyed by ``(seed, chain_id)``,
so trajectories are a pure function of the inputs and distinct chain ids
give independent streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ConfigurationError, PreconditionError
from .gibbs import ExactTable, HeightConfig, _slot_offsets, fold_abs, widen_for
from .ising import AbsHeightProfile, IsingLaw, all_spins, couplings_from_abs
from .lattice import PlanarLattice, Region, build_lattice, exterior_contour
from .potentials import PotentialSpec, get_potential

MIN_BURN_IN = 1000
MIN_BATCHES = 32
_CHUNK = 1024


def make_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Counter-based stream for chain ``chain_id`` of run ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(chain_id),))
    return np.random.Generator(np.random.Philox(ss))


class Kernel:
    """Precomputed arrays driving the compiled sweep and cluster move."""

    def __init__(self, region: Region, psi, V, beta: float, M: int):
        if M < 1:
            raise ConfigurationError("M must be >= 1")
        self.region = region
        self.psi = region.boundary_vector(psi)
        if self.psi.size and np.abs(self.psi).max() > M:
            raise ConfigurationError(f"boundary heights must lie in [-{M}, {M}]")
        self.beta = float(beta)
        self.M = int(M)
        offsets = V.edge_offsets(region)
        W = 2 * M + (int(np.abs(offsets).max()) if offsets.size else 0)
        self.V = widen_for(V, W)
        base = self.V.base
        self.vals = np.ascontiguousarray(base.values)
        self.W = base.w_max
        self.nbr, self.sgn = region.neighbour_table
        self.off = _slot_offsets(region, offsets)
        self.edge_index = np.ascontiguousarray(region.edge_index)
        self.symmetric_untilted = self.V.is_symmetric and not np.any(offsets)


@dataclass
class ChainState:
    """Current configuration, sweep counter and the chain's RNG stream."""

    phi: HeightConfig
    sweeps: int = 0
    rng: np.random.Generator = field(default_factory=lambda: make_rng(0), repr=False)

    @classmethod
    def start(cls, region: Region, psi=0, seed: int = 0, chain_id: int = 0, site_heights=None):
        h = np.zeros(region.n_sites, dtype=np.int64) if site_heights is None else site_heights
        return cls(HeightConfig.from_sites(region, h, psi), 0, make_rng(seed, chain_id))

    @property
    def heights(self) -> np.ndarray:
        return self.phi.heights


def heat_bath_sweep(state: ChainState, region: Region, psi, V, beta: float, M: int,
                    n_sweeps: int = 1, kernel: Kernel | None = None) -> ChainState:
    """Run ``n_sweeps`` ordered heat-bath sweeps; updates ``state`` in place and returns it."""
    kernel = kernel or Kernel(region, psi, V, beta, M)
    h = state.phi.heights
    if np.any(h[region.n_sites:] != kernel.psi):
        raise PreconditionError("state boundary does not match psi")
    w = np.empty(2 * M + 1)
    for _ in range(n_sweeps):
        u = state.rng.random(region.n_sites)
        _kernels.heat_bath_sweep(h, kernel.nbr, kernel.sgn, kernel.off, kernel.vals, kernel.W,
                                 kernel.beta, kernel.M, u, w)
        state.sweeps += 1
    return state


def sign_cluster_move(state: ChainState, V, beta: float, kernel: Kernel | None = None,
                      M: int | None = None) -> ChainState:
    """Resample the signs of φ given ξ = |φ|; |φ| is preserved pointwise."""
    region = state.phi.region
    h = state.phi.heights
    n = region.n_sites
    if np.any(h[n:] < 0):
        raise PreconditionError("sign cluster move needs a nonnegative boundary")
    if kernel is None:
        M = int(np.abs(h).max()) + 1 if M is None else M
        kernel = Kernel(region, h[n:], V, beta, M)
    if not kernel.symmetric_untilted:
        raise PreconditionError("sign cluster move needs a symmetric, untilted potential")
    K = np.empty(len(region.edges))
    sigma = np.empty(n, dtype=np.int64)
    _kernels.sign_cluster_move(h, n, kernel.edge_index, kernel.vals, kernel.W, kernel.beta,
                               state.rng.random(len(region.edges)), state.rng.random(n), K, sigma)
    return state


@dataclass
class ChainConfig:
    lattice: str = "square"
    n: int = 2
    beta: float = 1.0
    potential: str = "sos"
    M: int = 8
    seed: int = 0
    burn_in: int = MIN_BURN_IN
    sweeps: int = 10_000
    batches: int = MIN_BATCHES
    cluster_every: int = 1
    psi: int = 0
    record_every: int = 10
    chain_id: int = 0

    def validate(self):
        if self.burn_in < MIN_BURN_IN:
            raise ConfigurationError(f"burn_in must be >= {MIN_BURN_IN}")
        if self.batches < MIN_BATCHES:
            raise ConfigurationError(f"batches must be >= {MIN_BATCHES}")
        if self.sweeps < self.batches:
            raise ConfigurationError("sweeps must be >= batches")
        if self.cluster_every < 0 or self.record_every < 1:
            raise ConfigurationError("cluster_every must be >= 0 and record_every >= 1")
        if self.beta < 0:
            raise ConfigurationError("beta must be >= 0")
        return self

    def region(self) -> Region:
        return build_lattice(self.lattice, self.n)[1]


def batch_means(x: np.ndarray, batches: int) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated series."""
    x = np.asarray(x, dtype=float)
    L = x.size // batches
    if L == 0:
        raise ConfigurationError("series shorter than the number of batches")
    bm = x[x.size - L * batches:].reshape(batches, L).mean(axis=1)
    return float(x.mean()), float(bm.std(ddof=1) / math.sqrt(batches))


@dataclass
class ChainStats:
    mean: float
    mean_stderr: float
    second_moment: float
    stderr: float
    truncation_mass: float
    truncation_warning: bool
    seed: int
    M: int
    sweeps: int
    root_counts: np.ndarray = field(repr=False)

    def root_distribution(self) -> np.ndarray:
        return self.root_counts / self.root_counts.sum()


class Chain:
    """A single height chain on a region with its own RNG stream."""

    def __init__(self, region: Region, psi, V, beta: float, M: int, seed: int = 0,
                 chain_id: int = 0, cluster_every: int = 1):
        self.kernel = Kernel(region, psi, V, beta, M)
        if cluster_every and not self.kernel.symmetric_untilted:
            raise PreconditionError("hybrid schedule needs a symmetric potential; set cluster_every=0")
        if cluster_every and np.any(self.kernel.psi < 0):
            raise PreconditionError("hybrid schedule needs a nonnegative boundary")
        self.region = region
        self.cluster_every = int(cluster_every)
        self.state = ChainState.start(region, self.kernel.psi, seed, chain_id)

    @property
    def heights(self) -> np.ndarray:
        return self.state.phi.heights

    def run(self, n_sweeps: int, chunk: int = _CHUNK) -> tuple[np.ndarray, np.ndarray]:
        """Advance ``n_sweeps`` sweeps; returns per-sweep φ_r and window-edge hit counts."""
        k = self.kernel
        n, E = self.region.n_sites, len(self.region.edges)
        roots = np.empty(n_sweeps, dtype=np.int64)
        hits = np.empty(n_sweeps, dtype=np.int64)
        rng = self.state.rng
        done = 0
        while done < n_sweeps:
            c = min(chunk, n_sweeps - done)
            u_hb = rng.random((c, n))
            if self.cluster_every:
                u_e, u_s = rng.random((c, E)), rng.random((c, n))
            else:
                u_e, u_s = np.empty((c, 0)), np.empty((c, 0))
            _kernels.run_block(self.heights, k.nbr, k.sgn, k.off, k.vals, k.W, k.beta, k.M,
                               k.edge_index, self.region.root_index, self.cluster_every,
                               u_hb, u_e, u_s, self.state.sweeps, roots[done:done + c],
                               hits[done:done + c])
            self.state.sweeps += c
            done += c
        return roots, hits


def _stats(roots, hits, n_sites, M, batches, seed, sweeps, warn_level=1e-4) -> ChainStats:
    mean, mean_se = batch_means(roots, batches)
    second, se = batch_means(roots.astype(float) ** 2, batches)
    mass = float(hits.sum()) / (hits.size * n_sites)
    counts = np.bincount(roots + M, minlength=2 * M + 1)
    return ChainStats(mean, mean_se, second, se, mass, mass > warn_level, seed, M, sweeps, counts)


def run_chain(config: ChainConfig, V: PotentialSpec | None = None, region: Region | None = None) -> ChainStats:
    """Burn in, then estimate the mean and second moment of φ_r with batch-means errors."""
    config.validate()
    region = region or config.region()
    V = V or get_potential(config.potential)
    chain = Chain(region, config.psi, V, config.beta, config.M, config.seed, config.chain_id,
                  config.cluster_every)
    chain.run(config.burn_in)
    roots, hits = chain.run(config.sweeps)
    return _stats(roots, hits, region.n_sites, config.M, config.batches, config.seed, config.sweeps)


class TwoCopyState:
    """Independent pair (φ, φ') with ψ = φ' - φ and the ζ field."""

    def __init__(self, phi: np.ndarray, phi_prime: np.ndarray):
        self.phi = np.asarray(phi)
        self.phi_prime = np.asarray(phi_prime)

    @property
    def psi(self) -> np.ndarray:
        return self.phi_prime - self.phi

    @property
    def zeta(self) -> np.ndarray:
        """φ + 1 where φ < φ', φ where equal, +inf where φ > φ'."""
        p, q = self.phi, self.phi_prime
        return np.where(p < q, p + 1.0, np.where(p == q, p.astype(float), np.inf))

    def check(self):
        z, psi = self.zeta, self.psi
        if not np.array_equal(np.isfinite(z), psi >= 0):
            raise AssertionError("{zeta < inf} != {psi >= 0}")
        le = self.phi <= self.phi_prime
        if not (np.all(self.phi[le] <= z[le]) and np.all(z[le] <= self.phi_prime[le])):
            raise AssertionError("sandwich phi <= zeta <= phi' violated")


def contour_window(region: Region) -> Region:
    """Ball one layer larger than a ball region, used as the contour window."""
    n = max(region.lattice.distance(v) for v in region.sites)
    lat = region.lattice
    if lat.radius < n + 1:
        lat = PlanarLattice(lat.kind, n + 2, lat.root)
    return lat.region(lat.ball(n + 1))


def surrounds_root(site_mask: np.ndarray, region: Region, window: Region) -> bool:
    """Whether Γ({x ∈ Λ : mask}) surrounds the region's root."""
    S = [v for v, m in zip(region.sites, site_mask) if m]
    return region.root in exterior_contour(S, window).interior


@dataclass
class TwoCopyStats:
    psi_mean: float
    psi_stderr: float
    p_nonneg: float
    p_nonneg_stderr: float
    p_surround: float
    p_surround_stderr: float
    samples: int
    zeta_checks: int
    truncation_mass: float
    truncation_warning: bool


def two_copy_run(config: ChainConfig, V: PotentialSpec | None = None, region: Region | None = None,
                 force_equal: bool = False) -> TwoCopyStats:
    """Two independent chains; statistics of ψ = φ' - φ at the root and of {ψ >= 0}.

    With ``force_equal`` both copies share one stream (a diagnostic mode in
    which φ = φ' and ζ = φ throughout).
    """
    config.validate()
    region = region or config.region()
    V = V or get_potential(config.potential)
    sched = config.cluster_every if V.is_symmetric else 0
    a = Chain(region, config.psi, V, config.beta, config.M, config.seed, 0, sched)
    b = Chain(region, config.psi, V, config.beta, config.M, config.seed, 0 if force_equal else 1, sched)
    window = contour_window(region)
    a.run(config.burn_in)
    b.run(config.burn_in)
    n = region.n_sites
    ri = region.root_index
    n_rec = config.sweeps // config.record_every
    psi_r = np.empty(n_rec)
    nonneg = np.empty(n_rec)
    surround = np.empty(n_rec)
    edge_hits = 0
    for t in range(n_rec):
        _, ha = a.run(config.record_every)
        _, hb = b.run(config.record_every)
        edge_hits += int(ha.sum() + hb.sum())
        st = TwoCopyState(a.heights[:n], b.heights[:n])
        st.check()
        d = st.psi
        psi_r[t] = d[ri]
        nonneg[t] = d[ri] >= 0
        surround[t] = surrounds_root(d >= 0, region, window)
    batches = min(config.batches, n_rec)
    m, se = batch_means(psi_r, batches)
    p0, p0se = batch_means(nonneg, batches)
    ps, psse = batch_means(surround, batches)
    mass = edge_hits / (2 * n * n_rec * config.record_every)
    return TwoCopyStats(m, se, p0, p0se, ps, psse, n_rec, n_rec, mass, mass > 1e-4)


def level_set_surround_probability(config: ChainConfig, k: int = 0, op: str = ">=",
                                   V: PotentialSpec | None = None) -> tuple[float, float]:
    """Estimate P(Γ({φ □ k} ∩ Λ_n) surrounds r) with a batch-means error."""
    config.validate()
    region = config.region()
    V = V or get_potential(config.potential)
    chain = Chain(region, config.psi, V, config.beta, config.M, config.seed, config.chain_id,
                  config.cluster_every)
    window = contour_window(region)
    chain.run(config.burn_in)
    n = region.n_sites
    n_rec = config.sweeps // config.record_every
    hits = np.empty(n_rec)
    for t in range(n_rec):
        chain.run(config.record_every)
        h = chain.heights[:n]
        mask = h >= k if op == ">=" else h <= k
        hits[t] = surrounds_root(mask, region, window)
    return batch_means(hits, min(config.batches, n_rec))


# exact kernel composition (no sampling)

def _site_conditionals(table: ExactTable) -> list[np.ndarray]:
    """For each site axis, the conditional law of that site given the rest."""
    w = np.exp(table.log_weights - table.log_weights.max()).reshape(table.shape)
    return [w / w.sum(axis=i, keepdims=True) for i in range(w.ndim)]


def exact_sweep_apply(table: ExactTable, p: np.ndarray) -> np.ndarray:
    """Push a distribution on {-M..M}^Λ through one ordered heat-bath sweep exactly."""
    out = np.asarray(p, dtype=float)
    for i, cond in enumerate(_site_conditionals(table)):
        out = out.sum(axis=i, keepdims=True) * cond
    return out


def exact_cluster_move_apply(table: ExactTable, p: np.ndarray) -> np.ndarray:
    """Push a distribution through one exact sign-cluster move."""
    region, M, n = table.region, table.M, table.region.n_sites
    if not table.potential.is_symmetric or np.any(table.psi < 0):
        raise PreconditionError("cluster move needs a symmetric potential and nonnegative boundary")
    V = widen_for(table.potential, 2 * M)
    p_abs = fold_abs(np.asarray(p, dtype=float), M)
    out = np.zeros(table.shape)
    spins = all_spins(n)
    for xi_sites in np.ndindex(*((M + 1,) * n)):
        xi = AbsHeightProfile.from_sites(region, xi_sites, table.psi)
        law = IsingLaw(region, couplings_from_abs(xi, V, table.beta))
        phis = spins * np.asarray(xi_sites)[None, :] + M
        np.add.at(out, tuple(phis.T), p_abs[xi_sites] * law.probs)
    return out


def sign_law_tensor(table: ExactTable) -> np.ndarray:
    """Law of σ|φ| when |φ| has the table's law and σ ~ ν^{|φ|} exactly."""
    return exact_cluster_move_apply(table, table.probabilities)


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
