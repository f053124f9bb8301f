"""Absolute height / Ising sign decomposition of the height measure.

Given |φ| = ξ, the signs of φ follow a ferromagnetic Ising model on Λ with
``+`` boundary and couplings K^ξ. Everything here carries the inverse
temperature explicitly: K^ξ includes a factor β and the absolute-value
factor uses β/2, so β = 1 gives the unscaled weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import ConfigurationError, EnumerationTooLargeError, PreconditionError
from .gibbs import widen_for
from .lattice import Region

ISING_CAP = 2**24


@dataclass(frozen=True)
class AbsHeightProfile:
    """Nonnegative heights ξ on Λ ∪ ∂Λ (sites first, then boundary)."""

    region: Region
    xi: np.ndarray

    def __post_init__(self):
        if self.xi.shape != (self.region.n_sites + len(self.region.boundary),):
            raise ConfigurationError("profile must cover sites and boundary")
        if np.any(self.xi < 0):
            raise PreconditionError("absolute height profile must be nonnegative")

    @classmethod
    def from_sites(cls, region: Region, site_values, psi=0) -> "AbsHeightProfile":
        site_values = np.asarray(site_values, dtype=np.int64)
        return cls(region, np.concatenate([site_values, np.abs(region.boundary_vector(psi))]))

    @property
    def zeros(self) -> int:
        """z(ξ): number of sites of Λ (boundary excluded) where ξ vanishes."""
        return int(np.count_nonzero(self.xi[: self.region.n_sites] == 0))


@dataclass(frozen=True)
class EdgeCouplings:
    """Ising couplings on E(Λ), aligned with ``region.edges``."""

    region: Region
    K: np.ndarray


@dataclass(frozen=True)
class SpinConfig:
    """Signs on Λ; every boundary spin is +1."""

    region: Region
    sigma: np.ndarray

    def full(self) -> np.ndarray:
        return np.concatenate([self.sigma, np.ones(len(self.region.boundary), dtype=np.int64)])


def _symmetric(V):
    if not V.is_symmetric:
        raise PreconditionError(f"potential {V.name!r} must be symmetric for the sign decomposition")
    return V


def couplings_from_abs(xi: AbsHeightProfile, V, beta: float) -> EdgeCouplings:
    """K_xy = -(β/2) (V(ξ_y - ξ_x) - V(ξ_y + ξ_x)) on every edge of E(Λ)."""
    _symmetric(V)
    e = xi.region.edge_index
    a, b = xi.xi[e[:, 0]], xi.xi[e[:, 1]]
    K = -0.5 * beta * (V.evaluate(b - a) - V.evaluate(b + a))
    return EdgeCouplings(xi.region, np.asarray(K, dtype=float))


def _coupling_array(region: Region, K) -> np.ndarray:
    K = K.K if isinstance(K, EdgeCouplings) else np.asarray(K, dtype=float)
    if np.ndim(K) == 0:
        K = np.full(len(region.edges), float(K))
    if K.shape != (len(region.edges),):
        raise ConfigurationError(f"need one coupling per edge of E(Λ) ({len(region.edges)})")
    return K


def all_spins(n: int) -> np.ndarray:
    """All ±1 vectors of length n, ``(2^n, n)``, first site slowest."""
    if 2**n > ISING_CAP:
        raise EnumerationTooLargeError(f"2^{n} spin configurations exceed the cap {ISING_CAP}")
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def _edge_products(region: Region, spins: np.ndarray) -> np.ndarray:
    full = np.concatenate([spins, np.ones((spins.shape[0], len(region.boundary)), dtype=spins.dtype)], axis=1)
    e = region.edge_index
    return full[:, e[:, 0]] * full[:, e[:, 1]]


class IsingLaw:
    """Exact enumeration of the ``+``-boundary Ising model with couplings K."""

    def __init__(self, region: Region, K):
        self.region = region
        self.K = _coupling_array(region, K)
        self.spins = all_spins(region.n_sites)
        self.bonds = _edge_products(region, self.spins)
        energy = self.bonds @ self.K
        self.shift = float(energy.max())
        w = np.exp(energy - self.shift)
        total = math.fsum(w)
        self.log_Z = self.shift + math.log(total)
        self.probs = w / total

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    def expect(self, values: np.ndarray) -> float:
        return float(math.fsum(self.probs * values))

    def sigma_A(self, A: Iterable) -> np.ndarray:
        cols = [self.region.sites.index(v) for v in A]
        return np.prod(self.spins[:, cols], axis=1) if cols else np.ones(self.spins.shape[0])

    def correlation(self, A: Iterable) -> float:
        return self.expect(self.sigma_A(A))

    def exp_bond_expectation(self, H) -> float:
        """⟨exp(Σ_xy σ_x σ_y H_xy)⟩ over E(Λ)."""
        H = _coupling_array(self.region, H)
        return self.expect(np.exp(self.bonds @ H))

    def site_subsets(self):
        sites = self.region.sites
        for r in range(len(sites) + 1):
            yield from combinations(sites, r)


def ising_partition_plus(region: Region, K) -> float:
    """Z^+_Λ(K) = Σ_σ exp(Σ_{xy ∈ E(Λ)} σ_x σ_y K_xy) with boundary spins +1."""
    return IsingLaw(region, K).Z


def spin_correlation(region: Region, K, A: Iterable) -> float:
    """⟨σ_A⟩ = ⟨Π_{x ∈ A} σ_x⟩ in the ``+``-boundary Ising model."""
    return IsingLaw(region, K).correlation(A)


def log_decomposition_weight(xi: AbsHeightProfile, V, beta: float) -> float:
    _symmetric(V)
    e = xi.region.edge_index
    a, b = xi.xi[e[:, 0]], xi.xi[e[:, 1]]
    V = widen_for(V, int((a + b).max()) if a.size else 0)
    f = -0.5 * beta * math.fsum(V.evaluate(b - a) + V.evaluate(b + a))
    K = couplings_from_abs(xi, V, beta)
    return -xi.zeros * math.log(2) + f + IsingLaw(xi.region, K).log_Z


def decomposition_weight(xi: AbsHeightProfile, V, beta: float) -> float:
    """2^{-z(ξ)} exp(-(β/2) Σ [V(ξ_y - ξ_x) + V(ξ_y + ξ_x)]) Z^+_Λ(K^ξ).

    Equals Z_Λ(ψ) μ(|φ| = ξ) whenever ξ agrees with |ψ| on the boundary.
    """
    return math.exp(log_decomposition_weight(xi, V, beta))


def sample_signs_fk(xi: AbsHeightProfile, K, rng: np.random.Generator,
                    sigma: SpinConfig | None = None, steps: int = 1) -> SpinConfig:
    """Edwards-Sokal (Swendsen-Wang) resampling of the signs given |φ| = ξ.

    Starting from ``sigma`` (all ``+`` by default), each step opens every
    bond with agreeing endpoint spins with probability 1 - e^{-2K}, wires
    the boundary into one ``+`` cluster and gives each free cluster a fair
    sign. Each step leaves the Ising law ν^ξ invariant; iterating from a
    fixed start converges to it.
    """
    region = xi.region
    K = _coupling_array(region, K)
    if np.any(K < 0):
        raise PreconditionError("FK sampling needs nonnegative couplings")
    n = region.n_sites
    s = np.ones(n, dtype=np.int64) if sigma is None else np.array(sigma.sigma, dtype=np.int64)
    for _ in range(steps):
        u_edges = rng.random(len(region.edges))
        u_signs = rng.random(n)
        _kernels.fk_signs(n, region.edge_index, K, u_edges, u_signs, s)
    return SpinConfig(region, s)
