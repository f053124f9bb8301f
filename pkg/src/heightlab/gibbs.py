"""Hamiltonian, exact enumeration of the truncated specification, marginals.

Heights on Λ range over the symmetric window {-M, ..., M}. Tables enumerate
every configuration in odometer order over ``region.sites`` (last site
fastest), so ``table.probabilities`` is a C-ordered array of shape
``(2M + 1,) * |Λ|`` and axis ``i`` is the height of ``region.sites[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, EnumerationTooLargeError, PotentialWindowError
from .lattice import Region
from .potentials import PotentialSpec, TiltedPotential
from .reports import AuditReport

DEFAULT_ENUMERATION_CAP = 10**8
_BLOCK = 1 << 22


def _check_window(M: int):
    if int(M) != M or M < 1:
        raise ConfigurationError(f"truncation window M must be an integer >= 1, got {M!r}")


@dataclass(frozen=True)
class HeightConfig:
    """Heights on Λ ∪ ∂Λ, stored sites first then boundary (region order)."""

    region: Region
    heights: np.ndarray

    @classmethod
    def from_sites(cls, region: Region, site_heights, psi=0) -> "HeightConfig":
        site_heights = np.asarray(site_heights, dtype=np.int64)
        if site_heights.shape != (region.n_sites,):
            raise ConfigurationError(f"expected {region.n_sites} site heights")
        return cls(region, np.concatenate([site_heights, region.boundary_vector(psi)]))

    @property
    def sites(self) -> np.ndarray:
        return self.heights[: self.region.n_sites]

    @property
    def boundary(self) -> np.ndarray:
        return self.heights[self.region.n_sites :]

    def __getitem__(self, v) -> int:
        return int(self.heights[self.region.index[v]])

    def as_dict(self) -> dict:
        return {v: int(self.heights[i]) for v, i in self.region.index.items()}


def edge_terms(region: Region, V) -> tuple[np.ndarray, np.ndarray]:
    """(edge index array, per-edge argument offsets) for V on ``region``."""
    return region.edge_index, V.edge_offsets(region)


def hamiltonian(phi: HeightConfig, V, region: Region | None = None) -> float:
    """H_Λ(φ) = Σ over E(Λ) of V_xy(φ_y - φ_x), each edge once."""
    region = phi.region if region is None else region
    e, off = edge_terms(region, V)
    h = phi.heights
    args = h[e[:, 1]] - h[e[:, 0]] + off
    return float(math.fsum(V.base.evaluate(args)))


def required_window(region: Region, psi_vec: np.ndarray, V, M: int) -> int:
    """Largest |argument| V sees when Λ ranges over {-M..M} with boundary psi."""
    e, off = edge_terms(region, V)
    n = region.n_sites
    lo = np.concatenate([np.full(n, -M), psi_vec])
    hi = np.concatenate([np.full(n, M), psi_vec])
    big = np.maximum(np.abs(hi[e[:, 1]] - lo[e[:, 0]] + off), np.abs(lo[e[:, 1]] - hi[e[:, 0]] + off))
    return int(big.max()) if big.size else 0


def widen_for(V, W: int):
    """V certified on at least [-W, W]; raises for table potentials that are too narrow."""
    if W <= V.w_max:
        return V
    return V.widened(W)


class ExactTable:
    """Fully enumerated truncated Gibbs measure γ_Λ(·, ψ) at inverse temperature β."""

    def __init__(self, region, psi, V, beta, M, log_weights, log_Z):
        self.region = region
        self.psi = psi
        self.potential = V
        self.beta = float(beta)
        self.M = int(M)
        self.log_weights = log_weights
        self.log_Z = float(log_Z)
        self.shape = (2 * self.M + 1,) * region.n_sites
        probs = np.exp(log_weights - self.log_Z).reshape(self.shape)
        probs.setflags(write=False)
        self.probabilities = probs

    def __repr__(self):
        return (
            f"ExactTable({self.region!r}, V={self.potential.name}, beta={self.beta:g}, "
            f"M={self.M}, configs={self.n_configs})"
        )

    @property
    def n_configs(self) -> int:
        return self.log_weights.size

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    @property
    def weights(self) -> np.ndarray:
        """e^{-βH} per configuration (flattened table order)."""
        return np.exp(self.log_weights)

    @property
    def heights_axis(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def config(self, index: int) -> np.ndarray:
        """Site heights of the configuration at a flat table index."""
        return np.array(np.unravel_index(index, self.shape)) - self.M

    def index_of(self, site_heights) -> int:
        return int(np.ravel_multi_index(np.asarray(site_heights) + self.M, self.shape))

    def probability(self, site_heights) -> float:
        return float(self.probabilities[tuple(np.asarray(site_heights) + self.M)])

    @cached_property
    def configs(self) -> np.ndarray:
        """All configurations as an ``(N, |Λ|)`` array (materialised lazily)."""
        grids = np.indices(self.shape).reshape(self.region.n_sites, -1).T
        return grids - self.M

    def describe(self) -> str:
        psi = self.psi
        psi_s = (
            str(int(psi[0]))
            if psi.size and np.all(psi == psi[0])
            else "[" + ",".join(map(str, psi.tolist())) + "]"
        )
        return (
            f"{self.region.describe()};V={self.potential.name};beta={self.beta:.6g};"
            f"M={self.M};psi={psi_s}"
        )


def _energy_tensor(region, psi_vec, vals, W, offsets, M, fixed: tuple[int, ...]) -> np.ndarray:
    """Energies with the first ``len(fixed)`` sites pinned, as a tensor over the rest."""
    n = region.n_sites
    K = 2 * M + 1
    nf = len(fixed)
    free = n - nf
    E = np.zeros((K,) * free)
    axis_vals = np.arange(-M, M + 1)

    def node(idx):
        # scalar height or broadcastable axis array
        if idx >= n:
            return int(psi_vec[idx - n])
        if idx < nf:
            return int(fixed[idx])
        shape = [1] * free
        shape[idx - nf] = K
        return axis_vals.reshape(shape)

    for (t, h), d in zip(region.edge_index, offsets):
        arg = node(h) - node(t) + d
        E = E + vals[np.asarray(arg) + W]
    return E


def enumerate_measure(
    region: Region,
    psi,
    V: PotentialSpec | TiltedPotential,
    beta: float,
    M: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ExactTable:
    """Exact table of the truncated measure over all (2M + 1)^|Λ| configurations."""
    _check_window(M)
    if beta < 0:
        raise ConfigurationError("beta must be >= 0")
    n = region.n_sites
    K = 2 * M + 1
    total = K**n
    if total > cap:
        raise EnumerationTooLargeError(
            f"(2M+1)^|Λ| = {K}^{n} = {total} exceeds the enumeration cap {cap}; shrink Λ or M"
        )
    psi_vec = region.boundary_vector(psi)
    if psi_vec.size and np.max(np.abs(psi_vec)) > M:
        raise ConfigurationError(f"boundary heights must lie in the window [-{M}, {M}]")
    W = required_window(region, psi_vec, V, M)
    V = widen_for(V, W)
    vals = V.base.values
    Wv = V.base.w_max
    offsets = V.edge_offsets(region)

    # pin leading sites until one block fits in memory
    nf = 0
    while K ** (n - nf) > _BLOCK and nf < n:
        nf += 1
    log_w = np.empty(total)
    block = K ** (n - nf)
    for b, prefix in enumerate(np.ndindex(*((K,) * nf))):
        fixed = tuple(p - M for p in prefix)
        E = _energy_tensor(region, psi_vec, vals, Wv, offsets, M, fixed)
        log_w[b * block : (b + 1) * block] = -beta * E.ravel()
    if not np.all(np.isfinite(log_w)):
        raise PotentialWindowError("non-finite energy encountered (finite-energy violated)")
    shift = float(log_w.max())
    partial = [math.fsum(np.exp(log_w[i : i + _BLOCK] - shift)) for i in range(0, total, _BLOCK)]
    log_Z = shift + math.log(math.fsum(partial))
    return ExactTable(region, psi_vec, V, beta, M, log_w, log_Z)


@dataclass(frozen=True)
class Distribution:
    """A finite distribution on consecutive integers ``support``."""

    support: np.ndarray
    probs: np.ndarray
    mean: float = field(init=False)
    variance: float = field(init=False)
    second_moment: float = field(init=False)

    def __post_init__(self):
        p = self.probs
        k = self.support.astype(float)
        mean = float(math.fsum(p * k))
        second = float(math.fsum(p * k * k))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second_moment", second)
        object.__setattr__(self, "variance", float(math.fsum(p * (k - mean) ** 2)))

    def __getitem__(self, k: int) -> float:
        i = int(k) - int(self.support[0])
        if 0 <= i < self.support.size:
            return float(self.probs[i])
        return 0.0

    def tail(self, k: int) -> float:
        """P(X >= k)."""
        return float(math.fsum(self.probs[self.support >= k]))

    def is_log_concave(self, rtol: float = 1e-12) -> bool:
        p = self.probs
        return bool(np.all(p[1:-1] ** 2 >= p[:-2] * p[2:] * (1 - rtol)))


def marginal(table: ExactTable, sites: Sequence) -> np.ndarray:
    """Joint marginal on ``sites`` (axes in the given order)."""
    idx = [table.region.sites.index(v) for v in sites]
    other = tuple(i for i in range(table.region.n_sites) if i not in idx)
    p = table.probabilities.sum(axis=other) if other else table.probabilities
    kept = sorted(idx)
    return np.transpose(p, [kept.index(i) for i in idx])


def site_marginal(table: ExactTable, x) -> Distribution:
    if x not in table.region:
        raise ConfigurationError(f"{x} is not a site of the region")
    return Distribution(table.heights_axis, marginal(table, [x]))


def fold_abs(p: np.ndarray, M: int) -> np.ndarray:
    """Law of |φ| from a law of φ on {-M..M}^d (every axis folded)."""
    out = p
    for ax in range(p.ndim):
        out = np.moveaxis(out, ax, 0)
        folded = out[M:].copy()
        folded[1:] += out[:M][::-1]
        out = np.moveaxis(folded, 0, ax)
    return out


def abs_law(table: ExactTable, sites: Sequence | None = None) -> np.ndarray:
    """μ(|φ| = ξ) as an array over {0..M}^|sites|."""
    sites = table.region.sites if sites is None else sites
    return fold_abs(marginal(table, sites), table.M)


def truncation_mass(table: ExactTable) -> float:
    """Probability that some site sits on the edge of the window (|φ_x| = M)."""
    inner = table.probabilities[(slice(1, -1),) * table.region.n_sites]
    return max(0.0, 1.0 - float(inner.sum()))


def conditional_site_distribution(
    neighbour_heights: Sequence[int],
    V,
    beta: float,
    M: int,
    signs: Sequence[int] | None = None,
    offsets: Sequence[int] | None = None,
) -> Distribution:
    """Law of φ_x given its neighbours: ∝ exp(-β Σ_y V(s_y (k - φ_y) + δ_y)).

    ``signs`` encode edge orientation (+1 when the edge points into x) and
    default to +1; ``offsets`` are tilt offsets and default to 0.
    """
    _check_window(M)
    h = np.asarray(neighbour_heights, dtype=np.int64)
    s = np.ones_like(h) if signs is None else np.asarray(signs, dtype=np.int64)
    d = np.zeros_like(h) if offsets is None else np.asarray(offsets, dtype=np.int64)
    k = np.arange(-M, M + 1)
    args = s[None, :] * (k[:, None] - h[None, :]) + d[None, :]
    W = int(np.abs(args).max()) if args.size else 0
    base = widen_for(V.base, W)
    E = base.evaluate(args).sum(axis=1) if args.size else np.zeros(k.size)
    logw = -beta * E
    w = np.exp(logw - logw.max())
    return Distribution(k, w / math.fsum(w))


def site_conditional(table_or_region, heights: np.ndarray, i: int, V, beta: float, M: int) -> Distribution:
    """Conditional law of site ``i`` of a region given the combined height vector."""
    region = getattr(table_or_region, "region", table_or_region)
    nbr, sgn = region.neighbour_table
    mask = nbr[i] >= 0
    offsets = V.edge_offsets(region)
    slot_off = _slot_offsets(region, offsets)[i][mask]
    return conditional_site_distribution(heights[nbr[i][mask]], V, beta, M, sgn[i][mask], slot_off)


def _slot_offsets(region: Region, offsets: np.ndarray) -> np.ndarray:
    """Per (site, neighbour slot) tilt offsets matching ``region.neighbour_table``."""
    nbr, _ = region.neighbour_table
    out = np.zeros(nbr.shape, dtype=np.int64)
    fill = np.zeros(region.n_sites, dtype=np.int64)
    n = region.n_sites
    for (t, h), d in zip(region.edge_index, offsets):
        if t < n:
            out[t, fill[t]] = d
            fill[t] += 1
        if h < n:
            out[h, fill[h]] = d
            fill[h] += 1
    return out


def ratio_bound_audit(dist: Distribution, beta: float, m: int, tol: float = 1e-10) -> AuditReport:
    """Check p_{k+1}/p_k >= e^{-βm} on the window and, for β <= log 2 / m,
    that P(φ >= 1 | φ >= 0) >= 1/2."""
    p = dist.probs
    ks = dist.support
    with np.errstate(divide="ignore"):
        log_ratio = np.log(p[1:]) - np.log(p[:-1])
    slack = log_ratio + beta * m
    bad = np.flatnonzero(slack < -tol)
    margin = float(slack.min()) if slack.size else 0.0
    in_hyp = beta <= math.log(2) / m + 1e-15
    cond_margin = None
    if in_hyp:
        nonneg = dist.tail(0)
        cond_margin = dist.tail(1) / nonneg - 0.5
        margin = min(margin, cond_margin)
    passed = bad.size == 0 and (cond_margin is None or cond_margin >= -tol)
    counter = None
    if not passed:
        counter = {
            "violating_k": ks[bad].tolist(),
            "probs": p.tolist(),
            "support": ks.tolist(),
            "beta": beta,
            "m": m,
        }
    return AuditReport(
        "ratio_bound",
        f"beta={beta:.6g};m={m};window={int(ks[0])}..{int(ks[-1])}",
        passed,
        margin,
        counter,
        details={
            "worst_ratio": float(np.exp(log_ratio.min())) if log_ratio.size else 1.0,
            "bound": math.exp(-beta * m),
            "conditional_margin": cond_margin,
        },
    )
