"""Exact audits: FKG lattice condition for |φ|, stochastic domination,
Bernoulli and two-copy domination, monotonicity in the volume.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import ConfigurationError, PreconditionError
from .gibbs import ExactTable, abs_law, enumerate_measure, marginal, site_marginal
from .lattice import Region
from .reports import AuditReport

REL_SLACK = 1e-10
FLOW_MAX_STATES = 10_000
UPSET_MAX_STATES = 20
_FLOW_SCALE = 2**52


# stochastic domination


def _as_states(dist) -> dict[tuple, float]:
    if isinstance(dist, Mapping):
        return {tuple(int(v) for v in np.atleast_1d(k)): float(p) for k, p in dist.items()}
    arr = np.asarray(dist, dtype=float)
    return {tuple(int(i) for i in idx): float(arr[idx]) for idx in np.ndindex(arr.shape)}


@dataclass
class DominanceResult:
    dominated: bool
    witness: dict | None
    margin: float
    flow_value: float | None
    upset_min: float | None
    oracles: tuple[str, ...]
    margin_measured: bool = True  # False: support too large, margin is a 0 / flow-deficit stand-in

    def __bool__(self):
        return self.dominated


def _leq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.all(A[:, None, :] <= B[None, :, :], axis=2)


def flow_dominance(states: np.ndarray, mu: np.ndarray, nu: np.ndarray, tol: float = REL_SLACK):
    """Strassen feasibility by max flow: source -> x (μ), x -> y for x <= y, y -> sink (ν).

    Returns (dominated, flow value as a fraction, coupling dict).
    """
    S = _FLOW_SCALE
    cap_mu = [int(round(p * S)) for p in mu]
    cap_nu = [int(round(p * S)) for p in nu]
    src = [i for i, c in enumerate(cap_mu) if c > 0]
    dst = [j for j, c in enumerate(cap_nu) if c > 0]
    G = nx.DiGraph()
    for i in src:
        G.add_edge("s", ("a", i), capacity=cap_mu[i])
    for j in dst:
        G.add_edge(("b", j), "t", capacity=cap_nu[j])
    lo = states.min(axis=0)
    hi = states.max(axis=0)
    box = int(np.prod(hi - lo + 1)) == len(states)
    if box and len(src) * len(dst) > 8 * len(states) * states.shape[1]:
        # product order on a full box: route through unit steps instead of all pairs
        pos = {tuple(s): k for k, s in enumerate(states.tolist())}
        for i in src:
            G.add_edge(("a", i), ("b", i))
        for k, s in enumerate(states.tolist()):
            for c in range(len(s)):
                up = list(s)
                up[c] += 1
                j = pos.get(tuple(up))
                if j is not None:
                    G.add_edge(("b", k), ("b", j))
    else:
        le = _leq(states[src], states[dst])
        for a, i in enumerate(src):
            for b in np.flatnonzero(le[a]):
                G.add_edge(("a", i), ("b", dst[b]))
    if not src:
        return True, 1.0, {}
    if not dst:
        return False, 0.0, None
    value, flow = nx.maximum_flow(G, "s", "t")
    total = sum(cap_mu)
    dominated = (total - value) <= tol * S + len(states)
    coupling = _decompose(flow, states) if dominated else None
    return dominated, value / S, coupling


def _decompose(flow: dict, states: np.ndarray) -> dict:
    """Split an s-t flow on the DAG into (x, y) pair masses with x <= y."""
    residual = {u: {v: f for v, f in nbrs.items() if f > 0} for u, nbrs in flow.items()}
    coupling: dict[tuple, float] = {}
    for first in list(residual.get("s", {})):
        while residual["s"].get(first, 0) > 0:
            path = ["s", first]
            node = first
            while node != "t":
                nxt = next((v for v, f in residual.get(node, {}).items() if f > 0), None)
                if nxt is None:
                    break
                path.append(nxt)
                node = nxt
            if node != "t":
                residual["s"][first] = 0
                break
            amount = min(residual[u][v] for u, v in zip(path, path[1:]))
            for u, v in zip(path, path[1:]):
                residual[u][v] -= amount
            x = tuple(states[path[1][1]].tolist())
            y = tuple(states[path[-2][1]].tolist())
            coupling[(x, y)] = coupling.get((x, y), 0.0) + amount / _FLOW_SCALE
    return coupling


_MASK_CHUNK = 1 << 16


def _upset_masks(le: np.ndarray):
    """Yield (masks, bits) chunks for every subset closed upward under ``le``."""
    n = le.shape[0]
    pairs = list(zip(*np.nonzero(le & ~np.eye(n, dtype=bool))))
    shifts = np.arange(n)
    for lo in range(0, 1 << n, _MASK_CHUNK):
        masks = np.arange(lo, min(lo + _MASK_CHUNK, 1 << n), dtype=np.int64)
        bits = ((masks[:, None] >> shifts[None, :]) & 1).astype(bool)
        ok = np.ones(masks.size, dtype=bool)
        for a, b in pairs:
            ok &= ~(bits[:, a] & ~bits[:, b])
        if ok.any():
            yield masks[ok], bits[ok]


def upset_dominance(states: np.ndarray, mu: np.ndarray, nu: np.ndarray):
    """Brute force over every up-set U of the state space: min of ν(U) - μ(U).

    Returns (min over all up-sets, min over nonempty proper up-sets or None).
    """
    n = len(states)
    if n > UPSET_MAX_STATES:
        raise ConfigurationError(f"up-set oracle limited to {UPSET_MAX_STATES} states")
    full = (1 << n) - 1
    best, proper = np.inf, np.inf
    for masks, bits in _upset_masks(_leq(states, states)):
        diff = bits @ (nu - mu)
        best = min(best, diff.min())
        inner = diff[(masks != 0) & (masks != full)]
        if inner.size:
            proper = min(proper, inner.min())
    return float(best), (float(proper) if np.isfinite(proper) else None)


def support_upset_margin(states: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float | None:
    """min ν(↑W) - μ(W) over nonempty proper up-sets W of supp μ.

    Checking these up-sets is equivalent to μ ⪯ ν; the minimum is the
    slack reported by the audits. None when supp μ is too large.
    """
    src = np.flatnonzero(mu > 0)
    k = src.size
    if k == 0 or k > UPSET_MAX_STATES:
        return None
    sub = states[src]
    reach = _leq(sub, states).astype(float)  # reach[a, j]: sub[a] <= states[j]
    full = (1 << k) - 1
    best = np.inf
    for masks, bits in _upset_masks(_leq(sub, sub)):
        keep = (masks != 0) & (masks != full)
        if not keep.any():
            continue
        w = bits[keep].astype(float)
        val = ((w @ reach) > 0) @ nu - w @ mu[src]
        best = min(best, val.min())
    return float(best) if np.isfinite(best) else None


def stochastic_dominance_check(mu, nu, tol: float = REL_SLACK) -> DominanceResult:
    """Is μ ⪯ ν for the pointwise order? Runs every oracle the sizes allow.

    ``mu``/``nu`` are mappings from height vectors to probabilities, or arrays
    indexed by height vectors (index = heights).
    """
    m, n = _as_states(mu), _as_states(nu)
    dims = {len(k) for k in list(m) + list(n)}
    if len(dims) != 1:
        raise ConfigurationError("distributions must live on height vectors of one dimension")
    keys = sorted(set(m) | set(n))
    states = np.array(keys, dtype=np.int64).reshape(len(keys), -1)
    pm = np.array([m.get(k, 0.0) for k in keys])
    pn = np.array([n.get(k, 0.0) for k in keys])
    for p in (pm, pn):
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ConfigurationError("inputs must be probability distributions")

    verdicts = {}
    flow_value = witness = upset_min = None
    if len(keys) <= FLOW_MAX_STATES:
        verdicts["flow"], flow_value, witness = flow_dominance(states, pm, pn, tol)
    if len(keys) <= UPSET_MAX_STATES:
        upset_min, proper = upset_dominance(states, pm, pn)
        verdicts["upset"] = upset_min >= -tol
    if not verdicts:
        raise ConfigurationError(f"state space of {len(keys)} points is too large for the oracles")
    if len(set(verdicts.values())) != 1:
        raise AssertionError(f"dominance oracles disagree: {verdicts}")
    dominated = next(iter(verdicts.values()))
    margin = support_upset_margin(states, pm, pn)
    measured = margin is not None
    if not measured:
        margin = 0.0 if dominated else (flow_value - 1.0 if flow_value is not None else upset_min)
    return DominanceResult(dominated, witness if dominated else None, margin, flow_value,
                           upset_min, tuple(verdicts), measured)


# FKG lattice condition


def fkg_lattice_audit(source, mode: str = "all-pairs", instance: str | None = None,
                      tol: float = REL_SLACK) -> AuditReport:
    """μ(|φ| = ξ∨ζ) μ(|φ| = ξ∧ζ) >= μ(|φ| = ξ) μ(|φ| = ζ) over profile pairs.

    ``source`` is an ExactTable (nonnegative boundary, symmetric V) or a raw
    weight array over {0..}^d, used to exercise the detection path.
    ``mode`` is ``all-pairs`` or ``two-site-pairs`` (pairs differing at <= 2 sites).
    """
    if mode not in ("all-pairs", "two-site-pairs"):
        raise ConfigurationError(f"unknown FKG audit mode {mode!r}")
    if isinstance(source, ExactTable):
        if np.any(source.psi < 0):
            raise PreconditionError("FKG audit for |φ| needs a nonnegative boundary")
        if not source.potential.is_symmetric:
            raise PreconditionError("FKG audit for |φ| needs a symmetric potential")
        P = abs_law(source)
        instance = instance or source.describe()
        in_hyp = bool(source.potential.classify().abs_fkg)
    else:
        P = np.asarray(source, dtype=float)
        instance = instance or f"weights:shape={'x'.join(map(str, P.shape))}"
        in_hyp = True
    d = P.ndim
    profiles = np.array(list(np.ndindex(P.shape)), dtype=np.int64).reshape(-1, d)
    flat = P.reshape(-1)
    N = len(profiles)
    worst = math.inf
    worst_pair = None
    violations = 0
    checked = 0
    for i in range(N):
        xi = profiles[i]
        others = profiles[i:]
        if mode == "two-site-pairs":
            keep = np.count_nonzero(others != xi, axis=1) <= 2
            others = others[keep]
        hi = np.maximum(xi, others)
        lo = np.minimum(xi, others)
        lhs = P[tuple(hi.T)] * P[tuple(lo.T)]
        rhs = flat[i] * P[tuple(others.T)]
        slack = lhs - rhs
        scale = np.maximum(np.maximum(lhs, rhs), 1e-300)
        bad = slack < -tol * scale
        violations += int(bad.sum())
        checked += len(others)
        j = int(np.argmin(slack))
        if slack[j] < worst:
            worst = float(slack[j])
            worst_pair = (xi.tolist(), others[j].tolist(), float(lhs[j]), float(rhs[j]))
    passed = violations == 0
    counter = None
    if not passed:
        counter = {
            "xi": worst_pair[0],
            "zeta": worst_pair[1],
            "lhs": worst_pair[2],
            "rhs": worst_pair[3],
            "weights": P.tolist(),
        }
        if isinstance(source, ExactTable):
            counter.update(_table_inputs(source))
    return AuditReport(
        "fkg",
        f"{instance};mode={mode}",
        passed,
        worst,
        counter,
        in_hyp,
        {"pairs": checked, "violations": violations},
    )


def _table_inputs(t: ExactTable) -> dict:
    return {
        "sites": [list(v) for v in t.region.sites],
        "lattice": t.region.kind,
        "psi": t.psi.tolist(),
        "potential": t.potential.name,
        "beta": t.beta,
        "M": t.M,
    }


# Bernoulli domination of the conditioned-nonnegative law


def bernoulli_law(n: int, p: float = 0.5, scale: int = 1) -> dict[tuple, float]:
    """i.i.d. Bernoulli(p) on {0, scale}^n."""
    return {
        tuple(scale * b for b in bits): p ** sum(bits) * (1 - p) ** (n - sum(bits))
        for bits in itertools.product((0, 1), repeat=n)
    }


def nonnegative_conditioned(table: ExactTable) -> np.ndarray:
    """Law of φ|_Λ given φ >= 0 on Λ, as an array over {0..M}^|Λ|."""
    M = table.M
    sub = table.probabilities[(slice(M, None),) * table.region.n_sites]
    mass = sub.sum()
    if mass <= 0:
        raise ConfigurationError("conditioning event has zero mass")
    return sub / mass


def bernoulli_domination_audit(region: Region, psi, V, beta: float, M: int) -> AuditReport:
    """Conditioned on φ >= 0 on Λ, φ|_Λ dominates i.i.d. Bernoulli(1/2)."""
    table = enumerate_measure(region, psi, V, beta, M)
    m = region.max_degree
    in_hyp = bool(V.classify().lipschitz) and beta <= math.log(2) / m + 1e-15
    nu = nonnegative_conditioned(table)
    mu = bernoulli_law(region.n_sites)
    res = stochastic_dominance_check(mu, nu)
    counter = None if res.dominated else {**_table_inputs(table), "conditioned_law": nu.tolist()}
    return AuditReport(
        "bernoulli_domination",
        f"{table.describe()};m={m}",
        res.dominated,
        res.margin,
        counter,
        in_hyp,
        {"oracles": res.oracles, "p_ge1": float(nu.reshape(-1)[1:].sum()) if region.n_sites == 1 else None},
    )


# two-copy domination


def two_copy_conditional_law(t1: ExactTable, t2: ExactTable, a) -> np.ndarray:
    """Law of ψ|_Λ = (φ' - φ)|_Λ under γ×γ' conditioned on ζ|_Λ = a.

    Per site, ζ_x = a_x forces (φ_x, φ'_x) = (a_x, a_x) when ψ_x = 0 and
    (a_x - 1, a_x - 1 + ψ_x) when ψ_x > 0. Returned over {0..S}^|Λ|.
    """
    M = t1.M
    n = t1.region.n_sites
    a = np.broadcast_to(np.asarray(a, dtype=np.int64), (n,))
    if np.any(a > M) or np.any(a - 1 < -M):
        raise ConfigurationError("conditioning value outside the window")
    S = int(M - (a - 1).min())
    shape = (S + 1,) * n
    out = np.zeros(shape)
    for s in np.ndindex(*shape):
        s = np.asarray(s)
        phi = a - (s > 0)
        phi2 = phi + s
        if np.any(phi2 > M):
            continue
        out[tuple(s)] = t1.probability(phi) * t2.probability(phi2)
    mass = out.sum()
    if mass <= 0:
        raise ConfigurationError("conditioning event {zeta = a} has zero mass")
    return out / mass


def two_copy_domination_audit(region: Region, boundaries, V, beta: float, M: int, a=0) -> AuditReport:
    """law(ψ|_Λ | ζ|_Λ = a) dominates law(2X|_Λ) for i.i.d. Bernoulli(1/2) X."""
    psi1, psi2 = boundaries
    t1 = enumerate_measure(region, psi1, V, beta, M)
    t2 = enumerate_measure(region, psi2, V, beta, M)
    m = region.max_degree
    in_hyp = bool(V.classify().lipschitz) and beta <= math.log(2) / (2 * m) + 1e-15
    law = two_copy_conditional_law(t1, t2, a)
    res = stochastic_dominance_check(bernoulli_law(region.n_sites, scale=2), law)
    details = {"oracles": res.oracles}
    if region.n_sites == 1:
        details["p_psi_ge2"] = float(law[2:].sum())
    counter = None
    if not res.dominated:
        counter = {**_table_inputs(t1), "psi_prime": t2.psi.tolist(), "a": np.atleast_1d(a).tolist(),
                   "conditional_law": law.tolist()}
    a_desc = ",".join(map(str, np.atleast_1d(a).tolist()))
    return AuditReport(
        "two_copy_domination",
        f"{t1.describe()};psi'={','.join(map(str, t2.psi.tolist()))};a={a_desc};m={m}",
        res.dominated,
        res.margin,
        counter,
        in_hyp,
        details,
    )


# monotonicity in the volume


def volume_monotonicity_audit(regions: Sequence[Region], V, beta: float, M: int,
                              tol: float = REL_SLACK) -> AuditReport:
    """Along Λ_1 ⊂ Λ_2 ⊂ ..., with zero boundary: |φ| stochastically increases
    on the smaller volume and μ_Λ(φ_r²) is nondecreasing."""
    cls = V.classify()
    if not (cls.symmetric and cls.abs_fkg):
        raise PreconditionError("volume monotonicity needs a symmetric |.|-FKG potential")
    if len(regions) < 2:
        raise ConfigurationError("need a chain of at least two regions")
    root = regions[0].root
    for small, big in zip(regions, regions[1:]):
        if not set(small.sites) <= set(big.sites):
            raise ConfigurationError("regions must be nested")
        if big.root != root:
            raise ConfigurationError("regions must share the root")
    tables = [enumerate_measure(r, 0, V, beta, M) for r in regions]
    moments = [site_marginal(t, root).second_moment for t in tables]
    margin = math.inf
    failures = []
    for i, (small, big) in enumerate(zip(tables, tables[1:])):
        step = moments[i + 1] - moments[i]
        margin = min(margin, step)
        if step < -tol * max(1.0, moments[i]):
            failures.append({"step": i, "moments": moments[i : i + 2]})
        sites = small.region.sites
        lo = abs_law(small, sites)
        hi = abs_law(big, sites)
        res = stochastic_dominance_check(lo, hi)
        if res.margin_measured or not res.dominated:
            margin = min(margin, res.margin)
        if not res.dominated:
            failures.append({"step": i, "dominance": False, "flow_value": res.flow_value})
    desc = "<".join(str(r.n_sites) for r in regions)
    counter = None
    if failures:
        counter = {
            "failures": failures,
            "chain": [[list(v) for v in r.sites] for r in regions],
            "lattice": regions[0].kind,
            "potential": V.name,
            "beta": beta,
            "M": M,
        }
    return AuditReport(
        "volume_monotonicity",
        f"{regions[0].kind}:chain={desc};V={V.name};beta={beta:.6g};M={M}",
        not failures,
        margin,
        counter,
        True,
        {"second_moments": moments},
    )


# Ising side: GKS and the |φ| / sign decomposition


def gks_audit(region: Region, K, H=None, H2=None, tol: float = REL_SLACK) -> AuditReport:
    """GKS-1 and GKS-2 over all subsets A, B of Λ, plus the exponential forms
    ⟨e^{Σσσ H}⟩ >= 1 and ⟨e^{Σσσ(H+H')}⟩ >= ⟨e^{Σσσ H}⟩⟨e^{Σσσ H'}⟩ when H, H' are given."""
    from .ising import IsingLaw

    law = IsingLaw(region, K)
    if np.any(law.K < 0):
        raise PreconditionError("GKS needs nonnegative couplings")
    subsets = list(law.site_subsets())
    cols = np.array([law.sigma_A(A) for A in subsets])  # (2^n, configs)
    first = cols @ law.probs
    prod = (cols[:, None, :] * cols[None, :, :]) @ law.probs
    slacks = {"gks1": float(first.min()), "gks2": float((prod - np.outer(first, first)).min())}
    if H is not None:
        e1 = law.exp_bond_expectation(H)
        slacks["exp1"] = e1 - 1.0
        if H2 is not None:
            e2 = law.exp_bond_expectation(H2)
            e12 = law.exp_bond_expectation(np.asarray(H) + np.asarray(H2))
            slacks["exp2"] = e12 - e1 * e2
    worst = min(slacks, key=slacks.get)
    passed = all(v >= -tol for v in slacks.values())
    counter = None
    if not passed:
        counter = {"sites": [list(v) for v in region.sites], "lattice": region.kind,
                   "K": law.K.tolist(), "H": None if H is None else np.asarray(H).tolist(),
                   "H2": None if H2 is None else np.asarray(H2).tolist(), "worst": worst}
    return AuditReport("gks", f"{region.describe()};edges={len(region.edges)}", passed,
                       slacks[worst], counter, True, {"slacks": slacks})


def decomposition_audit(region: Region, psi, V, beta: float, M: int,
                        tol: float = REL_SLACK) -> AuditReport:
    """Σ_ξ decomposition_weight(ξ) = Z and, per ξ, weight / Z = μ(|φ| = ξ).

    The margin is ``tol`` minus the worst relative error.
    """
    from .ising import AbsHeightProfile, log_decomposition_weight

    table = enumerate_measure(region, psi, V, beta, M)
    if np.any(table.psi < 0):
        raise PreconditionError("decomposition identity is checked for nonnegative boundaries")
    law = abs_law(table)
    logs = np.array([
        log_decomposition_weight(AbsHeightProfile.from_sites(region, xi, table.psi), V, beta)
        for xi in np.ndindex(law.shape)
    ])
    shift = logs.max()
    total_log = shift + math.log(math.fsum(np.exp(logs - shift)))
    z_err = abs(math.expm1(total_log - table.log_Z))
    pred = np.exp(logs - table.log_Z).reshape(law.shape)
    per_err = float(np.max(np.abs(pred - law) / law))
    err = max(z_err, per_err)
    passed = err < tol
    counter = None if passed else {**_table_inputs(table), "z_rel_err": z_err, "max_rel_err": per_err}
    return AuditReport("decomposition", table.describe(), passed, tol - err, counter, True,
                       {"z_rel_err": z_err, "max_rel_err": per_err})
