"""Config-driven experiments, audit suites and CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .gibbs import enumerate_measure
from .lattice import KINDS as LATTICE_KINDS
from .lattice import MAX_DEGREE, PlanarLattice, Region, box_region, build_lattice
from .potentials import get_potential
from .reports import AuditReport
from .samplers import (
    MIN_BATCHES,
    MIN_BURN_IN,
    Chain,
    ChainConfig,
    _stats,
    level_set_surround_probability,
    two_copy_run,
)
from .verifiers import (
    REL_SLACK,
    bernoulli_domination_audit,
    decomposition_audit,
    fkg_lattice_audit,
    gks_audit,
    stochastic_dominance_check,
    two_copy_domination_audit,
    volume_monotonicity_audit,
)

EXPERIMENT_KINDS = (
    "variance-growth",
    "fkg-audit",
    "gks-audit",
    "decomposition-audit",
    "domination-audit",
    "contour-stats",
    "two-copy",
)
AUDIT_KINDS = {"fkg-audit", "gks-audit", "decomposition-audit", "domination-audit"}
VARIANCE_COLUMNS = ("lattice", "n", "beta", "M", "seed", "sweeps", "second_moment", "stderr",
                    "truncation_mass")
AUDIT_COLUMNS = ("audit", "passed", "margin", "in_hypothesis", "instance")
CONTOUR_COLUMNS = ("lattice", "n", "beta", "M", "seed", "sweeps", "level", "op", "p_surround",
                   "stderr")
TWO_COPY_COLUMNS = ("lattice", "n", "beta", "M", "seed", "sweeps", "psi_mean", "psi_stderr",
                    "p_nonneg", "p_nonneg_stderr", "p_surround", "p_surround_stderr",
                    "truncation_mass")
MAX_AUTO_M = 1024

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT_FAIL = 0, 1, 2


def worker_count() -> int:
    """Worker threads: all cores, capped by HEIGHTLAB_THREADS."""
    n = os.cpu_count() or 1
    cap = os.environ.get("HEIGHTLAB_THREADS")
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigurationError(f"HEIGHTLAB_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def parallel_map(fn: Callable, items: list) -> list:
    """Order-preserving map over worker threads (compiled kernels release the GIL)."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


# config parsing

_BETA_TOKEN = re.compile(r"^log2/(\d*)(m?)$")


def parse_beta(token: str, lattice: str) -> float:
    """A float, or ``log2/<k>``, ``log2/m``, ``log2/<k>m`` with m the lattice degree."""
    token = token.strip().replace(" ", "")
    if token == "log2":
        return math.log(2)
    m = _BETA_TOKEN.match(token)
    if m:
        k = int(m.group(1)) if m.group(1) else 1
        d = k * (MAX_DEGREE[lattice] if m.group(2) else 1)
        if d == 0:
            raise ValueError("division by zero")
        return math.log(2) / d
    return float(token)


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.split(",") if t.strip())


@dataclass
class ExperimentConfig:
    kind: str
    lattice: str = "square"
    radii: tuple[int, ...] = (2, 4, 8, 16)
    betas: tuple[str, ...] = ("log2/4", "1", "2", "5")
    potential: str = "sos"
    M: str = "auto"
    M_start: int = 4
    truncation_target: float = 1e-6
    seed: int = 0
    burn_in: int = MIN_BURN_IN
    sweeps: int = 20_000
    batches: int = MIN_BATCHES
    chains: int = 1
    cluster_every: int = 1
    record_every: int = 10
    w_max: int = 64
    region: str = "ball"
    boundaries: tuple[int, ...] = (0,)
    trials: int = 10
    fkg_mode: str = "all-pairs"
    domination: str = "bernoulli"
    level: int = 0
    level_op: str = ">="
    output: str = "results.csv"
    source: str | None = field(default=None, repr=False)

    @property
    def beta_values(self) -> tuple[float, ...]:
        return tuple(parse_beta(b, self.lattice) for b in self.betas)

    @property
    def fixed_M(self) -> int | None:
        return None if self.M == "auto" else int(self.M)

    def validate(self) -> "ExperimentConfig":
        def bad(name, why):
            raise ConfigurationError(f"config field '{name}': {why}")

        if self.kind not in EXPERIMENT_KINDS:
            bad("kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}")
        if self.lattice not in LATTICE_KINDS:
            bad("lattice", f"must be one of {', '.join(LATTICE_KINDS)}")
        if not self.radii or min(self.radii) < 0:
            bad("radii", "need a nonempty list of radii >= 0")
        try:
            betas = self.beta_values
        except (ValueError, KeyError) as e:
            bad("betas", f"cannot parse ({e})")
        if not betas or min(betas) < 0:
            bad("betas", "need a nonempty list of betas >= 0")
        try:
            get_potential(self.potential, self.w_max)
        except ConfigurationError as e:
            bad("potential", str(e))
        if self.M != "auto":
            try:
                if int(self.M) < 1:
                    raise ValueError
            except ValueError:
                bad("M", "must be 'auto' or an integer >= 1")
        if self.M_start < 1:
            bad("M_start", "must be >= 1")
        if not 0 < self.truncation_target < 1:
            bad("truncation_target", "must lie in (0, 1)")
        if self.burn_in < MIN_BURN_IN:
            bad("burn_in", f"must be >= {MIN_BURN_IN}")
        if self.batches < MIN_BATCHES:
            bad("batches", f"must be >= {MIN_BATCHES}")
        if self.sweeps < self.batches * self.record_every:
            bad("sweeps", "must be >= batches * record_every")
        if self.chains < 1:
            bad("chains", "must be >= 1")
        if self.cluster_every < 0:
            bad("cluster_every", "must be >= 0")
        if self.record_every < 1:
            bad("record_every", "must be >= 1")
        if self.w_max < 2:
            bad("w_max", "must be >= 2")
        if self.region != "ball" and not re.fullmatch(r"\d+x\d+", self.region):
            bad("region", "must be 'ball' or WxH (e.g. 2x2)")
        if self.trials < 1:
            bad("trials", "must be >= 1")
        if self.fkg_mode not in ("all-pairs", "two-site-pairs"):
            bad("fkg_mode", "must be all-pairs or two-site-pairs")
        if self.domination not in ("bernoulli", "two-copy", "volume"):
            bad("domination", "must be bernoulli, two-copy or volume")
        if self.level_op not in (">=", "<="):
            bad("level_op", "must be >= or <=")
        if not self.output:
            bad("output", "must be a path")
        return self

    def chain_config(self, n: int, beta: float, M: int, chain_id: int = 0) -> ChainConfig:
        return ChainConfig(lattice=self.lattice, n=n, beta=beta, potential=self.potential, M=M,
                           seed=self.seed, burn_in=self.burn_in, sweeps=self.sweeps,
                           batches=self.batches, cluster_every=self.cluster_every,
                           record_every=self.record_every, chain_id=chain_id)


_FIELD_PARSERS: dict[str, Callable[[str], object]] = {
    "radii": _ints,
    "boundaries": _ints,
    "betas": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
    "truncation_target": float,
}


def parse_config_text(text: str, source: str | None = None) -> ExperimentConfig:
    """key=value lines, ``#`` starts a comment. Unknown keys are errors."""
    known = {f.name: f for f in fields(ExperimentConfig) if f.name != "source"}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"config field '{key}': unknown key")
        if key in values:
            raise ConfigurationError(f"config field '{key}': given twice")
        parser = _FIELD_PARSERS.get(key)
        if parser is None:
            parser = int if known[key].type in ("int", int) else str
        try:
            values[key] = parser(val)
        except ValueError:
            raise ConfigurationError(f"config field '{key}': cannot parse {val!r}") from None
    if "kind" not in values:
        raise ConfigurationError("config field 'kind': missing")
    return ExperimentConfig(**values, source=source).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigurationError(f"config file {path}: {e.strerror}") from None
    return parse_config_text(text, str(path))


# CSV


def write_csv(path, columns, rows, wall_time: float) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    buf.write(f"# heightlab {__version__} wall_time={wall_time:.3f}s\n")
    path.write_text(buf.getvalue())
    return path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_csv_body(path) -> list[dict]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


# variance growth


def _region_for(cfg: ExperimentConfig, n: int) -> Region:
    if cfg.region == "ball":
        return build_lattice(cfg.lattice, n)[1]
    w, h = map(int, cfg.region.split("x"))
    return box_region(cfg.lattice, w, h)


def _run_cell(cfg: ExperimentConfig, region: Region, beta: float, M: int, sweeps: int,
              burn_in: int, chain_id: int):
    V = get_potential(cfg.potential, cfg.w_max)
    sched = cfg.cluster_every if V.is_symmetric else 0
    chain = Chain(region, 0, V, beta, M, cfg.seed, chain_id, sched)
    chain.run(burn_in)
    roots, hits = chain.run(sweeps)
    return _stats(roots, hits, region.n_sites, M, cfg.batches, cfg.seed, sweeps)


def choose_window(cfg: ExperimentConfig, region: Region, beta: float) -> int:
    """Double M from ``M_start`` until a pilot run sees edge mass below the target."""
    M = cfg.M_start
    pilot = max(cfg.batches * cfg.record_every, min(cfg.sweeps, 2000))
    while M < MAX_AUTO_M:
        st = _run_cell(cfg, region, beta, M, pilot, MIN_BURN_IN, 0)
        if st.truncation_mass < cfg.truncation_target:
            return M
        M *= 2
    return M


def variance_growth_cell(cfg: ExperimentConfig, n: int, beta: float) -> dict:
    region = _region_for(cfg, n)
    M = cfg.fixed_M or choose_window(cfg, region, beta)
    while True:
        stats = [_run_cell(cfg, region, beta, M, cfg.sweeps, cfg.burn_in, c) for c in range(cfg.chains)]
        mass = float(np.mean([s.truncation_mass for s in stats]))
        if cfg.fixed_M or mass < cfg.truncation_target or M >= MAX_AUTO_M:
            break
        M *= 2
    second = float(np.mean([s.second_moment for s in stats]))
    se = math.sqrt(sum(s.stderr**2 for s in stats)) / len(stats)
    return {"lattice": cfg.lattice, "n": n, "beta": beta, "M": M, "seed": cfg.seed,
            "sweeps": cfg.sweeps * cfg.chains, "second_moment": second, "stderr": se,
            "truncation_mass": mass}


def run_variance_growth(cfg: ExperimentConfig) -> list[dict]:
    cells = [(n, b) for n in cfg.radii for b in cfg.beta_values]
    rows = parallel_map(lambda c: variance_growth_cell(cfg, *c), cells)
    return sorted(rows, key=lambda r: (r["n"], r["beta"]))


def run_contour_stats(cfg: ExperimentConfig) -> list[dict]:
    def cell(c):
        n, beta = c
        M = cfg.fixed_M or choose_window(cfg, _region_for(cfg, n), beta)
        p, se = level_set_surround_probability(cfg.chain_config(n, beta, M), cfg.level, cfg.level_op,
                                               get_potential(cfg.potential, cfg.w_max))
        return {"lattice": cfg.lattice, "n": n, "beta": beta, "M": M, "seed": cfg.seed,
                "sweeps": cfg.sweeps, "level": cfg.level, "op": cfg.level_op, "p_surround": p,
                "stderr": se}

    rows = parallel_map(cell, [(n, b) for n in cfg.radii for b in cfg.beta_values])
    return sorted(rows, key=lambda r: (r["n"], r["beta"]))


def run_two_copy(cfg: ExperimentConfig) -> list[dict]:
    def cell(c):
        n, beta = c
        M = cfg.fixed_M or choose_window(cfg, _region_for(cfg, n), beta)
        st = two_copy_run(cfg.chain_config(n, beta, M), get_potential(cfg.potential, cfg.w_max))
        return {"lattice": cfg.lattice, "n": n, "beta": beta, "M": M, "seed": cfg.seed,
                "sweeps": cfg.sweeps, "psi_mean": st.psi_mean, "psi_stderr": st.psi_stderr,
                "p_nonneg": st.p_nonneg, "p_nonneg_stderr": st.p_nonneg_stderr,
                "p_surround": st.p_surround, "p_surround_stderr": st.p_surround_stderr,
                "truncation_mass": st.truncation_mass}

    rows = parallel_map(cell, [(n, b) for n in cfg.radii for b in cfg.beta_values])
    return sorted(rows, key=lambda r: (r["n"], r["beta"]))


# audits driven by a config


def _audit_regions(cfg: ExperimentConfig) -> list[Region]:
    if cfg.region == "ball":
        return [build_lattice(cfg.lattice, n)[1] for n in cfg.radii]
    return [_region_for(cfg, 0)]


def _audit_M(cfg: ExperimentConfig, default: int) -> int:
    return cfg.fixed_M or default


def config_audits(cfg: ExperimentConfig) -> list[AuditReport]:
    V = get_potential(cfg.potential, cfg.w_max)
    rng = np.random.default_rng(cfg.seed)
    jobs: list[Callable[[], AuditReport]] = []
    for region in _audit_regions(cfg):
        for beta in cfg.beta_values:
            if cfg.kind == "fkg-audit":
                for psi in cfg.boundaries:
                    jobs.append(lambda r=region, b=beta, p=psi: fkg_lattice_audit(
                        enumerate_measure(r, p, V, b, _audit_M(cfg, 2)), cfg.fkg_mode))
            elif cfg.kind == "decomposition-audit":
                for psi in cfg.boundaries:
                    jobs.append(lambda r=region, b=beta, p=psi: decomposition_audit(
                        r, p, V, b, _audit_M(cfg, 3)))
            elif cfg.kind == "domination-audit" and cfg.domination == "bernoulli":
                hi = max(cfg.boundaries)
                for _ in range(cfg.trials):
                    psi = rng.integers(0, hi + 1, len(region.boundary))
                    jobs.append(lambda r=region, b=beta, p=psi: bernoulli_domination_audit(
                        r, p, V, b, _audit_M(cfg, 40 if r.n_sites == 1 else 20)))
            elif cfg.kind == "domination-audit" and cfg.domination == "two-copy":
                lo, hi = min(cfg.boundaries), max(cfg.boundaries)
                for _ in range(cfg.trials):
                    pair = (rng.integers(lo, hi + 1, len(region.boundary)),
                            rng.integers(lo, hi + 1, len(region.boundary)))
                    jobs.append(lambda r=region, b=beta, p=pair: two_copy_domination_audit(
                        r, p, V, b, _audit_M(cfg, 80 if r.n_sites == 1 else 24)))
            elif cfg.kind == "domination-audit":
                chain = nested_chain(region)
                jobs.append(lambda c=chain, b=beta: volume_monotonicity_audit(c, V, b, _audit_M(cfg, 2)))
    if cfg.kind == "gks-audit":
        for region in _audit_regions(cfg):
            E = len(region.edges)
            for _ in range(cfg.trials):
                K, H, H2 = (rng.exponential(1.0, E) for _ in range(3))
                jobs.append(lambda r=region, k=K, h=H, h2=H2: gks_audit(r, k, h, h2))
    return parallel_map(lambda f: f(), jobs)


def nested_chain(region: Region) -> list[Region]:
    """Λ_1 ⊂ Λ_2 ⊂ ... ⊂ region, adding sites in order of distance from the root."""
    order = sorted(region.sites, key=lambda v: (region.lattice.distance(v) if v in region.lattice else 0, v))
    order.remove(region.root)
    order.insert(0, region.root)
    return [region.lattice.region(order[: k + 1], root=region.root) for k in range(len(order))]


def audit_rows(reports: list[AuditReport]) -> list[dict]:
    return [{"audit": r.name, "passed": r.passed, "margin": float(r.margin),
             "in_hypothesis": r.in_hypothesis, "instance": r.instance} for r in reports]


def write_counterexamples(csv_path: Path, reports: list[AuditReport]) -> Path | None:
    failed = [r for r in reports if not r.passed]
    if not failed:
        return None
    out = csv_path.with_name(csv_path.stem + ".counterexample.json")
    out.write_text("[\n" + ",\n".join(r.counterexample_json() for r in failed) + "\n]\n")
    return out


def run_experiment(path, echo: Callable[[str], None] = print) -> int:
    """Run one config file; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        cfg = load_config(path)
    except ConfigurationError as e:
        echo(f"error: {e}")
        return EXIT_CONFIG
    out = Path(cfg.output)
    if cfg.kind in AUDIT_KINDS:
        reports = config_audits(cfg)
        for r in reports:
            echo(r.to_line())
        write_csv(out, AUDIT_COLUMNS, audit_rows(reports), time.perf_counter() - t0)
        cx = write_counterexamples(out, reports)
        if cx:
            echo(f"counterexample written to {cx}")
            return EXIT_AUDIT_FAIL
        return EXIT_OK
    runner, cols = {
        "variance-growth": (run_variance_growth, VARIANCE_COLUMNS),
        "contour-stats": (run_contour_stats, CONTOUR_COLUMNS),
        "two-copy": (run_two_copy, TWO_COPY_COLUMNS),
    }[cfg.kind]
    rows = runner(cfg)
    write_csv(out, cols, rows, time.perf_counter() - t0)
    echo(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# named audit suites


SUITES = ("decomposition", "fkg", "gks", "bernoulli", "two-copy", "volume", "oracles")


def _cross(kind: str) -> tuple[PlanarLattice, list]:
    lat = PlanarLattice(kind, 4)
    return lat, sorted(lat.ball(1) - {lat.root})


def suite_decomposition(size: str, seed: int = 0) -> list[AuditReport]:
    """Regions of <= 3 sites around the root, M = 3, SOS and DG, β ∈ {0.25, 1, 2},
    boundaries constant 0/1/2 plus random draws in {0,1,2}."""
    lat, nbrs = _cross("square")
    shapes = [()] + [c for k in (1, 2) for c in combinations(nbrs, k)]
    if size == "small":
        shapes = [(), (nbrs[0],), (nbrs[0], nbrs[1])]
    regions = [lat.region([lat.root, *s], root=lat.root) for s in shapes]
    rng = np.random.default_rng(seed)
    jobs = []
    for region in regions:
        bnds = [0, 1, 2] + [rng.integers(0, 3, len(region.boundary)) for _ in range(2)]
        for V in (get_potential("sos"), get_potential("dg")):
            for beta in (0.25, 1.0, 2.0):
                for psi in bnds:
                    jobs.append((region, psi, V, beta))
    return parallel_map(lambda j: decomposition_audit(*j, 3), jobs)


def suite_fkg(size: str, seed: int = 0) -> list[AuditReport]:
    """All-pairs on 2-site regions, two-site-pairs (and all-pairs) on 2x2 blocks, M = 2."""
    lat, nbrs = _cross("square")
    two = lat.region([lat.root, nbrs[-1]], root=lat.root)
    box = box_region("square", 2, 2)
    jobs = []
    for V in (get_potential("sos"), get_potential("dg")):
        for beta in (0.25, 1.0, 2.0):
            for psi in (0, 1):
                jobs.append((two, psi, V, beta, "all-pairs"))
                if size == "full":
                    jobs.append((box, psi, V, beta, "two-site-pairs"))
                    jobs.append((box, psi, V, beta, "all-pairs"))
    return parallel_map(lambda j: fkg_lattice_audit(enumerate_measure(*j[:4], 2), j[4]), jobs)


def suite_gks(size: str, seed: int = 0) -> list[AuditReport]:
    """|Λ| = 1..4 inside a 2x2 block, random exponential couplings and H, H'."""
    box = box_region("square", 2, 2)
    order = [(0, 0), (1, 0), (0, 1), (1, 1)]
    draws = 50 if size == "full" else 10
    rng = np.random.default_rng(seed)
    jobs = []
    for k in range(1, 5):
        region = box.lattice.region(order[:k], root=(0, 0))
        E = len(region.edges)
        for _ in range(draws):
            jobs.append((region, *(rng.exponential(1.0, E) for _ in range(3))))
    return parallel_map(lambda j: gks_audit(*j), jobs)


def suite_bernoulli(size: str, seed: int = 0) -> list[AuditReport]:
    """β = log2/m on square and hexagonal, 1 and 2 sites, random boundaries in {0..3}.

    The first instance of each (lattice, size) pair uses the zero boundary.
    """
    draws = 100 if size == "full" else 10
    rng = np.random.default_rng(seed)
    V = get_potential("sos")
    jobs = []
    for kind in ("square", "hexagonal"):
        lat, nbrs = _cross(kind)
        beta = math.log(2) / MAX_DEGREE[kind]
        for region, M in ((lat.region([lat.root]), 40), (lat.region([lat.root, nbrs[-1]], root=lat.root), 20)):
            for t in range(draws):
                psi = 0 if t == 0 else rng.integers(0, 4, len(region.boundary))
                jobs.append((region, psi, V, beta, M))
    return parallel_map(lambda j: bernoulli_domination_audit(*j), jobs)


def suite_two_copy(size: str, seed: int = 0) -> list[AuditReport]:
    """Single site, β = log2/(2m), a = 0, boundary pairs drawn from {-2..2}."""
    draws = 50 if size == "full" else 10
    rng = np.random.default_rng(seed)
    V = get_potential("sos")
    jobs = []
    for kind in ("square", "hexagonal"):
        lat, _ = _cross(kind)
        region = lat.region([lat.root])
        beta = math.log(2) / (2 * MAX_DEGREE[kind])
        d = len(region.boundary)
        for t in range(draws):
            pair = (0, 0) if t == 0 else (rng.integers(-2, 3, d), rng.integers(-2, 3, d))
            jobs.append((region, pair, V, beta, 80, 0))
    return parallel_map(lambda j: two_copy_domination_audit(*j), jobs)


def suite_volume(size: str, seed: int = 0) -> list[AuditReport]:
    """Nested cross prefixes (and, at full size, growing boxes), SOS and DG, β ∈ {0.5, 1, 2}."""
    lat, nbrs = _cross("square")
    k = 4 if size == "full" else 3
    chains = [[lat.region([lat.root, *nbrs[:j]], root=lat.root) for j in range(k)]]
    if size == "full":
        chains.append([box_region("square", w, h) for w, h in ((1, 1), (2, 1), (2, 2), (3, 2))])
    jobs = [(c, get_potential(v), b, 2) for c in chains for v in ("sos", "dg") for b in (0.5, 1.0, 2.0)]
    return parallel_map(lambda j: volume_monotonicity_audit(*j), jobs)


def random_dominance_instance(rng: np.random.Generator, max_states: int = 20):
    """Random μ, ν on a random set of ≤ ``max_states`` height vectors.

    Half the instances push μ upward along a random monotone move so that
    domination actually occurs.
    """
    d = int(rng.integers(1, 4))
    n_states = int(rng.integers(2, max_states + 1))
    pool = {tuple(int(v) for v in rng.integers(0, 3, d)) for _ in range(4 * n_states)}
    states = sorted(pool)[:n_states]
    mu = rng.dirichlet(np.ones(len(states)))
    if rng.random() < 0.5:
        nu = rng.dirichlet(np.ones(len(states)))
    else:
        nu = np.zeros(len(states))
        arr = np.array(states)
        for i, p in enumerate(mu):
            above = np.flatnonzero(np.all(arr >= arr[i], axis=1))
            nu[rng.choice(above)] += p
    return dict(zip(states, mu)), dict(zip(states, nu))


def suite_oracles(size: str, seed: int = 0) -> list[AuditReport]:
    """Flow and up-set oracles on random instances.

    Max-flow/min-cut makes the flow value equal 1 + min_U (ν(U) - μ(U)), so
    the margin is REL_SLACK minus the gap between the two computed numbers.
    """
    rng = np.random.default_rng(seed)
    count = 200 if size == "full" else 40
    out = []
    for t in range(count):
        mu, nu = random_dominance_instance(rng)
        try:
            res = stochastic_dominance_check(mu, nu)
            gap = abs(res.flow_value - 1.0 - res.upset_min)
            agree = res.oracles == ("flow", "upset") and gap <= REL_SLACK
            margin, label = REL_SLACK - gap, res.dominated
        except AssertionError:
            agree, margin, label = False, -1.0, "?"
        out.append(AuditReport(
            "dominance_oracles", f"trial={t};states={len(mu)};dominated={label}", agree, margin,
            None if agree else {"mu": {str(k): v for k, v in mu.items()},
                                "nu": {str(k): v for k, v in nu.items()}},
        ))
    return out


_SUITE_FUNCS = {
    "decomposition": suite_decomposition,
    "fkg": suite_fkg,
    "gks": suite_gks,
    "bernoulli": suite_bernoulli,
    "two-copy": suite_two_copy,
    "volume": suite_volume,
    "oracles": suite_oracles,
}


def run_suite(name: str, size: str = "small", seed: int = 0) -> list[AuditReport]:
    if size not in ("small", "full"):
        raise ConfigurationError(f"size must be small or full, got {size!r}")
    if name == "all":
        return [r for s in SUITES for r in _SUITE_FUNCS[s](size, seed)]
    if name not in _SUITE_FUNCS:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}, all")
    return _SUITE_FUNCS[name](size, seed)


def run_audit(name: str, size: str = "small", output=None, seed: int = 0,
              echo: Callable[[str], None] = print) -> int:
    t0 = time.perf_counter()
    try:
        reports = run_suite(name, size, seed)
    except ConfigurationError as e:
        echo(f"error: {e}")
        return EXIT_CONFIG
    for r in reports:
        echo(r.to_line())
    out = Path(output or f"audit-{name}-{size}.csv")
    write_csv(out, AUDIT_COLUMNS, audit_rows(reports), time.perf_counter() - t0)
    cx = write_counterexamples(out, reports)
    failed = sum(not r.passed for r in reports)
    echo(f"{len(reports) - failed}/{len(reports)} audits passed; report in {out}")
    if cx:
        echo(f"counterexample written to {cx}")
        return EXIT_AUDIT_FAIL
    return EXIT_OK
