"""scikit-learn style wrappers: constructor holds parameters, ``fit`` computes.

Nothing here is learned from data; ``fit`` ignores ``X`` and builds the
exact table or runs the chain described by the parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .gibbs import enumerate_measure, site_marginal, truncation_mass
from .lattice import box_region, build_lattice
from .potentials import get_potential
from .samplers import ChainConfig, run_chain


def _region(lattice, n, box):
    return box_region(lattice, *box) if box else build_lattice(lattice, n)[1]


class ExactGibbs(BaseEstimator):
    """Exact truncated Gibbs measure on Λ_n (or a ``box=(w, h)`` block)."""

    def __init__(self, lattice="square", n=1, box=None, potential="sos", beta=1.0, M=4, psi=0):
        self.lattice = lattice
        self.n = n
        self.box = box
        self.potential = potential
        self.beta = beta
        self.M = M
        self.psi = psi

    def fit(self, X=None, y=None):
        region = _region(self.lattice, self.n, self.box)
        self.table_ = enumerate_measure(region, self.psi, get_potential(self.potential), self.beta, self.M)
        root = site_marginal(self.table_, region.root)
        self.root_marginal_ = root
        self.second_moment_ = root.second_moment
        self.log_partition_ = self.table_.log_Z
        self.truncation_mass_ = truncation_mass(self.table_)
        return self

    def predict_proba(self, X):
        """Probability of each row of site heights."""
        X = np.atleast_2d(np.asarray(X, dtype=np.int64))
        return np.array([self.table_.probability(row) for row in X])

    def score(self, X, y=None):
        """Mean log-probability of the given configurations."""
        return float(np.mean(np.log(self.predict_proba(X))))


class HeightChain(BaseEstimator):
    """Monte Carlo estimate of μ(φ_r²) with a batch-means error."""

    def __init__(self, lattice="square", n=2, potential="sos", beta=1.0, M=8, seed=0,
                 burn_in=1000, sweeps=10_000, batches=32, cluster_every=1):
        self.lattice = lattice
        self.n = n
        self.potential = potential
        self.beta = beta
        self.M = M
        self.seed = seed
        self.burn_in = burn_in
        self.sweeps = sweeps
        self.batches = batches
        self.cluster_every = cluster_every

    def fit(self, X=None, y=None):
        cfg = ChainConfig(**self.get_params())
        self.stats_ = run_chain(cfg)
        self.second_moment_ = self.stats_.second_moment
        self.stderr_ = self.stats_.stderr
        return self
