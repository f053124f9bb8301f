"""Integer-valued height models on planar lattices: exact enumeration,
Monte Carlo, and certified audits of correlation inequalities."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    EnumerationTooLargeError,
    HeightlabError,
    InvalidPotentialError,
    PotentialWindowError,
    PreconditionError,
    WindowTooSmallError,
)
from .gibbs import ExactTable, HeightConfig, enumerate_measure, hamiltonian, site_marginal
from .ising import decomposition_weight, ising_partition_plus, spin_correlation
from .lattice import PlanarLattice, Region, box_region, build_lattice, exterior_contour, surrounds
from .potentials import PotentialSpec, classify, discrete_gaussian, get_potential, sos, tilt
from .reports import AuditReport
from .samplers import ChainConfig, run_chain, two_copy_run
from .verifiers import (
    bernoulli_domination_audit,
    fkg_lattice_audit,
    stochastic_dominance_check,
    two_copy_domination_audit,
    volume_monotonicity_audit,
)

__all__ = [
    "AuditReport", "ChainConfig", "ConfigurationError", "EnumerationTooLargeError", "ExactTable",
    "HeightConfig", "HeightlabError", "InvalidPotentialError", "PlanarLattice", "PotentialSpec",
    "PotentialWindowError", "PreconditionError", "Region", "WindowTooSmallError",
    "bernoulli_domination_audit", "box_region", "build_lattice", "classify", "decomposition_weight",
    "discrete_gaussian", "enumerate_measure", "exterior_contour", "fkg_lattice_audit",
    "get_potential", "hamiltonian", "ising_partition_plus", "run_chain", "site_marginal", "sos",
    "spin_correlation", "stochastic_dominance_check", "surrounds", "tilt", "two_copy_domination_audit",
    "two_copy_run", "volume_monotonicity_audit",
]
