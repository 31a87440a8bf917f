"""Free-fermion references: Pfaffians, BdG solvers, Gaussian fTNS."""

from .bdg import (
    BdGSolution,
    CorrelationMatrix,
    KitaevParams,
    PWaveParams,
    kitaev_energy_density,
    kitaev_gap,
    lieb_wu_energy,
    solve_bdg_chain,
    solve_bdg_torus,
)
from .gftns import (
    GaussianMap,
    gftns_correlations,
    gftns_energy_density,
    gftns_optimize,
    gftns_tensor,
    gftns_to_peps,
    load_gaussian_map,
    save_gaussian_map,
)
from .pfaffian import pfaffian

__all__ = [
    "BdGSolution",
    "CorrelationMatrix",
    "KitaevParams",
    "PWaveParams",
    "GaussianMap",
    "gftns_correlations",
    "gftns_energy_density",
    "gftns_optimize",
    "gftns_tensor",
    "gftns_to_peps",
    "kitaev_energy_density",
    "kitaev_gap",
    "lieb_wu_energy",
    "load_gaussian_map",
    "pfaffian",
    "save_gaussian_map",
    "solve_bdg_chain",
    "solve_bdg_torus",
]
