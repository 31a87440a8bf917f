"""Fermionic tensor networks on Z2-graded vector spaces.

Block-sparse graded tensors with sign-correct contraction, MPS and PEPS
algorithms built directly on them, Jordan-Wigner intertwiner MPOs, and exact
free-fermion solvers used as references throughout.
"""

from .charges import (
    Charge,
    ChargeSystem,
    GradedSpace,
    dual_charge,
    fuse_charges,
    fused_space,
    parity_space,
    trivial_charge,
)
from .tensor import FuseRecord, GradedTensor, inner, koszul_sign, neutral_keys
from .network import ContractionPlan, contract, contract_plan
from .reference import dense_evaluate, from_dense, to_dense
from .decomp import Decomposition, TruncationSpec, decompose, lq, polar, qr, svd
from .serialization import (
    load_tensor,
    load_tensors,
    save_tensor,
    save_tensors,
    tensor_bytes,
    tensor_from_bytes,
)
from .hamiltonians import (
    MPO,
    HermiticityWitness,
    ModelParams,
    SpinlessOps,
    UniformMPO,
    build_mpo,
    creation_annihilation_spinless,
    hubbard_hopping_gate,
    hubbard_site_space,
    hubbard_word_matrices,
    mpo_hermiticity,
    spinless_site_space,
)
from .gaussian import (
    BdGSolution,
    CorrelationMatrix,
    GaussianMap,
    KitaevParams,
    PWaveParams,
    gftns_correlations,
    gftns_energy_density,
    gftns_optimize,
    gftns_tensor,
    gftns_to_peps,
    kitaev_energy_density,
    kitaev_gap,
    lieb_wu_energy,
    load_gaussian_map,
    pfaffian,
    save_gaussian_map,
    solve_bdg_chain,
    solve_bdg_torus,
)

__all__ = [
    "BdGSolution",
    "Charge",
    "ChargeSystem",
    "ContractionPlan",
    "CorrelationMatrix",
    "Decomposition",
    "FuseRecord",
    "GaussianMap",
    "GradedSpace",
    "GradedTensor",
    "HermiticityWitness",
    "KitaevParams",
    "MPO",
    "ModelParams",
    "PWaveParams",
    "SpinlessOps",
    "TruncationSpec",
    "UniformMPO",
    "build_mpo",
    "contract",
    "contract_plan",
    "creation_annihilation_spinless",
    "decompose",
    "dense_evaluate",
    "dual_charge",
    "from_dense",
    "fuse_charges",
    "fused_space",
    "gftns_correlations",
    "gftns_energy_density",
    "gftns_optimize",
    "gftns_tensor",
    "gftns_to_peps",
    "hubbard_hopping_gate",
    "hubbard_site_space",
    "hubbard_word_matrices",
    "inner",
    "kitaev_energy_density",
    "kitaev_gap",
    "koszul_sign",
    "lieb_wu_energy",
    "load_gaussian_map",
    "load_tensor",
    "load_tensors",
    "lq",
    "mpo_hermiticity",
    "neutral_keys",
    "parity_space",
    "pfaffian",
    "polar",
    "qr",
    "spinless_site_space",
    "save_gaussian_map",
    "save_tensor",
    "save_tensors",
    "solve_bdg_chain",
    "solve_bdg_torus",
    "svd",
    "tensor_bytes",
    "tensor_from_bytes",
    "to_dense",
    "trivial_charge",
]
