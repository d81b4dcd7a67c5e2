//! Adiabatic passage in three-level systems whose levels are degenerate manifolds.

pub mod linalg;
pub mod linkage;
pub mod hamiltonian;
pub mod morris_shore;
pub mod adiabatic_basis;
pub mod propagator;
pub mod adiabaticity;
pub mod oracles;
pub mod oracle_check;
pub mod scenario;
