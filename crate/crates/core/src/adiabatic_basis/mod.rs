//! Dark and bright adiabatic states, dark-state counting and transfer feasibility.

mod bright;
mod chains;
mod dark;
mod feasibility;

pub use bright::{bright_states, bright_states_case_a, bright_states_case_c, BrightState};
pub use chains::{linearize_chains, ChainBasis};
pub use dark::{dark_family, dark_states_case_a, dark_states_case_b, dark_states_case_c, dark_states_general};
pub use feasibility::{feasibility, FeasibilityVerdict, Verdict};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::ManifoldLayout;
use crate::linalg::{c, CMatrix, CVector};
use crate::morris_shore::{MsDecomposition, MsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("sizes ({0}, {1}, {2}) do not satisfy the ordering required here")]
    Ordering(usize, usize, usize),
    #[error("the Stokes MS Rabi frequencies contain {0} vanishing value(s); use the singular-Σ route")]
    SingularSigma(usize),
    #[error("the pump MS coupling Π̃ has {0} vanishing value(s)")]
    SingularPi(usize),
    #[error("chain linearization needs every dark state to carry transfer (found {0} pump-decoupled)")]
    TrappedStates(usize),
    #[error(transparent)]
    Ms(#[from] MsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyCase {
    /// N_g ≤ N_e ≤ N_f
    A,
    /// N_g > N_e > N_f
    B,
    /// N_g, N_f < N_e
    C,
    /// Any other ordering; handled by the general two-stage construction.
    Other,
}

pub fn classify(n_g: usize, n_e: usize, n_f: usize) -> DegeneracyCase {
    if n_g <= n_e && n_e <= n_f {
        DegeneracyCase::A
    } else if n_g > n_e && n_e > n_f {
        DegeneracyCase::B
    } else if n_g < n_e && n_f < n_e {
        DegeneracyCase::C
    } else {
        DegeneracyCase::Other
    }
}

/// Generic number of dark states, N_g + N_f − N_e (never negative).
pub fn dark_count(n_g: usize, n_e: usize, n_f: usize) -> usize {
    (n_g + n_f).saturating_sub(n_e)
}

/// M = P (S S†)⁻¹ P†, evaluated through the Stokes MS basis.
pub fn metric_matrix(p: &CMatrix, s: &CMatrix, dec: &MsDecomposition) -> Result<CMatrix, BasisError> {
    let (ne, nf) = s.shape();
    if ne > nf || dec.null_count > 0 {
        return Err(BasisError::SingularSigma(dec.null_count + ne.saturating_sub(nf)));
    }
    let pt = p * dec.b.adjoint();
    let scaled = CMatrix::from_fn(pt.nrows(), ne, |i, j| pt[(i, j)] / c(dec.sigma[j], 0.0));
    Ok(&scaled * scaled.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkKind {
    /// Moves population from g to f as p, s evolve.
    Transfer,
    /// Constant g state with P†x = 0; its population is trapped.
    PumpDecoupled,
    /// Constant f state with no Stokes partner.
    UncoupledFinal,
}

/// One dark state Φ(p, s) ∝ s·g + p·f.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarkMember {
    pub g_part: CVector,
    pub f_part: CVector,
    pub kind: DarkKind,
    /// Eigenvalue of the metric restricted to the allowed g subspace (0 for constant members).
    pub metric_eigenvalue: f64,
}

impl DarkMember {
    /// Unit vector for envelope values (p, s). When both vanish the s → 1 limit is used.
    pub fn vector(&self, layout: &ManifoldLayout, p: f64, s: f64) -> CVector {
        let (p, s) = if p == 0.0 && s == 0.0 { (0.0, 1.0) } else { (p, s) };
        let mut v = CVector::zeros(layout.dim());
        match self.kind {
            DarkKind::PumpDecoupled => v.rows_mut(0, layout.n_g).copy_from(&self.g_part),
            DarkKind::UncoupledFinal => v.rows_mut(layout.n_g + layout.n_e, layout.n_f).copy_from(&self.f_part),
            DarkKind::Transfer => {
                v.rows_mut(0, layout.n_g).copy_from(&(&self.g_part * c(s, 0.0)));
                v.rows_mut(layout.n_g + layout.n_e, layout.n_f).copy_from(&(&self.f_part * c(p, 0.0)));
            }
        }
        let n = v.norm();
        v / c(n, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.kind != DarkKind::Transfer
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarkStateFamily {
    pub members: Vec<DarkMember>,
    pub case: DegeneracyCase,
    pub layout: ManifoldLayout,
}

impl DarkStateFamily {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn count_of(&self, kind: DarkKind) -> usize {
        self.members.iter().filter(|m| m.kind == kind).count()
    }

    pub fn vector(&self, l: usize, p: f64, s: f64) -> CVector {
        self.members[l].vector(&self.layout, p, s)
    }

    /// Dark vectors as columns, N × N_D.
    pub fn vectors(&self, p: f64, s: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.layout.dim(), self.count());
        for l in 0..self.count() {
            out.set_column(l, &self.vector(l, p, s));
        }
        out
    }

    /// Projector onto the dark subspace at (p, s).
    pub fn projector(&self, p: f64, s: f64) -> CMatrix {
        let v = self.vectors(p, s);
        &v * v.adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_examples() {
        assert_eq!(dark_count(5, 7, 9), 7);
        assert_eq!(dark_count(1, 1, 1), 1);
        assert_eq!(dark_count(1, 1, 2), 2);
        assert_eq!(dark_count(1, 3, 1), 0);
    }

    #[test]
    fn classification() {
        assert_eq!(classify(2, 3, 4), DegeneracyCase::A);
        assert_eq!(classify(3, 2, 1), DegeneracyCase::B);
        assert_eq!(classify(2, 3, 2), DegeneracyCase::C);
        assert_eq!(classify(3, 3, 2), DegeneracyCase::Other);
    }
}
