use serde::{Deserialize, Serialize};

use crate::linalg::{block_diag, c, orthogonal_complement, CMatrix, CVector};
use crate::linkage::CouplingPair;
use crate::morris_shore::MsDecomposition;

use super::{metric_matrix, BasisError, DarkKind, DarkStateFamily};

/// Non-orthogonal basis that splits a case-A linkage into independent g–e–f chains.
///
/// All e and f vectors are expressed in the Stokes MS basis; `transform` maps to bare
/// coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainBasis {
    /// Columns x₀^(l).
    pub g: CMatrix,
    /// Columns P̃†x₀^(l)/𝒩_e^(l) followed by the complement.
    pub e: CMatrix,
    /// Rows biorthogonal to the columns of `e`.
    pub e_dual: CMatrix,
    /// Orthonormal columns Σ⁻¹P̃†x₀^(l)/𝒩_f^(l) followed by the complement.
    pub f: CMatrix,
    pub n_e: Vec<f64>,
    pub n_f: Vec<f64>,
    b: CMatrix,
    a: CMatrix,
}

impl ChainBasis {
    pub fn chains(&self) -> usize {
        self.n_e.len()
    }

    /// T with H' = T⁻¹ H T, columns are the chain basis vectors in bare coordinates.
    pub fn transform(&self) -> CMatrix {
        block_diag(&[&self.g, &(self.b.adjoint() * &self.e), &(self.a.adjoint() * &self.f)])
    }

    pub fn inverse_transform(&self) -> CMatrix {
        block_diag(&[&self.g.adjoint(), &(&self.e_dual * &self.b), &(self.f.adjoint() * &self.a)])
    }

    pub fn transformed_hamiltonian(&self, h: &CMatrix) -> CMatrix {
        self.inverse_transform() * h * self.transform()
    }

    /// Dual e row of chain l from the closed form (𝒩_e/𝒩_f²) x₀† P̃ Σ⁻†Σ⁻¹, as a vector of row entries.
    pub fn closed_form_dual(&self, l: usize, pair: &CouplingPair, sigma: &[f64]) -> CVector {
        let pt = &pair.p * self.b.adjoint();
        let v = pt.adjoint() * self.g.column(l);
        let k = self.n_e[l] / (self.n_f[l] * self.n_f[l]);
        CVector::from_fn(v.len(), |j, _| v[j].conj() * c(k / (sigma[j] * sigma[j]), 0.0))
    }

    /// Amplitudes of a state on the chain basis (g coefficients, f coefficients).
    pub fn chain_amplitudes(&self, state: &CVector) -> CVector {
        self.inverse_transform() * state
    }
}

/// Builds the chain basis for a case-A linkage with nonsingular Σ and no trapped g states.
pub fn linearize_chains(pair: &CouplingPair, dec: &MsDecomposition, family: &DarkStateFamily) -> Result<ChainBasis, BasisError> {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    metric_matrix(&pair.p, &pair.s, dec)?;
    let trapped = family.count_of(DarkKind::PumpDecoupled);
    if trapped > 0 {
        return Err(BasisError::TrappedStates(trapped));
    }
    let transfer: Vec<&CVector> = family.members.iter().filter(|m| m.kind == DarkKind::Transfer).map(|m| &m.g_part).collect();
    let mut g = CMatrix::zeros(ng, transfer.len());
    for (l, x) in transfer.iter().enumerate() {
        g.set_column(l, x);
    }

    let pt = &pair.p * dec.b.adjoint();
    let inv_sigma = |v: &CVector| CVector::from_fn(ne, |j, _| v[j] / c(dec.sigma[j], 0.0));
    let mut n_e = Vec::new();
    let mut n_f = Vec::new();
    let mut e_lead = CMatrix::zeros(ne, ng);
    let mut weighted = CMatrix::zeros(ne, ng);
    let mut f_lead = CMatrix::zeros(nf, ng);
    for l in 0..ng {
        let v = pt.adjoint() * g.column(l);
        let ne_l = v.norm();
        let w = inv_sigma(&v);
        let nf_l = w.norm();
        e_lead.set_column(l, &(&v / c(ne_l, 0.0)));
        weighted.set_column(l, &inv_sigma(&w));
        f_lead.rows_mut(0, ne).column_mut(l).copy_from(&(&w / c(nf_l, 0.0)));
        n_e.push(ne_l);
        n_f.push(nf_l);
    }
    // complement vectors must be orthogonal to Σ⁻²P̃†x₀ so the dual rows keep their closed form
    let e_rest = orthogonal_complement(&weighted, ne);
    let mut e = CMatrix::zeros(ne, ne);
    e.columns_mut(0, ng).copy_from(&e_lead);
    e.columns_mut(ng, ne - ng).copy_from(&e_rest);
    let e_dual = e.clone().try_inverse().ok_or(BasisError::Ordering(ng, ne, nf))?;
    let f_rest = orthogonal_complement(&f_lead, nf);
    let mut f = CMatrix::zeros(nf, nf);
    f.columns_mut(0, ng).copy_from(&f_lead);
    f.columns_mut(ng, nf - ng).copy_from(&f_rest);

    Ok(ChainBasis { g, e, e_dual, f, n_e, n_f, b: dec.b.clone(), a: dec.a.clone() })
}
