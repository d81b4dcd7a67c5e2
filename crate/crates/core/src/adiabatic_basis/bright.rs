use serde::{Deserialize, Serialize};

use crate::hamiltonian::ManifoldLayout;
use crate::linalg::{c, hermitian_eigen, CVector};
use crate::linkage::CouplingPair;
use crate::morris_shore::{combined_unitary, MsDecomposition, SecondStageMs};

/// Bright state [pPy; εy; sS†y]/𝒩 with ε(ε − Δ) = μ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrightState {
    pub eigenvalue: f64,
    /// Eigenvalue μ of p²P†P + s²SS† belonging to the generating vector y.
    pub mu: f64,
    /// Generating e-manifold vector in the bare basis.
    pub y: CVector,
    pub vector: CVector,
}

/// μ below this fraction of the coupling scale squared marks an e state with no
/// coupling at the given (p, s); it yields a single state with ε = Δ.
const MU_TOL: f64 = 1e-10;

fn assemble(pair: &CouplingPair, detuning: f64, p: f64, s: f64, mus: &[f64], ys: &[CVector]) -> Vec<BrightState> {
    let layout = ManifoldLayout { n_g: pair.n_g(), n_e: pair.n_e(), n_f: pair.n_f() };
    let scale = (p * pair.p.norm()).powi(2) + (s * pair.s.norm()).powi(2);
    let mut out = Vec::new();
    for (&mu, y) in mus.iter().zip(ys) {
        let mu = mu.max(0.0);
        let collapsed = roots_collapsed(mu, scale);
        let roots: Vec<f64> = if collapsed {
            vec![detuning]
        } else {
            let r = (detuning * detuning + 4.0 * mu).sqrt();
            vec![(detuning - r) / 2.0, (detuning + r) / 2.0]
        };
        let py = &pair.p * y * c(p, 0.0);
        let sy = pair.s.adjoint() * y * c(s, 0.0);
        for eps in roots {
            let mut v = CVector::zeros(layout.dim());
            if collapsed {
                v.rows_mut(layout.n_g, layout.n_e).copy_from(y);
            } else {
                v.rows_mut(0, layout.n_g).copy_from(&py);
                v.rows_mut(layout.n_g, layout.n_e).copy_from(&(y * c(eps, 0.0)));
                v.rows_mut(layout.n_g + layout.n_e, layout.n_f).copy_from(&sy);
            }
            let n = v.norm();
            out.push(BrightState { eigenvalue: eps, mu, y: y.clone(), vector: v / c(n, 0.0) });
        }
    }
    out.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    out
}

fn roots_collapsed(mu: f64, scale: f64) -> bool {
    mu <= MU_TOL * scale || scale == 0.0
}

/// Bright states from the N_e×N_e problem p²P̃†P̃ + s²Σ̃Σ̃† in the Stokes MS basis.
/// The construction holds for any size ordering.
pub fn bright_states_case_a(pair: &CouplingPair, dec: &MsDecomposition, detuning: f64, p: f64, s: f64) -> Vec<BrightState> {
    let ne = pair.n_e();
    let pt = &pair.p * dec.b.adjoint();
    let mut k = pt.adjoint() * &pt * c(p * p, 0.0);
    for (j, &sig) in dec.sigma.iter().enumerate() {
        k[(j, j)] += c(s * s * sig * sig, 0.0);
    }
    let (mus, vecs) = hermitian_eigen(&k);
    let b_dag = dec.b.adjoint();
    let ys: Vec<CVector> = (0..ne).map(|j| &b_dag * vecs.column(j)).collect();
    assemble(pair, detuning, p, s, &mus, &ys)
}

/// Bright states from the two-block problem in the basis of both MS stages:
/// p²X†X + s²diag(Σ², 0) with X = A′P(B′B)† carrying the P̃, P̃′ and Π blocks.
pub fn bright_states_case_c(
    pair: &CouplingPair,
    dec: &MsDecomposition,
    second: &SecondStageMs,
    detuning: f64,
    p: f64,
    s: f64,
) -> Vec<BrightState> {
    let (ng, ne) = (pair.n_g(), pair.n_e());
    let u = combined_unitary(dec, second);
    let ue = u.view((ng, ng), (ne, ne)).into_owned();
    let x = &second.a_prime * &pair.p * ue.adjoint();
    let mut k = x.adjoint() * &x * c(p * p, 0.0);
    for j in 0..dec.coupled_count() {
        k[(j, j)] += c(s * s * dec.sigma[j] * dec.sigma[j], 0.0);
    }
    let (mus, vecs) = hermitian_eigen(&k);
    let ue_dag = ue.adjoint();
    let ys: Vec<CVector> = (0..ne).map(|j| &ue_dag * vecs.column(j)).collect();
    assemble(pair, detuning, p, s, &mus, &ys)
}

/// Bright states for any linkage.
pub fn bright_states(pair: &CouplingPair, dec: &MsDecomposition, detuning: f64, p: f64, s: f64) -> Vec<BrightState> {
    bright_states_case_a(pair, dec, detuning, p, s)
}
