//! Morris-Shore transformations.
//!
//! Numerically the MS transformation of a coupling block X is its singular value
//! decomposition: `B X A† = X̃` with X̃ quasi-diagonal, real and nonnegative on the
//! diagonal, sorted descending. `B` acts on the row manifold, `A` on the column
//! manifold. The SVD is a one-sided complex Jacobi iteration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, complete_basis, max_abs, orthonormalize, CMatrix, CVector, C64};

pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MsError {
    #[error("the first-stage decomposition leaves no uncoupled e states; no second stage exists")]
    NoUncoupledStates,
    #[error("block dimensions disagree: {0}")]
    Dimensions(String),
}

/// Thin result of the Jacobi SVD: X = U diag(σ) V†, U and V square unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

const MAX_SWEEPS: usize = 80;

/// Complex one-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(x: &CMatrix) -> Svd {
    let (m, n) = x.shape();
    let mut w = x.clone();
    let mut v = CMatrix::identity(n, n);
    let eps = f64::EPSILON;
    // columns below this squared norm are numerically null and left alone
    let null_floor = (eps * x.norm()).powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for j in 0..n {
            for k in (j + 1)..n {
                let alpha = w.column(j).norm_squared();
                let beta = w.column(k).norm_squared();
                let gamma = w.column(j).dotc(&w.column(k));
                let g = gamma.norm();
                if g == 0.0 || alpha.min(beta) <= null_floor || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = C64::from_polar(1.0, gamma.arg());
                // make the overlap real before the plane rotation
                let conj_phase = phase.conj();
                for i in 0..m {
                    w[(i, k)] *= conj_phase;
                }
                for i in 0..n {
                    v[(i, k)] *= conj_phase;
                }
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..m {
                    let (a, b) = (w[(i, j)], w[(i, k)]);
                    w[(i, j)] = a * cs - b * sn;
                    w[(i, k)] = a * sn + b * cs;
                }
                for i in 0..n {
                    let (a, b) = (v[(i, j)], v[(i, k)]);
                    v[(i, j)] = a * cs - b * sn;
                    v[(i, k)] = a * sn + b * cs;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let r = m.min(n);
    let sigma_max = order.first().map_or(0.0, |&i| norms[i]);
    let floor = sigma_max * eps * (m.max(n) as f64) * 16.0;
    let mut v_sorted = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v_sorted.set_column(col, &v.column(i));
    }
    let mut sigma = Vec::with_capacity(r);
    let mut u_cols: Vec<CVector> = Vec::new();
    for &i in order.iter().take(r) {
        sigma.push(norms[i]);
        if norms[i] > floor && norms[i] > 0.0 {
            u_cols.push(w.column(i) / c(norms[i], 0.0));
        }
    }
    let mut u_lead = CMatrix::zeros(m, u_cols.len());
    for (j, col) in u_cols.iter().enumerate() {
        u_lead.set_column(j, col);
    }
    let u_lead = if u_lead.ncols() > 0 { orthonormalize(&u_lead) } else { u_lead };
    let u = complete_basis(&u_lead, m);
    Svd { u, sigma, v: v_sorted }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// More columns than rows: X̃ = [Σ 0].
    ColumnsPadded,
    Square,
    /// More rows than columns: X̃ = [Σ; 0].
    RowsPadded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MsDecomposition {
    /// Unitary on the column manifold (f for the Stokes transition, e for the pump).
    pub a: CMatrix,
    /// Unitary on the row manifold (e for the Stokes transition, g for the pump).
    pub b: CMatrix,
    pub sigma: Vec<f64>,
    pub structure: Structure,
    /// MS row states without a partner (structural padding plus null singular values).
    pub uncoupled_rows: Vec<usize>,
    pub uncoupled_cols: Vec<usize>,
    pub null_count: usize,
    pub zero_tol: f64,
}

impl MsDecomposition {
    pub fn rows(&self) -> usize {
        self.b.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.nrows()
    }

    /// Number of MS pairs with a non-vanishing Rabi frequency.
    pub fn coupled_count(&self) -> usize {
        self.sigma.len() - self.null_count
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// B X A†.
    pub fn transformed(&self, x: &CMatrix) -> CMatrix {
        &self.b * x * self.a.adjoint()
    }

    /// Quasi-diagonal matrix X̃ with the singular values.
    pub fn sigma_matrix(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.rows(), self.cols());
        for (k, &v) in self.sigma.iter().enumerate() {
            s[(k, k)] = c(v, 0.0);
        }
        s
    }

    /// Largest entry of B X A† − X̃.
    pub fn structure_residual(&self, x: &CMatrix) -> f64 {
        max_abs(&(self.transformed(x) - self.sigma_matrix()))
    }
}

/// Singular values below `zero_tol * scale` are null; `scale` defaults to σ_max.
fn count_null(sigma: &[f64], zero_tol: f64, scale: Option<f64>) -> usize {
    let reference = scale.unwrap_or_else(|| sigma.first().copied().unwrap_or(0.0));
    sigma.iter().filter(|&&s| reference == 0.0 || s < zero_tol * reference).count()
}

fn decompose(x: &CMatrix, zero_tol: f64) -> MsDecomposition {
    decompose_scaled(x, zero_tol, None)
}

fn decompose_scaled(x: &CMatrix, zero_tol: f64, scale: Option<f64>) -> MsDecomposition {
    let (m, n) = x.shape();
    let svd = jacobi_svd(x);
    let null_count = count_null(&svd.sigma, zero_tol, scale);
    let coupled = svd.sigma.len() - null_count;
    let structure = match m.cmp(&n) {
        std::cmp::Ordering::Less => Structure::ColumnsPadded,
        std::cmp::Ordering::Equal => Structure::Square,
        std::cmp::Ordering::Greater => Structure::RowsPadded,
    };
    MsDecomposition {
        a: svd.v.adjoint(),
        b: svd.u.adjoint(),
        sigma: svd.sigma,
        structure,
        uncoupled_rows: (coupled..m).collect(),
        uncoupled_cols: (coupled..n).collect(),
        null_count,
        zero_tol,
    }
}

/// MS transformation of the Stokes block S (N_e×N_f): B acts on e, A on f.
pub fn ms_decompose(s: &CMatrix) -> MsDecomposition {
    decompose(s, DEFAULT_ZERO_TOL)
}

pub fn ms_decompose_with_tol(s: &CMatrix, zero_tol: f64) -> MsDecomposition {
    decompose(s, zero_tol)
}

/// MS transformation of the pump block P (N_g×N_e): B acts on g, A on e, so that
/// B P A† = [Π̃; 0] when N_g > N_e.
pub fn pump_side_ms(p: &CMatrix) -> MsDecomposition {
    decompose(p, DEFAULT_ZERO_TOL)
}

pub fn pump_side_ms_with_tol(p: &CMatrix, zero_tol: f64) -> MsDecomposition {
    decompose(p, zero_tol)
}

/// Re-reads the null structure with a new threshold. Singular values are kept in
/// descending order, so vanishing ones already sit in the trailing corner and the
/// permutation is the identity.
pub fn reorder_singular(dec: &MsDecomposition, zero_tol: f64) -> MsDecomposition {
    let mut out = dec.clone();
    out.zero_tol = zero_tol;
    out.null_count = count_null(&dec.sigma, zero_tol, None);
    let coupled = dec.sigma.len() - out.null_count;
    out.uncoupled_rows = (coupled..dec.rows()).collect();
    out.uncoupled_cols = (coupled..dec.cols()).collect();
    out
}

/// Pump matrix in the first-stage e basis, split as P·B† = [P_a | P_b] where P_b
/// couples g to the e states left without a Stokes partner.
pub fn split_pump(p: &CMatrix, stokes: &MsDecomposition) -> Result<(CMatrix, CMatrix), MsError> {
    if p.ncols() != stokes.rows() {
        return Err(MsError::Dimensions(format!("P has {} columns, Stokes MS acts on {} e states", p.ncols(), stokes.rows())));
    }
    let nc = stokes.coupled_count();
    let ne = stokes.rows();
    if nc == ne {
        return Err(MsError::NoUncoupledStates);
    }
    let pt = p * stokes.b.adjoint();
    Ok((pt.columns(0, nc).into_owned(), pt.columns(nc, ne - nc).into_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondStageCase {
    /// Fewer uncoupled e states than g states: A′P_bB′† = [0; Π].
    Less,
    Equal,
    /// More uncoupled e states than g states: A′P_bB′† = [Π 0].
    Greater,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondStageMs {
    /// Unitary on g. Its first `n_free` rows span the g states with no coupling to
    /// the uncoupled e states.
    pub a_prime: CMatrix,
    /// Unitary on the uncoupled-e subspace.
    pub b_prime: CMatrix,
    /// Rows of A′P_a for the free g states.
    pub p_tilde: CMatrix,
    /// Rows of A′P_a for the g states coupled through Π.
    pub p_tilde_prime: CMatrix,
    /// Diagonal Π, square of size min(N_g, N_u).
    pub pi: CMatrix,
    pub pi_values: Vec<f64>,
    pub case: SecondStageCase,
    pub n_free: usize,
    pub pi_null_count: usize,
}

impl SecondStageMs {
    /// A′ P_b B′†.
    pub fn transformed_pb(&self, p_b: &CMatrix) -> CMatrix {
        &self.a_prime * p_b * self.b_prime.adjoint()
    }

    /// The block expected for A′P_bB′†.
    pub fn expected_pb(&self) -> CMatrix {
        let ng = self.a_prime.nrows();
        let nu = self.b_prime.nrows();
        let mut out = CMatrix::zeros(ng, nu);
        let k = self.pi.nrows();
        let row0 = self.n_free;
        out.view_mut((row0, 0), (k, k)).copy_from(&self.pi);
        out
    }
}

pub fn second_stage_ms(p_a: &CMatrix, p_b: &CMatrix) -> Result<SecondStageMs, MsError> {
    second_stage_ms_with_tol(p_a, p_b, DEFAULT_ZERO_TOL)
}

pub fn second_stage_ms_with_tol(p_a: &CMatrix, p_b: &CMatrix, zero_tol: f64) -> Result<SecondStageMs, MsError> {
    let ng = p_b.nrows();
    let nu = p_b.ncols();
    if nu == 0 {
        return Err(MsError::NoUncoupledStates);
    }
    if p_a.nrows() != ng {
        return Err(MsError::Dimensions(format!("P_a has {} rows, P_b has {}", p_a.nrows(), ng)));
    }
    // Π is judged against the whole pump coupling, not against itself
    let scale = p_a.norm().max(p_b.norm());
    let dec = decompose_scaled(p_b, zero_tol, Some(scale));
    let k = ng.min(nu);
    let (case, a_prime, n_free) = match nu.cmp(&ng) {
        std::cmp::Ordering::Less => {
            // free rows (structural zeros of the SVD) are moved to the top
            let free = ng - nu;
            let mut a = CMatrix::zeros(ng, ng);
            for r in 0..free {
                a.set_row(r, &dec.b.row(nu + r));
            }
            for r in 0..nu {
                a.set_row(free + r, &dec.b.row(r));
            }
            (SecondStageCase::Less, a, free)
        }
        std::cmp::Ordering::Equal => (SecondStageCase::Equal, dec.b.clone(), 0),
        std::cmp::Ordering::Greater => (SecondStageCase::Greater, dec.b.clone(), 0),
    };
    let pa_t = &a_prime * p_a;
    let p_tilde = pa_t.rows(0, n_free).into_owned();
    let p_tilde_prime = pa_t.rows(n_free, ng - n_free).into_owned();
    let pi_values: Vec<f64> = dec.sigma.iter().take(k).copied().collect();
    let pi = CMatrix::from_diagonal(&CVector::from_iterator(k, pi_values.iter().map(|&v| C64::new(v, 0.0))));
    Ok(SecondStageMs {
        a_prime,
        b_prime: dec.a.clone(),
        p_tilde,
        p_tilde_prime,
        pi,
        pi_null_count: dec.null_count,
        pi_values,
        case,
        n_free,
    })
}

/// Full two-stage unitary on the whole space: g by A′, e by diag(I_C, B′)·B, f by A.
pub fn combined_unitary(stokes: &MsDecomposition, second: &SecondStageMs) -> CMatrix {
    let ne = stokes.rows();
    let nc = stokes.coupled_count();
    let mut e_second = CMatrix::identity(ne, ne);
    e_second.view_mut((nc, nc), (ne - nc, ne - nc)).copy_from(&second.b_prime);
    let e_total = e_second * &stokes.b;
    crate::linalg::block_diag(&[&second.a_prime, &e_total, &stokes.a])
}
