//! Closed-form Morris-Shore matrices, eigenvalues and dark vectors for the
//! σ±-coupled J=1↔2↔3 and J=1↔2↔1 linkages.
//!
//! These are kept independent of the numeric pipeline so the two can be compared.
//! Matrices follow the convention S̃ = B S A†: rows of B are e states, rows of A are
//! f states, each in ascending M.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, cis, CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("normalization {which} vanishes at θ = {theta}")]
    DegenerateNormalization { which: &'static str, theta: f64 },
}

/// Carrier phases of the two fields: Ω^(+) ∝ e^{iφ}, Ω^(−) ∝ e^{iψ}.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub phi_p: f64,
    pub psi_p: f64,
    pub phi_s: f64,
    pub psi_s: f64,
}

impl Phases {
    pub fn new(phi_p: f64, psi_p: f64, phi_s: f64, psi_s: f64) -> Self {
        Phases { phi_p, psi_p, phi_s, psi_s }
    }
}

const NORM_FLOOR: f64 = 1e-12;

fn normalized_row(entries: &[C64], which: &'static str, theta: f64) -> Result<Vec<C64>, OracleError> {
    let n = entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(n.is_finite() && n >= NORM_FLOOR) {
        return Err(OracleError::DegenerateNormalization { which, theta });
    }
    Ok(entries.iter().map(|z| z / n).collect())
}

fn matrix_from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let ncols = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

// ---------------------------------------------------------------- 1 ↔ 2 ↔ 3

/// Auxiliary quantities of the cubic for the (2, 3, 4) subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub z: f64,
}

pub fn cubic_coefficients_123(theta: f64) -> CubicCoefficients {
    let (c4, c8, c12) = ((4.0 * theta).cos(), (8.0 * theta).cos(), (12.0 * theta).cos());
    let u = 0.75 * (146004.0 * c12 + 857454.0 * c8 + 2234532.0 * c4 + 1524810.0).sqrt();
    let v = 2.0 * u / (839.0 + 909.0 * c4);
    let w = (73002.0 * c12 + 428727.0 * c8 + 1117266.0 * c4 + 762405.0) / (22960.0 * u + 19320.0 * u * c4);
    let z = (709.0 * c4 + 923.0) / (14490.0 * c4 + 17220.0);
    CubicCoefficients { u, v, w, z }
}

/// Eigenvalues λ_k, k = 1, 2, 3, of S S† for the (2, 3, 4) subsystem in units where
/// the MS Rabi frequencies are σ_k = √(7/20 · λ_k) Ω_S.
pub fn eigvals_123(theta: f64) -> [f64; 3] {
    let CubicCoefficients { v, w, z, .. } = cubic_coefficients_123(theta);
    let mut out = [0.0; 3];
    for (i, lam) in out.iter_mut().enumerate() {
        let k = (i + 1) as f64;
        let arg = (1.0 - k) / 3.0 * PI + v.atan() / 3.0;
        *lam = z + w / arg.tan();
    }
    out
}

/// Conversion from λ_k to (σ_k/Ω_S)².
pub const SIGMA_SCALE_123: f64 = 7.0 / 20.0;

fn p_a_123(x: f64, theta: f64, ph: &Phases) -> [C64; 4] {
    let (s, co) = (theta.sin(), theta.cos());
    let (c2, c4) = ((2.0 * theta).cos(), (4.0 * theta).cos());
    let d = ph.psi_s - ph.phi_s;
    let r15 = 15f64.sqrt();
    [
        cis(2.0 * d) * (s / 8.0 * (14700.0 * x * x - 980.0 * (2.0 + c2) * x + c4 + 56.0 * c2 + 63.0)),
        cis(d) * (r15 / 24.0 * co * (2940.0 * x * x - (308.0 + 280.0 * c2) * x + 3.0 * c4 + 12.0 * c2 + 9.0)),
        c(r15 / 8.0 * s * (28.0 * (1.0 + c2) * x - c4 - 4.0 * c2 - 3.0), 0.0),
        cis(-d) * (co / 8.0 * (1.0 - c4)),
    ]
}

fn p_b_123(x: f64, theta: f64, ph: &Phases) -> [C64; 3] {
    let (c2, c4) = ((2.0 * theta).cos(), (4.0 * theta).cos());
    let s2 = (2.0 * theta).sin();
    let d = ph.psi_s - ph.phi_s;
    // p₁^(A)/sinθ with the sinθ cancelled so θ = 0 stays finite
    let p1 = cis(d) * ((14700.0 * x * x - 980.0 * (2.0 + c2) * x + c4 + 56.0 * c2 + 63.0) / 8.0);
    [p1, c(6f64.sqrt() / 12.0 * s2 * (105.0 * x - 7.0 * c2 - 8.0), 0.0), cis(-d) * (s2 * s2 / 4.0)]
}

/// Analytic MS matrices (A: 4×4 on f, B: 3×3 on e) for the (2, 3, 4) subsystem.
pub fn ms_matrices_123(theta: f64, phases: &Phases) -> Result<(CMatrix, CMatrix), OracleError> {
    let lambda = eigvals_123(theta);
    let d = phases.psi_s - phases.phi_s;
    let mut a_rows = Vec::with_capacity(4);
    let mut b_rows = Vec::with_capacity(3);
    for &x in &lambda {
        a_rows.push(normalized_row(&p_a_123(x, theta, phases), "n^(A)", theta)?);
        b_rows.push(normalized_row(&p_b_123(x, theta, phases), "n^(B)", theta)?);
    }
    let cot = theta.cos() / theta.sin();
    let r15 = 15f64.sqrt();
    let dark = [-cis(2.0 * d) * cot.powi(3), cis(d) * (r15 * cot * cot), c(-r15 * cot, 0.0), cis(-d)];
    a_rows.push(normalized_row(&dark, "n_d^(A)", theta)?);
    let a = matrix_from_rows(&a_rows) * cis(phases.phi_s);
    Ok((a, matrix_from_rows(&b_rows)))
}

/// Dark-state g vectors x₀^(1), x₀^(2) of the (2, 3, 4) subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkVectors123 {
    pub u_prime: C64,
    pub v_prime: f64,
    pub chi: f64,
    pub xi: f64,
    pub x0: [CVector; 2],
}

pub fn dark_vectors_123(eta: f64, theta: f64, ph: &Phases) -> DarkVectors123 {
    let ds = ph.phi_s - ph.psi_s;
    let dp = ph.phi_p - ph.psi_p;
    let s2t = (2.0 * theta).sin();
    let c2t = (2.0 * theta).cos();
    let u_prime = cis(ds) * (7.0 / 60.0 * s2t * (-8.0 + 7.0 * c2t * (2.0 * eta).cos()))
        + cis(dp) * (2.0 * eta).sin() * (c(7.0 / 24.0, 0.0) + (c(343.0 / 360.0, 0.0) + cis(2.0 * (ds - dp)) * (7.0 / 40.0)) * (s2t * s2t));
    let v_prime = 49.0 / 60.0 * (ds - dp).cos() * (2.0 * eta).sin() * (4.0 * theta).sin()
        + (301.0 / 36.0 + 203.0 / 90.0 * c2t * c2t) * (2.0 * eta).cos()
        - 49.0 / 5.0 * c2t;
    let chi = if v_prime == 0.0 { FRAC_PI_4 } else { 0.5 * (2.0 * u_prime.norm() / v_prime).atan() };
    let xi = u_prime.arg();
    let e = cis(xi);
    let x1 = CVector::from_vec(vec![e * chi.sin(), c(chi.cos(), 0.0)]);
    let x2 = CVector::from_vec(vec![e * chi.cos(), c(-chi.sin(), 0.0)]);
    DarkVectors123 { u_prime, v_prime, chi, xi, x0: [x1, x2] }
}

/// Everything the closed forms give for the (2, 3, 4) subsystem at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analytic123 {
    pub eta: f64,
    pub theta: f64,
    pub phases: Phases,
    pub coefficients: CubicCoefficients,
    pub lambda: [f64; 3],
    pub a: CMatrix,
    pub b: CMatrix,
    pub dark: DarkVectors123,
}

impl Analytic123 {
    pub fn new(eta: f64, theta: f64, phases: Phases) -> Result<Self, OracleError> {
        let (a, b) = ms_matrices_123(theta, &phases)?;
        Ok(Analytic123 {
            eta,
            theta,
            phases,
            coefficients: cubic_coefficients_123(theta),
            lambda: eigvals_123(theta),
            a,
            b,
            dark: dark_vectors_123(eta, theta, &phases),
        })
    }
}

// ---------------------------------------------------------------- 1 ↔ 2 ↔ 1

/// Eigenvalues of S S† for the twin-diamond subsystem, with σ_k = √λ_k Ω_S/2.
pub fn eigvals_121(theta: f64) -> [f64; 2] {
    let c2 = (2.0 * theta).cos();
    let r = (24.0 * c2 * c2 + 1.0).sqrt();
    [(7.0 + r) / 100.0, (7.0 - r) / 100.0]
}

/// Conversion from λ_k to (σ_k/Ω_S)².
pub const SIGMA_SCALE_121: f64 = 0.25;

/// Phase convention for the uncoupled-e row B_b. With `Swapped` the factors e^{±i(ψ_S−φ_S)}
/// sit on the wrong entries, which leaves B_b non-orthogonal to B_a whenever φ_S ≠ ψ_S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncoupledRowPhases {
    Swapped,
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ms121 {
    /// 2×2 on the f states M = −1, 1.
    pub a: CMatrix,
    /// 2×3 on the e states M = −2, 0, 2, rows coupled to f.
    pub b_a: CMatrix,
    /// 1×3 uncoupled e row.
    pub b_b: CMatrix,
}

impl Ms121 {
    pub fn b(&self) -> CMatrix {
        let mut b = CMatrix::zeros(3, 3);
        b.rows_mut(0, 2).copy_from(&self.b_a);
        b.rows_mut(2, 1).copy_from(&self.b_b);
        b
    }
}

pub fn ms_matrices_121(theta: f64, ph: &Phases, form: UncoupledRowPhases) -> Result<Ms121, OracleError> {
    let (s, co) = (theta.sin(), theta.cos());
    let (s2, c2) = (s * s, co * co);
    let d = ph.psi_s - ph.phi_s;
    let lambda = eigvals_121(theta);
    let mut a_rows = Vec::new();
    let mut b_rows = Vec::new();
    for &x in &lambda {
        let pa = [c(-1.0 - 5.0 * s2 + 50.0 * x, 0.0), cis(-d) * (s * co)];
        a_rows.push(normalized_row(&pa, "n^(A)", theta)?);
        let pb = [
            -cis(d) * (c2 * (7.0 * s2 + c2 - 50.0 * x)),
            c(6f64.sqrt() / 4.0 * (4.0 * theta).sin(), 0.0),
            cis(-d) * (s2 * (7.0 * c2 + s2 - 50.0 * x)),
        ];
        b_rows.push(normalized_row(&pb, "n^(B)", theta)?);
    }
    let signs = [((4.0 * theta).sin() * s).signum(), co.signum()];
    for (row, sg) in b_rows.iter_mut().zip(signs) {
        for z in row.iter_mut() {
            *z *= sg;
        }
    }
    let phase = match form {
        UncoupledRowPhases::Swapped => -d,
        UncoupledRowPhases::Consistent => d,
    };
    let dark = [cis(phase) * s2, c(-6f64.sqrt() * s * co, 0.0), cis(-phase) * c2];
    let n_d = (1.0 + (2.0 * theta).sin().powi(2)).sqrt();
    let b_b = CMatrix::from_fn(1, 3, |_, j| dark[j] / n_d);
    Ok(Ms121 { a: matrix_from_rows(&a_rows) * cis(ph.psi_s), b_a: matrix_from_rows(&b_rows), b_b })
}

/// Second-stage pump rotation A′ on the g states M = −1, 1.
pub fn a_prime_121(theta: f64, ph: &Phases) -> CMatrix {
    let d = ph.psi_s - ph.phi_s;
    let sum = ph.phi_p + ph.psi_p;
    let (s, co) = (theta.sin(), theta.cos());
    CMatrix::from_row_slice(
        2,
        2,
        &[c(co, 0.0), cis(-d) * s, cis(-0.5 * (-d + sum)) * s, -cis(-0.5 * (d + sum)) * co],
    )
}

/// Pump coupling Π between g and the uncoupled e state of the twin diamond, and
/// whether the complete-transfer polarization condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiCondition {
    pub pi: C64,
    pub condition_met: bool,
}

/// Angular tolerance used when testing the polarization condition.
pub const CONDITION_TOL: f64 = 1e-9;

fn wrapped(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    r.min(period - r)
}

pub fn pi_and_condition_121(eta: f64, theta: f64, ph: &Phases, pump_rabi: f64) -> PiCondition {
    let delta = ph.psi_s - ph.phi_s + ph.phi_p - ph.psi_p;
    let pre = -pump_rabi / (2.0 * 3f64.sqrt() * (2.0 - (2.0 * theta).cos().powi(2)).sqrt());
    let pi = (cis(0.5 * delta) * (eta.cos() * theta.cos()) - cis(-0.5 * delta) * (eta.sin() * theta.sin())) * pre;
    PiCondition { pi, condition_met: polarization_condition(eta, theta, ph) }
}

/// δ = ψ_S − φ_S + φ_P − ψ_P = kπ together with θ + (−1)^k η = π/2 (mod π). The corner
/// where cosη·cosθ and sinη·sinθ both vanish also decouples the uncoupled e state.
pub fn polarization_condition(eta: f64, theta: f64, ph: &Phases) -> bool {
    let delta = ph.psi_s - ph.phi_s + ph.phi_p - ph.psi_p;
    let tol = CONDITION_TOL;
    if (eta.cos() * theta.cos()).abs() < tol && (eta.sin() * theta.sin()).abs() < tol {
        return true;
    }
    let even = wrapped(delta, 2.0 * PI) < tol && wrapped(theta + eta - FRAC_PI_2, PI) < tol;
    let odd = wrapped(delta - PI, 2.0 * PI) < tol && wrapped(theta - eta - FRAC_PI_2, PI) < tol;
    even || odd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analytic121 {
    pub eta: f64,
    pub theta: f64,
    pub phases: Phases,
    pub lambda: [f64; 2],
    pub ms: Ms121,
    pub b_b_swapped: CMatrix,
    pub a_prime: CMatrix,
    pub pi: C64,
    pub condition_met: bool,
}

impl Analytic121 {
    pub fn new(eta: f64, theta: f64, phases: Phases, pump_rabi: f64) -> Result<Self, OracleError> {
        let ms = ms_matrices_121(theta, &phases, UncoupledRowPhases::Consistent)?;
        let swapped = ms_matrices_121(theta, &phases, UncoupledRowPhases::Swapped)?;
        let pc = pi_and_condition_121(eta, theta, &phases, pump_rabi);
        Ok(Analytic121 {
            eta,
            theta,
            phases,
            lambda: eigvals_121(theta),
            ms,
            b_b_swapped: swapped.b_b,
            a_prime: a_prime_121(theta, &phases),
            pi: pc.pi,
            condition_met: pc.condition_met,
        })
    }
}

/// Row-wise phase equivalence: the largest |⟨analytic_i|numeric_j⟩| per analytic row,
/// minimized over rows. 1 means every analytic row matches some numeric row up to phase.
pub fn row_match(analytic: &CMatrix, numeric: &CMatrix) -> f64 {
    let overlap = analytic * numeric.adjoint();
    (0..overlap.nrows())
        .map(|i| (0..overlap.ncols()).map(|j| overlap[(i, j)].norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_residual;

    #[test]
    fn eigvals_121_special_angles() {
        let l0 = eigvals_121(0.0);
        assert_eq!(l0, [0.12, 0.02]);
        let l = eigvals_121(FRAC_PI_4);
        assert!((l[0] - 0.08).abs() < 1e-15 && (l[1] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn dark_row_at_quarter_pi() {
        let (a, _) = ms_matrices_123(FRAC_PI_4, &Phases::default()).unwrap();
        let expect = [-1.0, 15f64.sqrt(), -15f64.sqrt(), 1.0];
        for (j, e) in expect.iter().enumerate() {
            assert!((a[(3, j)] - c(e / 32f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_theta_reported() {
        assert!(matches!(ms_matrices_123(0.0, &Phases::default()), Err(OracleError::DegenerateNormalization { .. })));
    }

    #[test]
    fn dark_vectors_orthonormal() {
        let d = dark_vectors_123(1.3376, 0.4636, &Phases::new(1.1814, 0.0, 1.8925, 2.8198));
        assert!((d.x0[0].norm() - 1.0).abs() < 1e-14);
        assert!(d.x0[0].dotc(&d.x0[1]).norm() < 1e-14);
    }

    #[test]
    fn consistent_b_is_unitary_swapped_is_not() {
        let ph = Phases::new(0.2, 0.5, 0.9, 0.1);
        let good = ms_matrices_121(0.7, &ph, UncoupledRowPhases::Consistent).unwrap();
        let bad = ms_matrices_121(0.7, &ph, UncoupledRowPhases::Swapped).unwrap();
        assert!(unitarity_residual(&good.b()) < 1e-12);
        assert!(unitarity_residual(&bad.b()) > 1e-3);
        assert!(unitarity_residual(&a_prime_121(0.7, &ph)) < 1e-12);
    }

    #[test]
    fn fig_angles() {
        let ph = Phases::default();
        let ok = pi_and_condition_121(2.0 * PI / 5.0, PI / 10.0, &ph, 1.0);
        assert!(ok.pi.norm() < 1e-15 && ok.condition_met);
        let bad = pi_and_condition_121(2.0 * PI / 5.0, -PI / 7.0, &ph, 1.0);
        assert!(bad.pi.norm() > 0.1 && !bad.condition_met);
    }
}
