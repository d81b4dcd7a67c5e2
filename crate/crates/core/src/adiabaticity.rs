//! Adiabaticity of the dark subspace against the bright states along a pulse sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic_basis::{bright_states, BrightState, DarkStateFamily};
use crate::hamiltonian::{Detuning, PulseEnvelope, RwaHamiltonian};
use crate::linalg::{c, CVector};
use crate::morris_shore::{ms_decompose_with_tol, MsDecomposition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdiabaticityError {
    #[error("time grid too coarse near t = {at}: neighbouring dark states overlap only {overlap:.3}; use at least {suggested_samples} samples")]
    GridTooCoarse { at: f64, overlap: f64, suggested_samples: usize },
    #[error("time grid needs at least two strictly increasing points")]
    BadGrid,
    #[error("bright states are only defined for a uniform detuning")]
    NonUniformDetuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityConfig {
    /// Ratios below this count as "≪ 1".
    pub threshold: f64,
    /// Bright states with |ε| below this fraction of the coupling scale are excluded.
    pub eigenvalue_tol: f64,
    /// Singular values below this fraction of the largest count as vanishing.
    pub zero_tol: f64,
    /// Minimum overlap of dark states two grid spacings apart.
    pub min_overlap: f64,
    /// Only times where the stronger coupling reaches this fraction of its peak over the
    /// grid enter the maximum. In the far tails of Gaussian pulses ε shrinks faster than
    /// the dark-state rotation, so the ratio grows without bound where nothing happens.
    pub relevance: f64,
}

impl Default for AdiabaticityConfig {
    fn default() -> Self {
        AdiabaticityConfig { threshold: 0.1, eigenvalue_tol: 1e-10, zero_tol: 1e-10, min_overlap: 0.9, relevance: 1e-2 }
    }
}

/// Ratio ħ|⟨Φ₀^(l)|Φ̇_k⟩|/|ε_k| for one (dark, bright) pair over the grid. Bright
/// states are indexed by ascending eigenvalue at each time; `None` marks times where
/// state k is absent or excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeries {
    pub dark: usize,
    pub bright: usize,
    pub ratio: Vec<Option<f64>>,
    /// Closed form with the Wronskian s·ṗ − p·ṡ.
    pub closed_form: Vec<Option<f64>>,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBright {
    pub time_index: usize,
    pub bright: usize,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioLocation {
    pub dark: usize,
    pub bright: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub times: Vec<f64>,
    pub pairs: Vec<PairSeries>,
    pub max_ratio: f64,
    pub max_location: Option<RatioLocation>,
    pub threshold: f64,
    /// First and last grid times inside the relevance window.
    pub window: (f64, f64),
    /// max_ratio < threshold
    pub adiabatic: bool,
    pub excluded: Vec<ExcludedBright>,
    /// Largest |finite difference − closed form| over the grid.
    pub closed_form_max_deviation: f64,
    /// Richardson estimate of the finite-difference truncation error at the same point.
    pub truncation_estimate: f64,
}

fn aligned(v: CVector, reference: &CVector) -> CVector {
    let ov = reference.dotc(&v);
    if ov.norm() == 0.0 {
        return v;
    }
    v * (ov.conj() / ov.norm())
}

fn dark_derivative(family: &DarkStateFamily, h: &RwaHamiltonian, l: usize, t: f64, step: f64) -> (CVector, f64) {
    let (p, s) = h.envelopes(t);
    let here = family.vector(l, p, s);
    let (pa, sa) = h.envelopes(t - step);
    let (pb, sb) = h.envelopes(t + step);
    let before = aligned(family.vector(l, pa, sa), &here);
    let after = aligned(family.vector(l, pb, sb), &here);
    let overlap = before.dotc(&after).norm();
    ((after - before) / c(2.0 * step, 0.0), overlap)
}

fn coupling_scale(h: &RwaHamiltonian, p: f64, s: f64, delta: f64) -> f64 {
    (p * h.couplings.p.norm()).max(s * h.couplings.s.norm()).max(delta.abs())
}

fn closed_form_ratio(family: &DarkStateFamily, h: &RwaHamiltonian, l: usize, b: &BrightState, t: f64) -> f64 {
    let member = &family.members[l];
    let lay = family.layout;
    let bright_outer = b.vector.rows(0, lay.n_g).norm() + b.vector.rows(lay.n_g + lay.n_e, lay.n_f).norm();
    if member.is_constant() || bright_outer == 0.0 {
        return 0.0;
    }
    let (p, s) = h.envelopes(t);
    let (pd, sd) = h.envelope_derivatives(t);
    let (p, s) = if p == 0.0 && s == 0.0 { (0.0, 1.0) } else { (p, s) };
    let pair = &h.couplings;
    let py = &pair.p * &b.y;
    let sy = pair.s.adjoint() * &b.y;
    let n0 = (s * s * member.g_part.norm_squared() + p * p * member.f_part.norm_squared()).sqrt();
    let nk = (p * p * py.norm_squared() + b.eigenvalue * b.eigenvalue * b.y.norm_squared() + s * s * sy.norm_squared()).sqrt();
    let element = member.g_part.dotc(&py).norm();
    (s * pd - p * sd).abs() * element / (n0 * nk * b.eigenvalue.abs())
}

/// Scans the adiabaticity ratios over `times`.
///
/// The derivative is taken on the dark side, ⟨Φ₀|Φ̇_k⟩ = −⟨Φ̇₀|Φ_k⟩, so bright labels
/// need not be followed through crossings. Central differences use the grid spacing
/// as step; a second pass at twice the step gives the truncation estimate.
pub fn adiabaticity_scan(
    family: &DarkStateFamily,
    h: &RwaHamiltonian,
    times: &[f64],
    cfg: &AdiabaticityConfig,
) -> Result<AdiabaticityReport, AdiabaticityError> {
    let delta = match h.detuning {
        Detuning::Uniform(d) => d,
        Detuning::PerState(_) => return Err(AdiabaticityError::NonUniformDetuning),
    };
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AdiabaticityError::BadGrid);
    }
    let dec = ms_decompose_with_tol(&h.couplings.s, cfg.zero_tol);
    let nd = family.count();
    let ne = h.couplings.n_e();
    let max_brights = 2 * ne;
    let mut pairs: Vec<PairSeries> = (0..nd)
        .flat_map(|l| (0..max_brights).map(move |k| (l, k)))
        .map(|(dark, bright)| PairSeries {
            dark,
            bright,
            ratio: vec![None; times.len()],
            closed_form: vec![None; times.len()],
            max: 0.0,
        })
        .collect();
    let mut excluded = Vec::new();
    let mut max_ratio = 0.0;
    let mut max_location = None;
    let mut deviation = 0.0f64;
    let mut truncation = 0.0f64;

    let strength: Vec<f64> = times
        .iter()
        .map(|&t| {
            let (p, s) = h.envelopes(t);
            (p * h.couplings.p.norm()).max(s * h.couplings.s.norm())
        })
        .collect();
    let peak = strength.iter().cloned().fold(0.0, f64::max);
    let relevant: Vec<bool> = strength.iter().map(|&x| peak > 0.0 && x >= cfg.relevance * peak).collect();
    let first = relevant.iter().position(|&r| r).unwrap_or(0);
    let last = relevant.iter().rposition(|&r| r).unwrap_or(times.len() - 1);

    for (i, &t) in times.iter().enumerate() {
        let step = if i + 1 < times.len() { times[i + 1] - t } else { t - times[i - 1] };
        let (p, s) = h.envelopes(t);
        let brights = brights_at(h, &dec, delta, p, s);
        let scale = coupling_scale(h, p, s, delta);
        for l in 0..nd {
            let (d1, overlap) = dark_derivative(family, h, l, t, step);
            if overlap < cfg.min_overlap {
                let factor = ((1.0 - cfg.min_overlap) / (1.0 - overlap).max(1e-16)).sqrt().max(1e-3);
                let suggested = ((times.len() as f64) / factor).ceil() as usize + 1;
                return Err(AdiabaticityError::GridTooCoarse { at: t, overlap, suggested_samples: suggested.max(2 * times.len()) });
            }
            let (d2, _) = dark_derivative(family, h, l, t, 2.0 * step);
            for (k, b) in brights.iter().enumerate() {
                if b.eigenvalue.abs() <= cfg.eigenvalue_tol * scale || scale == 0.0 {
                    if l == 0 {
                        excluded.push(ExcludedBright { time_index: i, bright: k, eigenvalue: b.eigenvalue });
                    }
                    continue;
                }
                let r1 = b.vector.dotc(&d1).norm() / b.eigenvalue.abs();
                let r2 = b.vector.dotc(&d2).norm() / b.eigenvalue.abs();
                let closed = closed_form_ratio(family, h, l, b, t);
                let series = &mut pairs[l * max_brights + k];
                series.ratio[i] = Some(r1);
                series.closed_form[i] = Some(closed);
                if !relevant[i] {
                    continue;
                }
                if r1 > series.max {
                    series.max = r1;
                }
                if r1 > max_ratio {
                    max_ratio = r1;
                    max_location = Some(RatioLocation { dark: l, bright: k, time: t });
                }
                let dev = (r1 - closed).abs();
                if dev > deviation {
                    deviation = dev;
                    truncation = (r1 - r2).abs() / 3.0;
                }
            }
        }
    }
    pairs.retain(|p| p.ratio.iter().any(Option::is_some));
    Ok(AdiabaticityReport {
        times: times.to_vec(),
        pairs,
        max_ratio,
        max_location,
        threshold: cfg.threshold,
        window: (times[first], times[last]),
        adiabatic: max_ratio < cfg.threshold,
        excluded,
        closed_form_max_deviation: deviation,
        truncation_estimate: truncation,
    })
}

fn brights_at(h: &RwaHamiltonian, dec: &MsDecomposition, delta: f64, p: f64, s: f64) -> Vec<BrightState> {
    bright_states(&h.couplings, dec, delta, p, s)
}

/// Classic nondegenerate criterion at one instant, with Rabi frequencies P, S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalPoint {
    pub omega0: f64,
    /// Mixing angle with tan 2φ = Ω₀/Δ, in [0, π/2].
    pub phi: f64,
    pub lhs_sin: f64,
    pub rhs_cot: f64,
    pub lhs_cos: f64,
    pub rhs_tan: f64,
    /// lhs/rhs for the sin/cot pair (the upper bright state).
    pub ratio_sin_cot: f64,
    /// lhs/rhs for the cos/tan pair (the lower bright state).
    pub ratio_cos_tan: f64,
    pub stricter: f64,
}

fn safe_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn conventional_point(p: f64, p_dot: f64, s: f64, s_dot: f64, delta: f64) -> ConventionalPoint {
    let omega0 = (p * p + s * s).sqrt();
    // Δ = 0 gives atan2(Ω₀, 0) = π/2, the φ = π/4 limit
    let phi = 0.5 * omega0.atan2(delta);
    let wronskian = if omega0 > 0.0 { (s * p_dot - p * s_dot).abs() / (omega0 * omega0) } else { 0.0 };
    let lhs_sin = wronskian * phi.sin().abs();
    let lhs_cos = wronskian * phi.cos().abs();
    let rhs_cot = omega0 * (phi.cos() / phi.sin()).abs();
    let rhs_tan = omega0 * phi.tan().abs();
    let ratio_sin_cot = safe_ratio(lhs_sin, rhs_cot);
    let ratio_cos_tan = safe_ratio(lhs_cos, rhs_tan);
    ConventionalPoint {
        omega0,
        phi,
        lhs_sin,
        rhs_cot,
        lhs_cos,
        rhs_tan,
        ratio_sin_cot,
        ratio_cos_tan,
        stricter: ratio_sin_cot.max(ratio_cos_tan),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalCurves {
    pub times: Vec<f64>,
    pub points: Vec<ConventionalPoint>,
    pub max_stricter: f64,
}

/// Evaluates the classic criterion with P(t) = Ω_P p(t), S(t) = Ω_S s(t).
///
/// With couplings Ω/2 in the Hamiltonian the bright energies are |ε| = rhs/2, so the
/// scan ratio of a scalar system equals twice the matching lhs/rhs here.
pub fn conventional_adiabaticity(
    pump: &PulseEnvelope,
    stokes: &PulseEnvelope,
    omega_p: f64,
    omega_s: f64,
    delta: f64,
    times: &[f64],
) -> ConventionalCurves {
    let points: Vec<ConventionalPoint> = times
        .iter()
        .map(|&t| {
            conventional_point(
                omega_p * pump.value(t),
                omega_p * pump.derivative(t),
                omega_s * stokes.value(t),
                omega_s * stokes.derivative(t),
                delta,
            )
        })
        .collect();
    let max_stricter = points.iter().map(|p| p.stricter).fold(0.0, f64::max);
    ConventionalCurves { times: times.to_vec(), points, max_stricter }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zero_detuning_is_quarter_pi() {
        let pt = conventional_point(1.0, 0.3, 2.0, -0.1, 0.0);
        assert!((pt.phi - FRAC_PI_4).abs() < 1e-15);
        assert!((pt.ratio_sin_cot - pt.ratio_cos_tan).abs() < 1e-15);
        let expect = (2.0 * 0.3 + 0.1) / 5.0 * FRAC_PI_4.sin() / 5f64.sqrt();
        assert!((pt.ratio_sin_cot - expect).abs() < 1e-15);
    }

    #[test]
    fn large_detuning_stays_finite() {
        let pt = conventional_point(1.0, 0.3, 2.0, -0.1, 1e8);
        assert!(pt.ratio_sin_cot.is_finite() && pt.ratio_cos_tan.is_finite());
        assert!(pt.ratio_sin_cot < 1e-8);
    }

    #[test]
    fn no_field_no_ratio() {
        let pt = conventional_point(0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(pt.stricter, 0.0);
    }
}
