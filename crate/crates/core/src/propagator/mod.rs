//! Time evolution: direct integration of the Schrödinger equation and the
//! adiabatic-limit transfer operator built from the dark states.

mod dopri;

pub use dopri::{IntegratorConfig, IntegratorStats};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic_basis::DarkStateFamily;
use crate::hamiltonian::{ManifoldLayout, RwaHamiltonian};
use crate::linalg::{c, hermitian_eigen, CMatrix, CVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("tolerance not reached within {steps} steps (stopped at t = {reached})")]
    StepBudget { steps: usize, reached: f64 },
    #[error("step size underflow at t = {at}")]
    StepUnderflow { at: f64 },
    #[error("initial state has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("initial state is not normalized (norm or trace {0})")]
    NotNormalized(f64),
    #[error("initial density matrix is not Hermitian positive semidefinite")]
    NotDensityMatrix,
    #[error("window [{0}, {1}] is empty or not finite")]
    BadWindow(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(v) => v.len(),
            InitialState::Mixed(m) => m.nrows(),
        }
    }

    pub fn density(&self) -> CMatrix {
        match self {
            InitialState::Pure(v) => v * v.adjoint(),
            InitialState::Mixed(m) => m.clone(),
        }
    }

    fn validate(&self, n: usize) -> Result<(), PropagationError> {
        if self.dim() != n {
            return Err(PropagationError::Dimension { expected: n, got: self.dim() });
        }
        match self {
            InitialState::Pure(v) => {
                let nrm = v.norm_squared();
                if (nrm - 1.0).abs() > 1e-10 {
                    return Err(PropagationError::NotNormalized(nrm));
                }
            }
            InitialState::Mixed(m) => {
                if crate::linalg::hermitian_residual(m) > 1e-12 {
                    return Err(PropagationError::NotDensityMatrix);
                }
                let (vals, _) = hermitian_eigen(m);
                if vals.first().is_some_and(|&v| v < -1e-12) {
                    return Err(PropagationError::NotDensityMatrix);
                }
                let tr = m.trace().re;
                if (tr - 1.0).abs() > 1e-10 {
                    return Err(PropagationError::NotNormalized(tr));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum States {
    Pure(Vec<CVector>),
    Mixed(Vec<CMatrix>),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: States,
    /// (P_g, P_e, P_f) at each time.
    pub populations: Vec<[f64; 3]>,
    pub layout: ManifoldLayout,
    pub stats: IntegratorStats,
    /// Largest |norm − 1| (pure) or |tr ρ − 1| (mixed) over the samples.
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn final_populations(&self) -> [f64; 3] {
        *self.populations.last().expect("trajectory has at least one sample")
    }

    pub fn final_density(&self) -> CMatrix {
        match &self.states {
            States::Pure(v) => {
                let x = v.last().expect("nonempty");
                x * x.adjoint()
            }
            States::Mixed(m) => m.last().expect("nonempty").clone(),
        }
    }

    pub fn final_state(&self) -> Option<&CVector> {
        match &self.states {
            States::Pure(v) => v.last(),
            States::Mixed(_) => None,
        }
    }

    /// Per-state populations at sample k.
    pub fn state_populations(&self, k: usize) -> Vec<f64> {
        match &self.states {
            States::Pure(v) => v[k].iter().map(|z| z.norm_sqr()).collect(),
            States::Mixed(m) => (0..m[k].nrows()).map(|i| m[k][(i, i)].re).collect(),
        }
    }

    /// CSV with a header row. Pure states: `t, re_0, im_0, ..., re_{N-1}, im_{N-1},
    /// P_g, P_e, P_f`. Mixed states: `t, rho_0_0, ..., rho_{N-1}_{N-1}, P_g, P_e, P_f`
    /// with the diagonal of ρ. Numbers carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.layout.dim();
        let mut out = String::from("t");
        match &self.states {
            States::Pure(_) => {
                for i in 0..n {
                    let _ = write!(out, ",re_{i},im_{i}");
                }
            }
            States::Mixed(_) => {
                for i in 0..n {
                    let _ = write!(out, ",rho_{i}_{i}");
                }
            }
        }
        out.push_str(",P_g,P_e,P_f\n");
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{}", fmt17(*t));
            match &self.states {
                States::Pure(v) => {
                    for z in v[k].iter() {
                        let _ = write!(out, ",{},{}", fmt17(z.re), fmt17(z.im));
                    }
                }
                States::Mixed(m) => {
                    for i in 0..n {
                        let _ = write!(out, ",{}", fmt17(m[k][(i, i)].re));
                    }
                }
            }
            let p = self.populations[k];
            let _ = writeln!(out, ",{},{},{}", fmt17(p[0]), fmt17(p[1]), fmt17(p[2]));
        }
        out
    }

    pub fn to_record(&self) -> TrajectoryRecord {
        let (amplitudes, density_diagonals) = match &self.states {
            States::Pure(v) => (Some(v.iter().map(|x| x.iter().map(|z| [z.re, z.im]).collect()).collect()), None),
            States::Mixed(_) => (None, Some((0..self.times.len()).map(|k| self.state_populations(k)).collect())),
        };
        TrajectoryRecord {
            layout: self.layout,
            times: self.times.clone(),
            populations: self.populations.clone(),
            amplitudes,
            density_diagonals,
            stats: self.stats,
            norm_drift: self.norm_drift,
        }
    }
}

/// Serializable trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub layout: ManifoldLayout,
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub amplitudes: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density_diagonals: Option<Vec<Vec<f64>>>,
    pub stats: IntegratorStats,
    pub norm_drift: f64,
}

/// Fixed 17-significant-digit scientific format.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn populations_of_vector(v: &CVector, layout: &ManifoldLayout) -> [f64; 3] {
    layout.ranges().map(|r| r.map(|i| v[i].norm_sqr()).sum())
}

pub fn populations_of_density(rho: &CMatrix, layout: &ManifoldLayout) -> [f64; 3] {
    layout.ranges().map(|r| r.map(|i| rho[(i, i)].re).sum())
}

/// Evenly spaced sample times including both ends.
pub fn time_grid(window: (f64, f64), samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|k| window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64).collect()
}

/// Integrates under the RWA Hamiltonian. Mixed states are propagated through the
/// evolution operator V, ρ(t) = V ρ₀ V†.
pub fn integrate(
    h: &RwaHamiltonian,
    initial: &InitialState,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, PropagationError> {
    integrate_with(|t| h.evaluate(t), h.layout(), initial, times, cfg)
}

/// Integrates under an arbitrary Hamiltonian function on the given layout.
pub fn integrate_with<H>(
    hfun: H,
    layout: ManifoldLayout,
    initial: &InitialState,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, PropagationError>
where
    H: Fn(f64) -> CMatrix,
{
    let n = layout.dim();
    initial.validate(n)?;
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(PropagationError::BadWindow(f64::NAN, f64::NAN));
    };
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PropagationError::BadWindow(t0, t1));
    }
    let rhs = |t: f64, y: &CMatrix| hfun(t) * y * c(0.0, -1.0);
    match initial {
        InitialState::Pure(psi) => {
            let y0 = CMatrix::from_column_slice(n, 1, psi.as_slice());
            let (ys, stats) = dopri::integrate(rhs, &y0, t0, times, cfg)?;
            let states: Vec<CVector> = ys.into_iter().map(|m| m.column(0).into_owned()).collect();
            let populations = states.iter().map(|v| populations_of_vector(v, &layout)).collect();
            let norm_drift = states.iter().map(|v| (v.norm_squared() - 1.0).abs()).fold(0.0, f64::max);
            Ok(Trajectory { times: times.to_vec(), states: States::Pure(states), populations, layout, stats, norm_drift })
        }
        InitialState::Mixed(rho0) => {
            let (vs, stats) = dopri::integrate(rhs, &CMatrix::identity(n, n), t0, times, cfg)?;
            let states: Vec<CMatrix> = vs.iter().map(|v| v * rho0 * v.adjoint()).collect();
            let populations = states.iter().map(|r| populations_of_density(r, &layout)).collect();
            let norm_drift = states.iter().map(|r| (r.trace().re - 1.0).abs()).fold(0.0, f64::max);
            Ok(Trajectory { times: times.to_vec(), states: States::Mixed(states), populations, layout, stats, norm_drift })
        }
    }
}

/// U(t₁, t₀) = Σ_l |Φ_l(t₁)⟩⟨Φ_l(t₀)| over the dark family.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub t0: f64,
    pub t1: f64,
    pub matrix: CMatrix,
    /// Projector onto the dark subspace at t₀.
    pub initial_projector: CMatrix,
}

/// Adiabatic-limit prediction for one initial state.
#[derive(Debug, Clone)]
pub struct TransferPrediction {
    pub density: CMatrix,
    pub state: Option<CVector>,
    /// Weight of the initial state outside the dark subspace at t₀.
    pub bright_residual: f64,
    pub warning: Option<String>,
}

/// Initial weight outside the dark subspace above which the prediction is flagged.
pub const BRIGHT_RESIDUAL_WARN: f64 = 1e-6;

impl TransferOperator {
    pub fn apply(&self, initial: &InitialState) -> TransferPrediction {
        let n = self.matrix.nrows();
        let rho = initial.density();
        let inside = (&self.initial_projector * &rho * &self.initial_projector).trace().re;
        let bright_residual = (rho.trace().re - inside).max(0.0);
        let warning = (bright_residual > BRIGHT_RESIDUAL_WARN).then(|| {
            format!("initial state has weight {bright_residual:.3e} outside the dark subspace; the adiabatic map ignores it")
        });
        let density = &self.matrix * rho * self.matrix.adjoint();
        let state = match initial {
            InitialState::Pure(v) => Some(&self.matrix * v),
            InitialState::Mixed(_) => None,
        };
        debug_assert_eq!(density.nrows(), n);
        TransferPrediction { density, state, bright_residual, warning }
    }
}

/// Uhlmann fidelity (tr √(√ρ σ √ρ))² between two density matrices.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let (vals, vecs) = hermitian_eigen(rho);
    let root = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0))));
    let sqrt_rho = &vecs * root * vecs.adjoint();
    let inner = &sqrt_rho * sigma * &sqrt_rho;
    let (ev, _) = hermitian_eigen(&inner);
    ev.iter().map(|&v| v.max(0.0).sqrt()).sum::<f64>().powi(2)
}

pub fn adiabatic_transfer(family: &DarkStateFamily, h: &RwaHamiltonian, t0: f64, t1: f64) -> TransferOperator {
    let (p0, s0) = h.envelopes(t0);
    let (p1, s1) = h.envelopes(t1);
    let v0 = family.vectors(p0, s0);
    let v1 = family.vectors(p1, s1);
    TransferOperator { t0, t1, matrix: &v1 * v0.adjoint(), initial_projector: &v0 * v0.adjoint() }
}
