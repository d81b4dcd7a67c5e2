//! The block RWA Hamiltonian
//!
//! ```text
//!        | 0      p(t)P   0      |
//! H(t) = | p(t)P†  Δ·I    s(t)S  |
//!        | 0      s(t)S†  0      |
//! ```
//!
//! with the g, e, f manifolds stacked in that order.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, max_abs, CMatrix};
use crate::linkage::CouplingPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("envelope width must be positive, got {0}")]
    BadWidth(f64),
    #[error("tabulated envelope needs at least two strictly increasing times with values in [0, 1]")]
    BadTable,
    #[error("per-state detuning has {got} entries but the e manifold has {expected}")]
    DetuningLength { expected: usize, got: usize },
    #[error("transform is {got}x{got} but the Hamiltonian is {expected}x{expected}")]
    Dimension { expected: usize, got: usize },
    #[error("transform mixes manifolds (off-block entry {0:.3e})")]
    NotBlockDiagonal(f64),
}

type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pulse shape with unit maximum.
#[derive(Clone)]
pub enum PulseEnvelope {
    /// exp(-(t - center)²/width²)
    Gaussian { center: f64, width: f64 },
    /// Piecewise-linear interpolation, zero outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
    Custom { value: EnvelopeFn, derivative: Option<EnvelopeFn>, support: (f64, f64) },
}

impl fmt::Debug for PulseEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseEnvelope::Gaussian { center, width } => write!(f, "Gaussian(center={center}, width={width})"),
            PulseEnvelope::Tabulated { times, .. } => write!(f, "Tabulated({} samples)", times.len()),
            PulseEnvelope::Custom { support, .. } => write!(f, "Custom(support={support:?})"),
        }
    }
}

impl PulseEnvelope {
    pub fn gaussian(center: f64, width: f64) -> Result<Self, HamiltonianError> {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(HamiltonianError::BadWidth(width));
        }
        Ok(PulseEnvelope::Gaussian { center, width })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self, HamiltonianError> {
        let ok = times.len() >= 2
            && times.len() == values.len()
            && times.windows(2).all(|w| w[1] > w[0])
            && values.iter().all(|v| (0.0..=1.0).contains(v));
        if !ok {
            return Err(HamiltonianError::BadTable);
        }
        Ok(PulseEnvelope::Tabulated { times, values })
    }

    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<EnvelopeFn>,
        support: (f64, f64),
    ) -> Self {
        PulseEnvelope::Custom { value: Arc::new(value), derivative, support }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            PulseEnvelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-x * x).exp()
            }
            PulseEnvelope::Tabulated { times, values } => {
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let a = (t - t0) / (t1 - t0);
                values[k - 1] * (1.0 - a) + values[k] * a
            }
            PulseEnvelope::Custom { value, .. } => value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            PulseEnvelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                -2.0 * x / width * (-x * x).exp()
            }
            PulseEnvelope::Tabulated { times, values } => {
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, n - 1);
                (values[k] - values[k - 1]) / (times[k] - times[k - 1])
            }
            PulseEnvelope::Custom { value, derivative, .. } => match derivative {
                Some(d) => d(t),
                None => {
                    let h = 1e-5;
                    (value(t + h) - value(t - h)) / (2.0 * h)
                }
            },
        }
    }

    /// Interval outside which the envelope is negligible (center ± 4 widths for Gaussians).
    pub fn support(&self) -> (f64, f64) {
        match self {
            PulseEnvelope::Gaussian { center, width } => (center - 4.0 * width, center + 4.0 * width),
            PulseEnvelope::Tabulated { times, .. } => (times[0], times[times.len() - 1]),
            PulseEnvelope::Custom { support, .. } => *support,
        }
    }

    /// Same shape with the time axis stretched by `factor` about t = 0.
    pub fn stretched(&self, factor: f64) -> Self {
        match self {
            PulseEnvelope::Gaussian { center, width } => PulseEnvelope::Gaussian { center: center * factor, width: width * factor },
            PulseEnvelope::Tabulated { times, values } => PulseEnvelope::Tabulated {
                times: times.iter().map(|t| t * factor).collect(),
                values: values.clone(),
            },
            PulseEnvelope::Custom { value, derivative, support } => {
                let v = value.clone();
                let d = derivative.clone().map(|d| Arc::new(move |t: f64| d(t / factor) / factor) as EnvelopeFn);
                PulseEnvelope::Custom {
                    value: Arc::new(move |t| v(t / factor)),
                    derivative: d,
                    support: (support.0 * factor, support.1 * factor),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detuning {
    Uniform(f64),
    /// One detuning per e state. Outside the uniform-Δ model, accepted but flagged.
    PerState(Vec<f64>),
}

impl Detuning {
    pub fn is_uniform(&self) -> bool {
        matches!(self, Detuning::Uniform(_))
    }

    fn at(&self, k: usize) -> f64 {
        match self {
            Detuning::Uniform(d) => *d,
            Detuning::PerState(v) => v[k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldLayout {
    pub n_g: usize,
    pub n_e: usize,
    pub n_f: usize,
}

impl ManifoldLayout {
    pub fn dim(&self) -> usize {
        self.n_g + self.n_e + self.n_f
    }

    pub fn g(&self) -> Range<usize> {
        0..self.n_g
    }

    pub fn e(&self) -> Range<usize> {
        self.n_g..self.n_g + self.n_e
    }

    pub fn f(&self) -> Range<usize> {
        self.n_g + self.n_e..self.dim()
    }

    pub fn ranges(&self) -> [Range<usize>; 3] {
        [self.g(), self.e(), self.f()]
    }
}

#[derive(Debug, Clone)]
pub struct RwaHamiltonian {
    pub couplings: CouplingPair,
    pub detuning: Detuning,
    pub pump: PulseEnvelope,
    pub stokes: PulseEnvelope,
}

impl RwaHamiltonian {
    pub fn new(
        couplings: CouplingPair,
        detuning: Detuning,
        pump: PulseEnvelope,
        stokes: PulseEnvelope,
    ) -> Result<Self, HamiltonianError> {
        if let Detuning::PerState(v) = &detuning {
            if v.len() != couplings.n_e() {
                return Err(HamiltonianError::DetuningLength { expected: couplings.n_e(), got: v.len() });
            }
        }
        Ok(RwaHamiltonian { couplings, detuning, pump, stokes })
    }

    pub fn layout(&self) -> ManifoldLayout {
        ManifoldLayout { n_g: self.couplings.n_g(), n_e: self.couplings.n_e(), n_f: self.couplings.n_f() }
    }

    pub fn dim(&self) -> usize {
        self.couplings.dim()
    }

    pub fn envelopes(&self, t: f64) -> (f64, f64) {
        (self.pump.value(t), self.stokes.value(t))
    }

    pub fn envelope_derivatives(&self, t: f64) -> (f64, f64) {
        (self.pump.derivative(t), self.stokes.derivative(t))
    }

    pub fn evaluate(&self, t: f64) -> CMatrix {
        let (p, s) = self.envelopes(t);
        self.at_amplitudes(p, s)
    }

    /// H for given envelope values p, s.
    pub fn at_amplitudes(&self, p: f64, s: f64) -> CMatrix {
        let lay = self.layout();
        let mut h = CMatrix::zeros(lay.dim(), lay.dim());
        let pp = &self.couplings.p * c(p, 0.0);
        let ss = &self.couplings.s * c(s, 0.0);
        h.view_mut((0, lay.n_g), (lay.n_g, lay.n_e)).copy_from(&pp);
        h.view_mut((lay.n_g, 0), (lay.n_e, lay.n_g)).copy_from(&pp.adjoint());
        h.view_mut((lay.n_g, lay.n_g + lay.n_e), (lay.n_e, lay.n_f)).copy_from(&ss);
        h.view_mut((lay.n_g + lay.n_e, lay.n_g), (lay.n_f, lay.n_e)).copy_from(&ss.adjoint());
        for k in 0..lay.n_e {
            h[(lay.n_g + k, lay.n_g + k)] = c(self.detuning.at(k), 0.0);
        }
        h
    }

    /// Default window: union of the pulse supports.
    pub fn default_window(&self) -> (f64, f64) {
        let (a0, a1) = self.pump.support();
        let (b0, b1) = self.stokes.support();
        (a0.min(b0), a1.max(b1))
    }
}

/// U H U† for a unitary U that is block diagonal over the manifolds.
pub fn transform(h: &CMatrix, u: &CMatrix, layout: &ManifoldLayout) -> Result<CMatrix, HamiltonianError> {
    let n = layout.dim();
    if h.nrows() != n || u.nrows() != n || u.ncols() != n {
        return Err(HamiltonianError::Dimension { expected: n, got: u.nrows() });
    }
    let ranges = layout.ranges();
    let mut off = 0.0f64;
    for (a, ra) in ranges.iter().enumerate() {
        for (b, rb) in ranges.iter().enumerate() {
            if a == b {
                continue;
            }
            for i in ra.clone() {
                for j in rb.clone() {
                    off = off.max(u[(i, j)].norm());
                }
            }
        }
    }
    if off > 1e-12 * max_abs(u).max(1.0) {
        return Err(HamiltonianError::NotBlockDiagonal(off));
    }
    Ok(u * h * u.adjoint())
}
