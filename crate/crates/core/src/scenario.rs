//! Declarative scenario files (TOML) and the analysis and propagation pipelines
//! built on them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic_basis::{classify, dark_family, feasibility, DarkKind, DegeneracyCase, FeasibilityVerdict};
use crate::adiabaticity::{adiabaticity_scan, AdiabaticityConfig, AdiabaticityReport};
use crate::hamiltonian::{Detuning, PulseEnvelope, RwaHamiltonian};
use crate::linalg::{c, unitarity_residual, CMatrix, CVector};
use crate::linkage::{build_couplings, decompose_subsystems, CouplingPair, FieldSpec, HalfInt, LinkageSpec};
use crate::morris_shore::{ms_decompose_with_tol, pump_side_ms_with_tol, second_stage_ms_with_tol, split_pump, MsDecomposition, SecondStageCase, Structure};
use crate::propagator::{
    adiabatic_transfer, fidelity, integrate, populations_of_density, time_grid, InitialState, IntegratorConfig,
    IntegratorStats, PropagationError, Trajectory,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}{path}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, path: String, message: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("integration failed: {0}")]
    Integration(#[from] PropagationError),
}

// ------------------------------------------------------------------ file schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub linkage: LinkageSection,
    pub pump: FieldSection,
    pub stokes: FieldSection,
    #[serde(default = "zero_detuning")]
    pub detuning: Detuning,
    #[serde(default)]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

fn zero_detuning() -> Detuning {
    Detuning::Uniform(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkageSection {
    /// Manifolds J_g, J_e, J_f; couplings from Clebsch-Gordan coefficients.
    Angular {
        j: [f64; 3],
        /// Reduced dipole elements [re, im] for pump and Stokes (default 1).
        #[serde(default)]
        reduced_pump: Option<[f64; 2]>,
        #[serde(default)]
        reduced_stokes: Option<[f64; 2]>,
    },
    /// Coupling matrices at unit envelope, already in half-Rabi units.
    Matrices { p: MatrixSpec, s: MatrixSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// Peak Rabi frequency (angular linkage) or a scale factor (explicit matrices, default 1).
    #[serde(default)]
    pub rabi: Option<f64>,
    #[serde(default)]
    pub polarization: Option<Polarization>,
    pub envelope: EnvelopeSpec,
}

/// Either σ± angle form (ε₊ = e^{iφ}cos angle, ε₋ = e^{iψ}sin angle) or explicit
/// spherical components [re, im].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polarization {
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub psi: f64,
    #[serde(default)]
    pub minus: Option<[f64; 2]>,
    #[serde(default)]
    pub pi: Option<[f64; 2]>,
    #[serde(default)]
    pub plus: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeSpec {
    Gaussian { center: f64, width: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    G,
    E,
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRef {
    pub manifold: Manifold,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeEntry {
    pub manifold: Manifold,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub index: Option<usize>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationEntry {
    pub manifold: Manifold,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub index: Option<usize>,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceEntry {
    pub row: StateRef,
    pub col: StateRef,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Pure {
        amplitudes: Vec<AmplitudeEntry>,
        #[serde(default)]
        normalize: bool,
    },
    Mixed {
        populations: Vec<PopulationEntry>,
        #[serde(default)]
        coherences: Vec<CoherenceEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Defaults to the union of the pulse supports.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_rtol() -> f64 {
    1e-10
}
fn default_atol() -> f64 {
    1e-12
}
fn default_max_steps() -> usize {
    2_000_000
}
fn default_samples() -> usize {
    401
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            rtol: default_rtol(),
            atol: default_atol(),
            max_steps: default_max_steps(),
            window: None,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "default_threshold")]
    pub adiabaticity_threshold: f64,
    #[serde(default = "default_adiabaticity_samples")]
    pub adiabaticity_samples: usize,
    #[serde(default = "default_relevance")]
    pub adiabaticity_relevance: f64,
}

fn default_zero_tol() -> f64 {
    1e-10
}
fn default_threshold() -> f64 {
    0.1
}
fn default_adiabaticity_samples() -> usize {
    541
}
fn default_relevance() -> f64 {
    1e-2
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            zero_tol: default_zero_tol(),
            adiabaticity_threshold: default_threshold(),
            adiabaticity_samples: default_adiabaticity_samples(),
            adiabaticity_relevance: default_relevance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "yes")]
    pub trajectory: bool,
    #[serde(default = "yes")]
    pub adiabaticity: bool,
    #[serde(default = "yes")]
    pub prediction: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection { trajectory: true, adiabaticity: true, prediction: true }
    }
}

/// Tolerance overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub zero_tol: Option<f64>,
    pub samples: Option<usize>,
}

impl Scenario {
    pub fn from_toml_str(src: &str) -> Result<Scenario, ScenarioError> {
        let sc: Scenario = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map(|r| line_col(src, r.start)).unwrap_or((0, 0));
            ScenarioError::Parse { line, column, message: e.message().to_string() }
        })?;
        sc.validate().map_err(|(path, message)| ScenarioError::Invalid { line: locate(src, &path), path, message })?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Scenario::from_toml_str(&src)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(x) = o.rtol {
            self.integrator.rtol = x;
        }
        if let Some(x) = o.atol {
            self.integrator.atol = x;
        }
        if let Some(x) = o.zero_tol {
            self.analysis.zero_tol = x;
        }
        if let Some(x) = o.samples {
            self.integrator.samples = x;
        }
    }

    /// Semantic checks that do not need the couplings; errors carry a dotted key path.
    fn validate(&self) -> Result<(), (String, String)> {
        let bad = |p: &str, m: String| Err((p.to_string(), m));
        for (name, fld) in [("pump", &self.pump), ("stokes", &self.stokes)] {
            match &self.linkage {
                LinkageSection::Angular { .. } => {
                    match fld.rabi {
                        Some(r) if r.is_finite() && r >= 0.0 => {}
                        Some(r) => return bad(&format!("{name}.rabi"), format!("must be finite and nonnegative, got {r}")),
                        None => return bad(&format!("{name}.rabi"), "required for an angular linkage".into()),
                    }
                    let Some(pol) = &fld.polarization else {
                        return bad(&format!("{name}.polarization"), "required for an angular linkage".into());
                    };
                    let explicit = pol.minus.is_some() || pol.pi.is_some() || pol.plus.is_some();
                    if pol.angle.is_some() == explicit {
                        return bad(&format!("{name}.polarization"), "give either `angle` (with optional phi, psi) or components minus/pi/plus".into());
                    }
                }
                LinkageSection::Matrices { .. } => {
                    if fld.polarization.is_some() {
                        return bad(&format!("{name}.polarization"), "not used with explicit matrices".into());
                    }
                }
            }
            match &fld.envelope {
                EnvelopeSpec::Gaussian { width, center } => {
                    if !(*width > 0.0 && width.is_finite() && center.is_finite()) {
                        return bad(&format!("{name}.envelope"), format!("Gaussian width must be positive, got {width}"));
                    }
                }
                EnvelopeSpec::Tabulated { times, values } => {
                    if PulseEnvelope::tabulated(times.clone(), values.clone()).is_err() {
                        return bad(&format!("{name}.envelope"), "table needs ≥ 2 increasing times and values in [0, 1]".into());
                    }
                }
            }
        }
        if let LinkageSection::Angular { j, .. } = &self.linkage {
            for (k, x) in j.iter().enumerate() {
                if HalfInt::try_from(*x).is_err() || *x < 0.0 {
                    return bad("linkage.j", format!("entry {k} = {x} is not a nonnegative half-integer"));
                }
            }
        }
        let ig = &self.integrator;
        if !(ig.rtol > 0.0 && ig.atol > 0.0) {
            return bad("integrator.rtol", "tolerances must be positive".into());
        }
        if ig.samples < 2 {
            return bad("integrator.samples", "need at least 2 samples".into());
        }
        if let Some([a, b]) = ig.window {
            if !(a < b && a.is_finite() && b.is_finite()) {
                return bad("integrator.window", format!("[{a}, {b}] is not an increasing interval"));
            }
        }
        if self.analysis.zero_tol <= 0.0 || self.analysis.adiabaticity_samples < 3 {
            return bad("analysis", "zero_tol must be positive and adiabaticity_samples ≥ 3".into());
        }
        Ok(())
    }

    /// Couplings, Hamiltonian, state labels and initial state.
    pub fn build(&self) -> Result<System, ScenarioError> {
        let invalid = |path: &str, message: String| ScenarioError::Invalid { line: None, path: path.into(), message };
        let (pair, labels) = match &self.linkage {
            LinkageSection::Angular { j, reduced_pump, reduced_stokes } => {
                let hj = |x: f64| HalfInt::try_from(x).map_err(|e| invalid("linkage.j", e.to_string()));
                let (jg, je, jf) = (hj(j[0])?, hj(j[1])?, hj(j[2])?);
                let pump = field_spec(&self.pump).map_err(|m| invalid("pump.polarization", m))?;
                let stokes = field_spec(&self.stokes).map_err(|m| invalid("stokes.polarization", m))?;
                let red = |r: &Option<[f64; 2]>| r.map_or(c(1.0, 0.0), |[a, b]| c(a, b));
                let spec = LinkageSpec::new(jg, je, jf, pump, stokes)
                    .map_err(|e| invalid("linkage.j", e.to_string()))?
                    .with_reduced(red(reduced_pump), red(reduced_stokes));
                let mut labels = Vec::new();
                for (man, jj) in [(Manifold::G, jg), (Manifold::E, je), (Manifold::F, jf)] {
                    for (index, m) in jj.projections().into_iter().enumerate() {
                        labels.push(StateLabel { manifold: man, index, j: Some(jj.value()), m: Some(m.value()) });
                    }
                }
                (build_couplings(&spec), labels)
            }
            LinkageSection::Matrices { p, s } => {
                let pm = matrix(p).map_err(|m| invalid("linkage.p", m))? * c(self.pump.rabi.unwrap_or(1.0), 0.0);
                let sm = matrix(s).map_err(|m| invalid("linkage.s", m))? * c(self.stokes.rabi.unwrap_or(1.0), 0.0);
                let pair = CouplingPair::new(pm, sm).map_err(|e| invalid("linkage", e.to_string()))?;
                let mut labels = Vec::new();
                for (man, n) in [(Manifold::G, pair.n_g()), (Manifold::E, pair.n_e()), (Manifold::F, pair.n_f())] {
                    labels.extend((0..n).map(|index| StateLabel { manifold: man, index, j: None, m: None }));
                }
                (pair, labels)
            }
        };
        let hamiltonian = RwaHamiltonian::new(pair.clone(), self.detuning.clone(), envelope(&self.pump.envelope), envelope(&self.stokes.envelope))
            .map_err(|e| invalid("detuning", e.to_string()))?;
        let initial = match &self.initial {
            None => None,
            Some(sec) => Some(initial_state(sec, &labels)?),
        };
        let window = self.integrator.window.map(|[a, b]| (a, b)).unwrap_or_else(|| hamiltonian.default_window());
        let integrator = IntegratorConfig { rtol: self.integrator.rtol, atol: self.integrator.atol, max_steps: self.integrator.max_steps, max_step: None };
        Ok(System { pair, hamiltonian, labels, initial, window, integrator, samples: self.integrator.samples })
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Best-effort line of a dotted key path such as `pump.envelope` in the source.
fn locate(src: &str, path: &str) -> Option<usize> {
    let mut parts = path.split('.');
    let section = parts.next()?;
    let key = parts.next();
    let lines: Vec<&str> = src.lines().collect();
    let header = format!("[{section}]");
    let start = lines.iter().position(|l| l.trim() == header || l.trim().starts_with(&format!("[{section}.")));
    let Some(key) = key else {
        return start.map(|i| i + 1).or_else(|| find_key(&lines, 0, section));
    };
    if let Some(s) = start {
        if let Some(i) = find_key(&lines, s + 1, key) {
            return Some(i);
        }
        return Some(s + 1);
    }
    lines.iter().position(|l| l.trim_start().starts_with(&format!("{section}.{key}"))).map(|i| i + 1)
}

fn find_key(lines: &[&str], from: usize, key: &str) -> Option<usize> {
    for (i, l) in lines.iter().enumerate().skip(from) {
        let t = l.trim_start();
        if from > 0 && t.starts_with('[') {
            return None;
        }
        if let Some(rest) = t.strip_prefix(key) {
            if rest.trim_start().starts_with('=') || rest.starts_with('.') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn field_spec(f: &FieldSection) -> Result<FieldSpec, String> {
    let pol = f.polarization.clone().unwrap_or_default();
    let rabi = f.rabi.unwrap_or(0.0);
    let r = match pol.angle {
        Some(a) => FieldSpec::two_angle(rabi, a, pol.phi, pol.psi),
        None => {
            let z = |x: Option<[f64; 2]>| x.map_or(c(0.0, 0.0), |[a, b]| c(a, b));
            FieldSpec::new(rabi, [z(pol.minus), z(pol.pi), z(pol.plus)])
        }
    };
    r.map_err(|e| e.to_string())
}

fn matrix(m: &MatrixSpec) -> Result<CMatrix, String> {
    let rows = m.re.len();
    let cols = m.re.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.re.iter().any(|r| r.len() != cols) {
        return Err("`re` must be a nonempty rectangular array".into());
    }
    if let Some(im) = &m.im {
        if im.len() != rows || im.iter().any(|r| r.len() != cols) {
            return Err(format!("`im` must match the {rows}x{cols} shape of `re`"));
        }
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| c(m.re[i][j], m.im.as_ref().map_or(0.0, |im| im[i][j]))))
}

fn envelope(e: &EnvelopeSpec) -> PulseEnvelope {
    match e {
        EnvelopeSpec::Gaussian { center, width } => PulseEnvelope::Gaussian { center: *center, width: *width },
        EnvelopeSpec::Tabulated { times, values } => PulseEnvelope::Tabulated { times: times.clone(), values: values.clone() },
    }
}

fn resolve(labels: &[StateLabel], manifold: Manifold, m: Option<f64>, index: Option<usize>, path: &str) -> Result<usize, ScenarioError> {
    let invalid = |message: String| ScenarioError::Invalid { line: None, path: path.into(), message };
    let in_manifold: Vec<(usize, &StateLabel)> = labels.iter().enumerate().filter(|(_, l)| l.manifold == manifold).collect();
    match (m, index) {
        (Some(mv), None) => in_manifold
            .iter()
            .find(|(_, l)| l.m.is_some_and(|x| (x - mv).abs() < 1e-9))
            .map(|(k, _)| *k)
            .ok_or_else(|| invalid(format!("no {manifold:?} state with m = {mv}"))),
        (None, Some(i)) => in_manifold.get(i).map(|(k, _)| *k).ok_or_else(|| invalid(format!("{manifold:?} index {i} out of range"))),
        _ => Err(invalid("give exactly one of `m` or `index`".into())),
    }
}

fn initial_state(sec: &InitialSection, labels: &[StateLabel]) -> Result<InitialState, ScenarioError> {
    let n = labels.len();
    let invalid = |path: String, message: String| ScenarioError::Invalid { line: None, path, message };
    match sec {
        InitialSection::Pure { amplitudes, normalize } => {
            let mut v = CVector::zeros(n);
            for (k, a) in amplitudes.iter().enumerate() {
                let path = format!("initial.amplitudes[{k}]");
                let i = resolve(labels, a.manifold, a.m, a.index, &path)?;
                v[i] += c(a.re, a.im);
            }
            let norm = v.norm();
            if norm == 0.0 {
                return Err(invalid("initial.amplitudes".into(), "state vector is zero".into()));
            }
            if *normalize {
                v /= c(norm, 0.0);
            } else if (norm * norm - 1.0).abs() > 1e-9 {
                return Err(invalid("initial.amplitudes".into(), format!("squared norm is {}, not 1 (set normalize = true to rescale)", norm * norm)));
            }
            Ok(InitialState::Pure(v))
        }
        InitialSection::Mixed { populations, coherences } => {
            let mut rho = CMatrix::zeros(n, n);
            for (k, p) in populations.iter().enumerate() {
                let path = format!("initial.populations[{k}]");
                if p.population < 0.0 {
                    return Err(invalid(path, "population must be nonnegative".into()));
                }
                let i = resolve(labels, p.manifold, p.m, p.index, &path)?;
                rho[(i, i)] += c(p.population, 0.0);
            }
            for (k, co) in coherences.iter().enumerate() {
                let path = format!("initial.coherences[{k}]");
                let i = resolve(labels, co.row.manifold, co.row.m, co.row.index, &path)?;
                let j = resolve(labels, co.col.manifold, co.col.m, co.col.index, &path)?;
                if i == j {
                    return Err(invalid(path, "coherence needs two different states".into()));
                }
                rho[(i, j)] = c(co.re, co.im);
                rho[(j, i)] = c(co.re, -co.im);
            }
            let tr = rho.trace().re;
            if (tr - 1.0).abs() > 1e-9 {
                return Err(invalid("initial.populations".into(), format!("populations sum to {tr}, not 1")));
            }
            let (vals, _) = crate::linalg::hermitian_eigen(&rho);
            if vals.first().is_some_and(|&v| v < -1e-12) {
                return Err(invalid("initial.coherences".into(), "density matrix is not positive semidefinite".into()));
            }
            Ok(InitialState::Mixed(rho))
        }
    }
}

// ------------------------------------------------------------------ pipelines

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLabel {
    pub manifold: Manifold,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct System {
    pub pair: CouplingPair,
    pub hamiltonian: RwaHamiltonian,
    pub labels: Vec<StateLabel>,
    pub initial: Option<InitialState>,
    pub window: (f64, f64),
    pub integrator: IntegratorConfig,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSummary {
    pub rows: usize,
    pub cols: usize,
    pub sigma: Vec<f64>,
    pub coupled_count: usize,
    pub null_count: usize,
    pub structure: Structure,
    pub structure_residual: f64,
    pub unitarity_residual_a: f64,
    pub unitarity_residual_b: f64,
}

impl MsSummary {
    fn of(dec: &MsDecomposition, x: &CMatrix) -> Self {
        MsSummary {
            rows: dec.rows(),
            cols: dec.cols(),
            sigma: dec.sigma.clone(),
            coupled_count: dec.coupled_count(),
            null_count: dec.null_count,
            structure: dec.structure,
            structure_residual: dec.structure_residual(x),
            unitarity_residual_a: unitarity_residual(&dec.a),
            unitarity_residual_b: unitarity_residual(&dec.b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStageSummary {
    pub case: SecondStageCase,
    /// Couplings between g and the Stokes-uncoupled e states after the pump rotation.
    pub pi_values: Vec<f64>,
    pub pi_null_count: usize,
    pub free_g_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSummary {
    pub g: Vec<usize>,
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    pub sizes: (usize, usize, usize),
    pub case: DegeneracyCase,
    pub verdict: String,
    pub n_dark: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkCounts {
    pub total: usize,
    pub transfer: usize,
    pub pump_decoupled: usize,
    pub uncoupled_final: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    pub labels: Vec<StateLabel>,
    pub sizes: (usize, usize, usize),
    pub case: DegeneracyCase,
    pub verdict: String,
    pub feasibility: FeasibilityVerdict,
    pub dark_states: DarkCounts,
    pub stokes_ms: MsSummary,
    pub pump_ms: MsSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub second_stage: Option<SecondStageSummary>,
    pub subsystems: Vec<SubsystemSummary>,
    pub notes: Vec<String>,
}

pub fn analyze_system(name: &str, sys: &System, zero_tol: f64) -> AnalysisReport {
    let pair = &sys.pair;
    let sizes = (pair.n_g(), pair.n_e(), pair.n_f());
    let stokes = ms_decompose_with_tol(&pair.s, zero_tol);
    let pump = pump_side_ms_with_tol(&pair.p, zero_tol);
    let pump_summary = MsSummary::of(&pump, &pair.p);
    let second_stage = split_pump(&pair.p, &stokes).ok().and_then(|(pa, pb)| {
        second_stage_ms_with_tol(&pa, &pb, zero_tol).ok().map(|s| SecondStageSummary {
            case: s.case,
            pi_values: s.pi_values.clone(),
            pi_null_count: s.pi_null_count,
            free_g_count: s.n_free,
        })
    });
    let fam = dark_family(pair, zero_tol);
    let verdict = feasibility(pair, zero_tol);
    let subsystems = decompose_subsystems(pair)
        .into_iter()
        .map(|sub| {
            let v = feasibility(&sub.couplings, zero_tol);
            let sz = sub.sizes();
            SubsystemSummary {
                case: classify(sz.0, sz.1, sz.2),
                verdict: v.label(),
                n_dark: v.n_dark,
                g: sub.g,
                e: sub.e,
                f: sub.f,
                sizes: sz,
            }
        })
        .collect();
    let mut notes = verdict.notes.clone();
    if !sys.hamiltonian.detuning.is_uniform() {
        notes.push("per-state detunings lie outside the uniform-Δ model; bright states and adiabaticity are not evaluated".into());
    }
    AnalysisReport {
        name: name.to_string(),
        labels: sys.labels.clone(),
        sizes,
        case: classify(sizes.0, sizes.1, sizes.2),
        verdict: verdict.label(),
        dark_states: DarkCounts {
            total: fam.count(),
            transfer: fam.count_of(DarkKind::Transfer),
            pump_decoupled: fam.count_of(DarkKind::PumpDecoupled),
            uncoupled_final: fam.count_of(DarkKind::UncoupledFinal),
        },
        feasibility: verdict,
        stokes_ms: MsSummary::of(&stokes, &pair.s),
        pump_ms: pump_summary,
        second_stage,
        subsystems,
        notes,
    }
}

pub fn analyze(sc: &Scenario) -> Result<AnalysisReport, ScenarioError> {
    let sys = sc.build()?;
    Ok(analyze_system(&sc.name, &sys, sc.analysis.zero_tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub populations: [f64; 3],
    /// Fidelity between the integrated final state and the adiabatic prediction.
    pub fidelity: f64,
    pub bright_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub analysis: AnalysisReport,
    pub window: (f64, f64),
    pub samples: usize,
    pub initial_populations: [f64; 3],
    pub final_populations: [f64; 3],
    pub final_state_populations: Vec<f64>,
    pub norm_drift: f64,
    pub stats: IntegratorStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prediction: Option<PredictionSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adiabaticity: Option<AdiabaticityReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adiabaticity_error: Option<String>,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub trajectory: Trajectory,
}

/// Analysis plus full integration, adiabatic prediction and adiabaticity scan.
pub fn run(sc: &Scenario) -> Result<RunOutcome, RunError> {
    let sys = sc.build()?;
    let Some(initial) = sys.initial.clone() else {
        return Err(ScenarioError::Invalid { line: None, path: "initial".into(), message: "a run needs an initial state".into() }.into());
    };
    let zero_tol = sc.analysis.zero_tol;
    let analysis = analyze_system(&sc.name, &sys, zero_tol);
    let times = time_grid(sys.window, sys.samples);
    let trajectory = integrate(&sys.hamiltonian, &initial, &times, &sys.integrator)?;
    let layout = sys.hamiltonian.layout();
    let fam = dark_family(&sys.pair, zero_tol);

    let prediction = sc.outputs.prediction.then(|| {
        let op = adiabatic_transfer(&fam, &sys.hamiltonian, sys.window.0, sys.window.1);
        let pred = op.apply(&initial);
        let final_rho = trajectory.final_density();
        let tr = pred.density.trace().re;
        let normalized = if tr > 0.0 { &pred.density / c(tr, 0.0) } else { pred.density.clone() };
        PredictionSummary {
            populations: populations_of_density(&pred.density, &layout),
            fidelity: fidelity(&normalized, &final_rho),
            bright_residual: pred.bright_residual,
            warning: pred.warning,
        }
    });

    let (adiabaticity, adiabaticity_error) = if sc.outputs.adiabaticity && sys.hamiltonian.detuning.is_uniform() {
        let cfg = AdiabaticityConfig {
            threshold: sc.analysis.adiabaticity_threshold,
            zero_tol,
            relevance: sc.analysis.adiabaticity_relevance,
            ..Default::default()
        };
        let grid = time_grid(sys.window, sc.analysis.adiabaticity_samples);
        match adiabaticity_scan(&fam, &sys.hamiltonian, &grid, &cfg) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let last = trajectory.times.len() - 1;
    let report = RunReport {
        analysis,
        window: sys.window,
        samples: sys.samples,
        initial_populations: trajectory.populations[0],
        final_populations: trajectory.final_populations(),
        final_state_populations: trajectory.state_populations(last),
        norm_drift: trajectory.norm_drift,
        stats: trajectory.stats,
        prediction,
        adiabaticity,
        adiabaticity_error,
    };
    Ok(RunOutcome { report, trajectory })
}
