//! Coupling matrices from angular-momentum quantum numbers and field polarizations.
//!
//! States inside a manifold are ordered by ascending magnetic quantum number M.
//! Matrix entries are half-Rabi frequencies (ħ = 1).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cis, CMatrix, C64, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkageError {
    #[error("{0} is not a nonnegative multiple of 1/2")]
    NotHalfInteger(f64),
    #[error("negative angular momentum {0}")]
    NegativeJ(HalfInt),
    #[error("projection m = {m} is not allowed for j = {j}")]
    BadProjection { j: HalfInt, m: HalfInt },
    #[error("dipole selection rule violated between J = {0} and J = {1}")]
    SelectionRule(HalfInt, HalfInt),
    #[error("polarization weights are all zero")]
    ZeroPolarization,
    #[error("peak Rabi frequency must be finite and nonnegative, got {0}")]
    BadRabi(f64),
    #[error("coupling dimensions do not chain: P is {0}x{1}, S is {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
}

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Manifold size 2J + 1.
    pub fn multiplicity(self) -> usize {
        (self.0 + 1).max(0) as usize
    }

    /// Allowed projections -J, -J+1, ..., J.
    pub fn projections(self) -> Vec<HalfInt> {
        (0..self.multiplicity()).map(|k| HalfInt(-self.0 + 2 * k as i32)).collect()
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = LinkageError;

    fn try_from(x: f64) -> Result<Self, LinkageError> {
        let twice = 2.0 * x;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(LinkageError::NotHalfInteger(x));
        }
        Ok(HalfInt(twice.round() as i32))
    }
}

impl From<HalfInt> for f64 {
    fn from(h: HalfInt) -> f64 {
        h.value()
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

const EXACT_FACTORIALS: usize = 35;

fn factorial_table() -> &'static [f64; EXACT_FACTORIALS] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; EXACT_FACTORIALS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; EXACT_FACTORIALS];
        let mut acc: u128 = 1;
        for (n, slot) in t.iter_mut().enumerate().skip(1) {
            acc *= n as u128;
            *slot = acc as f64;
        }
        t
    })
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    let n = n as usize;
    let table = factorial_table();
    if n < EXACT_FACTORIALS {
        table[n]
    } else {
        (EXACT_FACTORIALS..=n).fold(table[EXACT_FACTORIALS - 1], |acc, k| acc * k as f64)
    }
}

fn check_pair(j: HalfInt, m: HalfInt) -> Result<(), LinkageError> {
    if j.0 < 0 {
        return Err(LinkageError::NegativeJ(j));
    }
    if m.0.abs() > j.0 || (j.0 - m.0) % 2 != 0 {
        return Err(LinkageError::BadProjection { j, m });
    }
    Ok(())
}

/// Clebsch-Gordan coefficient (j1 m1, j2 m2 | J M) from the Racah sum.
///
/// Zero when M ≠ m1 + m2 or the triangle rule fails. Values with magnitude below
/// 1e-14 are snapped to exactly zero so that selection rules give structural zeros.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64, LinkageError> {
    check_pair(j1, m1)?;
    check_pair(j2, m2)?;
    check_pair(j, m)?;
    if m1.0 + m2.0 != m.0 {
        return Ok(0.0);
    }
    let (a, b, cc) = (j1.0, j2.0, j.0);
    if cc > a + b || cc < (a - b).abs() || (a + b + cc) % 2 != 0 {
        return Ok(0.0);
    }
    // all arguments below are integers once halved
    let h = |x: i32| x / 2;
    let pre = (cc as f64 + 1.0) * factorial(h(cc + a - b)) * factorial(h(cc - a + b)) * factorial(h(a + b - cc))
        / factorial(h(a + b + cc) + 1);
    let proj = factorial(h(cc + m.0))
        * factorial(h(cc - m.0))
        * factorial(h(a - m1.0))
        * factorial(h(a + m1.0))
        * factorial(h(b - m2.0))
        * factorial(h(b + m2.0));
    let terms = [
        h(a + b - cc),
        h(a - m1.0),
        h(b + m2.0),
        h(cc - b + m1.0),
        h(cc - a - m2.0),
    ];
    let k_min = 0.max(-terms[3]).max(-terms[4]);
    let k_max = terms[0].min(terms[1]).min(terms[2]);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(terms[0] - k)
            * factorial(terms[1] - k)
            * factorial(terms[2] - k)
            * factorial(terms[3] + k)
            * factorial(terms[4] + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    let value = (pre * proj).sqrt() * sum;
    Ok(if value.abs() < 1e-14 { 0.0 } else { value })
}

/// Polarization and strength of one laser field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub peak_rabi: f64,
    /// Spherical weights for q = -1, 0, +1, normalized to unit length.
    pub components: [C64; 3],
}

impl FieldSpec {
    pub fn new(peak_rabi: f64, components: [C64; 3]) -> Result<Self, LinkageError> {
        if !peak_rabi.is_finite() || peak_rabi < 0.0 {
            return Err(LinkageError::BadRabi(peak_rabi));
        }
        let norm = components.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LinkageError::ZeroPolarization);
        }
        Ok(FieldSpec { peak_rabi, components: components.map(|z| z / norm) })
    }

    /// σ+/σ− field: ε₊ = e^{iφ} cos(angle), ε₋ = e^{iψ} sin(angle).
    pub fn two_angle(peak_rabi: f64, angle: f64, phi: f64, psi: f64) -> Result<Self, LinkageError> {
        FieldSpec::new(peak_rabi, [cis(psi) * angle.sin(), ZERO, cis(phi) * angle.cos()])
    }

    /// Weight ε_q for q ∈ {-1, 0, 1}.
    pub fn component(&self, q: i32) -> C64 {
        self.components[(q + 1) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageSpec {
    pub j_g: HalfInt,
    pub j_e: HalfInt,
    pub j_f: HalfInt,
    pub pump: FieldSpec,
    pub stokes: FieldSpec,
    pub reduced_pump: C64,
    pub reduced_stokes: C64,
}

impl LinkageSpec {
    pub fn new(j_g: HalfInt, j_e: HalfInt, j_f: HalfInt, pump: FieldSpec, stokes: FieldSpec) -> Result<Self, LinkageError> {
        for j in [j_g, j_e, j_f] {
            if j.0 < 0 {
                return Err(LinkageError::NegativeJ(j));
            }
        }
        if (j_g.0 - j_e.0).abs() > 2 || (j_g.0 - j_e.0) % 2 != 0 {
            return Err(LinkageError::SelectionRule(j_g, j_e));
        }
        if (j_e.0 - j_f.0).abs() > 2 || (j_e.0 - j_f.0) % 2 != 0 {
            return Err(LinkageError::SelectionRule(j_e, j_f));
        }
        Ok(LinkageSpec { j_g, j_e, j_f, pump, stokes, reduced_pump: ONE, reduced_stokes: ONE })
    }

    pub fn with_reduced(mut self, pump: C64, stokes: C64) -> Self {
        self.reduced_pump = pump;
        self.reduced_stokes = stokes;
        self
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.j_g.multiplicity(), self.j_e.multiplicity(), self.j_f.multiplicity())
    }
}

/// The constant pump (g–e) and Stokes (e–f) coupling matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPair {
    pub p: CMatrix,
    pub s: CMatrix,
}

impl CouplingPair {
    pub fn new(p: CMatrix, s: CMatrix) -> Result<Self, LinkageError> {
        if p.ncols() != s.nrows() {
            return Err(LinkageError::Dimensions(p.nrows(), p.ncols(), s.nrows(), s.ncols()));
        }
        Ok(CouplingPair { p, s })
    }

    pub fn n_g(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_e(&self) -> usize {
        self.p.ncols()
    }

    pub fn n_f(&self) -> usize {
        self.s.ncols()
    }

    pub fn dim(&self) -> usize {
        self.n_g() + self.n_e() + self.n_f()
    }
}

fn transition_matrix(j_lo: HalfInt, j_hi: HalfInt, field: &FieldSpec, reduced: C64) -> CMatrix {
    let lower = j_lo.projections();
    let upper = j_hi.projections();
    let weight = 0.5 * field.peak_rabi / (j_lo.0 as f64 + 1.0).sqrt();
    CMatrix::from_fn(lower.len(), upper.len(), |i, j| {
        let mut acc = ZERO;
        for q in -1..=1 {
            let eps = field.component(q);
            if eps == ZERO {
                continue;
            }
            let cg = clebsch_gordan(j_lo, lower[i], HalfInt::int(1), HalfInt::int(q), j_hi, upper[j])
                .expect("projections are valid by construction");
            acc += eps * cg;
        }
        acc * reduced * weight
    })
}

/// P_ij = (Ω_P/2)·(g|μ|e)·Σ_q ε_q (J_g M_i, 1 q | J_e M_j)/√(2J_g+1), and likewise for S.
pub fn build_couplings(spec: &LinkageSpec) -> CouplingPair {
    let p = transition_matrix(spec.j_g, spec.j_e, &spec.pump, spec.reduced_pump);
    let s = transition_matrix(spec.j_e, spec.j_f, &spec.stokes, spec.reduced_stokes);
    CouplingPair { p, s }
}

/// One connected component of the coupling graph, with manifold-local indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsystem {
    pub g: Vec<usize>,
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    pub couplings: CouplingPair,
}

impl Subsystem {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.g.len(), self.e.len(), self.f.len())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Splits the linkage into connected components of the tripartite coupling graph.
/// Components are ordered by their smallest global state index.
pub fn decompose_subsystems(pair: &CouplingPair) -> Vec<Subsystem> {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    let mut parent: Vec<usize> = (0..ng + ne + nf).collect();
    for i in 0..ng {
        for j in 0..ne {
            if pair.p[(i, j)] != ZERO {
                union(&mut parent, i, ng + j);
            }
        }
    }
    for i in 0..ne {
        for j in 0..nf {
            if pair.s[(i, j)] != ZERO {
                union(&mut parent, ng + i, ng + ne + j);
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    for x in 0..ng + ne + nf {
        let r = find(&mut parent, x);
        if !roots.contains(&r) {
            roots.push(r);
        }
    }
    roots
        .into_iter()
        .map(|r| {
            let members: Vec<usize> = (0..ng + ne + nf).filter(|&x| find(&mut parent, x) == r).collect();
            let g: Vec<usize> = members.iter().filter(|&&x| x < ng).copied().collect();
            let e: Vec<usize> = members.iter().filter(|&&x| x >= ng && x < ng + ne).map(|x| x - ng).collect();
            let f: Vec<usize> = members.iter().filter(|&&x| x >= ng + ne).map(|x| x - ng - ne).collect();
            let p = CMatrix::from_fn(g.len(), e.len(), |i, j| pair.p[(g[i], e[j])]);
            let s = CMatrix::from_fn(e.len(), f.len(), |i, j| pair.s[(e[i], f[j])]);
            Subsystem { g, e, f, couplings: CouplingPair { p, s } }
        })
        .collect()
}
