#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use stirap::hamiltonian::{Detuning, PulseEnvelope, RwaHamiltonian};
use stirap::linalg::{c, CMatrix, CVector, C64};
use stirap::linkage::{build_couplings, CouplingPair, FieldSpec, HalfInt, LinkageSpec};
use stirap::oracles::Phases;

pub const FIG4_ETA: f64 = 1.3376;
pub const FIG4_THETA: f64 = 0.4636;

pub fn fig4_phases() -> Phases {
    Phases::new(1.1814, 0.0, 1.8925, 2.8198)
}

pub fn angular(jg: i32, je: i32, jf: i32, pump: FieldSpec, stokes: FieldSpec) -> CouplingPair {
    let spec = LinkageSpec::new(HalfInt::int(jg), HalfInt::int(je), HalfInt::int(jf), pump, stokes).unwrap();
    build_couplings(&spec)
}

pub fn sigma_pm(rabi: f64, angle: f64, phi: f64, psi: f64) -> FieldSpec {
    FieldSpec::two_angle(rabi, angle, phi, psi).unwrap()
}

pub fn fig4_pair() -> CouplingPair {
    let ph = fig4_phases();
    angular(1, 2, 3, sigma_pm(52.0, FIG4_ETA, ph.phi_p, ph.psi_p), sigma_pm(42.0, FIG4_THETA, ph.phi_s, ph.psi_s))
}

pub fn gaussians(pair: CouplingPair, pump_center: f64, stokes_center: f64, width: f64, delta: f64) -> RwaHamiltonian {
    RwaHamiltonian::new(
        pair,
        Detuning::Uniform(delta),
        PulseEnvelope::gaussian(pump_center, width).unwrap(),
        PulseEnvelope::gaussian(stokes_center, width).unwrap(),
    )
    .unwrap()
}

pub fn fig4_hamiltonian() -> RwaHamiltonian {
    gaussians(fig4_pair(), 3.0, -3.0, 6.0, 0.0)
}

pub fn fig8_pair() -> CouplingPair {
    let a = 1.0 / 3f64.sqrt();
    let f = || FieldSpec::new(30.0, [c(a, 0.0), c(a, 0.0), c(a, 0.0)]).unwrap();
    angular(1, 1, 1, f(), f())
}

pub fn twin_diamond(theta: f64) -> CouplingPair {
    angular(1, 2, 1, sigma_pm(30.0, 2.0 * PI / 5.0, 0.0, 0.0), sigma_pm(30.0, theta, 0.0, 0.0))
}

pub fn twin_diamond_initial() -> CVector {
    let a = (1.0f64 / 3.0).atan();
    let mut v = CVector::zeros(9);
    v[0] = c(a.cos(), 0.0);
    v[2] = c(a.sin(), 0.0);
    v
}

pub fn basis(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_pair<R: Rng>(rng: &mut R, ng: usize, ne: usize, nf: usize) -> CouplingPair {
    CouplingPair::new(random_matrix(rng, ng, ne), random_matrix(rng, ne, nf)).unwrap()
}

/// Random sizes (N_g, N_e, N_f) for case A, B or C.
pub fn random_sizes<R: Rng>(rng: &mut R, case: char) -> (usize, usize, usize) {
    loop {
        let (a, b, d) = (rng.gen_range(1..=4), rng.gen_range(1..=5), rng.gen_range(1..=5));
        let ok = match case {
            'A' => a <= b && b <= d,
            'B' => a > b && b > d,
            'C' => a < b && d < b,
            _ => unreachable!(),
        };
        if ok {
            return (a, b, d);
        }
    }
}

/// Number of eigenvalues of a Hermitian matrix below `tol` in magnitude, via nalgebra.
pub fn null_dimension(h: &CMatrix, tol: f64) -> usize {
    let eig = h.clone().symmetric_eigen();
    eig.eigenvalues.iter().filter(|v| v.abs() < tol).count()
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub const BUNDLED: [&str; 7] = ["fig1", "fig2", "fig4", "fig5", "fig8", "fig9", "fig10"];
