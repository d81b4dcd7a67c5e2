mod common;

use common::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use stirap::adiabatic_basis::{dark_states_case_a, linearize_chains, BasisError, ChainBasis, DarkKind};
use stirap::linalg::{c, max_abs, CMatrix};
use stirap::linkage::{decompose_subsystems, CouplingPair};
use stirap::morris_shore::{ms_decompose, MsDecomposition};

fn chains_of(pair: &CouplingPair) -> (MsDecomposition, ChainBasis) {
    let dec = ms_decompose(&pair.s);
    let family = dark_states_case_a(pair, &dec).unwrap();
    let basis = linearize_chains(pair, &dec, &family).unwrap();
    (dec, basis)
}

fn fig4_odd() -> CouplingPair {
    // the subsystem holding g M = ±1
    decompose_subsystems(&fig4_pair()).into_iter().find(|s| s.sizes() == (2, 3, 4)).unwrap().couplings
}

/// Checks the zero pattern and diagonal blocks of T⁻¹HT for a case-A pair.
fn check_chain_structure(pair: &CouplingPair, tol: f64) {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    let (_, basis) = chains_of(pair);
    let t = basis.transform();
    let ti = basis.inverse_transform();
    let n = ng + ne + nf;
    assert!(max_abs(&(&ti * &t - CMatrix::identity(n, n))) < tol);

    let (p, s) = (0.7, 0.4);
    let h = gaussians(pair.clone(), 0.0, 0.0, 1.0, 0.9).at_amplitudes(p, s);
    let hp = basis.transformed_hamiltonian(&h);
    let scale = max_abs(&h);
    let (e0, f0) = (ng, ng + ne);
    let small = |x: stirap::linalg::C64| x.norm() < tol * scale;
    for i in 0..ng {
        for j in 0..ng {
            assert!(small(hp[(i, j)]));
        }
        for j in 0..nf {
            assert!(small(hp[(i, f0 + j)]) && small(hp[(f0 + j, i)]));
        }
    }
    for k in 0..ne {
        for l in 0..ng {
            let (q2, s1) = (hp[(e0 + k, l)], hp[(e0 + k, f0 + l)]);
            if k == l {
                // p Q₂ and s Σ₁ with Σ₁/Q₂ = 1/𝒩_f
                assert!((q2 - c(p * basis.n_e[l], 0.0)).norm() < tol * scale);
                assert!((s1 - c(s * basis.n_e[l] / basis.n_f[l], 0.0)).norm() < tol * scale);
            } else {
                assert!(small(q2) && small(s1), "e{k} couples to chain {l}");
            }
        }
    }
}

#[test]
fn fig4_subsystem_has_two_chains() {
    let pair = fig4_odd();
    let (dec, basis) = chains_of(&pair);
    assert_eq!(basis.chains(), 2);
    let n = pair.dim();
    assert!(max_abs(&(basis.inverse_transform() * basis.transform() - CMatrix::identity(n, n))) < 1e-12);
    for l in 0..2 {
        let dual = basis.closed_form_dual(l, &pair, &dec.sigma);
        let row = basis.e_dual.row(l).transpose();
        assert!((dual - row).norm() < 1e-12);
    }
    check_chain_structure(&pair, 1e-12);
}

#[test]
fn biorthogonal_e_sets() {
    let pair = fig4_odd();
    let (_, basis) = chains_of(&pair);
    let ne = pair.n_e();
    assert!(max_abs(&(&basis.e_dual * &basis.e - CMatrix::identity(ne, ne))) < 1e-12);
    // f set is orthonormal, e set is not
    let nf = pair.n_f();
    assert!(max_abs(&(basis.f.adjoint() * &basis.f - CMatrix::identity(nf, nf))) < 1e-12);
    assert!(max_abs(&(basis.e.adjoint() * &basis.e - CMatrix::identity(ne, ne))) > 1e-3);
}

#[test]
fn transfer_relation_along_dark_states() {
    let pair = fig4_odd();
    let (_, basis) = chains_of(&pair);
    let dec = ms_decompose(&pair.s);
    let family = dark_states_case_a(&pair, &dec).unwrap();
    let ham = gaussians(pair.clone(), 3.0, -3.0, 6.0, 0.0);
    let (ng, ne) = (pair.n_g(), pair.n_e());
    for k in 0..50 {
        let t = -27.0 + 54.0 * k as f64 / 49.0;
        let (p, s) = ham.envelopes(t);
        for (d, member) in family.members.iter().enumerate() {
            let a = basis.chain_amplitudes(&family.vector(d, p, s));
            for l in 0..basis.chains() {
                let x = a[l];
                let z = a[ng + ne + l];
                let r = x * c(p * basis.n_f[l], 0.0) + z * c(s, 0.0);
                assert!(r.norm() < 1e-12 * (p.max(s) * basis.n_f[l]).max(1e-300), "t={t} state {d} chain {l}: {r}");
            }
            if member.kind == DarkKind::Transfer {
                // each transfer state occupies one chain only
                let occupied = (0..basis.chains()).filter(|&l| a[l].norm() > 1e-9 || a[ng + ne + l].norm() > 1e-9).count();
                assert!(occupied <= 1);
            }
        }
    }
}

#[test]
fn random_345_structure() {
    let mut rng = StdRng::seed_from_u64(345);
    for _ in 0..20 {
        let pair = random_pair(&mut rng, 3, 4, 5);
        check_chain_structure(&pair, 1e-11);
    }
}

#[test]
fn nondegenerate_is_one_chain() {
    let pair = CouplingPair::new(CMatrix::from_element(1, 1, c(0.8, 0.1)), CMatrix::from_element(1, 1, c(0.5, -0.3))).unwrap();
    let (_, basis) = chains_of(&pair);
    assert_eq!(basis.chains(), 1);
    check_chain_structure(&pair, 1e-13);
}

#[test]
fn trapped_states_are_rejected() {
    // a g state with no pump coupling cannot form a chain
    let mut p = CMatrix::zeros(2, 2);
    p[(0, 0)] = c(1.0, 0.0);
    let s = CMatrix::identity(2, 2);
    let pair = CouplingPair::new(p, s).unwrap();
    let dec = ms_decompose(&pair.s);
    let family = dark_states_case_a(&pair, &dec).unwrap();
    assert!(matches!(linearize_chains(&pair, &dec, &family), Err(BasisError::TrappedStates(1))));
}
