//! Randomized identity checks for the differential polynomial algebra.

mod common;

use common::{random_diffpoly, rng};
use num_traits::Zero;
use taucover::jetspace::{Degree, DegreeKind, DiffPoly, Parity};

const SEED: u64 = 0x7a5c_0e41;

#[test]
fn total_derivative_is_a_derivation() {
    let mut r = rng(SEED);
    for n in [1usize, 2] {
        for _ in 0..30 {
            let a = random_diffpoly(&mut r, n, 0, 2);
            let b = random_diffpoly(&mut r, n, 2, 2);
            let lhs = a.mul(&b).unwrap().total_derivative();
            let rhs = a
                .total_derivative()
                .mul(&b)
                .unwrap()
                .add(&a.mul(&b.total_derivative()).unwrap());
            assert_eq!(lhs, rhs, "d(ab) != d(a)b + a d(b)");
        }
    }
}

#[test]
fn super_commutativity_with_signs() {
    let mut r = rng(SEED + 1);
    let n = 2;
    for pa in 0..=2u32 {
        for pb in 0..=2u32 {
            for _ in 0..10 {
                let a = random_diffpoly(&mut r, n, pa, 2);
                let b = random_diffpoly(&mut r, n, pb, 2);
                let ab = a.mul(&b).unwrap();
                let ba = b.mul(&a).unwrap();
                let expect = if (pa * pb) % 2 == 0 { ba } else { ba.neg() };
                assert_eq!(ab, expect, "ab != (-1)^|a||b| ba");
            }
        }
    }
}

#[test]
fn euler_operators_annihilate_total_derivatives() {
    let mut r = rng(SEED + 2);
    for n in [1usize, 2] {
        for sd in 0..=2u32 {
            for _ in 0..10 {
                let b = random_diffpoly(&mut r, n, sd, 2);
                let db = b.total_derivative();
                for i in 0..n {
                    assert!(db.variational_derivative(i, Parity::Even).is_zero());
                    assert!(db.variational_derivative(i, Parity::Odd).is_zero());
                }
            }
        }
    }
}

#[test]
fn integrate_is_a_right_inverse() {
    let mut r = rng(SEED + 3);
    for n in [1usize, 2] {
        for sd in 0..=2u32 {
            for _ in 0..15 {
                let b = random_diffpoly(&mut r, n, sd, 2);
                let a = b.total_derivative();
                assert!(a.is_exact());
                let g = a.integrate().unwrap();
                assert_eq!(g.total_derivative(), a, "d(integrate(a)) != a");
            }
        }
    }
}

#[test]
fn normal_form_idempotent_and_shift_invariant() {
    let mut r = rng(SEED + 4);
    for n in [1usize, 2] {
        for _ in 0..20 {
            let a = random_diffpoly(&mut r, n, 1, 2);
            let b = random_diffpoly(&mut r, n, 1, 2);
            let nf = a.normal_form();
            assert_eq!(nf.normal_form(), nf, "normal form not idempotent");
            let shifted = a.add(&b.total_derivative());
            assert_eq!(shifted.normal_form(), nf, "normal form not invariant under + d(b)");
        }
    }
}

#[test]
fn total_derivative_raises_standard_degree_by_one() {
    let mut r = rng(SEED + 5);
    let n = 2;
    for sd in 0..=2u32 {
        for _ in 0..20 {
            let a = random_diffpoly(&mut r, n, sd, 2);
            // project to a homogeneous standard component first
            let d = match a.max_standard_degree() {
                Some(d) => d,
                None => continue,
            };
            let comp = a.standard_component(d);
            let da = comp.total_derivative();
            match da.degree(DegreeKind::Standard) {
                Degree::Homogeneous(d2) => assert_eq!(d2, d + 1),
                Degree::Zero => {}
                Degree::Inhomogeneous => panic!("d broke homogeneity"),
            }
            // super degree is preserved
            match da.degree(DegreeKind::Super) {
                Degree::Homogeneous(p) => assert_eq!(p, sd),
                Degree::Zero => {}
                Degree::Inhomogeneous => panic!("d broke super degree"),
            }
        }
    }
}

#[test]
fn zero_preimage_convention() {
    // preimages carry no constant term
    let a = DiffPoly::parse(1, "u(1,1)").unwrap();
    let g = a.integrate().unwrap();
    assert!(g.coeff_part().constant_part().is_zero());
    assert_eq!(g, DiffPoly::parse(1, "v1").unwrap());
}
