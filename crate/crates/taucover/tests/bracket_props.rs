//! Randomized checks of the Schouten bracket identities and the
//! evolutionary-derivation identities used throughout the deformation
//! machinery.

mod common;

use common::{random_diffpoly, random_functional, rng};
use taucover::brackets::{evolutionary_derivation, miura_exp, schouten};
use taucover::jetspace::{LocalFunctional, Parity};

const SEED: u64 = 0x5eed_b4ac;

fn sign(k: u32) -> i64 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed(t: &LocalFunctional, s: i64) -> LocalFunctional {
    if s >= 0 {
        t.clone()
    } else {
        t.neg()
    }
}

#[test]
fn graded_antisymmetry() {
    let mut r = rng(SEED);
    let n = 2;
    for pd in 0..=3u32 {
        for qd in 0..=3u32 {
            for _ in 0..4 {
                let p = random_functional(&mut r, n, pd, 2);
                let q = random_functional(&mut r, n, qd, 2);
                let a = schouten(&p, &q).unwrap();
                let b = schouten(&q, &p).unwrap();
                let diff = a.sub(&signed(&b, sign(pd * qd)));
                assert!(diff.is_zero(), "[P,Q] != (-1)^pq [Q,P] at p={pd}, q={qd}");
            }
        }
    }
}

#[test]
fn graded_jacobi() {
    let mut r = rng(SEED + 1);
    let n = 2;
    let degs = [(2u32, 2u32, 1u32), (2, 1, 0), (1, 1, 1), (2, 2, 0), (3, 1, 1), (2, 1, 1)];
    for &(pd, qd, rd) in &degs {
        for _ in 0..4 {
            let p = random_functional(&mut r, n, pd, 2);
            let q = random_functional(&mut r, n, qd, 2);
            let s = random_functional(&mut r, n, rd, 2);
            let t1 = schouten(&schouten(&p, &q).unwrap(), &s).unwrap();
            let t2 = schouten(&schouten(&q, &s).unwrap(), &p).unwrap();
            let t3 = schouten(&schouten(&s, &p).unwrap(), &q).unwrap();
            let total = signed(&t1, sign(pd * rd))
                .add(&signed(&t2, sign(qd * pd)))
                .add(&signed(&t3, sign(rd * qd)));
            assert!(total.is_zero(), "graded Jacobi fails at ({pd},{qd},{rd})");
        }
    }
}

#[test]
fn variational_derivative_of_bracket() {
    // delta_u [P,Q] = D_P(delta_u Q) + (-1)^{pq} D_Q(delta_u P)
    let mut r = rng(SEED + 2);
    let n = 2;
    for &(pd, qd) in &[(2u32, 1u32), (2, 0), (1, 1), (2, 2), (1, 0)] {
        for _ in 0..5 {
            let p = random_functional(&mut r, n, pd, 2);
            let q = random_functional(&mut r, n, qd, 2);
            let b = schouten(&p, &q).unwrap();
            for a in 0..n {
                let lhs = b.variational_derivative(a, Parity::Even);
                let t1 =
                    evolutionary_derivation(&p, &q.variational_derivative(a, Parity::Even)).unwrap();
                let t2 =
                    evolutionary_derivation(&q, &p.variational_derivative(a, Parity::Even)).unwrap();
                let rhs = if sign(pd * qd) > 0 { t1.add(&t2) } else { t1.sub(&t2) };
                assert!(
                    lhs.sub(&rhs).is_zero(),
                    "bracket variational identity fails at ({pd},{qd})"
                );
            }
        }
    }
}

#[test]
fn derivation_of_bracket_as_commutator() {
    // (-1)^{p-1} D_[P,Q] = D_P D_Q - (-1)^{(p-1)(q-1)} D_Q D_P
    let mut r = rng(SEED + 3);
    let n = 2;
    for &(pd, qd) in &[(2u32, 1u32), (1, 1), (2, 2), (2, 0), (3, 2)] {
        for _ in 0..3 {
            let p = random_functional(&mut r, n, pd, 2);
            let q = random_functional(&mut r, n, qd, 2);
            let b = schouten(&p, &q).unwrap();
            for sd in [0u32, 1] {
                let a = random_diffpoly(&mut r, n, sd, 2);
                let lhs = signed(
                    &LocalFunctional::new(evolutionary_derivation(&b, &a).unwrap()),
                    sign(pd + 1),
                );
                let t1 = evolutionary_derivation(&p, &evolutionary_derivation(&q, &a).unwrap())
                    .unwrap();
                let t2 = evolutionary_derivation(&q, &evolutionary_derivation(&p, &a).unwrap())
                    .unwrap();
                let rhs = if sign((pd + 1) * (qd + 1)) > 0 { t1.sub(&t2) } else { t1.add(&t2) };
                // operator identity holds on the nose, not only up to total derivatives
                assert!(
                    lhs.representative().sub(&rhs).is_zero(),
                    "commutator identity fails at ({pd},{qd})"
                );
            }
        }
    }
}

#[test]
fn commutator_with_total_derivative_vanishes() {
    // [d, D_P] = 0 on random arguments
    let mut r = rng(SEED + 4);
    let n = 2;
    for pd in 0..=2u32 {
        for _ in 0..6 {
            let p = random_functional(&mut r, n, pd, 2);
            let a = random_diffpoly(&mut r, n, 1, 2);
            let lhs = evolutionary_derivation(&p, &a.total_derivative()).unwrap();
            let rhs = evolutionary_derivation(&p, &a).unwrap().total_derivative();
            assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn miura_is_a_bracket_homomorphism_up_to_truncation() {
    let mut r = rng(SEED + 5);
    let n = 1;
    let d_max = 6;
    for _ in 0..6 {
        // generator of degree >= 2 components
        let y = {
            let mut y = random_diffpoly(&mut r, n, 1, 3);
            y = y
                .terms()
                .filter(|(m, _)| m.standard_degree() >= 2)
                .fold(taucover::jetspace::DiffPoly::zero(n), |acc, (m, c)| {
                    let mut t = taucover::jetspace::DiffPoly::zero(n);
                    t.add_term(m.clone(), c.clone());
                    acc.add(&t)
                });
            LocalFunctional::new(y)
        };
        if y.representative().is_zero() {
            continue;
        }
        let p = random_functional(&mut r, n, 2, 2);
        let q = random_functional(&mut r, n, 1, 2);
        let lhs = miura_exp(&y, &schouten(&p, &q).unwrap(), d_max).unwrap();
        let rhs = schouten(
            &miura_exp(&y, &p, d_max).unwrap(),
            &miura_exp(&y, &q, d_max).unwrap(),
        )
        .unwrap()
        .truncate_standard(d_max);
        assert!(
            lhs.sub(&rhs).truncate_standard(d_max).is_zero(),
            "e^ad_Y is not a bracket homomorphism mod degree > {d_max}"
        );
    }
}
