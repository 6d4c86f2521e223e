//! Schouten-Nijenhuis bracket on local functionals, evolutionary
//! derivations `D_P`, the Hamiltonian / bihamiltonian / exactness
//! predicates, and truncated Miura transformations `e^{ad_Y}`.
//!
//! The bracket is
//! `[P,Q] = int( dP/dth_i dQ/du^i + (-1)^p dP/du^i dQ/dth_i )`
//! for `P` of super degree `p`, and
//! `D_P = sum_s( d^s(dP/dth_a) d/du^{a,s} + (-1)^p d^s(dP/du^a) d/dth_a^s )`.

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::jetspace::{DiffPoly, JetError, JetVar, LocalFunctional, Parity};
use crate::rational::rat_int;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum BracketError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("super degree must be homogeneous, found inhomogeneous element")]
    InhomogeneousSuperDegree,
    #[error("Miura generator has a component of standard degree <= 1")]
    NonPositiveDegreeShift,
}

fn super_degree(p: &LocalFunctional) -> Result<u32, BracketError> {
    p.super_degree_value().ok_or(BracketError::InhomogeneousSuperDegree)
}

/// Schouten-Nijenhuis bracket `[P, Q]`.
pub fn schouten(p: &LocalFunctional, q: &LocalFunctional) -> Result<LocalFunctional, BracketError> {
    let n = p.n_vars();
    if n != q.n_vars() {
        return Err(BracketError::Jet(JetError::DimensionMismatch(n, q.n_vars())));
    }
    let pd = super_degree(p)?;
    let mut acc = DiffPoly::zero(n);
    for i in 0..n {
        let p_th = p.variational_derivative(i, Parity::Odd);
        let q_u = q.variational_derivative(i, Parity::Even);
        acc = acc.add(&p_th.mul(&q_u)?);
        let p_u = p.variational_derivative(i, Parity::Even);
        let q_th = q.variational_derivative(i, Parity::Odd);
        let t = p_u.mul(&q_th)?;
        acc = if pd % 2 == 1 { acc.sub(&t) } else { acc.add(&t) };
    }
    Ok(LocalFunctional::new(acc))
}

/// The evolutionary derivation `D_P` applied to a differential polynomial.
pub fn evolutionary_derivation(p: &LocalFunctional, a: &DiffPoly) -> Result<DiffPoly, BracketError> {
    let n = p.n_vars();
    if n != a.n_vars() {
        return Err(BracketError::Jet(JetError::DimensionMismatch(n, a.n_vars())));
    }
    let pd = super_degree(p)?;
    let even_comps: Vec<DiffPoly> =
        (0..n).map(|i| p.variational_derivative(i, Parity::Odd)).collect();
    let odd_comps: Vec<DiffPoly> = (0..n)
        .map(|i| {
            let d = p.variational_derivative(i, Parity::Even);
            if pd % 2 == 1 {
                d.neg()
            } else {
                d
            }
        })
        .collect();
    evolutionary_from_components(&even_comps, &odd_comps, a)
}

/// Derivation `sum_s d^s(X^a) d/du^{a,s} + sum_s d^s(T_a) d/dth_a^s` from
/// explicit component lists.
pub fn evolutionary_from_components(
    even_comps: &[DiffPoly],
    odd_comps: &[DiffPoly],
    a: &DiffPoly,
) -> Result<DiffPoly, BracketError> {
    let n = even_comps.len();
    let smax = a
        .terms()
        .flat_map(|(m, _)| m.vars().map(|w| w.order))
        .max()
        .unwrap_or(0);
    let mut out = DiffPoly::zero(a.n_vars());
    let mut even_ders: Vec<DiffPoly> = even_comps.to_vec();
    let mut odd_ders: Vec<DiffPoly> = odd_comps.to_vec();
    for s in 0..=smax {
        for i in 0..n {
            if !even_ders[i].is_zero() {
                let da = if s == 0 { a.partial_v(i) } else { a.partial_even(JetVar::even(i, s)) };
                if !da.is_zero() {
                    out = out.add(&even_ders[i].mul(&da)?);
                }
            }
            if !odd_ders[i].is_zero() {
                let da = a.partial_odd(JetVar::odd(i, s));
                if !da.is_zero() {
                    out = out.add(&odd_ders[i].mul(&da)?);
                }
            }
        }
        if s < smax {
            for i in 0..n {
                even_ders[i] = even_ders[i].total_derivative();
                odd_ders[i] = odd_ders[i].total_derivative();
            }
        }
    }
    Ok(out)
}

/// `[P, P] = 0` for `P` of super degree 2.
pub fn is_hamiltonian(p: &LocalFunctional) -> Result<bool, BracketError> {
    Ok(schouten(p, p)?.is_zero())
}

/// Compatibility: `[P1,P1] = [P2,P2] = [P1,P2] = 0`.
pub fn is_bihamiltonian(p1: &LocalFunctional, p2: &LocalFunctional) -> Result<bool, BracketError> {
    Ok(is_hamiltonian(p1)? && is_hamiltonian(p2)? && schouten(p1, p2)?.is_zero())
}

/// Exactness: `[Z, P1] = 0` and `[Z, P2] = P1`.
pub fn is_exact_triple(
    p1: &LocalFunctional,
    p2: &LocalFunctional,
    z: &LocalFunctional,
) -> Result<bool, BracketError> {
    let zp1 = schouten(z, p1)?;
    let zp2 = schouten(z, p2)?;
    Ok(zp1.is_zero() && zp2.sub(p1).is_zero())
}

/// Truncated Miura transformation `e^{ad_Y} Q` up to standard degree
/// `d_max`.  Every homogeneous component of `Y` must have standard degree
/// at least 2, so each `ad_Y` raises the degree and the sum is finite.
pub fn miura_exp(
    y: &LocalFunctional,
    q: &LocalFunctional,
    d_max: u32,
) -> Result<LocalFunctional, BracketError> {
    if let Some(dmin) = y.representative().min_standard_degree() {
        // a representative may hide a higher-degree class behind a
        // low-degree exact term, so judge on the normal form
        if dmin <= 1 && y.normal_form().min_standard_degree().unwrap_or(2) <= 1 {
            return Err(BracketError::NonPositiveDegreeShift);
        }
    }
    let mut acc = q.truncate_standard(d_max);
    let mut ad = q.clone();
    let mut fact = BigRational::one();
    // each ad_Y raises the standard degree by at least 1, so d_max + 2
    // iterations exhaust everything below the truncation
    for k in 1..=(d_max as u64 + 2) {
        ad = schouten(y, &ad)?.truncate_standard(d_max);
        if ad.representative().is_zero() {
            break;
        }
        fact *= rat_int(k as i64);
        acc = acc.add(&ad.scale(&(BigRational::one() / fact.clone())));
    }
    Ok(acc)
}
