//! Shared generators for randomized identity tests.  Coefficients are
//! drawn from a seeded generator so every failure is reproducible.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taucover::coeffpoly::CoeffPoly;
use taucover::jetspace::{DiffPoly, JetVar, LocalFunctional};
use taucover::rational::rat;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_coeff(rng: &mut ChaCha8Rng, n: usize, max_deg: u32) -> CoeffPoly {
    let mut p = CoeffPoly::zero(n);
    let nterms = rng.gen_range(1..=2);
    for _ in 0..nterms {
        let mut e = vec![0u32; n];
        let deg = rng.gen_range(0..=max_deg);
        for _ in 0..deg {
            e[rng.gen_range(0..n)] += 1;
        }
        let num = rng.gen_range(-4i64..=4).max(1) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let den = rng.gen_range(1i64..=3);
        p = &p + &CoeffPoly::monomial(n, e, rat(num, den));
    }
    p
}

/// Random jet monomial with exactly `super_deg` odd factors, orders
/// bounded by `max_order`, and a couple of even factors.
fn random_monomial(
    rng: &mut ChaCha8Rng,
    n: usize,
    super_deg: u32,
    max_order: u32,
) -> Option<DiffPoly> {
    let mut m = DiffPoly::one(n);
    let evens = rng.gen_range(0..=2);
    for _ in 0..evens {
        let w = JetVar::even(rng.gen_range(0..n), rng.gen_range(1..=max_order));
        m = m.mul(&DiffPoly::jet(n, w)).ok()?;
    }
    let mut odd_pool: Vec<JetVar> = (0..n)
        .flat_map(|i| (0..=max_order).map(move |s| JetVar::odd(i, s)))
        .collect();
    for _ in 0..super_deg {
        if odd_pool.is_empty() {
            return None;
        }
        let k = rng.gen_range(0..odd_pool.len());
        let w = odd_pool.swap_remove(k);
        m = m.mul(&DiffPoly::jet(n, w)).ok()?;
    }
    if m.is_zero() {
        None
    } else {
        Some(m)
    }
}

/// Random differential polynomial of homogeneous super degree.
pub fn random_diffpoly(rng: &mut ChaCha8Rng, n: usize, super_deg: u32, max_order: u32) -> DiffPoly {
    let mut out = DiffPoly::zero(n);
    let terms = rng.gen_range(1..=3);
    for _ in 0..terms {
        if let Some(m) = random_monomial(rng, n, super_deg, max_order) {
            out = out.add(&m.scale_coeff(&random_coeff(rng, n, 2)));
        }
    }
    out
}

pub fn random_functional(
    rng: &mut ChaCha8Rng,
    n: usize,
    super_deg: u32,
    max_order: u32,
) -> LocalFunctional {
    loop {
        let p = random_diffpoly(rng, n, super_deg, max_order);
        if !p.is_zero() {
            return LocalFunctional::new(p);
        }
    }
}

/// Like `random_functional` but with the standard degree also capped:
/// each monomial keeps `sum of orders <= max_std`.
pub fn random_functional_capped(
    rng: &mut ChaCha8Rng,
    n: usize,
    super_deg: u32,
    max_std: u32,
) -> LocalFunctional {
    loop {
        let raw = random_diffpoly(rng, n, super_deg, 2);
        let mut capped = DiffPoly::zero(n);
        for (m, c) in raw.terms() {
            if m.standard_degree() <= max_std {
                let mut t = DiffPoly::zero(n);
                t.add_term(m.clone(), c.clone());
                capped = capped.add(&t);
            }
        }
        if !capped.is_zero() {
            return LocalFunctional::new(capped);
        }
    }
}
