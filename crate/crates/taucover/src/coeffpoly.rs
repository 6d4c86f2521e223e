//! Sparse multivariate polynomials in the flat coordinates `v^1..v^n` with
//! exact rational coefficients.  These are the coefficient ring of the
//! differential polynomial algebra and the value type of all hierarchy
//! tables.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{rat_from_str, rat_int, rat_to_f64, rat_to_string};

/// Exponent vector, one entry per variable.
pub type Exponents = Vec<u32>;

/// Sparse polynomial over `v^1..v^n` (0-based variable indices internally).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CoeffPoly {
    n: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

impl CoeffPoly {
    pub fn zero(n: usize) -> Self {
        CoeffPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, BigRational::one())
    }

    pub fn int(n: usize, c: i64) -> Self {
        Self::constant(n, rat_int(c))
    }

    /// The variable `v^{idx+1}` (0-based `idx`).
    pub fn var(n: usize, idx: usize) -> Self {
        assert!(idx < n, "variable index out of range");
        let mut e = vec![0; n];
        e[idx] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(e, BigRational::one());
        p
    }

    pub fn monomial(n: usize, exps: Exponents, c: BigRational) -> Self {
        assert_eq!(exps.len(), n);
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn constant_part(&self) -> BigRational {
        self.terms.get(&vec![0; self.n]).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    fn insert(&mut self, e: Exponents, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        CoeffPoly {
            n: self.n,
            terms: self.terms.iter().map(|(e, a)| (e.clone(), a * c)).collect(),
        }
    }

    /// Partial derivative with respect to `v^{idx+1}`.
    pub fn partial(&self, idx: usize) -> Self {
        assert!(idx < self.n);
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] -= 1;
            out.insert(e2, c * rat_int(e[idx] as i64));
        }
        out
    }

    /// Antiderivative in `v^{idx+1}` with zero constant of integration.
    pub fn antiderivative(&self, idx: usize) -> Self {
        assert!(idx < self.n);
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[idx] += 1;
            let k = e2[idx] as i64;
            out.insert(e2, c / rat_int(k));
        }
        out
    }

    /// Multiply each monomial of total degree `k` by `1/(k + shift)`.
    /// Used by the Poincare-lemma reconstruction of potentials from
    /// closed gradients; requires every term to have `k + shift > 0`.
    pub fn scale_by_inverse_degree(&self, shift: i64) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let k = e.iter().sum::<u32>() as i64 + shift;
            assert!(k > 0, "scale_by_inverse_degree hit degree {k}");
            out.insert(e.clone(), c / rat_int(k));
        }
        out
    }

    pub fn eval_rat(&self, point: &[BigRational]) -> BigRational {
        assert_eq!(point.len(), self.n);
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t *= &point[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.n);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (i, &k) in e.iter().enumerate() {
                t *= point[i].powi(k as i32);
            }
            acc += t;
        }
        acc
    }

    /// Substitute `v^{i+1} -> args[i]` with the result truncated at total
    /// degree `max_degree`.  Used by the Legendre series inversion.
    pub fn compose_truncated(&self, args: &[CoeffPoly], max_degree: u32) -> CoeffPoly {
        assert_eq!(args.len(), self.n);
        let m = args.first().map(|a| a.n).unwrap_or(0);
        let mut out = CoeffPoly::zero(m);
        for (e, c) in &self.terms {
            let mut t = CoeffPoly::constant(m, c.clone());
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t = t.mul_truncated(&args[i], max_degree);
                    if t.is_zero() {
                        break;
                    }
                }
            }
            out = &out + &t;
        }
        out.truncate_degree(max_degree)
    }

    pub fn mul_truncated(&self, other: &CoeffPoly, max_degree: u32) -> CoeffPoly {
        assert_eq!(self.n, other.n);
        let mut out = CoeffPoly::zero(self.n);
        for (e1, c1) in &self.terms {
            let d1: u32 = e1.iter().sum();
            for (e2, c2) in &other.terms {
                let d2: u32 = e2.iter().sum();
                if d1 + d2 > max_degree {
                    continue;
                }
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.insert(e, c1 * c2);
            }
        }
        out
    }

    pub fn truncate_degree(&self, max_degree: u32) -> CoeffPoly {
        CoeffPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= max_degree)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Keep only terms of total degree >= `min_degree`.
    pub fn truncate_below(&self, min_degree: u32) -> CoeffPoly {
        CoeffPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() >= min_degree)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Sum of |coefficients| as f64; zero iff the polynomial is zero.
    pub fn abs_norm(&self) -> f64 {
        use num_traits::Signed;
        self.terms.values().map(|c| rat_to_f64(&c.abs())).sum()
    }

    /// Canonical JSON-friendly form: list of `[[e1,..,en], "p/q"]` pairs in
    /// sorted monomial order.
    pub fn to_json(&self) -> serde_json::Value {
        let list: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(e, c)| serde_json::json!([e, rat_to_string(c)]))
            .collect();
        serde_json::Value::Array(list)
    }

    pub fn from_json(n: usize, v: &serde_json::Value) -> Result<Self, String> {
        let arr = v.as_array().ok_or("potential terms must be a list")?;
        let mut p = Self::zero(n);
        for item in arr {
            let pair = item.as_array().filter(|a| a.len() == 2).ok_or("term must be [exps, coeff]")?;
            let exps: Exponents = serde_json::from_value(pair[0].clone()).map_err(|e| e.to_string())?;
            if exps.len() != n {
                return Err(format!("exponent vector length {} != n = {n}", exps.len()));
            }
            let c = rat_from_str(pair[1].as_str().ok_or("coefficient must be a string")?)?;
            p.insert(exps, c);
        }
        Ok(p)
    }
}

impl Add for &CoeffPoly {
    type Output = CoeffPoly;
    fn add(self, other: &CoeffPoly) -> CoeffPoly {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &CoeffPoly {
    type Output = CoeffPoly;
    fn sub(self, other: &CoeffPoly) -> CoeffPoly {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &CoeffPoly {
    type Output = CoeffPoly;
    fn neg(self) -> CoeffPoly {
        CoeffPoly {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }
}

impl Mul for &CoeffPoly {
    type Output = CoeffPoly;
    fn mul(self, other: &CoeffPoly) -> CoeffPoly {
        assert_eq!(self.n, other.n);
        let mut out = CoeffPoly::zero(self.n);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.insert(e, c1 * c2);
            }
        }
        out
    }
}

impl fmt::Display for CoeffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            let s = rat_to_string(c);
            let (sign, mag) = match s.strip_prefix('-') {
                Some(m) => ("-", m.to_string()),
                None => ("+", s),
            };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {} ", sign)?;
            }
            let mut factors = Vec::new();
            if mag != "1" || e.iter().all(|&k| k == 0) {
                factors.push(mag.clone());
            }
            for (i, &k) in e.iter().enumerate() {
                if k == 1 {
                    factors.push(format!("v{}", i + 1));
                } else if k > 1 {
                    factors.push(format!("v{}^{}", i + 1, k));
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl Serialize for CoeffPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoeffPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        // Requires the exponent vectors to fix n; empty polynomials
        // deserialize with n = 0 and must be re-dimensioned by the caller.
        let v = serde_json::Value::deserialize(d)?;
        let n = v
            .as_array()
            .and_then(|a| a.first())
            .and_then(|t| t.as_array())
            .and_then(|p| p.first())
            .and_then(|e| e.as_array())
            .map(|e| e.len())
            .unwrap_or(0);
        CoeffPoly::from_json(n, &v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn arithmetic() {
        let n = 2;
        let x = CoeffPoly::var(n, 0);
        let y = CoeffPoly::var(n, 1);
        let p = &(&x * &x) + &y; // v1^2 + v2
        assert_eq!(p.partial(0), (&x + &x));
        assert_eq!(p.partial(1), CoeffPoly::one(n));
        let q = &p - &p;
        assert!(q.is_zero());
    }

    #[test]
    fn antiderivative_inverts_partial() {
        let n = 2;
        let x = CoeffPoly::var(n, 0);
        let y = CoeffPoly::var(n, 1);
        let p = &(&x * &y) + &(&x * &x); // v1 v2 + v1^2
        assert_eq!(p.antiderivative(0).partial(0), p);
    }

    #[test]
    fn eval_matches_display_example() {
        let n = 1;
        // v^3/6
        let v = CoeffPoly::var(n, 0);
        let f = (&(&v * &v) * &v).scale(&rat(1, 6));
        assert_eq!(f.eval_rat(&[rat_int(2)]), rat(8, 6));
        assert!((f.eval_f64(&[2.0]) - 8.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let n = 2;
        let x = CoeffPoly::var(n, 0);
        let y = CoeffPoly::var(n, 1);
        let p = &(&x * &y).scale(&rat(1, 2)) + &CoeffPoly::int(n, -3);
        let j = p.to_json();
        assert_eq!(CoeffPoly::from_json(n, &j).unwrap(), p);
    }

    #[test]
    fn compose_truncates() {
        let n = 1;
        let v = CoeffPoly::var(n, 0);
        // f = v^2, substitute v -> v + v^2, truncate at degree 3
        let f = &v * &v;
        let g = f.compose_truncated(&[&v + &(&v * &v)], 3);
        // (v+v^2)^2 = v^2 + 2v^3 + v^4 -> v^2 + 2v^3
        let expect = &(&v * &v) + &(&(&v * &v) * &v).scale(&rat_int(2));
        assert_eq!(g, expect);
    }
}
