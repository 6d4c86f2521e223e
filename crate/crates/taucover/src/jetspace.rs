//! The graded super-commutative differential polynomial algebra on the jet
//! space of the supermanifold: even jet variables `u^{i,s}` (s >= 1; the
//! order-0 slot `u^{i,0} = v^i` lives in the polynomial coefficients), odd
//! variables `theta_i^s` (s >= 0), the total derivative, the two
//! gradations, variational derivatives, the exactness test and the
//! deterministic inversion of the total derivative.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffpoly::CoeffPoly;
use crate::rational::{rat_from_str, rat_int};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// A jet variable `u^{i,s}` (even) or `theta_i^s` (odd).  Indices are
/// 0-based internally; the text form prints them 1-based.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct JetVar {
    pub parity: Parity,
    pub index: usize,
    pub order: u32,
}

impl JetVar {
    pub fn even(index: usize, order: u32) -> Self {
        assert!(order >= 1, "even jet variables start at order 1; order 0 is a coefficient variable");
        JetVar { parity: Parity::Even, index, order }
    }

    pub fn odd(index: usize, order: u32) -> Self {
        JetVar { parity: Parity::Odd, index, order }
    }

    pub fn raised(self) -> Self {
        JetVar { order: self.order + 1, ..self }
    }

    fn rank(&self) -> (u32, usize, u8) {
        // order first, then index, odd above even at a tie
        (self.order, self.index, if self.parity == Parity::Odd { 1 } else { 0 })
    }
}

impl Ord for JetVar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for JetVar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parity {
            Parity::Even => write!(f, "u({},{})", self.index + 1, self.order),
            Parity::Odd => write!(f, "th({},{})", self.index + 1, self.order),
        }
    }
}

/// A monomial in jet variables: even factors with multiplicities, odd
/// factors as a strictly sorted duplicate-free list.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct JetMonomial {
    pub even: Vec<(JetVar, u32)>,
    pub odd: Vec<JetVar>,
}

impl JetMonomial {
    pub fn unit() -> Self {
        JetMonomial::default()
    }

    pub fn is_unit(&self) -> bool {
        self.even.is_empty() && self.odd.is_empty()
    }

    pub fn standard_degree(&self) -> u32 {
        self.even.iter().map(|(w, m)| w.order * m).sum::<u32>()
            + self.odd.iter().map(|w| w.order).sum::<u32>()
    }

    pub fn super_degree(&self) -> u32 {
        self.odd.len() as u32
    }

    pub fn max_var(&self) -> Option<JetVar> {
        let e = self.even.last().map(|(w, _)| *w);
        let o = self.odd.last().copied();
        match (e, o) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    pub fn contains(&self, w: JetVar) -> bool {
        self.multiplicity(w) > 0
    }

    pub fn multiplicity(&self, w: JetVar) -> u32 {
        match w.parity {
            Parity::Even => self.even.iter().find(|(v, _)| *v == w).map(|(_, m)| *m).unwrap_or(0),
            Parity::Odd => u32::from(self.odd.contains(&w)),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = JetVar> + '_ {
        self.even.iter().map(|(w, _)| *w).chain(self.odd.iter().copied())
    }

    /// Multiply by an even variable.
    fn push_even(&self, w: JetVar, m: u32) -> JetMonomial {
        debug_assert_eq!(w.parity, Parity::Even);
        let mut out = self.clone();
        match out.even.iter_mut().find(|(v, _)| *v == w) {
            Some((_, mm)) => *mm += m,
            None => {
                out.even.push((w, m));
                out.even.sort_by_key(|(v, _)| *v);
            }
        }
        out
    }

    /// Multiply by an odd variable on the LEFT of the odd word; returns the
    /// normalized monomial and the sign, or None if the factor repeats.
    fn push_odd_left(&self, w: JetVar) -> Option<(JetMonomial, i8)> {
        debug_assert_eq!(w.parity, Parity::Odd);
        if self.odd.contains(&w) {
            return None;
        }
        let pos = self.odd.partition_point(|v| *v < w);
        let sign = if pos % 2 == 0 { 1 } else { -1 };
        let mut out = self.clone();
        out.odd.insert(pos, w);
        Some((out, sign))
    }

    /// Remove the odd factor at `pos` (sign of moving it to the front).
    fn remove_odd(&self, pos: usize) -> (JetMonomial, i8) {
        let sign = if pos % 2 == 0 { 1 } else { -1 };
        let mut out = self.clone();
        out.odd.remove(pos);
        (out, sign)
    }

    /// Descending variable sequence with multiplicities, for the monomial order.
    fn desc_vars(&self) -> Vec<JetVar> {
        let mut vs: Vec<JetVar> = Vec::new();
        for (w, m) in &self.even {
            for _ in 0..*m {
                vs.push(*w);
            }
        }
        vs.extend(self.odd.iter().copied());
        vs.sort();
        vs.reverse();
        vs
    }
}

impl Ord for JetMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = self.desc_vars();
        let b = other.desc_vars();
        for (x, y) in a.iter().zip(b.iter()) {
            match x.cmp(y) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        a.len().cmp(&b.len())
    }
}

impl PartialOrd for JetMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for JetMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (w, m) in &self.even {
            if *m == 1 {
                parts.push(format!("{w}"));
            } else {
                parts.push(format!("{w}^{m}"));
            }
        }
        for w in &self.odd {
            parts.push(format!("{w}"));
        }
        write!(f, "{}", parts.join("*"))
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("not exact: element is not a total derivative")]
    NotExact,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Degree query result: homogeneous of a degree, the zero polynomial
/// (homogeneous of every degree), or inhomogeneous.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Degree {
    Homogeneous(u32),
    Zero,
    Inhomogeneous,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DegreeKind {
    Standard,
    Super,
}

/// Element of the differential polynomial algebra: a sparse sum of jet
/// monomials with `CoeffPoly` coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DiffPoly {
    n: usize,
    terms: BTreeMap<JetMonomial, CoeffPoly>,
}

impl DiffPoly {
    pub fn zero(n: usize) -> Self {
        DiffPoly { n, terms: BTreeMap::new() }
    }

    pub fn from_coeff(c: CoeffPoly) -> Self {
        let n = c.n_vars();
        let mut p = Self::zero(n);
        p.add_term(JetMonomial::unit(), c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::from_coeff(CoeffPoly::one(n))
    }

    /// `v^{i+1}` as a differential polynomial (coefficient variable).
    pub fn v(n: usize, index: usize) -> Self {
        Self::from_coeff(CoeffPoly::var(n, index))
    }

    pub fn jet(n: usize, w: JetVar) -> Self {
        assert!(w.index < n);
        let mut m = JetMonomial::unit();
        match w.parity {
            Parity::Even => m = m.push_even(w, 1),
            Parity::Odd => m.odd.push(w),
        }
        let mut p = Self::zero(n);
        p.add_term(m, CoeffPoly::one(n));
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&JetMonomial, &CoeffPoly)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// The jet-free part (coefficient of the unit monomial).
    pub fn coeff_part(&self) -> CoeffPoly {
        self.terms.get(&JetMonomial::unit()).cloned().unwrap_or_else(|| CoeffPoly::zero(self.n))
    }

    pub fn add_term(&mut self, m: JetMonomial, c: CoeffPoly) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = &*o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffPoly {
        DiffPoly {
            n: self.n,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, r: &BigRational) -> DiffPoly {
        if r.is_zero() {
            return Self::zero(self.n);
        }
        DiffPoly {
            n: self.n,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.scale(r))).collect(),
        }
    }

    pub fn scale_coeff(&self, c: &CoeffPoly) -> DiffPoly {
        let mut out = Self::zero(self.n);
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    /// Super-commutative product with sign bookkeeping.
    pub fn mul(&self, other: &DiffPoly) -> Result<DiffPoly, JetError> {
        if self.n != other.n {
            return Err(JetError::DimensionMismatch(self.n, other.n));
        }
        let mut out = Self::zero(self.n);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                if let Some((m, sign)) = mul_monomials(m1, m2) {
                    let c = c1 * c2;
                    out.add_term(m, if sign < 0 { -&c } else { c });
                }
            }
        }
        Ok(out)
    }

    /// Total derivative: raises every jet variable, with coefficient
    /// dependence through `v^i` handled as `(dc/dv^i) u^{i,1}`.
    pub fn total_derivative(&self) -> DiffPoly {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            // coefficient part
            for i in 0..self.n {
                let dc = c.partial(i);
                if !dc.is_zero() {
                    let m2 = m.push_even(JetVar::even(i, 1), 1);
                    out.add_term(m2, dc);
                }
            }
            // even factors
            for (k, (w, mult)) in m.even.iter().enumerate() {
                let mut m2 = m.clone();
                if *mult == 1 {
                    m2.even.remove(k);
                } else {
                    m2.even[k].1 -= 1;
                }
                let m2 = m2.push_even(w.raised(), 1);
                out.add_term(m2, c.scale(&rat_int(*mult as i64)));
            }
            // odd factors: the total derivative is an even derivation, so
            // replacing theta_i^s by theta_i^{s+1} in place carries no sign
            // beyond re-normalizing the ordering.
            for pos in 0..m.odd.len() {
                let w = m.odd[pos];
                let (m2, s1) = m.remove_odd(pos);
                if let Some((m3, s2)) = m2.push_odd_left(w.raised()) {
                    let sign = s1 * s2;
                    let c2 = if sign < 0 { -c } else { c.clone() };
                    out.add_term(m3, c2);
                }
            }
        }
        out
    }

    pub fn total_derivative_n(&self, k: u32) -> DiffPoly {
        let mut a = self.clone();
        for _ in 0..k {
            a = a.total_derivative();
        }
        a
    }

    /// Partial derivative with respect to an even jet variable `u^{i,s}`,
    /// s >= 1.
    pub fn partial_even(&self, w: JetVar) -> DiffPoly {
        debug_assert_eq!(w.parity, Parity::Even);
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let mult = m.multiplicity(w);
            if mult == 0 {
                continue;
            }
            let mut m2 = m.clone();
            let k = m2.even.iter().position(|(v, _)| *v == w).unwrap();
            if mult == 1 {
                m2.even.remove(k);
            } else {
                m2.even[k].1 -= 1;
            }
            out.add_term(m2, c.scale(&rat_int(mult as i64)));
        }
        out
    }

    /// Left partial derivative with respect to an odd variable.
    pub fn partial_odd(&self, w: JetVar) -> DiffPoly {
        debug_assert_eq!(w.parity, Parity::Odd);
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            if let Some(pos) = m.odd.iter().position(|v| *v == w) {
                let (m2, sign) = m.remove_odd(pos);
                out.add_term(m2, if sign < 0 { -c } else { c.clone() });
            }
        }
        out
    }

    /// Partial derivative with respect to the coefficient variable `v^i`.
    pub fn partial_v(&self, i: usize) -> DiffPoly {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.partial(i));
        }
        out
    }

    fn max_order(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.vars().map(|w| w.order))
            .max()
            .unwrap_or(0)
    }

    /// Euler operator `delta/delta u^i` = sum_s (-d)^s d/du^{i,s}
    /// (s = 0 acts on the coefficients) or `delta/delta theta_i`.
    pub fn variational_derivative(&self, index: usize, parity: Parity) -> DiffPoly {
        let smax = self.max_order();
        let mut out = Self::zero(self.n);
        for s in 0..=smax {
            let d = match parity {
                Parity::Even => {
                    if s == 0 {
                        self.partial_v(index)
                    } else {
                        self.partial_even(JetVar::even(index, s))
                    }
                }
                Parity::Odd => self.partial_odd(JetVar::odd(index, s)),
            };
            if d.is_zero() {
                continue;
            }
            let mut t = d.total_derivative_n(s);
            if s % 2 == 1 {
                t = t.neg();
            }
            out = out.add(&t);
        }
        out
    }

    pub fn degree(&self, kind: DegreeKind) -> Degree {
        if self.is_zero() {
            return Degree::Zero;
        }
        let mut deg = None;
        for m in self.terms.keys() {
            let d = match kind {
                DegreeKind::Standard => m.standard_degree(),
                DegreeKind::Super => m.super_degree(),
            };
            match deg {
                None => deg = Some(d),
                Some(p) if p != d => return Degree::Inhomogeneous,
                _ => {}
            }
        }
        Degree::Homogeneous(deg.unwrap())
    }

    /// The component of homogeneous standard degree `d`.
    pub fn standard_component(&self, d: u32) -> DiffPoly {
        DiffPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.standard_degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Drop components of standard degree above `d`.
    pub fn truncate_standard(&self, d: u32) -> DiffPoly {
        DiffPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.standard_degree() <= d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn min_standard_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.standard_degree()).min()
    }

    pub fn max_standard_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.standard_degree()).max()
    }

    /// Super-degree components present.
    pub fn super_components(&self) -> Vec<u32> {
        let mut ds: Vec<u32> = self.terms.keys().map(|m| m.super_degree()).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// True iff all variational derivatives vanish and there is no
    /// constant term, i.e. the element is a total derivative.
    pub fn is_exact(&self) -> bool {
        if !self.coeff_part().constant_part().is_zero() {
            return false;
        }
        for i in 0..self.n {
            if !self.variational_derivative(i, Parity::Even).is_zero() {
                return false;
            }
            if !self.variational_derivative(i, Parity::Odd).is_zero() {
                return false;
            }
        }
        true
    }

    /// Deterministic right inverse of the total derivative on its image:
    /// repeated integration by parts on the highest jet variable.  The
    /// preimage has zero constant term.
    pub fn integrate(&self) -> Result<DiffPoly, JetError> {
        if !self.is_exact() {
            return Err(JetError::NotExact);
        }
        let mut a = self.clone();
        let mut out = DiffPoly::zero(self.n);
        let mut prev_max: Option<JetVar> = None;
        while !a.is_zero() {
            let w = a
                .terms
                .keys()
                .filter_map(|m| m.max_var())
                .max()
                .expect("nonzero exact element with no jet variables");
            if let Some(p) = prev_max {
                assert!(w < p, "integration by parts failed to descend at {w}");
            }
            prev_max = Some(w);
            let g = peel(&a, w).expect("peel must succeed on an exact element");
            a = a.sub(&g.total_derivative());
            out = out.add(&g);
        }
        Ok(out)
    }

    /// Canonical representative of the class modulo total derivatives:
    /// greedy integration by parts on the highest reducible variable.
    /// A reduction at `w` only creates terms strictly below `w`, so one
    /// descending sweep over the variables suffices.
    pub fn normal_form(&self) -> DiffPoly {
        let mut a = self.clone();
        let mut ceiling: Option<JetVar> = None;
        loop {
            let w = a
                .terms
                .keys()
                .flat_map(|m| m.vars())
                .filter(|v| ceiling.map(|c| *v < c).unwrap_or(true))
                .max();
            let w = match w {
                Some(w) => w,
                None => return a,
            };
            if let Some(g) = peel_reducible(&a, w) {
                if !g.is_zero() {
                    a = a.sub(&g.total_derivative());
                }
            }
            ceiling = Some(w);
        }
    }

    /// Canonical text form: sorted terms, rationals as `p/q`.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (m, c) in self.terms.iter().rev() {
            let cs = format!("{c}");
            let body = if m.is_unit() {
                cs
            } else if cs == "1" {
                format!("{m}")
            } else if cs == "-1" {
                format!("-{m}")
            } else if c.num_terms() > 1 {
                format!("({cs})*{m}")
            } else {
                format!("{cs}*{m}")
            };
            parts.push(body);
        }
        let mut s = String::new();
        for (k, p) in parts.iter().enumerate() {
            if k == 0 {
                s.push_str(p);
            } else if let Some(rest) = p.strip_prefix('-') {
                s.push_str(" - ");
                s.push_str(rest);
            } else {
                s.push_str(" + ");
                s.push_str(p);
            }
        }
        s
    }

    /// Parse the canonical text form (sums of `coeff*factor*...` terms with
    /// factors `v<i>`, `u(i,s)`, `th(i,s)`, optional `^k` powers and
    /// parenthesized multi-term coefficients).
    pub fn parse(n: usize, input: &str) -> Result<DiffPoly, JetError> {
        parse_diffpoly(n, input)
    }
}

fn mul_monomials(a: &JetMonomial, b: &JetMonomial) -> Option<(JetMonomial, i8)> {
    let mut out = a.clone();
    for (w, m) in &b.even {
        out = out.push_even(*w, *m);
    }
    // both odd words are sorted, so the sign of the concatenation is the
    // parity of the inversions between the two words
    let mut inversions = 0usize;
    for y in &b.odd {
        if a.odd.contains(y) {
            return None;
        }
        inversions += a.odd.iter().filter(|x| *x > y).count();
    }
    out.odd.extend(b.odd.iter().copied());
    out.odd.sort();
    Some((out, if inversions % 2 == 0 { 1 } else { -1 }))
}

/// Preimage of the `w`-linear part of an exact element under the total
/// derivative: every term containing `w` is rewritten with `w` lowered.
fn peel(a: &DiffPoly, w: JetVar) -> Option<DiffPoly> {
    let mut g = DiffPoly::zero(a.n_vars());
    for (m, c) in a.terms() {
        let mult = m.multiplicity(w);
        if mult == 0 {
            continue;
        }
        if mult > 1 {
            return None;
        }
        match w.parity {
            Parity::Even => {
                let k = m.even.iter().position(|(v, _)| *v == w).unwrap();
                let mut m2 = m.clone();
                if m2.even[k].1 == 1 {
                    m2.even.remove(k);
                } else {
                    m2.even[k].1 -= 1;
                }
                if w.order >= 2 {
                    let lower = JetVar::even(w.index, w.order - 1);
                    let lm = m2.multiplicity(lower);
                    let m3 = m2.push_even(lower, 1);
                    g.add_term(m3, c.scale(&(BigRational::one() / rat_int(lm as i64 + 1))));
                } else {
                    // order 1: the lowered variable is the coefficient v^i
                    g.add_term(m2, c.antiderivative(w.index));
                }
            }
            Parity::Odd => {
                let pos = m.odd.iter().position(|v| *v == w).unwrap();
                let (m2, s1) = m.remove_odd(pos);
                let lower = JetVar::odd(w.index, w.order.checked_sub(1)?);
                let (m3, s2) = m2.push_odd_left(lower)?;
                let sign = s1 * s2;
                g.add_term(m3, if sign < 0 { -c } else { c.clone() });
            }
        }
    }
    Some(g)
}

/// Like `peel`, but only collects terms whose integration by parts cannot
/// raise anything above `w`; used by the normal form.  Terms whose peel is
/// blocked (e.g. an odd duplicate) are left alone.
fn peel_reducible(a: &DiffPoly, w: JetVar) -> Option<DiffPoly> {
    let mut out = DiffPoly::zero(a.n_vars());
    let mut any = false;
    for (m, c) in a.terms() {
        if m.multiplicity(w) != 1 {
            continue;
        }
        // every other variable must stay <= w after one raise
        let ok_vars = m.vars().filter(|v| *v != w).all(|v| v.raised() <= w);
        if !ok_vars {
            continue;
        }
        // raising the coefficient produces u^{j,1}
        let coeff_ok = match w.parity {
            Parity::Even if w.order == 1 => {
                // the antiderivative may add v^{w.index} to the support
                anti_support_ok(&c.antiderivative(w.index), w)
            }
            _ => (0..a.n_vars()).all(|j| c.partial(j).is_zero() || JetVar::even(j, 1) <= w),
        };
        if !coeff_ok {
            continue;
        }
        let mut single = DiffPoly::zero(a.n_vars());
        single.add_term(m.clone(), c.clone());
        if let Some(g) = peel(&single, w) {
            out = out.add(&g);
            any = true;
        }
    }
    if any {
        Some(out)
    } else {
        None
    }
}

fn anti_support_ok(anti: &CoeffPoly, w: JetVar) -> bool {
    let n = anti.n_vars();
    (0..n).all(|j| anti.partial(j).is_zero() || JetVar::even(j, 1) <= w)
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Equivalence class in `F = A/dA` with a fixed super degree.
#[derive(Clone, Debug)]
pub struct LocalFunctional {
    rep: DiffPoly,
}

impl LocalFunctional {
    pub fn new(rep: DiffPoly) -> Self {
        LocalFunctional { rep }
    }

    pub fn zero(n: usize) -> Self {
        LocalFunctional { rep: DiffPoly::zero(n) }
    }

    pub fn n_vars(&self) -> usize {
        self.rep.n_vars()
    }

    pub fn representative(&self) -> &DiffPoly {
        &self.rep
    }

    pub fn normal_form(&self) -> DiffPoly {
        self.rep.normal_form()
    }

    /// Zero in the quotient: the representative is a total derivative.
    /// The greedy normal-form descent shrinks the element as it reduces,
    /// which beats testing the kernel of the Euler operators directly.
    pub fn is_zero(&self) -> bool {
        self.rep.is_zero() || self.normal_form().is_zero()
    }

    pub fn super_degree(&self) -> Degree {
        self.rep.degree(DegreeKind::Super)
    }

    /// Homogeneous super degree, if any (0 for the zero functional).
    pub fn super_degree_value(&self) -> Option<u32> {
        match self.super_degree() {
            Degree::Homogeneous(p) => Some(p),
            Degree::Zero => Some(0),
            Degree::Inhomogeneous => None,
        }
    }

    pub fn add(&self, other: &LocalFunctional) -> LocalFunctional {
        LocalFunctional { rep: self.rep.add(&other.rep) }
    }

    pub fn sub(&self, other: &LocalFunctional) -> LocalFunctional {
        LocalFunctional { rep: self.rep.sub(&other.rep) }
    }

    pub fn neg(&self) -> LocalFunctional {
        LocalFunctional { rep: self.rep.neg() }
    }

    pub fn scale(&self, r: &BigRational) -> LocalFunctional {
        LocalFunctional { rep: self.rep.scale(r) }
    }

    pub fn truncate_standard(&self, d: u32) -> LocalFunctional {
        LocalFunctional { rep: self.rep.truncate_standard(d) }
    }

    /// Variational derivative of the class (annihilates total derivatives).
    pub fn variational_derivative(&self, index: usize, parity: Parity) -> DiffPoly {
        self.rep.variational_derivative(index, parity)
    }
}

impl PartialEq for LocalFunctional {
    fn eq(&self, other: &Self) -> bool {
        let diff = self.rep.sub(&other.rep);
        diff.is_zero() || diff.normal_form().is_zero()
    }
}

// ---------------------------------------------------------------------------
// text-form parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    n: usize,
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src.get(self.pos).map(|&b| b as char)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expect(&mut self, c: char) -> Result<(), JetError> {
        match self.bump() {
            Some(x) if x == c => Ok(()),
            other => Err(JetError::Parse(format!("expected '{c}', found {other:?}"))),
        }
    }

    fn number(&mut self) -> Result<BigRational, JetError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .map(|&b| (b as char).is_ascii_digit() || b == b'/')
            .unwrap_or(false)
        {
            // '/' only allowed when followed by a digit (rational form)
            if self.src[self.pos] == b'/'
                && !self.src.get(self.pos + 1).map(|&b| (b as char).is_ascii_digit()).unwrap_or(false)
            {
                break;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if text.is_empty() {
            return Err(JetError::Parse("expected a number".into()));
        }
        rat_from_str(text).map_err(JetError::Parse)
    }

    fn index_pair(&mut self) -> Result<(usize, u32), JetError> {
        self.expect('(')?;
        let i = self.number()?;
        self.expect(',')?;
        let s = self.number()?;
        self.expect(')')?;
        let idx: usize = i.to_integer().try_into().map_err(|_| JetError::Parse("bad index".into()))?;
        let ord: u32 = s.to_integer().try_into().map_err(|_| JetError::Parse("bad order".into()))?;
        if idx == 0 || idx > self.n {
            return Err(JetError::Parse(format!("index {idx} out of range 1..={}", self.n)));
        }
        Ok((idx - 1, ord))
    }

    fn power(&mut self) -> Result<u32, JetError> {
        if self.peek() == Some('^') {
            self.bump();
            let k = self.number()?;
            k.to_integer().try_into().map_err(|_| JetError::Parse("bad power".into()))
        } else {
            Ok(1)
        }
    }

    /// One multiplicative factor.
    fn factor(&mut self) -> Result<DiffPoly, JetError> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let inner = self.sum()?;
                self.expect(')')?;
                let k = self.power()?;
                let mut out = DiffPoly::one(self.n);
                for _ in 0..k {
                    out = out.mul(&inner)?;
                }
                Ok(out)
            }
            Some('v') => {
                self.bump();
                let idx = self.number()?;
                let i: usize =
                    idx.to_integer().try_into().map_err(|_| JetError::Parse("bad v index".into()))?;
                if i == 0 || i > self.n {
                    return Err(JetError::Parse(format!("v index {i} out of range")));
                }
                let k = self.power()?;
                let mut e = vec![0u32; self.n];
                e[i - 1] = k;
                Ok(DiffPoly::from_coeff(CoeffPoly::monomial(self.n, e, BigRational::one())))
            }
            Some('u') => {
                self.bump();
                let (i, s) = self.index_pair()?;
                if s == 0 {
                    return Err(JetError::Parse("u(i,0) is the coefficient variable; write v<i>".into()));
                }
                let k = self.power()?;
                let mut out = DiffPoly::one(self.n);
                for _ in 0..k {
                    out = out.mul(&DiffPoly::jet(self.n, JetVar::even(i, s)))?;
                }
                Ok(out)
            }
            Some('t') => {
                self.bump();
                if self.peek() == Some('h') {
                    self.bump();
                } else {
                    return Err(JetError::Parse("expected 'th'".into()));
                }
                let (i, s) = self.index_pair()?;
                Ok(DiffPoly::jet(self.n, JetVar::odd(i, s)))
            }
            Some(c) if c.is_ascii_digit() => {
                let r = self.number()?;
                Ok(DiffPoly::from_coeff(CoeffPoly::constant(self.n, r)))
            }
            other => Err(JetError::Parse(format!("unexpected {other:?} in factor"))),
        }
    }

    fn product(&mut self) -> Result<DiffPoly, JetError> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.bump();
            let f = self.factor()?;
            acc = acc.mul(&f)?;
        }
        Ok(acc)
    }

    fn sum(&mut self) -> Result<DiffPoly, JetError> {
        let mut acc = DiffPoly::zero(self.n);
        let mut sign = match self.peek() {
            Some('-') => {
                self.bump();
                -1
            }
            Some('+') => {
                self.bump();
                1
            }
            _ => 1,
        };
        loop {
            let t = self.product()?;
            acc = if sign < 0 { acc.sub(&t) } else { acc.add(&t) };
            match self.peek() {
                Some('+') => {
                    self.bump();
                    sign = 1;
                }
                Some('-') => {
                    self.bump();
                    sign = -1;
                }
                _ => break,
            }
        }
        Ok(acc)
    }
}

fn parse_diffpoly(n: usize, input: &str) -> Result<DiffPoly, JetError> {
    let mut p = Parser { n, src: input.as_bytes(), pos: 0 };
    if p.peek().is_none() {
        return Err(JetError::Parse("empty input".into()));
    }
    let out = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(JetError::Parse(format!(
            "trailing input at byte {}: '{}'",
            p.pos,
            &input[p.pos.min(input.len())..]
        )));
    }
    Ok(out)
}
