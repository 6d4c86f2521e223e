//! Tau-symmetric deformations of the principal hierarchy: the `delta_Z`
//! operator, verification of the deformation conditions, construction of
//! the deformed tau structure by inverting the total derivative, normal
//! coordinates, and the equivalence shift `G = sum_i D_Y^{i-1}(g)/i!`
//! relating the tau structures of Miura-equivalent deformations.  The
//! Tsarev semi-Hamiltonian checks live here as executable residuals.
//!
//! Deformed inputs are fixture-supplied; nothing here synthesizes
//! deformations from central invariants.

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::brackets::{evolutionary_derivation, miura_exp, schouten, BracketError};
use crate::coeffpoly::CoeffPoly;
use crate::frobenius::FrobeniusData;
use crate::hierarchy::{DensityTable, OmegaTable, Violation};
use crate::jetspace::{DiffPoly, JetError, JetVar, LocalFunctional, Parity};
use crate::par::map_collect;
use crate::rational::rat_int;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DeformError {
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error("not exact: {0}")]
    NotExact(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("coinciding characteristic velocities at sample {0}")]
    CoincidingVelocities(usize),
}

/// A tau-symmetric deformation candidate: the deformed Hamiltonian
/// structure, densities with corrections of standard degree >= 2, the
/// deformed unit vector field, and the working truncation degree.
#[derive(Clone, Debug)]
pub struct DeformedData {
    pub n: usize,
    pub unit: usize,
    pub pmax: usize,
    pub d_max: u32,
    pub p1: LocalFunctional,
    pub z: LocalFunctional,
    /// `[alpha][p+1]` for `p = -1..=pmax`
    densities: Vec<Vec<DiffPoly>>,
    /// flows `X_{a,p} = -[P1~, H_{a,p}~]`, built lazily at construction
    flows: Vec<Vec<LocalFunctional>>,
}

impl DeformedData {
    /// Assemble a deformation candidate and precompute its flows.
    pub fn new(
        unit: usize,
        d_max: u32,
        p1: LocalFunctional,
        z: LocalFunctional,
        densities: Vec<Vec<DiffPoly>>,
    ) -> Result<Self, DeformError> {
        let n = p1.n_vars();
        let pmax = densities[0].len() - 2;
        let work = d_max + 2;
        let mut flows = Vec::with_capacity(n);
        for row in &densities {
            let mut frow = Vec::with_capacity(row.len());
            for hh in row {
                let h = LocalFunctional::new(hh.clone());
                let x = schouten(&p1, &h)?.neg().truncate_standard(work);
                frow.push(x);
            }
            flows.push(frow);
        }
        Ok(DeformedData { n, unit, pmax, d_max, p1, z, densities, flows })
    }

    /// The undeformed principal data as a trivial deformation.
    pub fn trivial(
        d: &FrobeniusData,
        p1: LocalFunctional,
        h: &DensityTable,
        pmax: usize,
        d_max: u32,
    ) -> Result<Self, DeformError> {
        let n = d.n;
        let densities: Vec<Vec<DiffPoly>> = (0..n)
            .map(|a| {
                (-1..=pmax as i64)
                    .map(|p| DiffPoly::from_coeff(h.h(a, p).clone()))
                    .collect()
            })
            .collect();
        let z = LocalFunctional::new(DiffPoly::jet(n, JetVar::odd(d.unit, 0)));
        DeformedData::new(d.unit, d_max, p1, z, densities)
    }

    /// `h~_{alpha,p}`, `p >= -1`.
    pub fn h(&self, alpha: usize, p: i64) -> &DiffPoly {
        &self.densities[alpha][(p + 1) as usize]
    }

    /// The flow functional `X~_{alpha,p} = -[P1~, H~_{alpha,p}]`, `p >= -1`.
    pub fn flow(&self, alpha: usize, p: i64) -> &LocalFunctional {
        &self.flows[alpha][(p + 1) as usize]
    }

    /// Apply the deformed flow `d~_{alpha,p}` to a differential polynomial.
    pub fn apply_flow(&self, alpha: usize, p: i64, a: &DiffPoly) -> Result<DiffPoly, DeformError> {
        Ok(evolutionary_derivation(self.flow(alpha, p), a)?)
    }

    fn work_degree(&self) -> u32 {
        self.d_max + 2
    }
}

/// `delta_Z(Q) = dQ/dv^1` (the Euler operator in the unit direction);
/// `int delta_Z(Q) = [Z, Q]`.
pub fn delta_z(unit: usize, q: &LocalFunctional) -> DiffPoly {
    q.variational_derivative(unit, Parity::Even)
}

/// `e^{D_Y} a` truncated at standard degree `d_max`.
pub fn exp_derivation(
    y: &LocalFunctional,
    a: &DiffPoly,
    d_max: u32,
) -> Result<DiffPoly, DeformError> {
    let mut acc = a.truncate_standard(d_max);
    let mut term = a.clone();
    let mut fact = BigRational::one();
    for k in 1..=(d_max as u64 + 2) {
        term = evolutionary_derivation(y, &term)?.truncate_standard(d_max);
        if term.is_zero() {
            break;
        }
        fact *= rat_int(k as i64);
        acc = acc.add(&term.scale(&(BigRational::one() / fact.clone())));
    }
    Ok(acc)
}

/// Verify the deformation conditions up to the truncation degree:
/// Hamiltonian property of `P1~`, the degree filtration of the
/// corrections, commuting Hamiltonians, tau-symmetry, and the derived
/// consequences (`d~_{1,0} = d_x`, Casimir property of `H~_{a,-1}`).
/// Violations are reported, not thrown.
pub fn verify_deformation(data: &DeformedData) -> Vec<Violation> {
    let n = data.n;
    let d_max = data.d_max;
    let mut violations = Vec::new();
    // degree filtration: P1~ - (degree-1 part) lives in degrees >= 3
    let p1rep = data.p1.normal_form();
    for d in [0u32, 2] {
        if !p1rep.standard_component(d).is_zero() {
            violations.push(Violation {
                check: "deformation_degree_filtration".into(),
                indices: vec![d as i64],
                detail: format!("P1 correction at forbidden standard degree {d}"),
            });
        }
    }
    for a in 0..n {
        for p in -1..=(data.pmax as i64) {
            let tail = data.h(a, p).truncate_standard(1).sub(&data.h(a, p).standard_component(0));
            if !tail.is_zero() {
                violations.push(Violation {
                    check: "deformation_degree_filtration".into(),
                    indices: vec![a as i64 + 1, p],
                    detail: "density correction at forbidden standard degree 1".into(),
                });
            }
        }
    }
    // [P1~, P1~] = 0
    match schouten(&data.p1, &data.p1) {
        Ok(b) => {
            let nf = b.normal_form().truncate_standard(d_max);
            if !nf.is_zero() {
                violations.push(Violation {
                    check: "deformation_hamiltonian".into(),
                    indices: vec![],
                    detail: "[P1,P1] != 0 below the truncation degree".into(),
                });
            }
        }
        Err(e) => violations.push(Violation {
            check: "deformation_hamiltonian".into(),
            indices: vec![],
            detail: e.to_string(),
        }),
    }
    // Casimir property of H_{a,-1}
    for a in 0..n {
        if !data.flow(a, -1).truncate_standard(d_max).is_zero() {
            violations.push(Violation {
                check: "deformation_casimir".into(),
                indices: vec![a as i64 + 1],
                detail: "[P1, H_{a,-1}] != 0".into(),
            });
        }
    }
    // d~_{1,0} = d_x
    for g in 0..n {
        let dv = evolutionary_derivation(data.flow(data.unit, 0), &DiffPoly::v(n, g))
            .map(|x| x.truncate_standard(d_max));
        match dv {
            Ok(dv) => {
                if !dv.sub(&DiffPoly::jet(n, JetVar::even(g, 1))).is_zero() {
                    violations.push(Violation {
                        check: "deformation_translation".into(),
                        indices: vec![g as i64 + 1],
                        detail: "d_{1,0} is not the x-translation".into(),
                    });
                }
            }
            Err(e) => violations.push(Violation {
                check: "deformation_translation".into(),
                indices: vec![g as i64 + 1],
                detail: e.to_string(),
            }),
        }
    }
    // pairwise commuting Hamiltonians and tau-symmetry
    let mut cells = Vec::new();
    for a in 0..n {
        for p in 0..=(data.pmax as i64) {
            for b in 0..n {
                for q in 0..=(data.pmax as i64) {
                    if (a, p) <= (b, q) {
                        cells.push((a, p, b, q));
                    }
                }
            }
        }
    }
    let results = map_collect(cells, |(a, p, b, q)| {
        let mut out = Vec::new();
        let hb = LocalFunctional::new(data.h(b, q).clone());
        match schouten(data.flow(a, p), &hb) {
            Ok(pb) => {
                if !pb.truncate_standard(d_max).is_zero() {
                    out.push(Violation {
                        check: "deformation_commuting_hamiltonians".into(),
                        indices: vec![a as i64 + 1, p, b as i64 + 1, q],
                        detail: "{H,H} != 0".into(),
                    });
                }
            }
            Err(e) => out.push(Violation {
                check: "deformation_commuting_hamiltonians".into(),
                indices: vec![a as i64 + 1, p, b as i64 + 1, q],
                detail: e.to_string(),
            }),
        }
        let ts = data
            .apply_flow(a, p, data.h(b, q - 1))
            .and_then(|l| Ok(l.sub(&data.apply_flow(b, q, data.h(a, p - 1))?)));
        match ts {
            Ok(diff) => {
                if !diff.truncate_standard(d_max).is_zero() {
                    out.push(Violation {
                        check: "deformation_tau_symmetry".into(),
                        indices: vec![a as i64 + 1, p, b as i64 + 1, q],
                        detail: "deformed tau-symmetry fails".into(),
                    });
                }
            }
            Err(e) => out.push(Violation {
                check: "deformation_tau_symmetry".into(),
                indices: vec![a as i64 + 1, p, b as i64 + 1, q],
                detail: e.to_string(),
            }),
        }
        out
    });
    violations.extend(results.into_iter().flatten());
    violations
}

/// The deformed tau structure.
#[derive(Clone, Debug)]
pub struct DeformedOmega {
    pub n: usize,
    pub pmax: usize,
    pub d_max: u32,
    omega: Vec<DiffPoly>,
}

impl DeformedOmega {
    fn idx(&self, a: usize, p: usize, b: usize, q: usize) -> usize {
        ((a * (self.pmax + 1) + p) * self.n + b) * (self.pmax + 1) + q
    }

    pub fn omega(&self, a: usize, p: usize, b: usize, q: usize) -> &DiffPoly {
        &self.omega[self.idx(a, p, b, q)]
    }
}

/// `Omega~_{a,p;b,q} = integrate( d~_{a,p} h~_{b,q-1} )` with the degree-0
/// part pinned to the principal tau structure; symmetry and the seed
/// column `Omega~_{a,p;1,0} = h~_{a,p-1}` are verified up to `d_max`.
pub fn build_omega_deformed(
    data: &DeformedData,
    principal: &OmegaTable,
) -> Result<DeformedOmega, DeformError> {
    let n = data.n;
    let pmax = data.pmax.min(principal.pmax);
    let work = data.work_degree();
    let mut omega = vec![DiffPoly::zero(n); n * n * (pmax + 1) * (pmax + 1)];
    for a in 0..n {
        for p in 0..=pmax {
            for b in 0..n {
                for q in 0..=pmax {
                    let rhs = data.apply_flow(a, p as i64, data.h(b, q as i64 - 1))?
                        .truncate_standard(work);
                    if !rhs.is_exact() {
                        return Err(DeformError::NotExact(format!(
                            "flow derivative of h~ not a total derivative at ({},{};{},{})",
                            a + 1,
                            p,
                            b + 1,
                            q
                        )));
                    }
                    let mut om = rhs.integrate()?;
                    // pin the degree-0 part to the principal Omega
                    let deg0 = om.standard_component(0).coeff_part();
                    let target = principal.omega(a, p, b, q);
                    let diff = &deg0 - target;
                    if !diff.is_constant() {
                        return Err(DeformError::NotExact(format!(
                            "degree-0 part differs from the principal tau structure by a \
                             non-constant at ({},{};{},{})",
                            a + 1,
                            p,
                            b + 1,
                            q
                        )));
                    }
                    om = om.sub(&DiffPoly::from_coeff(diff));
                    let idx = ((a * (pmax + 1) + p) * n + b) * (pmax + 1) + q;
                    omega[idx] = om;
                }
            }
        }
    }
    let table = DeformedOmega { n, pmax, d_max: data.d_max, omega };
    for a in 0..n {
        for p in 0..=pmax {
            for b in 0..n {
                for q in 0..=pmax {
                    let sym = table
                        .omega(a, p, b, q)
                        .sub(table.omega(b, q, a, p))
                        .truncate_standard(data.d_max);
                    if !sym.is_zero() {
                        return Err(DeformError::NotExact(format!(
                            "deformed Omega not symmetric at ({},{};{},{})",
                            a + 1,
                            p,
                            b + 1,
                            q
                        )));
                    }
                }
            }
            let seed = table
                .omega(a, p, data.unit, 0)
                .sub(data.h(a, p as i64 - 1))
                .truncate_standard(data.d_max);
            if !seed.is_zero() {
                return Err(DeformError::NotExact(format!(
                    "Omega~_{{a,p;1,0}} != h~_{{a,p-1}} at ({},{})",
                    a + 1,
                    p
                )));
            }
        }
    }
    Ok(table)
}

/// Normal coordinates `w^a = eta^{ab} h~_{b,-1}` and the inverse series
/// `v^a(w)` to the truncation degree.
#[derive(Clone, Debug)]
pub struct NormalCoordinates {
    pub n: usize,
    pub d_max: u32,
    /// `w^a` as differential polynomials of `v`
    pub w_of_v: Vec<DiffPoly>,
    /// `v^a` as differential polynomials of `w` (same jet-variable names)
    pub v_of_w: Vec<DiffPoly>,
}

/// Substitute `exprs[a]` for `v^a` (with jet prolongations) into a
/// theta-free differential polynomial, truncating at `d_max`.
pub fn substitute_even(a: &DiffPoly, exprs: &[DiffPoly], d_max: u32) -> DiffPoly {
    let n = a.n_vars();
    let smax = a
        .terms()
        .flat_map(|(m, _)| m.vars().map(|w| w.order))
        .max()
        .unwrap_or(0);
    // prolong: subs[al][s] = d^s exprs[al]
    let mut subs: Vec<Vec<DiffPoly>> = Vec::with_capacity(n);
    for e in exprs {
        let mut row = vec![e.clone()];
        for s in 1..=smax {
            let d = row[s as usize - 1].total_derivative().truncate_standard(d_max);
            row.push(d);
        }
        subs.push(row);
    }
    let mut out = DiffPoly::zero(n);
    for (m, c) in a.terms() {
        assert!(m.odd.is_empty(), "substitute_even needs a theta-free input");
        for (exps, r) in c.terms() {
            let mut t = DiffPoly::from_coeff(CoeffPoly::constant(n, r.clone()));
            for (i, &k) in exps.iter().enumerate() {
                for _ in 0..k {
                    t = t.mul(&subs[i][0]).expect("dims").truncate_standard(d_max);
                }
            }
            for (w, mult) in &m.even {
                for _ in 0..*mult {
                    t = t
                        .mul(&subs[w.index][w.order as usize])
                        .expect("dims")
                        .truncate_standard(d_max);
                }
            }
            out = out.add(&t);
        }
    }
    out
}

/// Compute normal coordinates and the inverse series order by order.
pub fn normal_coordinates(data: &DeformedData, d: &FrobeniusData) -> NormalCoordinates {
    let n = data.n;
    let d_max = data.d_max;
    let mut w_of_v = Vec::with_capacity(n);
    for a in 0..n {
        let mut acc = DiffPoly::zero(n);
        for b in 0..n {
            if !d.eta_inv[a][b].is_zero() {
                acc = acc.add(&data.h(b, -1).scale(&d.eta_inv[a][b]));
            }
        }
        w_of_v.push(acc.truncate_standard(d_max));
    }
    // corrections F^a = w^a - v^a (degree >= 2)
    let corr: Vec<DiffPoly> = (0..n).map(|a| w_of_v[a].sub(&DiffPoly::v(n, a))).collect();
    // iterate v = w - F(v(w))
    let mut v_of_w: Vec<DiffPoly> = (0..n).map(|a| DiffPoly::v(n, a)).collect();
    for _ in 0..=d_max {
        let next: Vec<DiffPoly> = (0..n)
            .map(|a| {
                DiffPoly::v(n, a).sub(&substitute_even(&corr[a], &v_of_w, d_max))
            })
            .collect();
        if next == v_of_w {
            break;
        }
        v_of_w = next;
    }
    NormalCoordinates { n, d_max, w_of_v, v_of_w }
}

/// Round-trip defect of the normal coordinates (zero up to `d_max`).
pub fn normal_coordinates_roundtrip(nc: &NormalCoordinates) -> DiffPoly {
    let n = nc.n;
    let mut acc = DiffPoly::zero(n);
    for a in 0..n {
        let back = substitute_even(&nc.w_of_v[a], &nc.v_of_w, nc.d_max);
        acc = acc.add(&back.sub(&DiffPoly::v(n, a)));
    }
    acc.truncate_standard(nc.d_max)
}

/// The recorded data of an equivalence shift between deformations.
#[derive(Clone, Debug)]
pub struct EquivalenceShift {
    pub y: LocalFunctional,
    pub k: LocalFunctional,
    /// `g` with `delta_Z K = d g`
    pub g: DiffPoly,
    /// `G = sum_{i>=1} D_Y^{i-1}(g) / i!`
    pub g_total: DiffPoly,
}

/// Generate the Miura-equivalent deformation along `Y = [P1, K]`:
/// `P^_1 = e^{ad_Y} P~_1` and
/// `h^_{a,p} = e^{D_Y} h~_{a,p} + d( d^_{a,p+1} G )`
/// (the index on the flow follows the tau-structure consistency
/// `Omega^_{a,p;1,0} = h^_{a,p-1}`).  Verifies `[Y,Z] = [K,Z] = 0`.
pub fn generate_equivalent(
    data: &DeformedData,
    k: &LocalFunctional,
) -> Result<(DeformedData, EquivalenceShift), DeformError> {
    let n = data.n;
    let work = data.work_degree();
    let y = schouten(&data.p1, k)?;
    if let Some(dmin) = y.normal_form().min_standard_degree() {
        if dmin <= 1 {
            return Err(DeformError::Bracket(BracketError::NonPositiveDegreeShift));
        }
    }
    // [K, Z] = 0 and [Y, Z] = 0
    if !schouten(k, &data.z)?.truncate_standard(work).is_zero() {
        return Err(DeformError::NotExact("[K, Z] != 0".into()));
    }
    if !schouten(&y, &data.z)?.truncate_standard(work).is_zero() {
        return Err(DeformError::NotExact("[Y, Z] != 0".into()));
    }
    let dzk = delta_z(data.unit, k);
    if !dzk.is_exact() {
        return Err(DeformError::NotExact("delta_Z K is not a total derivative".into()));
    }
    let g = dzk.integrate()?;
    // G = sum_{i>=1} D_Y^{i-1}(g) / i!
    let mut g_total = g.truncate_standard(work);
    let mut term = g.clone();
    let mut fact = BigRational::one();
    for i in 2..=(work as u64 + 2) {
        term = evolutionary_derivation(&y, &term)?.truncate_standard(work);
        if term.is_zero() {
            break;
        }
        fact *= rat_int(i as i64);
        g_total = g_total.add(&term.scale(&(BigRational::one() / fact.clone())));
    }
    // new structure and densities (needs h~ one index deeper)
    let p1_hat = miura_exp(&y, &data.p1, work)?;
    let pmax_out = data.pmax - 1;
    let mut densities = Vec::with_capacity(n);
    for a in 0..n {
        let mut row = Vec::with_capacity(pmax_out + 2);
        for p in -1..=(pmax_out as i64) {
            let lead = exp_derivation(&y, data.h(a, p), work)?;
            // d^_{a,p+1} = D_{X^_{a,p+1}} with X^ = e^{ad_Y} X~
            let xhat = miura_exp(&y, data.flow(a, p + 1), work)?;
            let shift = evolutionary_derivation(&xhat, &g_total)?
                .truncate_standard(work)
                .total_derivative()
                .truncate_standard(work);
            row.push(lead.add(&shift).truncate_standard(work));
        }
        densities.push(row);
    }
    let out = DeformedData::new(data.unit, data.d_max, p1_hat, data.z.clone(), densities)?;
    let shift = EquivalenceShift { y, k: k.clone(), g, g_total };
    Ok((out, shift))
}

/// Deformed Galilean identity in normal coordinates:
/// `d Omega~/d w^1 = Omega~_{a,p-1;b,q} + Omega~_{a,p;b,q-1} + eta_ab
/// delta_p0 delta_q0`, all expressed in `w`-jets, up to `d_max`.
pub fn check_deformed_galilean(
    d: &FrobeniusData,
    data: &DeformedData,
    omega: &DeformedOmega,
    nc: &NormalCoordinates,
) -> Vec<Violation> {
    let n = data.n;
    let pmax = omega.pmax;
    let d_max = data.d_max;
    let mut cells = Vec::new();
    for a in 0..n {
        for p in 0..=pmax {
            for b in 0..n {
                for q in 0..=pmax {
                    cells.push((a, p, b, q));
                }
            }
        }
    }
    let results = map_collect(cells, |(a, p, b, q)| {
        let in_w = |x: &DiffPoly| substitute_even(x, &nc.v_of_w, d_max + 1);
        let lhs = in_w(omega.omega(a, p, b, q)).partial_v(d.unit);
        let mut rhs = DiffPoly::zero(n);
        if p > 0 {
            rhs = rhs.add(&in_w(omega.omega(a, p - 1, b, q)));
        }
        if q > 0 {
            rhs = rhs.add(&in_w(omega.omega(a, p, b, q - 1)));
        }
        if p == 0 && q == 0 {
            rhs = rhs.add(&DiffPoly::from_coeff(CoeffPoly::constant(n, d.eta[a][b].clone())));
        }
        if lhs.sub(&rhs).truncate_standard(d_max).is_zero() {
            None
        } else {
            Some(Violation {
                check: "deformed_galilean".into(),
                indices: vec![a as i64 + 1, p as i64, b as i64 + 1, q as i64],
                detail: "deformed Omega shift identity fails".into(),
            })
        }
    });
    results.into_iter().flatten().collect()
}

/// Semi-Hamiltonian (Tsarev) residuals of diagonal velocities `A^i(u)` at
/// sample points, with the nondegeneracy flags `d_i A^i != 0`.
#[derive(Clone, Debug)]
pub struct SemiHamiltonianReport {
    pub tsarev_residual: f64,
    /// per-velocity nondegeneracy at every sample
    pub nondegenerate: Vec<bool>,
    pub samples_checked: usize,
}

pub fn check_semi_hamiltonian<F>(
    n: usize,
    velocities: F,
    samples: &[Vec<f64>],
    coincidence_tol: f64,
) -> Result<SemiHamiltonianReport, DeformError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let h = 1e-5;
    let richardson = |f: &dyn Fn(f64) -> Option<f64>| -> Option<f64> {
        let d1 = (f(h)? - f(-h)?) / (2.0 * h);
        let d2 = (f(h / 2.0)? - f(-h / 2.0)?) / h;
        Some((4.0 * d2 - d1) / 3.0)
    };
    let mut residual: f64 = 0.0;
    let mut nondeg = vec![true; n];
    for (si, u0) in samples.iter().enumerate() {
        let a0 = velocities(u0).ok_or(DeformError::CoincidingVelocities(si))?;
        for i in 0..n {
            for j in 0..n {
                if i != j && (a0[i] - a0[j]).abs() < coincidence_tol {
                    return Err(DeformError::CoincidingVelocities(si));
                }
            }
        }
        // first derivatives dA^i/du^k
        let deriv = |i: usize, k: usize, base: &[f64]| -> Option<f64> {
            richardson(&|eps| {
                let mut u = base.to_vec();
                u[k] += eps;
                velocities(&u).map(|a| a[i])
            })
        };
        for i in 0..n {
            let dii = deriv(i, i, u0).ok_or(DeformError::CoincidingVelocities(si))?;
            if dii.abs() < 1e-8 {
                nondeg[i] = false;
            }
        }
        // Tsarev condition for distinct (i, j, k):
        // d_k( d_j A^i / (A^j - A^i) ) = d_j( d_k A^i / (A^k - A^i) )
        let ratio = |i: usize, j: usize, u: &[f64]| -> Option<f64> {
            let a = velocities(u)?;
            let d = deriv(i, j, u)?;
            Some(d / (a[j] - a[i]))
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let lhs = richardson(&|eps| {
                        let mut u = u0.clone();
                        u[k] += eps;
                        ratio(i, j, &u)
                    });
                    let rhs = richardson(&|eps| {
                        let mut u = u0.clone();
                        u[j] += eps;
                        ratio(i, k, &u)
                    });
                    match (lhs, rhs) {
                        (Some(l), Some(r)) => residual = residual.max((l - r).abs()),
                        _ => return Err(DeformError::CoincidingVelocities(si)),
                    }
                }
            }
        }
    }
    Ok(SemiHamiltonianReport {
        tsarev_residual: residual,
        nondegenerate: nondeg,
        samples_checked: samples.len(),
    })
}
