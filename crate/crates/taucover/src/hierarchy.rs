//! Construction of the calibration `{theta_{a,p}}`, the Hamiltonian
//! densities `{h_{a,p}}`, the principal-hierarchy flows, the tau structure
//! `{Omega_{a,p;b,q}}`, and the exact verification of tau-symmetry, flow
//! commutativity and the Galilean identities.
//!
//! The recursion `d2 theta_{g,p+1} = c_{ab xi} eta^{xi zeta}
//! d theta_{g,p}/dv^zeta` is integrated with vanishing affine parts at the
//! origin; when the normalization
//! `d theta(z) eta^{-1} d theta(-z) = eta` fails at some order, the table
//! is repaired by a constant linear recombination solved order by order
//! and recorded on the table.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::brackets::evolutionary_from_components;
use crate::coeffpoly::CoeffPoly;
use crate::frobenius::FrobeniusData;
use crate::jetspace::{DiffPoly, JetVar};
use crate::par::map_collect;
use crate::rational::{rat, rat_to_string};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("theta recursion inconsistent at level {level}: {detail}")]
    RecursionInconsistent { level: usize, detail: String },
    #[error("generating series not divisible by z1+z2 at total order {0} (broken normalization)")]
    DivisionMismatch(usize),
    #[error("calibration change violates orthogonality at order {0}")]
    OrthogonalityViolation(usize),
    #[error("table too shallow: need theta depth {needed}, have {have}")]
    TableTooShallow { needed: usize, have: usize },
}

/// A named exact-identity violation; an empty violation list means the
/// identity suite passed.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub check: String,
    pub indices: Vec<i64>,
    pub detail: String,
}

/// The calibration seed table `theta_{a,p}`, `p = 0..=depth`.
#[derive(Clone, Debug)]
pub struct ThetaTable {
    pub n: usize,
    pub depth: usize,
    theta: Vec<Vec<CoeffPoly>>,
    /// Normalization repairs applied while building: `(order, C_m)`.
    pub repairs: Vec<(usize, Vec<Vec<BigRational>>)>,
}

impl ThetaTable {
    pub fn theta(&self, alpha: usize, p: usize) -> &CoeffPoly {
        &self.theta[alpha][p]
    }
}

/// Densities `h_{a,p}` for `p = -1..=depth`.
#[derive(Clone, Debug)]
pub struct DensityTable {
    pub n: usize,
    pub depth: usize,
    h: Vec<Vec<CoeffPoly>>,
}

impl DensityTable {
    /// `h_{alpha, p}` with `p >= -1`.
    pub fn h(&self, alpha: usize, p: i64) -> &CoeffPoly {
        assert!(p >= -1 && p <= self.depth as i64);
        &self.h[alpha][(p + 1) as usize]
    }

    /// Add a perturbation to one entry (negative controls).
    pub fn perturb(&mut self, alpha: usize, p: i64, bump: &CoeffPoly) {
        let slot = &mut self.h[alpha][(p + 1) as usize];
        *slot = &*slot + bump;
    }
}

/// Tau-structure entries `Omega_{a,p;b,q}` for `p, q <= pmax`.
#[derive(Clone, Debug)]
pub struct OmegaTable {
    pub n: usize,
    pub pmax: usize,
    omega: Vec<CoeffPoly>,
}

impl OmegaTable {
    fn idx(&self, a: usize, p: usize, b: usize, q: usize) -> usize {
        ((a * (self.pmax + 1) + p) * self.n + b) * (self.pmax + 1) + q
    }

    pub fn omega(&self, a: usize, p: usize, b: usize, q: usize) -> &CoeffPoly {
        &self.omega[self.idx(a, p, b, q)]
    }

    /// Add a perturbation to one entry (negative controls).
    pub fn perturb(&mut self, a: usize, p: usize, b: usize, q: usize, bump: &CoeffPoly) {
        let i = self.idx(a, p, b, q);
        self.omega[i] = &self.omega[i] + bump;
    }
}

/// Flow right-hand sides `dv^g/dt^{a,p}` as degree-1 differential
/// polynomials, `p <= pmax`.
#[derive(Clone, Debug)]
pub struct FlowTable {
    pub n: usize,
    pub pmax: usize,
    rhs: Vec<Vec<Vec<DiffPoly>>>,
}

impl FlowTable {
    pub fn rhs(&self, alpha: usize, p: usize, gamma: usize) -> &DiffPoly {
        &self.rhs[alpha][p][gamma]
    }

    pub fn components(&self, alpha: usize, p: usize) -> &[DiffPoly] {
        &self.rhs[alpha][p]
    }

    /// Apply the flow `d/dt^{a,p}` to a function of `v` by the chain rule.
    pub fn apply_to_coeff(&self, alpha: usize, p: usize, f: &CoeffPoly) -> DiffPoly {
        let n = self.n;
        let mut acc = DiffPoly::zero(n);
        for g in 0..n {
            let df = f.partial(g);
            if df.is_zero() {
                continue;
            }
            acc = acc.add(&self.rhs[alpha][p][g].scale_coeff(&df));
        }
        acc
    }

    /// Apply the prolonged evolutionary derivation of the flow to a
    /// differential polynomial.
    pub fn apply_to_diffpoly(&self, alpha: usize, p: usize, a: &DiffPoly) -> DiffPoly {
        let odd = vec![DiffPoly::zero(self.n); self.n];
        evolutionary_from_components(&self.rhs[alpha][p], &odd, a).expect("dimensions agree")
    }
}

/// Constant linear recombinations and shifts relating calibrations:
/// `theta~_a(z) = theta_b(z) C^b_a(z) + theta0_a(z)` with
/// `C(z) = 1 + C_1 z + ...`.
#[derive(Clone, Debug, Default)]
pub struct CalibrationChange {
    /// `C_k` for `k >= 1`; entry `[k-1][b][a]` is `(C_k)^b_a`.
    pub c: Vec<Vec<Vec<BigRational>>>,
    /// constant shifts `theta0_{a,p}`: entry `[p][a]`
    pub shifts: Vec<Vec<BigRational>>,
}

impl CalibrationChange {
    pub fn identity() -> Self {
        CalibrationChange::default()
    }

    fn c_at(&self, k: usize, b: usize, a: usize, n: usize) -> BigRational {
        if k == 0 {
            return if a == b { rat(1, 1) } else { BigRational::zero() };
        }
        self.c
            .get(k - 1)
            .map(|m| m[b][a].clone())
            .unwrap_or_else(BigRational::zero)
            .clone()
            .tap(n)
    }
}

trait Tap {
    fn tap(self, _n: usize) -> Self
    where
        Self: Sized;
}

impl Tap for BigRational {
    fn tap(self, _n: usize) -> Self {
        self
    }
}

/// Gradient of a polynomial as a vector of partials.
fn grad(f: &CoeffPoly, n: usize) -> Vec<CoeffPoly> {
    (0..n).map(|i| f.partial(i)).collect()
}

/// `sum_{xi zeta} a_xi eta^{xi zeta} b_zeta` for two gradients.
fn eta_pair(d: &FrobeniusData, a: &[CoeffPoly], b: &[CoeffPoly]) -> CoeffPoly {
    let n = d.n;
    let mut acc = CoeffPoly::zero(n);
    for xi in 0..n {
        for z in 0..n {
            if d.eta_inv[xi][z].is_zero() {
                continue;
            }
            acc = &acc + &(&a[xi] * &b[z]).scale(&d.eta_inv[xi][z]);
        }
    }
    acc
}

/// Normalization defect at series order `m` (must vanish for `m >= 1`):
/// `N_m[a][b] = sum_{k} (-1)^{m-k} grad theta_{a,k} . eta^{-1} . grad
/// theta_{b,m-k} - eta_{ab} delta_{m,0}`.
fn normalization_defect(
    d: &FrobeniusData,
    theta: &[Vec<CoeffPoly>],
    m: usize,
) -> Vec<Vec<CoeffPoly>> {
    let n = d.n;
    let mut out = vec![vec![CoeffPoly::zero(n); n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = CoeffPoly::zero(n);
            for k in 0..=m {
                let ga = grad(&theta[a][k], n);
                let gb = grad(&theta[b][m - k], n);
                let t = eta_pair(d, &ga, &gb);
                acc = if (m - k) % 2 == 0 { &acc + &t } else { &acc - &t };
            }
            if m == 0 {
                acc = &acc - &CoeffPoly::constant(n, d.eta[a][b].clone());
            }
            out[a][b] = acc;
        }
    }
    out
}

/// Build the theta table to index `depth` from analyzed Frobenius data.
pub fn build_theta(d: &FrobeniusData, depth: usize) -> Result<ThetaTable, HierarchyError> {
    let n = d.n;
    let mut theta: Vec<Vec<CoeffPoly>> = (0..n).map(|a| vec![d.v_lower(a)]).collect();
    let mut repairs = Vec::new();
    if depth >= 1 {
        for a in 0..n {
            theta[a].push(d.potential.partial(a));
        }
    }
    for p in 1..depth {
        // RHS of the recursion: R_{ab} = c_{ab xi} eta^{xi zeta} d theta_{g,p} / dv^zeta
        for g in 0..n {
            let gp = grad(&theta[g][p], n);
            let mut r = vec![vec![CoeffPoly::zero(n); n]; n];
            for a in 0..n {
                for b in 0..n {
                    let mut acc = CoeffPoly::zero(n);
                    for xi in 0..n {
                        for z in 0..n {
                            if d.eta_inv[xi][z].is_zero() {
                                continue;
                            }
                            acc = &acc + &(d.c(a, b, xi) * &gp[z]).scale(&d.eta_inv[xi][z]);
                        }
                    }
                    r[a][b] = acc;
                }
            }
            // closedness of the candidate Hessian
            for a in 0..n {
                for b in 0..n {
                    for m in 0..n {
                        if !(&r[a][b].partial(m) - &r[m][b].partial(a)).is_zero() {
                            return Err(HierarchyError::RecursionInconsistent {
                                level: p + 1,
                                detail: format!(
                                    "mixed partials disagree for gamma={}, (a,b,m)=({},{},{})",
                                    g + 1,
                                    a + 1,
                                    b + 1,
                                    m + 1
                                ),
                            });
                        }
                    }
                }
            }
            // reconstruct theta_{g,p+1} with vanishing affine part at 0
            let mut gradient = Vec::with_capacity(n);
            for a in 0..n {
                let mut acc = CoeffPoly::zero(n);
                for b in 0..n {
                    acc = &acc + &(&r[a][b] * &CoeffPoly::var(n, b));
                }
                gradient.push(acc.scale_by_inverse_degree(0));
            }
            for a in 0..n {
                for b in 0..n {
                    if !(&gradient[a].partial(b) - &r[a][b]).is_zero() {
                        return Err(HierarchyError::RecursionInconsistent {
                            level: p + 1,
                            detail: "Poincare reconstruction of the gradient failed".into(),
                        });
                    }
                }
            }
            let mut next = CoeffPoly::zero(n);
            for a in 0..n {
                next = &next + &(&gradient[a] * &CoeffPoly::var(n, a));
            }
            let next = next.scale_by_inverse_degree(0);
            for a in 0..n {
                if !(&next.partial(a) - &gradient[a]).is_zero() {
                    return Err(HierarchyError::RecursionInconsistent {
                        level: p + 1,
                        detail: "Poincare reconstruction of theta failed".into(),
                    });
                }
            }
            theta[g].push(next);
        }
        // normalization at order p+1; repair by a constant recombination
        // theta_{a,p+1} += (C)^b_a v_b when the defect is a nonzero constant
        let m = p + 1;
        let defect = normalization_defect(d, &theta, m);
        let mut nonzero = false;
        let mut constant = true;
        for row in &defect {
            for e in row {
                if !e.is_zero() {
                    nonzero = true;
                    if !e.is_constant() {
                        constant = false;
                    }
                }
            }
        }
        if nonzero {
            if !constant {
                return Err(HierarchyError::RecursionInconsistent {
                    level: m,
                    detail: "normalization defect is not constant".into(),
                });
            }
            // solve A + (-1)^m A^T = -N with A = C^T eta
            let nmat: Vec<Vec<BigRational>> =
                defect.iter().map(|row| row.iter().map(|e| e.constant_part()).collect()).collect();
            let sgn = if m % 2 == 0 { rat(1, 1) } else { rat(-1, 1) };
            for a in 0..n {
                for b in 0..n {
                    let sym = &nmat[a][b] - &(&sgn * &nmat[b][a]);
                    if !sym.is_zero() {
                        return Err(HierarchyError::RecursionInconsistent {
                            level: m,
                            detail: format!(
                                "normalization defect has wrong symmetry: N[{a}][{b}] = {}",
                                rat_to_string(&nmat[a][b])
                            ),
                        });
                    }
                }
            }
            let half = rat(-1, 2);
            // A = -N/2, C = eta^{-1} A^T
            let mut cmat = vec![vec![BigRational::zero(); n]; n];
            for b in 0..n {
                for a in 0..n {
                    let mut acc = BigRational::zero();
                    for k in 0..n {
                        acc += &d.eta_inv[b][k] * &(&half * &nmat[a][k]);
                    }
                    cmat[b][a] = acc;
                }
            }
            for a in 0..n {
                let mut corr = CoeffPoly::zero(n);
                for b in 0..n {
                    if !cmat[b][a].is_zero() {
                        corr = &corr + &d.v_lower(b).scale(&cmat[b][a]);
                    }
                }
                let t = &theta[a][m] + &corr;
                theta[a][m] = t;
            }
            let after = normalization_defect(d, &theta, m);
            if after.iter().any(|row| row.iter().any(|e| !e.is_zero())) {
                return Err(HierarchyError::RecursionInconsistent {
                    level: m,
                    detail: "normalization repair did not close".into(),
                });
            }
            repairs.push((m, cmat));
        }
    }
    Ok(ThetaTable { n, depth, theta, repairs })
}

/// Densities from the defining relation `h_{a,p} = d theta_{a,p+2} / dv^1`.
pub fn build_h(d: &FrobeniusData, t: &ThetaTable) -> Result<DensityTable, HierarchyError> {
    if t.depth < 1 {
        return Err(HierarchyError::TableTooShallow { needed: 1, have: t.depth });
    }
    let n = t.n;
    let depth = t.depth as i64 - 2;
    let mut h = vec![Vec::new(); n];
    for a in 0..n {
        for p in -1..=depth {
            h[a].push(t.theta(a, (p + 2) as usize).partial(d.unit));
        }
    }
    Ok(DensityTable { n, depth: depth.max(0) as usize, h })
}

/// Flow right-hand sides `dv^g/dt^{a,p} = eta^{g l} d_x (dh_{a,p}/dv^l)`.
pub fn build_flows(d: &FrobeniusData, h: &DensityTable, pmax: usize) -> FlowTable {
    let n = d.n;
    let mut rhs = vec![vec![Vec::new(); pmax + 1]; n];
    for a in 0..n {
        for p in 0..=pmax {
            let hp = h.h(a, p as i64);
            for g in 0..n {
                let mut acc = DiffPoly::zero(n);
                for l in 0..n {
                    if d.eta_inv[g][l].is_zero() {
                        continue;
                    }
                    for m in 0..n {
                        let coeff = hp.partial(l).partial(m).scale(&d.eta_inv[g][l]);
                        if coeff.is_zero() {
                            continue;
                        }
                        acc = acc.add(&DiffPoly::jet(n, JetVar::even(m, 1)).scale_coeff(&coeff));
                    }
                }
                rhs[a][p].push(acc);
            }
        }
    }
    FlowTable { n, pmax, rhs }
}

/// Tau structure from the generating relation: coefficients of
/// `(grad h_a(z1) . eta^{-1} . grad h_b(z2) - eta_ab) / (z1 + z2)`.
pub fn build_omega(d: &FrobeniusData, t: &ThetaTable, pmax: usize) -> Result<OmegaTable, HierarchyError> {
    let needed = 2 * pmax + 2;
    if t.depth < needed {
        return Err(HierarchyError::TableTooShallow { needed, have: t.depth });
    }
    let n = d.n;
    let h = build_h(d, t)?;
    // gradients of h up to index 2 pmax
    let hmax = 2 * pmax;
    let gradh: Vec<Vec<Vec<CoeffPoly>>> = (0..n)
        .map(|a| (-1..=hmax as i64).map(|p| grad(h.h(a, p), n)).collect())
        .collect();
    // S_{ab}[k][l]: coefficient of z1^k z2^l, k + l <= 2 pmax + 1
    let s = |a: usize, b: usize, k: usize, l: usize| -> CoeffPoly {
        let mut acc = eta_pair(d, &gradh[a][k], &gradh[b][l]);
        if k == 0 && l == 0 {
            acc = &acc - &CoeffPoly::constant(n, d.eta[a][b].clone());
        }
        acc
    };
    // divisibility: the series must vanish on z2 = -z1
    for a in 0..n {
        for b in 0..n {
            for m in 0..=(2 * pmax + 1) {
                let mut acc = CoeffPoly::zero(n);
                for k in 0..=m {
                    let t = s(a, b, k, m - k);
                    acc = if (m - k) % 2 == 0 { &acc + &t } else { &acc - &t };
                }
                if !acc.is_zero() {
                    return Err(HierarchyError::DivisionMismatch(m));
                }
            }
        }
    }
    // divide: Omega_{p,q} = S_{p+1,q} - Omega_{p+1,q-1}, triangle p+q <= 2 pmax
    let mut omega = vec![CoeffPoly::zero(n); n * n * (pmax + 1) * (pmax + 1)];
    for a in 0..n {
        for b in 0..n {
            let mut tri: Vec<Vec<Option<CoeffPoly>>> = vec![vec![None; pmax + 1]; 2 * pmax + 1];
            for q in 0..=pmax {
                for p in 0..=(2 * pmax - q) {
                    let mut val = s(a, b, p + 1, q);
                    if q > 0 {
                        val = &val - tri[p + 1][q - 1].as_ref().expect("triangle order");
                    }
                    tri[p][q] = Some(val);
                }
            }
            for p in 0..=pmax {
                for q in 0..=pmax {
                    let idx = ((a * (pmax + 1) + p) * n + b) * (pmax + 1) + q;
                    omega[idx] = tri[p][q].clone().expect("filled");
                }
            }
        }
    }
    let table = OmegaTable { n, pmax, omega };
    // construction invariants: symmetry and Omega_{a,p;1,0} = h_{a,p-1}
    for a in 0..n {
        for b in 0..n {
            for p in 0..=pmax {
                for q in 0..=pmax {
                    if !(table.omega(a, p, b, q) - table.omega(b, q, a, p)).is_zero() {
                        return Err(HierarchyError::DivisionMismatch(p + q));
                    }
                }
                if !(table.omega(a, p, d.unit, 0) - h.h(a, p as i64 - 1)).is_zero() {
                    return Err(HierarchyError::DivisionMismatch(p));
                }
            }
        }
    }
    Ok(table)
}

/// Exact tau-symmetry check:
/// `d h_{a,p-1}/dt^{b,q} - d h_{b,q-1}/dt^{a,p} = 0` for all `p, q <= pmax`.
pub fn verify_tau_symmetry(h: &DensityTable, flows: &FlowTable) -> Vec<Violation> {
    let n = h.n;
    let pmax = flows.pmax;
    let mut cells = Vec::new();
    for a in 0..n {
        for p in 0..=pmax {
            for b in 0..n {
                for q in 0..=pmax {
                    if (a, p) < (b, q) {
                        cells.push((a, p, b, q));
                    }
                }
            }
        }
    }
    let out = map_collect(cells, |(a, p, b, q)| {
        let lhs = flows.apply_to_coeff(b, q, h.h(a, p as i64 - 1));
        let rhs = flows.apply_to_coeff(a, p, h.h(b, q as i64 - 1));
        let diff = lhs.sub(&rhs);
        if diff.is_zero() {
            None
        } else {
            Some(Violation {
                check: "tau_symmetry".into(),
                indices: vec![a as i64 + 1, p as i64, b as i64 + 1, q as i64],
                detail: format!("nonzero difference: {}", diff.to_text()),
            })
        }
    });
    out.into_iter().flatten().collect()
}

/// Exact pairwise commutativity of the flows on every `v^g`.
pub fn verify_commutativity(flows: &FlowTable) -> Vec<Violation> {
    let n = flows.n;
    let pmax = flows.pmax;
    let mut cells = Vec::new();
    for a in 0..n {
        for p in 0..=pmax {
            for b in 0..n {
                for q in 0..=pmax {
                    if (a, p) < (b, q) {
                        cells.push((a, p, b, q));
                    }
                }
            }
        }
    }
    let out = map_collect(cells, |(a, p, b, q)| {
        for g in 0..n {
            let lhs = flows.apply_to_diffpoly(a, p, flows.rhs(b, q, g));
            let rhs = flows.apply_to_diffpoly(b, q, flows.rhs(a, p, g));
            if !lhs.sub(&rhs).is_zero() {
                return Some(Violation {
                    check: "commutativity".into(),
                    indices: vec![a as i64 + 1, p as i64, b as i64 + 1, q as i64, g as i64 + 1],
                    detail: "mixed flow applications disagree".into(),
                });
            }
        }
        None
    });
    out.into_iter().flatten().collect()
}

/// Exact Galilean identities:
/// (a) `d Omega_{a,p;b,q}/dv^1 = Omega_{a,p-1;b,q} + Omega_{a,p;b,q-1} +
///     eta_ab delta_p0 delta_q0`;
/// (b) `[D_Z, d_{b,q}] = d_{b,q-1}` on every `v^g`.
pub fn galilean_check(d: &FrobeniusData, omega: &OmegaTable, flows: &FlowTable) -> Vec<Violation> {
    let n = d.n;
    let pmax = omega.pmax;
    let mut violations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for p in 0..=pmax {
                for q in 0..=pmax {
                    let mut rhs = CoeffPoly::zero(n);
                    if p > 0 {
                        rhs = &rhs + omega.omega(a, p - 1, b, q);
                    }
                    if q > 0 {
                        rhs = &rhs + omega.omega(a, p, b, q - 1);
                    }
                    if p == 0 && q == 0 {
                        rhs = &rhs + &CoeffPoly::constant(n, d.eta[a][b].clone());
                    }
                    let lhs = omega.omega(a, p, b, q).partial(d.unit);
                    if !(&lhs - &rhs).is_zero() {
                        violations.push(Violation {
                            check: "galilean_omega_shift".into(),
                            indices: vec![a as i64 + 1, p as i64, b as i64 + 1, q as i64],
                            detail: "Omega shift identity fails".into(),
                        });
                    }
                }
            }
        }
    }
    // (b): D_Z = d/dv^1 on coefficients; [D_Z, flow_{b,q}](v^g) =
    // d(flow rhs)/dv^1 must equal the rhs of the (b, q-1) flow
    for b in 0..n {
        for q in 0..=flows.pmax {
            for g in 0..n {
                let lhs = flows.rhs(b, q, g).partial_v(d.unit);
                let rhs = if q > 0 { flows.rhs(b, q - 1, g).clone() } else { DiffPoly::zero(n) };
                if !lhs.sub(&rhs).is_zero() {
                    violations.push(Violation {
                        check: "galilean_dz_intertwine".into(),
                        indices: vec![b as i64 + 1, q as i64, g as i64 + 1],
                        detail: "[D_Z, flow] != lowered flow".into(),
                    });
                }
            }
        }
    }
    violations
}

/// Orthogonality of a calibration change against the pairing `eta`:
/// `C(z)^T eta C(-z) = eta` up to the truncation order.
pub fn check_calibration_orthogonality(
    d: &FrobeniusData,
    ch: &CalibrationChange,
    order: usize,
) -> Result<(), HierarchyError> {
    let n = d.n;
    for m in 1..=order {
        for a in 0..n {
            for b in 0..n {
                let mut acc = BigRational::zero();
                for j in 0..=m {
                    let i = m - j;
                    let sgn = if j % 2 == 0 { rat(1, 1) } else { rat(-1, 1) };
                    for mu in 0..n {
                        for nu in 0..n {
                            let ci = ch.c_at(i, mu, a, n);
                            let cj = ch.c_at(j, nu, b, n);
                            if ci.is_zero() || cj.is_zero() {
                                continue;
                            }
                            acc += &(&(&ci * &d.eta[mu][nu]) * &cj) * &sgn;
                        }
                    }
                }
                if !acc.is_zero() {
                    return Err(HierarchyError::OrthogonalityViolation(m));
                }
            }
        }
    }
    Ok(())
}

/// Apply a calibration change `theta~_a(z) = theta_b(z) C^b_a(z) +
/// theta0_a(z)`; the change must be orthogonal with respect to `eta`.
pub fn apply_calibration_change(
    d: &FrobeniusData,
    t: &ThetaTable,
    ch: &CalibrationChange,
) -> Result<ThetaTable, HierarchyError> {
    check_calibration_orthogonality(d, ch, t.depth)?;
    let n = t.n;
    let mut theta = vec![Vec::with_capacity(t.depth + 1); n];
    for a in 0..n {
        for p in 0..=t.depth {
            let mut acc = CoeffPoly::zero(n);
            for k in 0..=p {
                for b in 0..n {
                    let c = ch.c_at(k, b, a, n);
                    if !c.is_zero() {
                        acc = &acc + &t.theta(b, p - k).scale(&c);
                    }
                }
            }
            if let Some(shift_row) = ch.shifts.get(p) {
                acc = &acc + &CoeffPoly::constant(n, shift_row[a].clone());
            }
            theta[a].push(acc);
        }
    }
    let out = ThetaTable { n, depth: t.depth, theta, repairs: Vec::new() };
    // the output still satisfies the theta recursion
    for g in 0..n {
        for p in 1..t.depth {
            let gp = grad(out.theta(g, p), n);
            for a in 0..n {
                for b in 0..n {
                    let mut rhs = CoeffPoly::zero(n);
                    for xi in 0..n {
                        for z in 0..n {
                            if d.eta_inv[xi][z].is_zero() {
                                continue;
                            }
                            rhs = &rhs + &(d.c(a, b, xi) * &gp[z]).scale(&d.eta_inv[xi][z]);
                        }
                    }
                    let lhs = out.theta(g, p + 1).partial(a).partial(b);
                    if !(&lhs - &rhs).is_zero() {
                        return Err(HierarchyError::RecursionInconsistent {
                            level: p + 1,
                            detail: "calibration change broke the recursion".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius::{analyze, EulerData, WDVVPotential};
    use crate::rational::rat_int;

    fn kdv_data() -> FrobeniusData {
        let v = CoeffPoly::var(1, 0);
        let f = (&(&v * &v) * &v).scale(&rat(1, 6));
        analyze(
            &WDVVPotential::new(1, f),
            Some(EulerData { coeffs: vec![rat_int(1)], weight: rat_int(3) }),
        )
        .unwrap()
    }

    fn a2_data() -> FrobeniusData {
        let n = 2;
        let v1 = CoeffPoly::var(n, 0);
        let v2 = CoeffPoly::var(n, 1);
        let f = &(&(&v1 * &v1) * &v2).scale(&rat(1, 2))
            + &(&(&v2 * &v2) * &(&v2 * &v2)).scale(&rat(1, 72));
        analyze(
            &WDVVPotential::new(n, f),
            Some(EulerData { coeffs: vec![rat_int(1), rat(2, 3)], weight: rat(8, 3) }),
        )
        .unwrap()
    }

    /// Independent univariate series oracle for the KdV theta recursion:
    /// with c = 1, eta = 1 the recursion is theta_{p+1}'' = theta_p' from
    /// theta_0 = v, giving v^{p+1}/(p+1)!.
    fn kdv_theta_oracle(p: usize) -> CoeffPoly {
        let mut fact = rat_int(1);
        for k in 1..=(p as i64 + 1) {
            fact *= rat_int(k);
        }
        CoeffPoly::monomial(1, vec![p as u32 + 1], rat(1, 1) / fact)
    }

    #[test]
    fn kdv_theta_closed_form() {
        let d = kdv_data();
        let t = build_theta(&d, 8).unwrap();
        for p in 0..=8 {
            assert_eq!(*t.theta(0, p), kdv_theta_oracle(p), "theta_{{1,{p}}}");
        }
        assert!(t.repairs.is_empty());
    }

    #[test]
    fn theta_seed_is_lowered_coordinate() {
        let d = a2_data();
        let t = build_theta(&d, 4).unwrap();
        // theta_{a,0} = eta_{ab} v^b
        assert_eq!(*t.theta(0, 0), CoeffPoly::var(2, 1));
        assert_eq!(*t.theta(1, 0), CoeffPoly::var(2, 0));
        assert!(t.repairs.is_empty());
    }

    #[test]
    fn kdv_h_closed_form() {
        let d = kdv_data();
        let t = build_theta(&d, 8).unwrap();
        let h = build_h(&d, &t).unwrap();
        for p in -1..=6i64 {
            let expect = kdv_theta_oracle((p + 1) as usize);
            assert_eq!(*h.h(0, p), expect, "h_{{1,{p}}}");
        }
    }

    #[test]
    fn a2_first_densities() {
        let d = a2_data();
        let t = build_theta(&d, 4).unwrap();
        let h = build_h(&d, &t).unwrap();
        // h_{a,-1} = v_a
        assert_eq!(*h.h(0, -1), CoeffPoly::var(2, 1));
        assert_eq!(*h.h(1, -1), CoeffPoly::var(2, 0));
        // h_{1,0} = v1 v2, h_{2,0} = v1^2/2 + v2^3/18
        let v1 = CoeffPoly::var(2, 0);
        let v2 = CoeffPoly::var(2, 1);
        assert_eq!(*h.h(0, 0), &v1 * &v2);
        let expect = &(&v1 * &v1).scale(&rat(1, 2)) + &(&(&v2 * &v2) * &v2).scale(&rat(1, 18));
        assert_eq!(*h.h(1, 0), expect);
    }

    #[test]
    fn density_recursion_holds() {
        let d = a2_data();
        let t = build_theta(&d, 6).unwrap();
        let h = build_h(&d, &t).unwrap();
        for a in 0..2 {
            for p in 0..=(h.depth as i64) {
                assert_eq!(h.h(a, p).partial(0), *h.h(a, p - 1));
            }
        }
    }

    #[test]
    fn flow_normalization_is_translation() {
        // dv^g/dt^{1,0} = u^{g,1}
        for d in [kdv_data(), a2_data()] {
            let n = d.n;
            let t = build_theta(&d, 4).unwrap();
            let h = build_h(&d, &t).unwrap();
            let flows = build_flows(&d, &h, 1);
            for g in 0..n {
                let expect = DiffPoly::jet(n, JetVar::even(g, 1));
                assert!(flows.rhs(0, 0, g).sub(&expect).is_zero());
            }
        }
    }

    /// Independent oracle for the KdV Omega: expanding
    /// `(e^{v(z1+z2)} - 1)/(z1+z2)` gives
    /// `Omega_{p,q} = C(p+q, p) v^{p+q+1}/(p+q+1)!`.
    fn kdv_omega_oracle(p: usize, q: usize) -> CoeffPoly {
        let mut binom = rat_int(1);
        for k in 0..p {
            binom = binom * rat_int((p + q - k) as i64) / rat_int(k as i64 + 1);
        }
        let mut fact = rat_int(1);
        for k in 1..=(p + q + 1) as i64 {
            fact *= rat_int(k);
        }
        CoeffPoly::monomial(1, vec![(p + q + 1) as u32], binom / fact)
    }

    #[test]
    fn kdv_omega_closed_form() {
        let d = kdv_data();
        let t = build_theta(&d, 10).unwrap();
        let om = build_omega(&d, &t, 4).unwrap();
        for p in 0..=4 {
            for q in 0..=4 {
                assert_eq!(*om.omega(0, p, 0, q), kdv_omega_oracle(p, q), "Omega_{{{p};{q}}}");
            }
        }
        // Omega_{1,1;1,1} = v^3/3
        assert_eq!(*om.omega(0, 1, 0, 1), CoeffPoly::monomial(1, vec![3], rat(1, 3)));
    }

    #[test]
    fn omega_left_seed_column_is_h() {
        let d = a2_data();
        let t = build_theta(&d, 8).unwrap();
        let om = build_omega(&d, &t, 3).unwrap();
        let h = build_h(&d, &t).unwrap();
        for a in 0..2 {
            for p in 0..=3 {
                assert_eq!(*om.omega(a, p, 0, 0), *h.h(a, p as i64 - 1));
            }
        }
    }

    #[test]
    fn tau_symmetry_and_commutativity_small() {
        let d = a2_data();
        let t = build_theta(&d, 5).unwrap();
        let h = build_h(&d, &t).unwrap();
        let flows = build_flows(&d, &h, 2);
        assert!(verify_tau_symmetry(&h, &flows).is_empty());
        assert!(verify_commutativity(&flows).is_empty());
    }

    #[test]
    fn fuzzed_density_breaks_tau_symmetry() {
        let d = a2_data();
        let t = build_theta(&d, 5).unwrap();
        let mut h = build_h(&d, &t).unwrap();
        // perturb h_{1,1}
        let bump = CoeffPoly::monomial(2, vec![2, 1], rat(1, 1000));
        h.h[0][2] = &h.h[0][2] + &bump;
        let flows = build_flows(&d, &h, 2);
        let violations = verify_tau_symmetry(&h, &flows);
        assert!(!violations.is_empty());
        assert_eq!(violations[0].check, "tau_symmetry");
    }

    #[test]
    fn galilean_small() {
        let d = kdv_data();
        let t = build_theta(&d, 10).unwrap();
        let h = build_h(&d, &t).unwrap();
        let flows = build_flows(&d, &h, 4);
        let om = build_omega(&d, &t, 4).unwrap();
        assert!(galilean_check(&d, &om, &flows).is_empty());
    }

    #[test]
    fn identity_calibration_change_is_identity() {
        let d = kdv_data();
        let t = build_theta(&d, 6).unwrap();
        let t2 = apply_calibration_change(&d, &t, &CalibrationChange::identity()).unwrap();
        for p in 0..=6 {
            assert_eq!(t.theta(0, p), t2.theta(0, p));
        }
    }

    #[test]
    fn shift_only_change_keeps_densities() {
        let d = kdv_data();
        let t = build_theta(&d, 6).unwrap();
        let ch = CalibrationChange {
            c: Vec::new(),
            shifts: vec![vec![rat_int(0)], vec![rat_int(5)], vec![rat(1, 3)]],
        };
        let t2 = apply_calibration_change(&d, &t, &ch).unwrap();
        assert!(*t2.theta(0, 1) != *t.theta(0, 1));
        let h = build_h(&d, &t).unwrap();
        let h2 = build_h(&d, &t2).unwrap();
        for p in -1..=4i64 {
            assert_eq!(h.h(0, p), h2.h(0, p));
        }
    }

    #[test]
    fn non_orthogonal_change_rejected() {
        let d = a2_data();
        let t = build_theta(&d, 4).unwrap();
        // C_1 = diag(1,0)-like bump: fails C^T eta C(-z) = eta at order 1
        let mut c1 = vec![vec![BigRational::zero(); 2]; 2];
        c1[0][0] = rat_int(1);
        let ch = CalibrationChange { c: vec![c1], shifts: Vec::new() };
        assert!(matches!(
            apply_calibration_change(&d, &t, &ch),
            Err(HierarchyError::OrthogonalityViolation(1))
        ));
    }

    #[test]
    fn eta_symmetric_first_order_change_is_orthogonal_and_preserves_normalization() {
        let d = a2_data();
        let t = build_theta(&d, 6).unwrap();
        // C(z) = exp(z C1) truncated, with eta C1 antisymmetric:
        // C1 = eta^{-1} S with S antisymmetric gives C^T(z) eta C(z) drift;
        // the orthogonality C(z)^T eta C(-z) = eta needs eta C1 symmetric.
        // pick C1 = eta^{-1} S with S symmetric
        let s = vec![vec![rat_int(0), rat_int(1)], vec![rat_int(1), rat_int(0)]];
        // C1 = eta^{-1} s = identity here (eta antidiagonal)
        let mut c1 = vec![vec![BigRational::zero(); 2]; 2];
        for b in 0..2 {
            for a in 0..2 {
                let mut acc = BigRational::zero();
                for k in 0..2 {
                    acc += &d.eta_inv[b][k] * &s[k][a];
                }
                c1[b][a] = acc;
            }
        }
        // C2 = C1^2/2, C3 = C1^3/6 (exponential series)
        let matmul = |x: &Vec<Vec<BigRational>>, y: &Vec<Vec<BigRational>>| {
            let mut out = vec![vec![BigRational::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        out[i][j] += &x[i][k] * &y[k][j];
                    }
                }
            }
            out
        };
        let scale = |x: &Vec<Vec<BigRational>>, r: BigRational| {
            x.iter().map(|row| row.iter().map(|e| e * &r).collect()).collect::<Vec<Vec<_>>>()
        };
        let c2 = scale(&matmul(&c1, &c1), rat(1, 2));
        let c3 = scale(&matmul(&c1, &c2), rat(1, 3));
        let c4 = scale(&matmul(&c1, &c3), rat(1, 4));
        let c5 = scale(&matmul(&c1, &c4), rat(1, 5));
        let c6 = scale(&matmul(&c1, &c5), rat(1, 6));
        let ch = CalibrationChange { c: vec![c1, c2, c3, c4, c5, c6], shifts: Vec::new() };
        let t2 = apply_calibration_change(&d, &t, &ch).unwrap();
        // normalization still holds at every order
        for m in 1..=6 {
            let defect = normalization_defect(&d, &t2.theta, m);
            for row in &defect {
                for e in row {
                    assert!(e.is_zero(), "normalization broken at order {m}");
                }
            }
        }
    }
}
