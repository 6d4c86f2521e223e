//! Hydrodynamic-type metrics, their Poisson operators in flat coordinates,
//! and the numeric canonical-coordinate analysis of a semisimple pencil:
//! roots of the characteristic equation, diagonal entries `f^i`, rotation
//! coefficients, and the Egoroff / gamma-system / irreducibility /
//! exactness residual checks.
//!
//! The canonical-coordinate layer is numeric at a point: the roots
//! `u^i(v)` are algebraic functions, so everything here evaluates at
//! sample points with exact implicit differentiation for the Jacobians and
//! Richardson-extrapolated central differences for everything built on
//! `f_i`.  Square roots are taken on |f_i f_j| with the sign branch
//! recorded; the checks that need products of rotation coefficients carry
//! the signs explicitly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::coeffpoly::CoeffPoly;
use crate::jetspace::{DiffPoly, JetVar, LocalFunctional};
use crate::par::map_collect;
use crate::rational::rat;

/// Default step for first-level central differences.
pub const FD_STEP: f64 = 1e-5;
/// Step for the outer derivative when differentiating FD-computed data.
pub const FD_STEP_OUTER: f64 = 5e-3;
/// Tolerance for residuals built from exact derivatives.
pub const TOL_EXACT: f64 = 1e-8;
/// Tolerance for residuals involving finite differences.
pub const TOL_FD: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PencilError {
    #[error("metric is not symmetric at entry ({0},{1})")]
    NonSymmetric(usize, usize),
    #[error("metric is degenerate: det g vanishes")]
    Degenerate,
    #[error("repeated root of the characteristic equation at the sample point: {0:?}")]
    DegenerateSpectrum(Vec<f64>),
    #[error("complex roots of the characteristic equation at the sample point")]
    ComplexSpectrum,
    #[error("zero diagonal entry f^{0} at the sample point")]
    ZeroDiagonalEntry(usize),
    #[error("coinciding characteristic velocities at the sample point")]
    CoincidingVelocities,
}

/// Contravariant metric of hydrodynamic type with its contravariant
/// Christoffel coefficients, all polynomial in the flat coordinates.
#[derive(Clone, Debug)]
pub struct HydroMetric {
    n: usize,
    g: Vec<Vec<CoeffPoly>>,
    gamma: Vec<Vec<Vec<CoeffPoly>>>,
}

impl HydroMetric {
    pub fn new(g: Vec<Vec<CoeffPoly>>, gamma: Vec<Vec<Vec<CoeffPoly>>>) -> Result<Self, PencilError> {
        let n = g.len();
        for (i, row) in g.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                if *entry != g[j][i] {
                    return Err(PencilError::NonSymmetric(i, j));
                }
            }
        }
        Ok(HydroMetric { n, g, gamma })
    }

    /// Constant-coefficient metric with vanishing Christoffels.
    pub fn constant(eta: &[Vec<num_rational::BigRational>]) -> Result<Self, PencilError> {
        let n = eta.len();
        let g = eta
            .iter()
            .map(|row| row.iter().map(|r| CoeffPoly::constant(n, r.clone())).collect())
            .collect();
        let zero = CoeffPoly::zero(n);
        let gamma = vec![vec![vec![zero; n]; n]; n];
        HydroMetric::new(g, gamma)
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> &Vec<Vec<CoeffPoly>> {
        &self.g
    }

    pub fn christoffel(&self) -> &Vec<Vec<Vec<CoeffPoly>>> {
        &self.gamma
    }

    pub fn eval(&self, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.g[i][j].eval_f64(v))
    }

    /// Symbolic determinant (small n).
    pub fn det_poly(&self) -> CoeffPoly {
        det_coeffpoly(&self.g, self.n)
    }

    /// The super functional `P = 1/2 int( g^{ij} th_i th_j^1 +
    /// Gamma^{ij}_k u^{k,1} th_i th_j )` of the Poisson operator.
    pub fn poisson_operator(&self) -> LocalFunctional {
        let n = self.n;
        let half = rat(1, 2);
        let mut acc = DiffPoly::zero(n);
        for i in 0..n {
            for j in 0..n {
                if !self.g[i][j].is_zero() {
                    let t = DiffPoly::jet(n, JetVar::odd(i, 0))
                        .mul(&DiffPoly::jet(n, JetVar::odd(j, 1)))
                        .unwrap()
                        .scale_coeff(&self.g[i][j])
                        .scale(&half);
                    acc = acc.add(&t);
                }
                for k in 0..n {
                    let gam = &self.gamma[i][j][k];
                    if gam.is_zero() {
                        continue;
                    }
                    let t = DiffPoly::jet(n, JetVar::even(k, 1))
                        .mul(&DiffPoly::jet(n, JetVar::odd(i, 0)))
                        .unwrap()
                        .mul(&DiffPoly::jet(n, JetVar::odd(j, 0)))
                        .unwrap()
                        .scale_coeff(gam)
                        .scale(&half);
                    acc = acc.add(&t);
                }
            }
        }
        LocalFunctional::new(acc)
    }
}

fn det_coeffpoly(m: &[Vec<CoeffPoly>], n: usize) -> CoeffPoly {
    if n == 0 {
        return CoeffPoly::one(0);
    }
    if n == 1 {
        return m[0][0].clone();
    }
    // Laplace expansion along the first row; n stays tiny here.
    let mut acc = CoeffPoly::zero(m[0][0].n_vars());
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<CoeffPoly>> = (1..n)
            .map(|r| (0..n).filter(|c| *c != j).map(|c| m[r][c].clone()).collect())
            .collect();
        let cof = det_coeffpoly(&minor, n - 1);
        let term = &m[0][j] * &cof;
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// Adjugate of a square f64 matrix by cofactors (n <= 4 in practice).
fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |j, i| {
        // adj[j][i] = cofactor C_{i,j}
        let minor = m.clone().remove_row(i).remove_column(j);
        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * minor.determinant()
    })
}

/// Point-wise canonical-coordinate data of a semisimple pencil.
#[derive(Clone, Debug)]
pub struct PencilChart {
    pub base: Vec<f64>,
    /// Roots of `det(g2 - u g1) = 0`, ascending.
    pub u: Vec<f64>,
    /// Diagonal entries `f^i` of `g1` in canonical coordinates.
    pub f_up: Vec<f64>,
    /// `f_i = 1/f^i`.
    pub f_lo: Vec<f64>,
    /// Sign branch `sign(f_i)`.
    pub sign_f: Vec<f64>,
    /// `du^i/dv^a` (row i, column a), by implicit differentiation.
    pub du_dv: DMatrix<f64>,
    /// `dv^a/du^i` (row a, column i).
    pub dv_du: DMatrix<f64>,
    /// Residuals recorded by the checks that have run on this chart.
    pub residuals: BTreeMap<String, f64>,
    g1: HydroMetric,
    g2: HydroMetric,
}

/// Roots, `f^i` and the Jacobian; the core reused by finite differencing.
fn chart_core(
    g1m: &HydroMetric,
    g2m: &HydroMetric,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>), PencilError> {
    let n = g1m.n_vars();
    let g1 = g1m.eval(v);
    let g2 = g2m.eval(v);
    let g1inv = g1.clone().try_inverse().ok_or(PencilError::Degenerate)?;
    let a = &g1inv * &g2;
    let eig = a.complex_eigenvalues();
    let scale = 1.0 + eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut roots: Vec<f64> = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > 1e-9 * scale {
            return Err(PencilError::ComplexSpectrum);
        }
        roots.push(z.re);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in roots.windows(2) {
        if (w[1] - w[0]).abs() < 1e-9 * scale {
            return Err(PencilError::DegenerateSpectrum(roots.clone()));
        }
    }
    // implicit differentiation of det(g2 - u g1) = 0
    let mut du_dv = DMatrix::zeros(n, n);
    for (i, &ui) in roots.iter().enumerate() {
        let m = &g2 - &(g1.clone() * ui);
        let adj = adjugate(&m);
        let denom = (&adj * &g1).trace();
        for al in 0..n {
            let dg = DMatrix::from_fn(n, n, |r, c| {
                g2m.g()[r][c].partial(al).eval_f64(v) - ui * g1m.g()[r][c].partial(al).eval_f64(v)
            });
            du_dv[(i, al)] = (&adj * &dg).trace() / denom;
        }
    }
    // f^i = grad u^i . g1 . grad u^i
    let mut f_up = vec![0.0; n];
    for (i, f) in f_up.iter_mut().enumerate() {
        let grad = du_dv.row(i);
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += grad[a] * g1[(a, b)] * grad[b];
            }
        }
        *f = acc;
    }
    Ok((roots, f_up, du_dv))
}

/// Build the canonical-coordinate chart of the pencil `(g1, g2)` at `v*`.
pub fn canonical_coordinates_at(
    g1: &HydroMetric,
    g2: &HydroMetric,
    v: &[f64],
) -> Result<PencilChart, PencilError> {
    let n = g1.n_vars();
    assert_eq!(n, g2.n_vars());
    assert_eq!(n, v.len());
    let (u, f_up, du_dv) = chart_core(g1, g2, v)?;
    for (i, f) in f_up.iter().enumerate() {
        if f.abs() < 1e-12 {
            return Err(PencilError::ZeroDiagonalEntry(i));
        }
    }
    let f_lo: Vec<f64> = f_up.iter().map(|f| 1.0 / f).collect();
    let sign_f: Vec<f64> = f_lo.iter().map(|f| f.signum()).collect();
    let dv_du = du_dv.clone().try_inverse().ok_or(PencilError::Degenerate)?;
    Ok(PencilChart {
        base: v.to_vec(),
        u,
        f_up,
        f_lo,
        sign_f,
        du_dv,
        dv_du,
        residuals: BTreeMap::new(),
        g1: g1.clone(),
        g2: g2.clone(),
    })
}

impl PencilChart {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// Displace the base point along canonical direction `j` by `eps` and
    /// return the recomputed `f_i` there (root order tracked by sorting;
    /// roots stay separated for the small steps used here).
    fn f_lo_displaced(&self, j: usize, eps: f64) -> Result<Vec<f64>, PencilError> {
        let n = self.n();
        let v: Vec<f64> = (0..n).map(|a| self.base[a] + eps * self.dv_du[(a, j)]).collect();
        let (_, f_up, _) = chart_core(&self.g1, &self.g2, &v)?;
        Ok(f_up.iter().map(|f| 1.0 / f).collect())
    }

    /// `d f_i / d u^j` by Richardson-extrapolated central differences.
    pub fn df_lo_du(&self) -> Result<DMatrix<f64>, PencilError> {
        let n = self.n();
        let h = FD_STEP;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let fp = self.f_lo_displaced(j, h)?;
            let fm = self.f_lo_displaced(j, -h)?;
            let fp2 = self.f_lo_displaced(j, h / 2.0)?;
            let fm2 = self.f_lo_displaced(j, -h / 2.0)?;
            for i in 0..n {
                let d1 = (fp[i] - fm[i]) / (2.0 * h);
                let d2 = (fp2[i] - fm2[i]) / h;
                out[(i, j)] = (4.0 * d2 - d1) / 3.0;
            }
        }
        Ok(out)
    }

    /// Magnitudes of the rotation coefficients together with the recorded
    /// sign branch: the true coefficients are `gt_ij / (eps_i eps_j)` with
    /// `eps_i = sqrt(sign f_i)`.
    pub fn rotation_coefficients(&self) -> Result<DMatrix<f64>, PencilError> {
        let n = self.n();
        for (i, f) in self.f_lo.iter().enumerate() {
            if f.abs() < 1e-12 {
                return Err(PencilError::ZeroDiagonalEntry(i));
            }
        }
        let df = self.df_lo_du()?;
        let mut gamma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                gamma[(i, j)] = df[(i, j)] / (2.0 * (self.f_lo[i] * self.f_lo[j]).abs().sqrt());
            }
        }
        Ok(gamma)
    }

    /// Rotation coefficients at a displaced point (for nested FD).
    fn gamma_displaced(&self, k: usize, eps: f64) -> Result<DMatrix<f64>, PencilError> {
        let n = self.n();
        let v: Vec<f64> = (0..n).map(|a| self.base[a] + eps * self.dv_du[(a, k)]).collect();
        let chart = canonical_coordinates_at(&self.g1, &self.g2, &v)?;
        chart.rotation_coefficients()
    }

    /// Rebuild a chart at a point displaced along canonical direction `i`.
    pub fn displaced_chart(&self, i: usize, eps: f64) -> Result<PencilChart, PencilError> {
        let n = self.n();
        let v: Vec<f64> = (0..n).map(|a| self.base[a] + eps * self.dv_du[(a, i)]).collect();
        canonical_coordinates_at(&self.g1, &self.g2, &v)
    }
}

/// Max-norm residual of the Egoroff condition `df_i/du^j = df_j/du^i`.
pub fn check_egoroff(chart: &PencilChart) -> Result<f64, PencilError> {
    let df = chart.df_lo_du()?;
    let n = chart.n();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            r = r.max((df[(i, j)] - df[(j, i)]).abs());
        }
    }
    Ok(r)
}

/// Residual of `D_Z(f^i) = sum_k df^i/du^k = 0`.
pub fn check_dz_f(chart: &PencilChart) -> Result<f64, PencilError> {
    let n = chart.n();
    let h = FD_STEP;
    let mut r: f64 = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            let fp = chart.f_lo_displaced(k, h)?;
            let fm = chart.f_lo_displaced(k, -h)?;
            let fp2 = chart.f_lo_displaced(k, h / 2.0)?;
            let fm2 = chart.f_lo_displaced(k, -h / 2.0)?;
            let d1 = (1.0 / fp[i] - 1.0 / fm[i]) / (2.0 * h);
            let d2 = (1.0 / fp2[i] - 1.0 / fm2[i]) / h;
            acc += (4.0 * d2 - d1) / 3.0;
        }
        r = r.max(acc.abs());
    }
    Ok(r)
}

/// Residuals of the three gamma-system equations (with the sign branch):
/// `d gt_ij/du^k = sign(f_k) gt_ik gt_jk` for distinct `i, j, k`;
/// `sum_k d gt_ij/du^k = 0`; `sum_k u^k d gt_ij/du^k = -gt_ij`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GammaSystemResiduals {
    pub product_rule: f64,
    pub translation: f64,
    pub scaling: f64,
}

impl GammaSystemResiduals {
    pub fn max(&self) -> f64 {
        self.product_rule.max(self.translation).max(self.scaling)
    }
}

pub fn check_gamma_system(chart: &PencilChart) -> Result<GammaSystemResiduals, PencilError> {
    let n = chart.n();
    let gamma = chart.rotation_coefficients()?;
    let h = FD_STEP_OUTER;
    // dgamma[k][(i,j)] = d gt_ij / du^k, Richardson on the outer step
    let mut dgamma: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let gp = chart.gamma_displaced(k, h)?;
        let gm = chart.gamma_displaced(k, -h)?;
        let gp2 = chart.gamma_displaced(k, h / 2.0)?;
        let gm2 = chart.gamma_displaced(k, -h / 2.0)?;
        let d1 = (&gp - &gm) / (2.0 * h);
        let d2 = (&gp2 - &gm2) / h;
        dgamma.push(d2 * 4.0 / 3.0 - d1 / 3.0);
    }
    let mut res = GammaSystemResiduals::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut sum = 0.0;
            let mut euler = 0.0;
            for k in 0..n {
                sum += dgamma[k][(i, j)];
                euler += chart.u[k] * dgamma[k][(i, j)];
                if k != i && k != j {
                    let lhs = dgamma[k][(i, j)];
                    let rhs = chart.sign_f[k] * gamma[(i, k)] * gamma[(j, k)];
                    res.product_rule = res.product_rule.max((lhs - rhs).abs());
                }
            }
            res.translation = res.translation.max(sum.abs());
            res.scaling = res.scaling.max((euler + gamma[(i, j)]).abs());
        }
    }
    Ok(res)
}

/// Irreducibility: the graph on `{1..n}` with edges where `|gt_ij|`
/// exceeds the tolerance must be connected.
pub fn check_irreducible(chart: &PencilChart, tol: f64) -> Result<bool, PencilError> {
    let n = chart.n();
    if n <= 1 {
        return Ok(true);
    }
    let gamma = chart.rotation_coefficients()?;
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && gamma[(i, j)].abs() > tol {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    Ok(seen.into_iter().all(|s| s))
}

/// Residuals of the linear system for a matrix `psi` whose columns are
/// solutions: off-diagonal `d psi_j/du^i = sign(f_j) gt_ji psi_i` and
/// diagonal `d psi_i/du^i = -sign(f_i) sum_{k != i} gt_ki psi_k`, with
/// `psi_fn` recomputing the matrix on a displaced chart.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct PsiResiduals {
    pub off_diagonal: f64,
    pub diagonal: f64,
    /// Max-norm of `psi`; a vanishing norm makes the residuals trivially
    /// zero and is flagged by callers.
    pub norm: f64,
}

pub fn psi_residual<F>(chart: &PencilChart, psi_fn: F) -> Result<PsiResiduals, PencilError>
where
    F: Fn(&PencilChart) -> Result<DMatrix<f64>, PencilError>,
{
    let n = chart.n();
    let gamma = chart.rotation_coefficients()?;
    let psi = psi_fn(chart)?;
    let cols = psi.ncols();
    let h = FD_STEP_OUTER;
    let mut dpsi: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let displaced = |eps: f64| -> Result<DMatrix<f64>, PencilError> {
            psi_fn(&chart.displaced_chart(i, eps)?)
        };
        let pp = displaced(h)?;
        let pm = displaced(-h)?;
        let pp2 = displaced(h / 2.0)?;
        let pm2 = displaced(-h / 2.0)?;
        let d1 = (&pp - &pm) / (2.0 * h);
        let d2 = (&pp2 - &pm2) / h;
        dpsi.push(d2 * 4.0 / 3.0 - d1 / 3.0);
    }
    let mut res = PsiResiduals { norm: psi.amax(), ..Default::default() };
    for col in 0..cols {
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    continue;
                }
                let lhs = dpsi[i][(j, col)];
                let rhs = chart.sign_f[j] * gamma[(j, i)] * psi[(i, col)];
                res.off_diagonal = res.off_diagonal.max((lhs - rhs).abs());
            }
            let mut rhs = 0.0;
            for k in 0..n {
                if k != j {
                    rhs -= chart.sign_f[j] * gamma[(k, j)] * psi[(k, col)];
                }
            }
            res.diagonal = res.diagonal.max((dpsi[j][(j, col)] - rhs).abs());
        }
    }
    Ok(res)
}

/// Run the chart residual suite at a batch of sample points; the batch is
/// data-parallel over points.
pub fn batch_residuals(
    g1: &HydroMetric,
    g2: &HydroMetric,
    points: &[Vec<f64>],
) -> Vec<Result<(Vec<f64>, BTreeMap<String, f64>), PencilError>> {
    let work: Vec<Vec<f64>> = points.to_vec();
    let g1c = g1.clone();
    let g2c = g2.clone();
    map_collect(work, move |v| {
        let chart = canonical_coordinates_at(&g1c, &g2c, &v)?;
        let mut m = BTreeMap::new();
        m.insert("egoroff".to_string(), check_egoroff(&chart)?);
        m.insert("dz_f".to_string(), check_dz_f(&chart)?);
        let gs = check_gamma_system(&chart)?;
        m.insert("gamma_product".to_string(), gs.product_rule);
        m.insert("gamma_translation".to_string(), gs.translation);
        m.insert("gamma_scaling".to_string(), gs.scaling);
        Ok((v, m))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_int;

    fn kdv_metrics() -> (HydroMetric, HydroMetric) {
        // g1 = 1, g2 = v with Gamma = 1/2
        let one = CoeffPoly::one(1);
        let v = CoeffPoly::var(1, 0);
        let half = CoeffPoly::constant(1, rat(1, 2));
        let g1 = HydroMetric::new(vec![vec![one]], vec![vec![vec![CoeffPoly::zero(1)]]]).unwrap();
        let g2 = HydroMetric::new(vec![vec![v]], vec![vec![vec![half]]]).unwrap();
        (g1, g2)
    }

    #[test]
    fn poisson_operator_constant_metric() {
        let (g1, _) = kdv_metrics();
        let p = g1.poisson_operator();
        let expect = LocalFunctional::new(DiffPoly::parse(1, "1/2*th(1,0)*th(1,1)").unwrap());
        assert!(p.sub(&expect).is_zero());
    }

    #[test]
    fn poisson_operator_kdv_second_structure() {
        // the theta-theta term vanishes by oddness; P2 = 1/2 v th th^1
        let (_, g2) = kdv_metrics();
        let p = g2.poisson_operator();
        let expect = LocalFunctional::new(DiffPoly::parse(1, "1/2*v1*th(1,0)*th(1,1)").unwrap());
        assert!(p.sub(&expect).is_zero());
    }

    #[test]
    fn non_symmetric_metric_rejected() {
        let n = 2;
        let z = CoeffPoly::zero(n);
        let one = CoeffPoly::one(n);
        let g = vec![vec![z.clone(), one], vec![z.clone(), z.clone()]];
        let gamma = vec![vec![vec![CoeffPoly::zero(n); n]; n]; n];
        assert!(matches!(HydroMetric::new(g, gamma), Err(PencilError::NonSymmetric(_, _))));
    }

    #[test]
    fn kdv_chart_at_three() {
        let (g1, g2) = kdv_metrics();
        let chart = canonical_coordinates_at(&g1, &g2, &[3.0]).unwrap();
        assert!((chart.u[0] - 3.0).abs() < 1e-12);
        assert!((chart.f_up[0] - 1.0).abs() < 1e-12);
        // n = 1: everything vacuous / zero
        assert!(check_egoroff(&chart).unwrap() < TOL_FD);
        assert!(check_dz_f(&chart).unwrap() < TOL_FD);
        assert!(check_irreducible(&chart, 1e-10).unwrap());
        let gamma = chart.rotation_coefficients().unwrap();
        assert_eq!(gamma[(0, 0)], 0.0);
    }

    #[test]
    fn equal_metrics_are_degenerate() {
        let n = 2;
        let eta = vec![vec![rat_int(1), rat_int(0)], vec![rat_int(0), rat_int(1)]];
        let g1 = HydroMetric::constant(&eta).unwrap();
        let g2 = HydroMetric::constant(&eta).unwrap();
        match canonical_coordinates_at(&g1, &g2, &[0.5, 1.5]) {
            Err(PencilError::DegenerateSpectrum(_)) => {}
            other => panic!("expected DegenerateSpectrum, got {other:?}"),
        }
        let _ = n;
    }

    #[test]
    fn constant_f_gives_zero_rotation_and_reducible_blocks() {
        // two decoupled dispersionless KdV pencils: g1 = I, g2 = diag(v1, v2)
        let n = 2;
        let g1 = HydroMetric::constant(&[
            vec![rat_int(1), rat_int(0)],
            vec![rat_int(0), rat_int(1)],
        ])
        .unwrap();
        let z = CoeffPoly::zero(n);
        let half = CoeffPoly::constant(n, rat(1, 2));
        let mut gamma = vec![vec![vec![z.clone(); n]; n]; n];
        gamma[0][0][0] = half.clone();
        gamma[1][1][1] = half;
        let g2 = HydroMetric::new(
            vec![
                vec![CoeffPoly::var(n, 0), z.clone()],
                vec![z.clone(), CoeffPoly::var(n, 1)],
            ],
            gamma,
        )
        .unwrap();
        let chart = canonical_coordinates_at(&g1, &g2, &[0.2, -0.4]).unwrap();
        // f^i = 1: the rotation coefficients vanish
        let gamma = chart.rotation_coefficients().unwrap();
        assert!(gamma.amax() < 1e-9);
        // the cross-block coefficients are zero: reducible
        assert!(!check_irreducible(&chart, 1e-6).unwrap());
        assert!(check_egoroff(&chart).unwrap() < TOL_FD);
    }
}
