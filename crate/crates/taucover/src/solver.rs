//! Numerical evaluation layer for scalar (n = 1) principal flows: method
//! of characteristics with breaking detection, tau-cover integration on an
//! (x, t) grid with two independent routes to `f = log tau`, and the
//! numeric Galilean shift check.
//!
//! All quadrature is 4th order (cumulative cubic rule), time stepping for
//! the shift check is explicit Euler or classical RK4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffpoly::CoeffPoly;
use crate::hierarchy::{DensityTable, OmegaTable};
use crate::par::map_collect;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SolverError {
    #[error("characteristics break before the first requested time (t_break ~ {0})")]
    BreakingDetected(f64),
    #[error("Newton iteration failed to converge at node ({0}, {1})")]
    NewtonFailed(f64, f64),
    #[error("solver needs n = 1 tables")]
    NotScalar,
    #[error("grid must be strictly increasing with at least 4 nodes per axis")]
    BadGrid,
}

/// Initial profile `v0(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant { value: f64 },
    Linear { slope: f64 },
    Sin { amplitude: f64 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Constant { value } => *value,
            InitialProfile::Linear { slope } => slope * x,
            InitialProfile::Sin { amplitude } => amplitude * x.sin(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Constant { .. } => 0.0,
            InitialProfile::Linear { slope } => *slope,
            InitialProfile::Sin { amplitude } => amplitude * x.cos(),
        }
    }
}

/// A scalar initial-value problem for the flow `d v/d t^{1,p}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarICProblem {
    pub profile: InitialProfile,
    /// flow index `p >= 1`; the time variable is `t^{1,p}`
    pub flow_p: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
}

impl ScalarICProblem {
    pub fn x_nodes(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        linspace(0.0, self.t_max, self.nt)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n as f64 - 1.0);
    (0..n).map(|i| a + h * i as f64).collect()
}

/// Scalar characteristic velocity `A(v) = d2 h_{1,p} / dv^2` with its
/// derivative, extracted from the density table.
#[derive(Clone, Debug)]
pub struct ScalarFlow {
    pub p: usize,
    a: CoeffPoly,
    a_prime: CoeffPoly,
}

impl ScalarFlow {
    pub fn from_densities(h: &DensityTable, p: usize) -> Result<Self, SolverError> {
        if h.n != 1 {
            return Err(SolverError::NotScalar);
        }
        let a = h.h(0, p as i64).partial(0).partial(0);
        let a_prime = a.partial(0);
        Ok(ScalarFlow { p, a, a_prime })
    }

    pub fn velocity(&self, v: f64) -> f64 {
        self.a.eval_f64(&[v])
    }

    pub fn velocity_prime(&self, v: f64) -> f64 {
        self.a_prime.eval_f64(&[v])
    }
}

/// Solved field `v(x, t)` on the requested grid, possibly truncated in
/// time at a detected gradient catastrophe.
#[derive(Clone, Debug)]
pub struct Field {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// `v[ti][xi]`
    pub v: Vec<Vec<f64>>,
    /// time of the first detected breaking, if the window was truncated
    pub breaking: Option<f64>,
}

impl Field {
    pub fn complete(&self) -> bool {
        self.breaking.is_none()
    }
}

/// Solve `v = v0(x + A(v) t)` by warm-started Newton iteration on every
/// node.  Rows are dropped from the first time slice where the Newton
/// denominator `1 - t A'(v) v0'` crosses zero (classical breaking).
pub fn solve_characteristics(
    prob: &ScalarICProblem,
    flow: &ScalarFlow,
) -> Result<Field, SolverError> {
    if prob.nx < 4 || prob.nt < 2 || prob.x_max <= prob.x_min || prob.t_max <= 0.0 {
        return Err(SolverError::BadGrid);
    }
    let xs = prob.x_nodes();
    let ts = prob.t_nodes();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(ts.len());
    let mut breaking = None;
    'time: for (ti, &t) in ts.iter().enumerate() {
        let mut row = Vec::with_capacity(xs.len());
        for (xi, &x) in xs.iter().enumerate() {
            let warm = if ti > 0 {
                rows[ti - 1][xi]
            } else if xi > 0 {
                row[xi - 1]
            } else {
                prob.profile.eval(x)
            };
            match newton_node(prob, flow, x, t, warm) {
                Some((v, denom)) if denom > 0.0 => row.push(v),
                _ => {
                    if ti == 0 {
                        return Err(SolverError::NewtonFailed(x, t));
                    }
                    breaking = Some(t);
                    break 'time;
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SolverError::BreakingDetected(0.0));
    }
    Ok(Field { x: xs, t: ts[..rows.len()].to_vec(), v: rows, breaking })
}

fn newton_node(
    prob: &ScalarICProblem,
    flow: &ScalarFlow,
    x: f64,
    t: f64,
    warm: f64,
) -> Option<(f64, f64)> {
    let mut v = warm;
    for _ in 0..100 {
        let xi = x + flow.velocity(v) * t;
        let g = v - prob.profile.eval(xi);
        let denom = 1.0 - prob.profile.derivative(xi) * flow.velocity_prime(v) * t;
        if denom.abs() < 1e-12 {
            return None;
        }
        let step = g / denom;
        v -= step;
        if step.abs() < 1e-14 * (1.0 + v.abs()) {
            let xi = x + flow.velocity(v) * t;
            let denom = 1.0 - prob.profile.derivative(xi) * flow.velocity_prime(v) * t;
            return Some((v, denom));
        }
    }
    None
}

/// Exact spatial derivative of the solved field along characteristics:
/// `v_x = v0'(xi) / (1 - t A'(v) v0'(xi))`.
pub fn field_vx(prob: &ScalarICProblem, flow: &ScalarFlow, x: f64, t: f64, v: f64) -> f64 {
    let xi = x + flow.velocity(v) * t;
    let d = prob.profile.derivative(xi);
    d / (1.0 - flow.velocity_prime(v) * d * t)
}

/// Cumulative integral of samples on a uniform grid with 4th-order
/// accuracy (cubic interpolation through 4-point stencils per interval).
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "cumulative integral needs at least 4 nodes");
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    for i in 0..n - 1 {
        // integrate over [i, i+1] with the cubic through a 4-point stencil
        let inc = if i == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * h / 24.0
        } else if i == n - 2 {
            (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) * h / 24.0
        } else {
            (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) * h / 24.0
        };
        out.push(out[i] + inc);
    }
    out
}

/// Tau-cover data on the grid: `f_{1,0}`, `f_{1,p}`, two routes to
/// `f = log tau` and their discrepancy.
#[derive(Clone, Debug)]
pub struct TauGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub f10: Vec<Vec<f64>>,
    pub f1p: Vec<Vec<f64>>,
    /// `f` integrated along x rows (route A)
    pub f: Vec<Vec<f64>>,
    /// `f` integrated along the t direction (route B)
    pub f_alt: Vec<Vec<f64>>,
    pub route_discrepancy: f64,
    /// discrete residual of `d f_{1,0}/dt = Omega_{1,p;1,0} = h_{1,p-1}`
    pub mixed_partial_residual: f64,
}

/// Integrate the tau cover on a solved field.  The cover normalizes
/// `f = f_{1,0} = f_{1,p} = 0` at the grid corner `(x_min, 0)`:
/// `df/dx = f_{1,0}`, `df/dt = f_{1,p}`, `d f_{1,0}/dx =
/// Omega_{1,0;1,0}(v)`, `d f_{1,p}/dx = h_{1,p-1}(v)`,
/// `d f_{1,p}/dt = Omega_{1,p;1,p}(v)`.
pub fn evaluate_tau(
    field: &Field,
    h: &DensityTable,
    omega: &OmegaTable,
    p: usize,
) -> Result<TauGrid, SolverError> {
    if h.n != 1 {
        return Err(SolverError::NotScalar);
    }
    let nt = field.t.len();
    let nx = field.x.len();
    if nt < 4 || nx < 4 {
        return Err(SolverError::BadGrid);
    }
    let hx = field.x[1] - field.x[0];
    let ht = field.t[1] - field.t[0];
    let om00 = omega.omega(0, 0, 0, 0);
    let ompp = omega.omega(0, p, 0, p);
    let hm1 = h.h(0, p as i64 - 1);
    // f_{1,0}: x-integral of Omega_{1,0;1,0}(v) with the t-dependent
    // constant fixed by d f_{1,0}/dt = h_{1,p-1}(v) on the left edge
    let edge_h: Vec<f64> = (0..nt).map(|ti| hm1.eval_f64(&[field.v[ti][0]])).collect();
    let c0 = cumulative_integral(&edge_h, ht);
    let f10: Vec<Vec<f64>> = (0..nt)
        .map(|ti| {
            let row: Vec<f64> = (0..nx).map(|xi| om00.eval_f64(&[field.v[ti][xi]])).collect();
            let mut cum = cumulative_integral(&row, hx);
            for c in cum.iter_mut() {
                *c += c0[ti];
            }
            cum
        })
        .collect();
    // f_{1,p}: x-integral of h_{1,p-1}(v) with the edge constant from
    // d f_{1,p}/dt = Omega_{1,p;1,p}(v)
    let edge_om: Vec<f64> = (0..nt).map(|ti| ompp.eval_f64(&[field.v[ti][0]])).collect();
    let e0 = cumulative_integral(&edge_om, ht);
    let f1p: Vec<Vec<f64>> = (0..nt)
        .map(|ti| {
            let row: Vec<f64> = (0..nx).map(|xi| hm1.eval_f64(&[field.v[ti][xi]])).collect();
            let mut cum = cumulative_integral(&row, hx);
            for c in cum.iter_mut() {
                *c += e0[ti];
            }
            cum
        })
        .collect();
    // route A: integrate f_{1,0} along x, edge constant from f_{1,p}
    let edge_f1p: Vec<f64> = (0..nt).map(|ti| f1p[ti][0]).collect();
    let d0 = cumulative_integral(&edge_f1p, ht);
    let f: Vec<Vec<f64>> = (0..nt)
        .map(|ti| {
            let mut cum = cumulative_integral(&f10[ti], hx);
            for c in cum.iter_mut() {
                *c += d0[ti];
            }
            cum
        })
        .collect();
    // route B: integrate f_{1,p} along t starting from the t = 0 row of A
    let mut f_alt = vec![vec![0.0; nx]; nt];
    for xi in 0..nx {
        let col: Vec<f64> = (0..nt).map(|ti| f1p[ti][xi]).collect();
        let cum = cumulative_integral(&col, ht);
        for ti in 0..nt {
            f_alt[ti][xi] = f[0][xi] + cum[ti];
        }
    }
    let mut disc: f64 = 0.0;
    for ti in 0..nt {
        for xi in 0..nx {
            disc = disc.max((f[ti][xi] - f_alt[ti][xi]).abs());
        }
    }
    // mixed-partial residual: centered d f_{1,0}/dt vs h_{1,p-1}(v)
    let mut mixed: f64 = 0.0;
    for ti in 1..nt - 1 {
        for xi in 0..nx {
            let dt = (f10[ti + 1][xi] - f10[ti - 1][xi]) / (2.0 * ht);
            let expect = hm1.eval_f64(&[field.v[ti][xi]]);
            mixed = mixed.max((dt - expect).abs());
        }
    }
    Ok(TauGrid {
        x: field.x.clone(),
        t: field.t.clone(),
        v: field.v.clone(),
        f10,
        f1p,
        f,
        f_alt,
        route_discrepancy: disc,
        mixed_partial_residual: mixed,
    })
}

/// CSV rows `x,t,v,f,f_1_0,f_1_p,route_residual`.
pub fn tau_grid_csv(grid: &TauGrid) -> String {
    let mut out = String::from("x,t,v,f,f_1_0,f_1_p,route_residual\n");
    for (ti, &t) in grid.t.iter().enumerate() {
        for (xi, &x) in grid.x.iter().enumerate() {
            out.push_str(&format!(
                "{x},{t},{},{},{},{},{}\n",
                grid.v[ti][xi],
                grid.f[ti][xi],
                grid.f10[ti][xi],
                grid.f1p[ti][xi],
                (grid.f[ti][xi] - grid.f_alt[ti][xi]).abs(),
            ));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMethod {
    /// single explicit Euler step of size `s`; local error O(s^2)
    EulerLocal,
    /// classical RK4 over a fixed total shift with step `s`; global O(s^4)
    Rk4Global,
}

/// Result of the Galilean shift convergence study: max-norm errors of the
/// advanced field against the exact re-solved baseline for a ladder of
/// halved steps, and the fitted convergence slope.
#[derive(Clone, Debug, Serialize)]
pub struct GalileanShiftReport {
    pub method: ShiftMethod,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Galilean s-flow check for the `p = 1` flow: `dv/ds = 1 + t v_x`.  The
/// exact advanced field is `v_s(x,t) = v(x + t s, t) + s`, equivalently
/// the solution re-solved from the shifted initial data `v0 + s`.  The
/// numeric advance integrates the s-flow at fixed `(x,t)` with the exact
/// spatial derivative of the current state,
/// `d/ds v_s(x,t) = 1 + t v_x(x + t s, t)`.
pub fn galilean_shift_check(
    prob: &ScalarICProblem,
    flow: &ScalarFlow,
    s_base: f64,
    levels: usize,
    method: ShiftMethod,
) -> Result<GalileanShiftReport, SolverError> {
    assert_eq!(flow.p, 1, "the shift check runs on the p = 1 flow");
    let field = solve_characteristics(prob, flow)?;
    if s_base == 0.0 {
        // exactness: zero shift leaves the field untouched
        return Ok(GalileanShiftReport {
            method,
            steps: vec![0.0],
            errors: vec![0.0],
            slope: f64::NAN,
        });
    }
    let nodes: Vec<(usize, usize)> = (0..field.t.len())
        .flat_map(|ti| (0..field.x.len()).map(move |xi| (ti, xi)))
        .collect();
    let v_at = |x: f64, t: f64, warm: f64| -> Option<f64> {
        newton_node(prob, flow, x, t, warm).map(|(v, _)| v)
    };
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for level in 0..levels {
        let s_step = s_base / (1 << level) as f64;
        let (total, nsub) = match method {
            ShiftMethod::EulerLocal => (s_step, 1usize),
            ShiftMethod::Rk4Global => (s_base, 1 << level),
        };
        let errs = map_collect(nodes.clone(), |(ti, xi)| {
            let x = field.x[xi];
            let t = field.t[ti];
            let v0 = field.v[ti][xi];
            // F(s) = 1 + t * v_x(x + t s, t)
            let deriv = |s: f64| -> Option<f64> {
                let y = x + t * s;
                let v = v_at(y, t, v0 + s)?;
                Some(1.0 + t * field_vx(prob, flow, y, t, v))
            };
            let mut val = v0;
            let mut s = 0.0;
            let hstep = total / nsub as f64;
            for _ in 0..nsub {
                match method {
                    ShiftMethod::EulerLocal => {
                        val += hstep * deriv(s)?;
                    }
                    ShiftMethod::Rk4Global => {
                        let k1 = deriv(s)?;
                        let k2 = deriv(s + hstep / 2.0)?;
                        let k3 = k2;
                        let k4 = deriv(s + hstep)?;
                        val += hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    }
                }
                s += hstep;
            }
            // exact baseline re-solved from the shifted data:
            // v_exact = v(x + t * total) + total
            let exact = v_at(x + t * total, t, v0 + total)? + total;
            Some((val - exact).abs())
        });
        let mut emax: f64 = 0.0;
        for e in errs {
            match e {
                Some(e) => emax = emax.max(e),
                None => return Err(SolverError::BreakingDetected(field.t[field.t.len() - 1])),
            }
        }
        steps.push(s_step);
        errors.push(emax);
    }
    // least-squares slope of log2(err) against log2(step)
    let slope = fit_slope(&steps, &errors);
    Ok(GalileanShiftReport { method, steps, errors, slope })
}

fn fit_slope(steps: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 1e-300)
        .map(|(s, e)| (s.log2(), e.log2()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Composite Simpson integral over a uniform periodic window (drops the
/// duplicated endpoint if present); requires an even interval count.
pub fn simpson_periodic(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let mut acc = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius::{analyze, EulerData, WDVVPotential};
    use crate::hierarchy::{build_h, build_omega, build_theta};
    use crate::rational::{rat, rat_int};

    fn kdv_tables(pmax: usize) -> (DensityTable, OmegaTable) {
        let v = CoeffPoly::var(1, 0);
        let f = (&(&v * &v) * &v).scale(&rat(1, 6));
        let d = analyze(
            &WDVVPotential::new(1, f),
            Some(EulerData { coeffs: vec![rat_int(1)], weight: rat_int(3) }),
        )
        .unwrap();
        let t = build_theta(&d, 2 * pmax + 2).unwrap();
        let h = build_h(&d, &t).unwrap();
        let om = build_omega(&d, &t, pmax).unwrap();
        (h, om)
    }

    fn linear_problem(eps: f64) -> ScalarICProblem {
        ScalarICProblem {
            profile: InitialProfile::Linear { slope: eps },
            flow_p: 1,
            x_min: -1.0,
            x_max: 1.0,
            nx: 21,
            t_max: 0.5,
            nt: 11,
        }
    }

    #[test]
    fn constant_profile_is_a_fixed_point() {
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let prob = ScalarICProblem {
            profile: InitialProfile::Constant { value: 0.7 },
            flow_p: 1,
            x_min: 0.0,
            x_max: 1.0,
            nx: 11,
            t_max: 1.0,
            nt: 6,
        };
        let field = solve_characteristics(&prob, &flow).unwrap();
        assert!(field.complete());
        for row in &field.v {
            for v in row {
                assert!((v - 0.7).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_profile_matches_exact_rational_solution() {
        // p = 1: v = eps x / (1 - eps t)
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let eps = 0.3;
        let prob = linear_problem(eps);
        let field = solve_characteristics(&prob, &flow).unwrap();
        for (ti, &t) in field.t.iter().enumerate() {
            for (xi, &x) in field.x.iter().enumerate() {
                let exact = eps * x / (1.0 - eps * t);
                assert!(
                    (field.v[ti][xi] - exact).abs() < 1e-12,
                    "node ({x},{t}): {} vs {exact}",
                    field.v[ti][xi]
                );
            }
        }
    }

    #[test]
    fn sine_profile_breaks_after_critical_time() {
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        // v_t = v v_x with v0 = sin x: breaking at t = 1/max|v0'| = 1
        let prob = ScalarICProblem {
            profile: InitialProfile::Sin { amplitude: 1.0 },
            flow_p: 1,
            x_min: 0.0,
            x_max: std::f64::consts::TAU,
            nx: 201,
            t_max: 2.0,
            nt: 41,
        };
        let field = solve_characteristics(&prob, &flow).unwrap();
        let tb = field.breaking.expect("must detect breaking");
        assert!(tb > 0.9 && tb < 1.2, "breaking at {tb}");
    }

    #[test]
    fn constant_field_tau_grid_is_closed_form() {
        // v = c: f10 = c x + c^2 t + const routes agree to machine precision
        let (h, om) = kdv_tables(3);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let c = 0.5;
        let prob = ScalarICProblem {
            profile: InitialProfile::Constant { value: c },
            flow_p: 1,
            x_min: 0.0,
            x_max: 1.0,
            nx: 11,
            t_max: 1.0,
            nt: 11,
        };
        let field = solve_characteristics(&prob, &flow).unwrap();
        let grid = evaluate_tau(&field, &h, &om, 1).unwrap();
        assert!(grid.route_discrepancy < 1e-12);
        // d2f/dx2 = Omega_{1,0;1,0}(c) = c exactly: f quadratic in x
        let hx = grid.x[1] - grid.x[0];
        for ti in 0..grid.t.len() {
            for xi in 1..grid.x.len() - 1 {
                let d2 = (grid.f[ti][xi + 1] - 2.0 * grid.f[ti][xi] + grid.f[ti][xi - 1]) / (hx * hx);
                assert!((d2 - c).abs() < 1e-9, "d2f/dx2 = {d2}");
            }
        }
    }

    #[test]
    fn route_discrepancy_converges_at_fourth_order() {
        let (h, om) = kdv_tables(3);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for k in 0..3 {
            let nx = 16 * (1 << k) + 1;
            let nt = 16 * (1 << k) + 1;
            let prob = ScalarICProblem {
                profile: InitialProfile::Sin { amplitude: 0.4 },
                flow_p: 1,
                x_min: 0.0,
                x_max: 2.0,
                nx,
                t_max: 0.5,
                nt,
            };
            let field = solve_characteristics(&prob, &flow).unwrap();
            assert!(field.complete());
            let grid = evaluate_tau(&field, &h, &om, 1).unwrap();
            hs.push(2.0 / (nx as f64 - 1.0));
            errs.push(grid.route_discrepancy);
        }
        let slope = fit_slope(&hs, &errs);
        assert!(slope > 3.5, "route convergence order {slope}");
        assert!(errs[errs.len() - 1] < 1e-6);
    }

    #[test]
    fn zero_shift_is_exact() {
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let rep =
            galilean_shift_check(&linear_problem(0.2), &flow, 0.0, 1, ShiftMethod::EulerLocal)
                .unwrap();
        assert_eq!(rep.errors, vec![0.0]);
    }

    #[test]
    fn euler_single_step_is_second_order() {
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let prob = ScalarICProblem {
            profile: InitialProfile::Sin { amplitude: 0.4 },
            flow_p: 1,
            x_min: 0.0,
            x_max: 2.0,
            nx: 17,
            t_max: 0.5,
            nt: 9,
        };
        let rep = galilean_shift_check(&prob, &flow, 0.2, 4, ShiftMethod::EulerLocal).unwrap();
        assert!((rep.slope - 2.0).abs() < 0.3, "Euler slope {}", rep.slope);
    }

    #[test]
    fn rk4_fixed_interval_is_fourth_order() {
        let (h, _) = kdv_tables(2);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let prob = ScalarICProblem {
            profile: InitialProfile::Sin { amplitude: 0.4 },
            flow_p: 1,
            x_min: 0.0,
            x_max: 2.0,
            nx: 17,
            t_max: 0.5,
            nt: 9,
        };
        let rep = galilean_shift_check(&prob, &flow, 0.4, 4, ShiftMethod::Rk4Global).unwrap();
        assert!((rep.slope - 4.0).abs() < 0.3, "RK4 slope {}", rep.slope);
    }

    #[test]
    fn conserved_quantities_on_periodic_window() {
        // d/dt int h_{1,q} dx ~ 0 for the p = 1 flow on a periodic window
        let (h, _) = kdv_tables(4);
        let flow = ScalarFlow::from_densities(&h, 1).unwrap();
        let prob = ScalarICProblem {
            profile: InitialProfile::Sin { amplitude: 0.3 },
            flow_p: 1,
            x_min: 0.0,
            x_max: std::f64::consts::TAU,
            nx: 257,
            t_max: 0.8,
            nt: 9,
        };
        let field = solve_characteristics(&prob, &flow).unwrap();
        assert!(field.complete());
        let hx = field.x[1] - field.x[0];
        for q in 1..=3i64 {
            let hq = h.h(0, q);
            let integrals: Vec<f64> = field
                .v
                .iter()
                .map(|row| {
                    let samples: Vec<f64> = row.iter().map(|v| hq.eval_f64(&[*v])).collect();
                    simpson_periodic(&samples, hx)
                })
                .collect();
            let drift = integrals
                .iter()
                .map(|i| (i - integrals[0]).abs())
                .fold(0.0f64, f64::max);
            assert!(drift < 1e-7, "conservation drift {drift} for h_{{1,{q}}}");
        }
    }
}
