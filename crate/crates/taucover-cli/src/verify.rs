//! The full identity suite behind `taucover verify`: bracket lemma
//! identities on seeded random inputs, symbolic pencil checks,
//! tau-symmetry / commutativity / Galilean identities, numeric pencil
//! residuals, semi-Hamiltonian residuals, and the deformation suite when a
//! fixture is given.  `--fuzz` injects a seeded perturbation into a named
//! target; the corresponding checks must then fail.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taucover::brackets::{
    evolutionary_derivation, is_bihamiltonian, is_exact_triple, schouten,
};
use taucover::coeffpoly::CoeffPoly;
use taucover::deformation::{
    build_omega_deformed, check_deformed_galilean, check_semi_hamiltonian, normal_coordinates,
    normal_coordinates_roundtrip, verify_deformation, DeformedData,
};
use taucover::frobenius::{pencil_from_frobenius, psi_at, psi_reconstruction_residuals, FrobeniusData};
use taucover::hierarchy::{
    build_flows, build_h, build_omega, build_theta, galilean_check, verify_commutativity,
    verify_tau_symmetry, DensityTable, FlowTable,
};
use taucover::jetspace::{DiffPoly, JetVar, LocalFunctional, Parity};
use taucover::pencil::{canonical_coordinates_at, check_dz_f, check_egoroff, check_gamma_system,
    check_irreducible, psi_residual, PencilChart, TOL_EXACT, TOL_FD};
use taucover::rational::rat;
use taucover::report::{CheckRecord, Report};

use crate::spec::{DeformationSection, SpecFile};
use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FuzzTarget {
    Densities,
    Omega,
    Deformation,
}

impl std::str::FromStr for FuzzTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "h" | "densities" => Ok(FuzzTarget::Densities),
            "omega" => Ok(FuzzTarget::Omega),
            "deformation" => Ok(FuzzTarget::Deformation),
            other => Err(format!("unknown fuzz target '{other}' (h | omega | deformation)")),
        }
    }
}

/// Seeded random super functional of homogeneous super degree for the
/// bracket identity suite.
fn random_functional(rng: &mut ChaCha8Rng, n: usize, super_deg: u32) -> LocalFunctional {
    loop {
        let mut acc = DiffPoly::zero(n);
        for _ in 0..rng.gen_range(1..=2) {
            let mut m = DiffPoly::from_coeff(CoeffPoly::monomial(
                n,
                {
                    let mut e = vec![0u32; n];
                    for _ in 0..rng.gen_range(0..=2) {
                        e[rng.gen_range(0..n)] += 1;
                    }
                    e
                },
                rat(rng.gen_range(1..=3), rng.gen_range(1..=2))
                    * if rng.gen_bool(0.5) { rat(1, 1) } else { rat(-1, 1) },
            ));
            for _ in 0..rng.gen_range(0..=1) {
                let w = JetVar::even(rng.gen_range(0..n), rng.gen_range(1..=2));
                m = m.mul(&DiffPoly::jet(n, w)).unwrap();
            }
            let mut pool: Vec<JetVar> = (0..n)
                .flat_map(|i| (0..=2u32).map(move |s| JetVar::odd(i, s)))
                .collect();
            let mut ok = true;
            for _ in 0..super_deg {
                if pool.is_empty() {
                    ok = false;
                    break;
                }
                let w = pool.swap_remove(rng.gen_range(0..pool.len()));
                m = m.mul(&DiffPoly::jet(n, w)).unwrap();
            }
            if ok && !m.is_zero() {
                acc = acc.add(&m);
            }
        }
        if !acc.is_zero() {
            return LocalFunctional::new(acc);
        }
    }
}

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

/// Bracket identity suite on `pairs` seeded random (P, Q) pairs with super
/// degrees <= 3: graded antisymmetry, graded Jacobi, and the three
/// evolutionary-derivation identities.
pub fn bracket_suite(report: &mut Report, seed: u64, pairs: usize) {
    let n = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degs = [(2u32, 1u32, 0u32), (2, 2, 1), (1, 1, 1), (3, 2, 1), (2, 0, 1)];
    let mut anti = 0usize;
    let mut jacobi = 0usize;
    let mut var_id = 0usize;
    let mut comm_id = 0usize;
    let mut d_comm = 0usize;
    for i in 0..pairs {
        let (pd, qd, rd) = degs[i % degs.len()];
        let p = random_functional(&mut rng, n, pd);
        let q = random_functional(&mut rng, n, qd);
        let r = random_functional(&mut rng, n, rd);
        // antisymmetry
        let pq = schouten(&p, &q).unwrap();
        let qp = schouten(&q, &p).unwrap();
        if !pq.sub(&signed(&qp, sign(pd * qd))).is_zero() {
            anti += 1;
        }
        // Jacobi
        let t1 = schouten(&pq, &r).unwrap();
        let t2 = schouten(&schouten(&q, &r).unwrap(), &p).unwrap();
        let t3 = schouten(&schouten(&r, &p).unwrap(), &q).unwrap();
        let total = signed(&t1, sign(pd * rd))
            .add(&signed(&t2, sign(qd * pd)))
            .add(&signed(&t3, sign(rd * qd)));
        if !total.is_zero() {
            jacobi += 1;
        }
        // variational identity
        for a in 0..n {
            let lhs = pq.variational_derivative(a, Parity::Even);
            let u1 = evolutionary_derivation(&p, &q.variational_derivative(a, Parity::Even)).unwrap();
            let u2 = evolutionary_derivation(&q, &p.variational_derivative(a, Parity::Even)).unwrap();
            let rhs = if sign(pd * qd) > 0 { u1.add(&u2) } else { u1.sub(&u2) };
            if !lhs.sub(&rhs).is_zero() {
                var_id += 1;
            }
        }
        // commutator identity on a random argument
        let arg = random_functional(&mut rng, n, 1).representative().clone();
        let lhs = {
            let d = evolutionary_derivation(&pq, &arg).unwrap();
            if sign(pd + 1) > 0 {
                d
            } else {
                d.neg()
            }
        };
        let u1 = evolutionary_derivation(&p, &evolutionary_derivation(&q, &arg).unwrap()).unwrap();
        let u2 = evolutionary_derivation(&q, &evolutionary_derivation(&p, &arg).unwrap()).unwrap();
        let rhs = if sign((pd + 1) * (qd + 1)) > 0 { u1.sub(&u2) } else { u1.add(&u2) };
        if !lhs.sub(&rhs).is_zero() {
            comm_id += 1;
        }
        // [d, D_P] = 0
        let da = evolutionary_derivation(&p, &arg.total_derivative()).unwrap();
        let ad = evolutionary_derivation(&p, &arg).unwrap().total_derivative();
        if !da.sub(&ad).is_zero() {
            d_comm += 1;
        }
    }
    let rec = |name: &str, fails: usize| {
        CheckRecord::residual(name, fails as f64, 0.0, format!("{pairs} seeded pairs, seed {seed}"))
    };
    report.push(rec("bracket_graded_antisymmetry", anti));
    report.push(rec("bracket_graded_jacobi", jacobi));
    report.push(rec("bracket_variational_identity", var_id));
    report.push(rec("bracket_commutator_identity", comm_id));
    report.push(rec("bracket_d_commutes", d_comm));
}

/// Characteristic velocities of the `(alpha, p)` flow in canonical
/// coordinates at a chart, together with the off-diagonality residual.
pub fn characteristic_velocities(
    d: &FrobeniusData,
    h: &DensityTable,
    chart: &PencilChart,
    alpha: usize,
    p: i64,
) -> (Vec<f64>, f64) {
    let n = d.n;
    let eta_inv: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| taucover::rational::rat_to_f64(&d.eta_inv[a][b])).collect())
        .collect();
    // B^g_m = eta^{gl} d2h/dv^l dv^m at the base point
    let hp = h.h(alpha, p);
    let mut b = vec![vec![0.0; n]; n];
    for g in 0..n {
        for m in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += eta_inv[g][l] * hp.partial(l).partial(m).eval_f64(&chart.base);
            }
            b[g][m] = acc;
        }
    }
    // A = J B J^{-1}
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for g in 0..n {
                for m in 0..n {
                    acc += chart.du_dv[(i, g)] * b[g][m] * chart.dv_du[(m, j)];
                }
            }
            a[i][j] = acc;
        }
    }
    let mut offdiag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                offdiag = offdiag.max(a[i][j].abs());
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), offdiag)
}

pub struct HierarchyBundle {
    pub data: FrobeniusData,
    pub h: DensityTable,
    pub flows: FlowTable,
    pub omega: taucover::hierarchy::OmegaTable,
    pub theta_repairs: usize,
}

/// Build all principal tables for the spec.
pub fn build_bundle(spec: &SpecFile) -> Result<HierarchyBundle, CliError> {
    let (data, _) = spec.analyze()?;
    let depth = 2 * spec.pmax + 2;
    let theta = build_theta(&data, depth)?;
    let h = build_h(&data, &theta)?;
    let flows = build_flows(&data, &h, spec.pmax);
    let omega = build_omega(&data, &theta, spec.pmax)?;
    Ok(HierarchyBundle { theta_repairs: theta.repairs.len(), data, h, flows, omega })
}

/// Seeded fuzz perturbation: a small rational multiple of a random
/// monomial, used by the negative controls.
fn fuzz_coeff(rng: &mut ChaCha8Rng, n: usize) -> CoeffPoly {
    let mut e = vec![0u32; n];
    for _ in 0..rng.gen_range(1..=2) {
        e[rng.gen_range(0..n)] += 1;
    }
    CoeffPoly::monomial(n, e, rat(1, 1000))
}

/// The symbolic hierarchy suite: tau-symmetry, commutativity, both
/// Galilean identities, plus the Hamiltonian-formulation consistency of
/// the flows.
pub fn hierarchy_suite(
    report: &mut Report,
    bundle: &HierarchyBundle,
    p1: &LocalFunctional,
    fuzz: Option<FuzzTarget>,
    seed: u64,
) {
    let d = &bundle.data;
    let n = d.n;
    let mut h = bundle.h.clone();
    let mut omega = bundle.omega.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf022);
    match fuzz {
        Some(FuzzTarget::Densities) => {
            let a = rng.gen_range(0..n);
            let p = rng.gen_range(0..=bundle.flows.pmax) as i64;
            let bump = fuzz_coeff(&mut rng, n);
            h.perturb(a, p, &bump);
        }
        Some(FuzzTarget::Omega) => {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let p = rng.gen_range(0..=omega.pmax);
            let q = rng.gen_range(0..=omega.pmax);
            let bump = fuzz_coeff(&mut rng, n);
            omega.perturb(a, p, b, q, &bump);
        }
        _ => {}
    }
    let flows = build_flows(d, &h, bundle.flows.pmax);
    let ts = verify_tau_symmetry(&h, &flows);
    report.push(CheckRecord::residual(
        "tau_symmetry",
        ts.len() as f64,
        0.0,
        ts.first().map(|v| format!("first violation at {:?}", v.indices)).unwrap_or_default(),
    ));
    let comm = verify_commutativity(&flows);
    report.push(CheckRecord::residual("commutativity", comm.len() as f64, 0.0, ""));
    let gal = galilean_check(d, &omega, &flows);
    let shift = gal.iter().filter(|v| v.check == "galilean_omega_shift").count();
    let intertwine = gal.iter().filter(|v| v.check == "galilean_dz_intertwine").count();
    report.push(CheckRecord::residual("galilean_omega_shift", shift as f64, 0.0, ""));
    report.push(CheckRecord::residual("galilean_dz_intertwine", intertwine as f64, 0.0, ""));
    // flows agree with the Hamiltonian formulation X = -[P1, int h]
    let mut ham_fail = 0usize;
    for a in 0..n {
        for p in 0..=bundle.flows.pmax.min(2) {
            let hf = LocalFunctional::new(DiffPoly::from_coeff(h.h(a, p as i64).clone()));
            let x = schouten(p1, &hf).unwrap().neg();
            for g in 0..n {
                let dv = evolutionary_derivation(&x, &DiffPoly::v(n, g)).unwrap();
                if !dv.sub(flows.rhs(a, p, g)).is_zero() {
                    ham_fail += 1;
                }
            }
        }
    }
    report.push(CheckRecord::residual("flow_hamiltonian_consistency", ham_fail as f64, 0.0, ""));
}

/// Symbolic pencil checks plus the numeric batch at the sample points.
pub fn pencil_suite(report: &mut Report, spec: &SpecFile, bundle: &HierarchyBundle) -> Result<(), CliError> {
    let d = &bundle.data;
    let (g1, g2) = pencil_from_frobenius(d)?;
    let p1 = g1.poisson_operator();
    let p2 = g2.poisson_operator();
    let z = LocalFunctional::new(DiffPoly::jet(d.n, JetVar::odd(d.unit, 0)));
    let bi = is_bihamiltonian(&p1, &p2).unwrap();
    report.push(CheckRecord::residual("pencil_bihamiltonian_symbolic", if bi { 0.0 } else { 1.0 }, 0.0, ""));
    let ex = is_exact_triple(&p1, &p2, &z).unwrap();
    report.push(CheckRecord::residual("pencil_exact_triple_symbolic", if ex { 0.0 } else { 1.0 }, 0.0, ""));
    for point in &spec.pencil_samples {
        let ctx = format!("point {point:?}");
        let chart = match canonical_coordinates_at(&g1, &g2, point) {
            Ok(c) => c,
            Err(e) => {
                report.push(CheckRecord::fail("pencil_chart", 1.0, format!("{ctx}: {e}")));
                continue;
            }
        };
        report.push(CheckRecord::residual("egoroff", check_egoroff(&chart).unwrap(), TOL_FD, ctx.clone()));
        report.push(CheckRecord::residual("dz_f", check_dz_f(&chart).unwrap(), TOL_FD, ctx.clone()));
        let gs = check_gamma_system(&chart).unwrap();
        report.push(CheckRecord::residual("gamma_product", gs.product_rule, TOL_FD, ctx.clone()));
        report.push(CheckRecord::residual("gamma_translation", gs.translation, TOL_FD, ctx.clone()));
        report.push(CheckRecord::residual("gamma_scaling", gs.scaling, TOL_FD, ctx.clone()));
        let irr = check_irreducible(&chart, TOL_FD).unwrap();
        report.push(CheckRecord::residual("irreducible", if irr { 0.0 } else { 1.0 }, 0.0, ctx.clone()));
        // psi matrices from the Jacobians
        let psi = psi_at(&chart);
        let (re, rc) = psi_reconstruction_residuals(d, &chart, &psi);
        report.push(CheckRecord::residual("psi_eta_reconstruction", re, TOL_FD, ctx.clone()));
        report.push(CheckRecord::residual("psi_c_reconstruction", rc, TOL_FD, ctx.clone()));
        let pres = psi_residual(&chart, |c| Ok(psi_at(c).mat.clone())).unwrap();
        report.push(CheckRecord::residual("psi_offdiagonal", pres.off_diagonal, TOL_FD, ctx.clone()));
        report.push(CheckRecord::residual("psi_diagonal", pres.diagonal, TOL_FD, ctx.clone()));
        if pres.norm < 1e-12 {
            report.push(CheckRecord::fail("psi_trivial", pres.norm, format!("{ctx}: psi = 0")));
        }
        // Jacobian check against direct finite differences of the roots
        let jac_res = jacobian_fd_residual(&g1, &g2, &chart);
        report.push(CheckRecord::residual("jacobian_fd", jac_res, TOL_FD, ctx.clone()));
        // semi-Hamiltonian residuals of the (1,1)-flow velocities
        let vel = |u_target: &PencilChart| characteristic_velocities(d, &bundle.h, u_target, 0, 1);
        let (_, offdiag) = vel(&chart);
        report.push(CheckRecord::residual("flow_diagonal_in_canonical", offdiag, TOL_FD, ctx.clone()));
    }
    // semi-Hamiltonian via chart recomputation at the samples
    if !spec.pencil_samples.is_empty() {
        let res = semi_hamiltonian_from_charts(d, &bundle.h, &g1, &g2, &spec.pencil_samples);
        match res {
            Ok((residual, nondeg)) => {
                report.push(CheckRecord::residual("semi_hamiltonian_tsarev", residual, TOL_EXACT, ""));
                report.push(CheckRecord::residual(
                    "semi_hamiltonian_nondegenerate",
                    if nondeg { 0.0 } else { 1.0 },
                    0.0,
                    "",
                ));
            }
            Err(e) => report.push(CheckRecord::fail("semi_hamiltonian_tsarev", 1.0, e.to_string())),
        }
    }
    Ok(())
}

fn jacobian_fd_residual(
    g1: &taucover::pencil::HydroMetric,
    g2: &taucover::pencil::HydroMetric,
    chart: &PencilChart,
) -> f64 {
    let n = chart.n();
    let h = 1e-6;
    let mut res: f64 = 0.0;
    for a in 0..n {
        let mut vp = chart.base.clone();
        vp[a] += h;
        let mut vm = chart.base.clone();
        vm[a] -= h;
        let cp = canonical_coordinates_at(g1, g2, &vp);
        let cm = canonical_coordinates_at(g1, g2, &vm);
        if let (Ok(cp), Ok(cm)) = (cp, cm) {
            for i in 0..n {
                let fd = (cp.u[i] - cm.u[i]) / (2.0 * h);
                res = res.max((fd - chart.du_dv[(i, a)]).abs());
            }
        } else {
            res = f64::INFINITY;
        }
    }
    res
}

/// Tsarev residual for the characteristic velocities of the `(1,1)` flow,
/// sampling the velocity field through chart recomputation in flat
/// coordinates (the velocities are functions of the canonical chart).
fn semi_hamiltonian_from_charts(
    d: &FrobeniusData,
    h: &DensityTable,
    g1: &taucover::pencil::HydroMetric,
    g2: &taucover::pencil::HydroMetric,
    samples: &[Vec<f64>],
) -> Result<(f64, bool), taucover::deformation::DeformError> {
    let n = d.n;
    let mut worst: f64 = 0.0;
    let mut nondeg_all = true;
    for v0 in samples {
        let base = canonical_coordinates_at(g1, g2, v0)
            .map_err(|_| taucover::deformation::DeformError::CoincidingVelocities(0))?;
        // velocities as functions of canonical coordinates around this
        // chart: displace v along dv/du to move u
        let vel = |u: &[f64]| -> Option<Vec<f64>> {
            let mut v = v0.clone();
            for a in 0..n {
                for i in 0..n {
                    v[a] += base.dv_du[(a, i)] * (u[i] - base.u[i]);
                }
            }
            let chart = canonical_coordinates_at(g1, g2, &v).ok()?;
            Some(characteristic_velocities(d, h, &chart, 0, 1).0)
        };
        let rep = check_semi_hamiltonian(n, vel, &[base.u.clone()], 1e-9)?;
        worst = worst.max(rep.tsarev_residual);
        nondeg_all &= rep.nondegenerate.iter().all(|b| *b);
    }
    Ok((worst, nondeg_all))
}

/// Assemble the deformation fixture on top of the principal data.
pub fn assemble_deformation(
    bundle: &HierarchyBundle,
    section: &DeformationSection,
    p1: &LocalFunctional,
) -> Result<DeformedData, CliError> {
    let d = &bundle.data;
    let n = d.n;
    let pmax = section.pmax.unwrap_or(bundle.flows.pmax.min(3));
    let mut p1_full = p1.clone();
    for text in &section.p1_corrections {
        let corr = DiffPoly::parse(n, text).map_err(|e| CliError::BadSpec(e.to_string()))?;
        p1_full = p1_full.add(&LocalFunctional::new(corr));
    }
    let mut densities: Vec<Vec<DiffPoly>> = (0..n)
        .map(|a| {
            (-1..=pmax as i64)
                .map(|p| DiffPoly::from_coeff(bundle.h.h(a, p).clone()))
                .collect()
        })
        .collect();
    for corr in &section.h_corrections {
        if corr.alpha == 0 || corr.alpha > n || corr.p < -1 || corr.p > pmax as i64 {
            return Err(CliError::BadSpec(format!(
                "h correction index ({}, {}) out of range",
                corr.alpha, corr.p
            )));
        }
        let term = DiffPoly::parse(n, &corr.term).map_err(|e| CliError::BadSpec(e.to_string()))?;
        let slot = &mut densities[corr.alpha - 1][(corr.p + 1) as usize];
        *slot = slot.add(&term);
    }
    let z = LocalFunctional::new(DiffPoly::jet(n, JetVar::odd(d.unit, 0)));
    DeformedData::new(d.unit, section.d_max, p1_full, z, densities)
        .map_err(|e| CliError::BadSpec(e.to_string()))
}

/// The deformation suite: condition checks, deformed tau structure,
/// normal coordinates, deformed Galilean identity, and (when `k` is
/// given) the equivalence-shift cross-check of the two displayed
/// identities.
pub fn deformation_suite(
    report: &mut Report,
    bundle: &HierarchyBundle,
    section: &DeformationSection,
    p1: &LocalFunctional,
    fuzz: Option<FuzzTarget>,
    seed: u64,
) -> Result<(), CliError> {
    let d = &bundle.data;
    let n = d.n;
    let mut section = section.clone();
    if fuzz == Some(FuzzTarget::Deformation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdef0);
        let a = rng.gen_range(1..=n);
        let p = rng.gen_range(0..=section.pmax.unwrap_or(2) as i64);
        section.h_corrections.push(crate::spec::HCorrection {
            alpha: a,
            p,
            term: "1/1000*u(1,1)^2".to_string(),
        });
    }
    let data = assemble_deformation(bundle, &section, p1)?;
    let violations = verify_deformation(&data);
    for name in [
        "deformation_degree_filtration",
        "deformation_hamiltonian",
        "deformation_casimir",
        "deformation_translation",
        "deformation_commuting_hamiltonians",
        "deformation_tau_symmetry",
    ] {
        let count = violations.iter().filter(|v| v.check == name).count();
        let ctx = violations
            .iter()
            .find(|v| v.check == name)
            .map(|v| format!("first violation at {:?}", v.indices))
            .unwrap_or_default();
        report.push(CheckRecord::residual(name, count as f64, 0.0, ctx));
    }
    if !violations.is_empty() {
        return Ok(());
    }
    let omega_def = match build_omega_deformed(&data, &bundle.omega) {
        Ok(t) => t,
        Err(e) => {
            report.push(CheckRecord::fail("deformed_omega_build", 1.0, e.to_string()));
            return Ok(());
        }
    };
    report.push(CheckRecord::pass("deformed_omega_build", 0.0, ""));
    let nc = normal_coordinates(&data, d);
    let rt = normal_coordinates_roundtrip(&nc);
    report.push(CheckRecord::residual(
        "normal_coordinates_roundtrip",
        if rt.is_zero() { 0.0 } else { 1.0 },
        0.0,
        "",
    ));
    let gal = check_deformed_galilean(d, &data, &omega_def, &nc);
    report.push(CheckRecord::residual("deformed_galilean", gal.len() as f64, 0.0, ""));
    if let Some(ktext) = &section.k {
        let k = LocalFunctional::new(
            DiffPoly::parse(n, ktext).map_err(|e| CliError::BadSpec(e.to_string()))?,
        );
        match taucover::deformation::generate_equivalent(&data, &k) {
            Ok((hat, shift)) => {
                let hat_viol = verify_deformation(&hat);
                report.push(CheckRecord::residual(
                    "equivalent_deformation_valid",
                    hat_viol.len() as f64,
                    0.0,
                    "",
                ));
                // density identity
                let work = hat.d_max + 2;
                let mut fails = 0usize;
                for a in 0..n {
                    for p in -1..=(hat.pmax as i64 - 1) {
                        let lead =
                            taucover::deformation::exp_derivation(&shift.y, data.h(a, p), work)
                                .unwrap();
                        let flow_g = hat
                            .apply_flow(a, p + 1, &shift.g_total)
                            .unwrap()
                            .truncate_standard(work);
                        let oracle = lead.add(&flow_g.total_derivative());
                        if !hat.h(a, p).sub(&oracle).truncate_standard(hat.d_max).is_zero() {
                            fails += 1;
                        }
                    }
                }
                report.push(CheckRecord::residual("equivalence_density_identity", fails as f64, 0.0, ""));
                // Omega identity via the independently built deformed table
                match build_omega_deformed(&hat, &bundle.omega) {
                    Ok(om_hat) => {
                        let mut ofails = 0usize;
                        for a in 0..n {
                            for p in 0..=om_hat.pmax {
                                for b in 0..n {
                                    for q in 0..=om_hat.pmax {
                                        let om_tilde = omega_def.omega(a, p, b, q);
                                        let lead = taucover::deformation::exp_derivation(
                                            &shift.y, om_tilde, work,
                                        )
                                        .unwrap();
                                        let dq = hat
                                            .apply_flow(b, q as i64, &shift.g_total)
                                            .unwrap()
                                            .truncate_standard(work);
                                        let dpdq = hat
                                            .apply_flow(a, p as i64, &dq)
                                            .unwrap()
                                            .truncate_standard(work);
                                        let oracle = lead.add(&dpdq);
                                        if !om_hat
                                            .omega(a, p, b, q)
                                            .sub(&oracle)
                                            .truncate_standard(hat.d_max)
                                            .is_zero()
                                        {
                                            ofails += 1;
                                        }
                                    }
                                }
                            }
                        }
                        report.push(CheckRecord::residual(
                            "equivalence_omega_identity",
                            ofails as f64,
                            0.0,
                            "",
                        ));
                    }
                    Err(e) => {
                        report.push(CheckRecord::fail("equivalence_omega_identity", 1.0, e.to_string()))
                    }
                }
            }
            Err(e) => {
                report.push(CheckRecord::fail("equivalent_deformation_valid", 1.0, e.to_string()))
            }
        }
    }
    Ok(())
}
