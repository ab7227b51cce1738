//! Acceptance suite. Every criterion prints one `criterion N ... PASS|FAIL` line and asserts.
//! Run with `cargo test -p o2hopf --test acceptance`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use o2hopf::cli::{prepare_crossing, test_field, RunConfig};
use o2hopf::linalg::C64;
use o2hopf::model::energy::{energy_check, hs_norm, linearization_error};
use o2hopf::model::{Grid, ModelSystem, Problem};
use o2hopf::reduced_o2::{
    self, evaluate_truncated, jacobian_at, newton_refine, real_jacobian, scan_residual_minima, solve_cubic_equilibria, BranchKind,
    CubicCoefficients, EquilibriumBranch, NewtonOptions, Pinning, ReducedPoint,
};
use o2hopf::reduction::{
    fit_coefficients, fitted_genericity, locate_periodic_orbits, CoefficientFit, OrbitSearch, PdeSetup, ReductionOptions,
    SyntheticParams, SyntheticSystem,
};
use o2hopf::spectral::eigen::{eigenvalues_sorted, refine};
use o2hopf::spectral::evans::{circle, rectangle};
use o2hopf::spectral::{assemble_lk, verify_equivariance, Evans, EvansOptions, Projections, WindingOptions};
use o2hopf::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const C1_DRAWS: usize = 1000;
const C1_MATCH_TOL: f64 = 1e-10;
const C1_SCAN_DRAWS: usize = 12;
const C1_SCAN_RESOLUTION: f64 = 0.05;
const C1_SCAN_PHASES: usize = 8;
const C1_ROOT_RESIDUAL: f64 = 1e-10;
const C1_ROOT_DISTANCE: f64 = 1e-6;
// criterion 2
const C2_DRAWS: usize = 300;
const C2_J4_TOL: f64 = 1e-12;
const C2_J23_REL_TOL: f64 = 1e-10;
const C2_J1_REL_TOL: f64 = 1e-8;
const C2_ORACLE_REL_TOL: f64 = 1e-7;
// criterion 3
const C3_J1_ZERO_TOL: f64 = 1e-12;
// criterion 4
const C4_REL_TOL: f64 = 0.02;
const C4_SPURIOUS_RATIO: f64 = 1e-3;
const C4_RETURN_TOL: f64 = 1e-8;
// criteria 5, 6
const C5_SLOPE: f64 = 0.5;
const C5_SLOPE_TOL: f64 = 0.05;
const C5_RETURN_TOL: f64 = 1e-5;
const C5_MIN_EPS: usize = 5;
const C6_SHIFT_TOL: f64 = 1e-8;
const C6_STANDING_FLOOR: f64 = 1e-2;
const C6_SPEED_REL_TOL: f64 = 0.1;
// criterion 7
const C7_BASE_AMPLITUDE: f64 = 1e-2;
const C7_HALVINGS: usize = 3;
const C7_FACTOR_RANGE: (f64, f64) = (3.5, 4.5);
// criterion 8
const C8_AMPLITUDES: [f64; 4] = [1e-3, 2e-3, 5e-3, 1e-2];
const C8_C_SPREAD: f64 = 0.2;
const C8_EXPONENT: f64 = 2.0;
const C8_EXPONENT_TOL: f64 = 0.1;
// criterion 9
const C9_CONTOURS: usize = 10;
const C9_LOCATION_TOL: f64 = 1e-4;
const C9_SYMMETRY_TOL: f64 = 1e-8;
const C9_TRANSLATION_TOL: f64 = 1e-8;
// criterion 10
const C10_TOL: f64 = 1e-8;
const C10_SEEDS: [u64; 3] = [1, 2, 3];

// Written to the stdout handle directly so the line survives the harness's output capture.
fn report(n: u32, what: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} [{what}]: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn cz(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Random coefficients with every genericity margin at least 0.2.
fn random_generic(rng: &mut ChaCha8Rng) -> CubicCoefficients {
    loop {
        let c = CubicCoefficients::new(
            signed(rng, 0.5, 2.0),
            signed(rng, 0.5, 3.0),
            cz(signed(rng, 0.2, 2.0), rng.gen_range(-2.0..2.0)),
            cz(signed(rng, 0.2, 2.0), rng.gen_range(-2.0..2.0)),
        )
        .unwrap();
        if (c.lambda + c.gamma).re.abs() > 0.2 && (c.lambda - c.gamma).norm() > 0.2 {
            return c;
        }
    }
}

fn amplitude_of(p: &ReducedPoint, kind: BranchKind) -> f64 {
    match kind {
        BranchKind::Standing { .. } => p.a1.norm(),
        _ => (p.a1.norm_sqr() + p.a2.norm_sqr()).sqrt(),
    }
}

// Real residual (Re F1, Im F1, Re F2, Im F2) at a1 = r1, a2 = r2 e^{i phase}.
fn polar_residual(c: &CubicCoefficients, s: i8, x: &[f64; 4]) -> [f64; 4] {
    let p = ReducedPoint::new(cz(x[0], 0.0), C64::from_polar(x[1], x[2]), x[3], s);
    let (f1, f2) = evaluate_truncated(c, &p);
    [f1.re, f1.im, f2.re, f2.im]
}

/// Levenberg-Marquardt polish of a scan minimum; returns the final point and residual.
fn polish(c: &CubicCoefficients, s: i8, mut x: [f64; 4]) -> ([f64; 4], f64) {
    let norm = |r: &[f64; 4]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = polar_residual(c, s, &x);
    let mut damp = 1e-3;
    for _ in 0..200 {
        let h = 1e-7;
        let mut j = [[0.0; 4]; 4];
        for v in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[v] += h;
            xm[v] -= h;
            let (rp, rm) = (polar_residual(c, s, &xp), polar_residual(c, s, &xm));
            for e in 0..4 {
                j[e][v] = (rp[e] - rm[e]) / (2.0 * h);
            }
        }
        // (J^T J + damp I) dx = -J^T r
        let mut a = [[0.0; 4]; 4];
        let mut b = [0.0; 4];
        for p in 0..4 {
            for q in 0..4 {
                a[p][q] = (0..4).map(|e| j[e][p] * j[e][q]).sum::<f64>() + if p == q { damp } else { 0.0 };
            }
            b[p] = -(0..4).map(|e| j[e][p] * r[e]).sum::<f64>();
        }
        let dx = solve4(a, b);
        let mut xn = x;
        for v in 0..4 {
            xn[v] += dx[v];
        }
        let rn = polar_residual(c, s, &xn);
        if norm(&rn) < norm(&r) {
            x = xn;
            r = rn;
            damp = (damp * 0.3).max(1e-15);
        } else {
            damp *= 10.0;
        }
        if norm(&r) < 1e-14 || damp > 1e12 {
            break;
        }
    }
    (x, norm(&r))
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> [f64; 4] {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for k in col..4 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        x[r] = (b[r] - (r + 1..4).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    x
}

fn distance_to_orbits(c: &CubicCoefficients, s: i8, x: &[f64; 4]) -> f64 {
    let (r1, r2, mu) = (x[0].abs(), x[1].abs(), x[3]);
    let mut d = (r1 * r1 + r2 * r2).sqrt();
    for b in solve_cubic_equilibria(c, s).unwrap() {
        let (t1, t2) = match b.kind {
            BranchKind::Trivial => continue,
            BranchKind::Traveling1 => (b.amplitude, 0.0),
            BranchKind::Traveling2 => (0.0, b.amplitude),
            BranchKind::Standing { .. } => (b.amplitude, b.amplitude),
        };
        d = d.min(((r1 - t1).powi(2) + (r2 - t2).powi(2) + (mu - b.mu_star).powi(2)).sqrt());
    }
    d
}

#[test]
fn criterion_01_cubic_closed_forms_match_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let opts = NewtonOptions::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..C1_DRAWS {
        let c = random_generic(&mut rng);
        for s in [1i8, -1] {
            for b in solve_cubic_equilibria(&c, s).unwrap() {
                if b.kind == BranchKind::Trivial {
                    continue;
                }
                let exact = b.point(s);
                let mut seed = exact;
                let jitter = 0.1 * b.amplitude;
                seed.a1 += cz(rng.gen_range(-jitter..jitter), 0.0);
                if exact.a2.norm() > 0.0 {
                    seed.a2 += cz(rng.gen_range(-jitter..jitter), 0.0);
                }
                seed.mu_tilde += rng.gen_range(-jitter..jitter);
                let (p, _) = newton_refine(|q| evaluate_truncated(&c, q), &seed, Pinning::for_kind(b.kind), &opts).unwrap();
                let scale = b.amplitude.max(1.0);
                worst = worst
                    .max((amplitude_of(&p, b.kind) - b.amplitude).abs() / scale)
                    .max((p.mu_tilde - b.mu_star).abs() / b.mu_star.abs().max(1.0));
                checked += 1;
            }
        }
    }
    let mut missed = 0;
    let mut far_minima = 0;
    for _ in 0..C1_SCAN_DRAWS {
        let c = random_generic(&mut rng);
        for s in [1i8, -1] {
            for m in scan_residual_minima(&c, s, C1_SCAN_RESOLUTION, C1_SCAN_PHASES).unwrap() {
                if m.distance <= 2.0 * C1_SCAN_RESOLUTION {
                    continue;
                }
                far_minima += 1;
                let (x, res) = polish(&c, s, [m.r1, m.r2, m.phase, m.mu_tilde]);
                if res < C1_ROOT_RESIDUAL && distance_to_orbits(&c, s, &x) > C1_ROOT_DISTANCE {
                    missed += 1;
                }
            }
        }
    }
    let pass = worst <= C1_MATCH_TOL && missed == 0;
    report(
        1,
        "cubic closed forms vs Newton",
        pass,
        format!("{checked} roots, max deviation {worst:.2e}; {far_minima} far scan minima polished, {missed} roots off the predicted sets"),
    );
    assert!(pass);
}

// Jacobian of (Re F1, Im F1, Re F2, Im F2) in (Re a1, Im a1, Re a2, Im a2, mu) by the four-point
// central stencil, which is exact for the cubic polynomial map up to rounding.
fn fd_jacobian(c: &CubicCoefficients, p: &ReducedPoint) -> [[f64; 5]; 4] {
    let h = 1e-3;
    let f = |x: [f64; 5]| -> [f64; 4] {
        let q = ReducedPoint::new(cz(x[0], x[1]), cz(x[2], x[3]), x[4], p.sign_eps);
        let (f1, f2) = evaluate_truncated(c, &q);
        [f1.re, f1.im, f2.re, f2.im]
    };
    let x0 = [p.a1.re, p.a1.im, p.a2.re, p.a2.im, p.mu_tilde];
    let mut j = [[0.0; 5]; 4];
    for v in 0..5 {
        let at = |t: f64| {
            let mut x = x0;
            x[v] += t;
            f(x)
        };
        let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        for e in 0..4 {
            j[e][v] = (8.0 * (p1[e] - m1[e]) - (p2[e] - m2[e])) / (12.0 * h);
        }
    }
    j
}

fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        if piv != col {
            m.swap(col, piv);
            d = -d;
        }
        d *= m[col][col];
        if m[col][col] == 0.0 {
            return 0.0;
        }
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    d
}

fn sub(j: &[[f64; 5]; 4], rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&r| cols.iter().map(|&c| j[r][c]).collect()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn criterion_02_jacobian_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut e4, mut e23, mut e1, mut eo): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut notation_gap: f64 = 0.0;
    for _ in 0..C2_DRAWS {
        let c = random_generic(&mut rng);
        let s = if rng.gen_bool(0.5) { 1i8 } else { -1 };
        // trivial orbit at an arbitrary mu
        let mu = rng.gen_range(-2.0..2.0);
        let triv = EquilibriumBranch { kind: BranchKind::Trivial, amplitude: 0.0, mu_star: mu, criticality: reduced_o2::Criticality::Supercritical };
        let rec = jacobian_at(&c, &triv, s).unwrap();
        let j4 = (c.kappa.powi(2) + c.chi.powi(2) * mu * mu).powi(2);
        e4 = e4.max((rec.numeric_det - j4).abs() / j4.max(1.0));
        let fd = fd_jacobian(&c, &triv.point(s));
        eo = eo.max(rel(det(sub(&fd, &[0, 1, 2, 3], &[0, 1, 2, 3])), j4));
        for b in solve_cubic_equilibria(&c, s).unwrap() {
            let p = b.point(s);
            let fd = fd_jacobian(&c, &p);
            let a = b.amplitude;
            match b.kind {
                BranchKind::Traveling1 => {
                    let rec = jacobian_at(&c, &b, s).unwrap();
                    let j1 = 2.0 * c.chi * c.lambda.re * (c.lambda - c.gamma).norm_sqr() * a.powi(7);
                    e1 = e1.max(rel(rec.numeric_det, j1));
                    eo = eo.max(rel(det(sub(&fd, &[0, 1, 2, 3], &[0, 4, 2, 3])), j1));
                    let pn = 2.0 * c.chi * c.lambda.re * (c.lambda - c.gamma) * a.powi(7);
                    notation_gap = notation_gap.max(rel(pn.norm(), j1.abs()));
                }
                BranchKind::Standing { .. } => {
                    let rec = jacobian_at(&c, &b, s).unwrap();
                    let k = 4.0 * c.chi * (c.lambda.re + c.gamma.re) * a.powi(5);
                    let j2 = k * (c.lambda.re - c.gamma.re);
                    let j3 = k * (c.lambda.im - c.gamma.im);
                    e23 = e23.max(rel(rec.numeric_det, j2));
                    eo = eo.max(rel(det(sub(&fd, &[0, 1, 2], &[0, 4, 2])), j2));
                    if j3.abs() > 1e-3 {
                        e23 = e23.max(rel(rec.alt_numeric_det.unwrap(), j3));
                        eo = eo.max(rel(det(sub(&fd, &[0, 1, 3], &[0, 4, 2])), j3));
                    }
                }
                _ => {}
            }
        }
    }
    let pass = e4 <= C2_J4_TOL && e23 <= C2_J23_REL_TOL && e1 <= C2_J1_REL_TOL && eo <= C2_ORACLE_REL_TOL;
    report(
        2,
        "reduced Jacobian determinants",
        pass,
        format!(
            "J4 {e4:.1e}, J2/J3 {e23:.1e}, J1 {e1:.1e} (modulus-squared reading; complex-notation modulus differs by up to {notation_gap:.1e}), stencil oracle {eo:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_genericity_gate() {
    let lam = cz(-1.0, 0.4);
    let c = CubicCoefficients::new(1.3, 2.0 * PI, lam, lam).unwrap();
    let direct = matches!(solve_cubic_equilibria(&c, 1), Err(Error::GenericityViolation(_)));
    let params = SyntheticParams::prescribed(1.3, 2.0 * PI, lam, lam).unwrap();
    let opts = ReductionOptions::default();
    let fit = fit_coefficients(&SyntheticSystem::new(params, 0.0), 0.05, 6, &opts).unwrap();
    let fitted = matches!(fitted_genericity(&fit, &opts), Err(Error::GenericityViolation(_)));
    let search = locate_periodic_orbits(|e| Ok(SyntheticSystem::new(params, e)), &fit, &[1e-2], &opts);
    let refused = matches!(search, Err(Error::GenericityViolation(_)));
    // J1 at the would-be traveling orbit
    let a2 = -c.kappa / c.lambda.re;
    let a = a2.sqrt();
    let p = ReducedPoint::new(cz(a, 0.0), cz(0.0, 0.0), -c.lambda.im * a2 / c.chi, 1);
    let j = real_jacobian(&c, &p);
    let j1 = det(sub(&j, &[0, 1, 2, 3], &[0, 4, 2, 3]));
    let pass = direct && fitted && refused && j1.abs() <= C3_J1_ZERO_TOL;
    report(3, "genericity gate at Lambda = Gamma", pass, format!("cubic refused {direct}, fit refused {fitted}, pipeline refused {refused}, J1 = {j1:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_04_synthetic_ground_truth() {
    let cases = [(1.0, cz(-1.0, 0.3), cz(-2.0, -0.1)), (0.7, cz(-0.5, -0.4), cz(0.9, 0.6)), (-1.2, cz(1.5, 0.2), cz(-0.4, 1.1))];
    let opts = ReductionOptions::default();
    let mut pass = true;
    let mut details = Vec::new();
    for (kappa, lam, gam) in cases {
        let params = SyntheticParams::prescribed(kappa, 2.0 * PI, lam, gam).unwrap();
        let fit = fit_coefficients(&SyntheticSystem::new(params, 0.0), 0.05, 6, &opts).unwrap();
        let (el, eg) = (rel_c(fit.lambda, lam), rel_c(fit.gamma, gam));
        let spur = fit.spurious_max() / lam.norm();
        // sign of eps on which the traveling branch exists
        let side = -(kappa * lam.re).signum();
        let eps: Vec<f64> = [1e-2, 2e-2, 4e-2].iter().map(|e| side * e).collect();
        let search = locate_periodic_orbits(|e| Ok(SyntheticSystem::new(params, e)), &fit, &eps, &opts).unwrap();
        let nontrivial = search.orbits.iter().filter(|r| r.kind != "trivial").count();
        let worst = search.orbits.iter().map(|r| r.return_residual).fold(0.0, f64::max);
        let ok = el <= C4_REL_TOL
            && eg <= C4_REL_TOL
            && (fit.kappa - kappa).abs() <= C4_REL_TOL * kappa.abs()
            && spur <= C4_SPURIOUS_RATIO
            && search.failures.is_empty()
            && nontrivial > 0
            && worst <= C4_RETURN_TOL;
        pass &= ok;
        details.push(format!("Lambda {el:.1e} Gamma {eg:.1e} spurious/|Lambda| {spur:.1e} orbits {nontrivial} return {worst:.1e}"));
    }
    report(4, "synthetic ground truth", pass, details.join("; "));
    assert!(pass);
}

fn rel_c(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

struct M0Run {
    fit: CoefficientFit,
    search: OrbitSearch,
    k_star: usize,
}

fn m0_run() -> &'static M0Run {
    static RUN: OnceLock<M0Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = RunConfig::m0();
        let (model, bundle) = prepare_crossing(&cfg).unwrap();
        let grid = cfg.grid.build().unwrap();
        let opts = cfg.reduction.options;
        let sys = PdeSetup::new(model, grid, &bundle, 0.0, cfg.reduction.pde).unwrap();
        let fit = fit_coefficients(&sys, cfg.reduction.sample_radius, cfg.reduction.n_samples, &opts).unwrap();
        drop(sys);
        let search =
            locate_periodic_orbits(|e| PdeSetup::new(model, grid, &bundle, e, cfg.reduction.pde), &fit, &cfg.eps, &opts).unwrap();
        M0Run { fit, search, k_star: bundle.k_star }
    })
}

fn slope_of(search: &OrbitSearch, kind: &str) -> (usize, Option<f64>) {
    let sel: Vec<_> = search.orbits.iter().filter(|r| r.kind == kind).collect();
    let x: Vec<f64> = sel.iter().map(|r| r.eps.abs().ln()).collect();
    let y: Vec<f64> = sel.iter().map(|r| r.field_norm.ln()).collect();
    (sel.len(), reduced_o2::fit_slope(&x, &y))
}

#[test]
fn criterion_05_square_root_law() {
    let run = m0_run();
    let cfg = RunConfig::m0();
    let decade = cfg.eps.iter().cloned().fold(0.0, f64::max) / cfg.eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let (nt, st) = slope_of(&run.search, "traveling1");
    let (ns, ss) = slope_of(&run.search, "standing");
    let worst = run.search.orbits.iter().map(|r| r.return_residual).fold(0.0, f64::max);
    let within = |s: Option<f64>| s.is_some_and(|v| (v - C5_SLOPE).abs() <= C5_SLOPE_TOL);
    let pass = cfg.eps.len() >= C5_MIN_EPS
        && decade >= 10.0 - 1e-9
        && nt == cfg.eps.len()
        && ns == cfg.eps.len()
        && within(st)
        && within(ss)
        && worst <= C5_RETURN_TOL
        && run.search.failures.is_empty();
    report(
        5,
        "sqrt(eps) amplitude law on M0",
        pass,
        format!(
            "Lambda {:.3}, Gamma {:.3}; traveling slope {:?} ({nt}), standing slope {:?} ({ns}), max return residual {worst:.1e}, failures {}",
            run.fit.lambda,
            run.fit.gamma,
            st,
            ss,
            run.search.failures.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_traveling_standing_discrimination() {
    let run = m0_run();
    let mut pass = true;
    let (mut tw_shift, mut tw_speed, mut sw_shift): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for r in &run.search.orbits {
        match r.kind.as_str() {
            "traveling1" => {
                let want = r.omega / run.k_star as f64;
                let got = r.traveling_speed.map(f64::abs).unwrap_or(f64::NAN);
                tw_shift = tw_shift.max(r.shift_residual);
                tw_speed = tw_speed.max((got - want).abs() / want);
            }
            "standing" => sw_shift = sw_shift.min(r.shift_residual),
            _ => {}
        }
    }
    pass &= tw_shift <= C6_SHIFT_TOL && tw_speed <= C6_SPEED_REL_TOL && sw_shift > C6_STANDING_FLOOR;
    report(
        6,
        "traveling vs standing shift test",
        pass,
        format!("traveling shift residual {tw_shift:.1e}, speed error {tw_speed:.1e}; standing shift residual >= {sw_shift:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_linearization_error_is_quadratic() {
    let cfg = RunConfig::m1();
    let pb = Problem::new(cfg.model, 0.0, cfg.grid.build().unwrap()).unwrap();
    let shape = test_field(&pb, cfg.seed);
    let base = hs_norm(&shape, &pb.grid, 1).unwrap();
    let mut errs = Vec::new();
    let mut amp = C7_BASE_AMPLITUDE;
    for _ in 0..=C7_HALVINGS {
        errs.push(linearization_error(&pb, &shape.scaled(amp / base), 1.0, 1).unwrap().err);
        amp *= 0.5;
    }
    let factors: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = factors.len() == C7_HALVINGS && factors.iter().all(|f| *f >= C7_FACTOR_RANGE.0 && *f <= C7_FACTOR_RANGE.1);
    report(7, "linearization error on M1", pass, format!("halving factors {factors:.4?}"));
    assert!(pass);
}

#[test]
fn criterion_08_energy_bound() {
    let mut pass = true;
    let mut details = Vec::new();
    for cfg in [RunConfig::m1(), RunConfig::m0()] {
        let pb = Problem::new(cfg.model, 0.0, cfg.grid.build().unwrap()).unwrap();
        let shape = test_field(&pb, cfg.seed);
        let chk = energy_check(&pb, &shape, &C8_AMPLITUDES, 2.0, 1).unwrap();
        let c_fit = chk.growth.iter().cloned().fold(0.0, f64::max);
        let ok = chk.growth_spread <= C8_C_SPREAD && (chk.dissipation_exponent - C8_EXPONENT).abs() <= C8_EXPONENT_TOL;
        pass &= ok;
        details.push(format!(
            "{}: C(T0) {c_fit:.4}, spread {:.1e}, dissipation exponent {:.4}",
            cfg.model.name(),
            chk.growth_spread,
            chk.dissipation_exponent
        ));
    }
    report(8, "energy bound and dissipation scaling", pass, details.join("; "));
    assert!(pass);
}

fn inside(poly: &[C64], z: C64) -> bool {
    o2hopf::cli::inside_polygon(poly, z)
}

fn matrix_count(pb: &Problem, k: i64, contour: &[C64]) -> usize {
    eigenvalues_sorted(&assemble_lk(pb, k)).unwrap().into_iter().filter(|l| inside(contour, *l)).count()
}

/// Rightmost-near-guess eigenvalue of L_k on grids h and h/2, Richardson-extrapolated.
fn extrapolated_eigenvalue(model: ModelSystem, l: f64, n1: usize, k: i64, guess: C64) -> C64 {
    let at = |n: usize| {
        let pb = Problem::new(model, 0.0, Grid::new(l, n, 4, 0.05).unwrap()).unwrap();
        let op = assemble_lk(&pb, k);
        let v = vec![C64::new(1.0, 0.0); op.mat.nrows()];
        let mut lam = guess;
        let mut vec = v;
        for _ in 0..3 {
            let (l2, v2, _) = refine(&op.mat, lam, vec).unwrap();
            lam = l2;
            vec = v2;
        }
        lam
    };
    let (coarse, fine) = (at(n1), at(2 * n1 - 1));
    (4.0 * fine - coarse) / 3.0
}

fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one = |x: &[C64], y: &[C64]| x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

fn spectral_consistency(name: &str, cfg: &RunConfig, contours: &[(i64, Vec<C64>)]) -> (bool, String) {
    let grid = cfg.grid.build().unwrap();
    let coarse = Problem::new(cfg.model, 0.0, grid).unwrap();
    let fine = Problem::new(cfg.model, 0.0, grid.with_n1(2 * grid.n1 - 1).unwrap()).unwrap();
    let ev = Evans::new(cfg.model, 0.0, EvansOptions::default());
    let wopts = WindingOptions::default();
    let mut ok = contours.len() == C9_CONTOURS;
    let mut counts = Vec::new();
    for (k, c) in contours {
        let w = ev.root_count(c, *k, &wopts).unwrap();
        let (m1, m2) = (matrix_count(&coarse, *k, c), matrix_count(&fine, *k, c));
        ok &= m1 == m2 && w == m2 as i64;
        counts.push(format!("{w}/{m2}"));
    }
    let mut sym: f64 = 0.0;
    for k in 1..=grid.k_max as i64 {
        let a = eigenvalues_sorted(&assemble_lk(&coarse, k)).unwrap();
        let b = eigenvalues_sorted(&assemble_lk(&coarse, -k)).unwrap();
        sym = sym.max(hausdorff(&a, &b));
    }
    ok &= sym <= C9_SYMMETRY_TOL;
    (ok, format!("{name}: Evans/matrix counts [{}], sigma(L_k) vs sigma(L_-k) {sym:.1e}", counts.join(" ")))
}

#[test]
fn criterion_09_spectral_consistency() {
    let z = C64::new(0.0, 0.0);
    let (up, down) = (cz(0.0, 0.8), cz(0.0, -0.8));
    let m0 = RunConfig::m0();
    let m0_contours: Vec<(i64, Vec<C64>)> = vec![
        (1, circle(up, 0.1, 12)),
        (1, circle(down, 0.1, 12)),
        (-1, circle(up, 0.1, 12)),
        (1, rectangle(-0.1, 0.1, -1.0, 1.0)),
        (0, rectangle(0.05, 1.0, -1.0, 1.0)),
        (2, rectangle(0.05, 1.0, -1.0, 1.0)),
        (3, rectangle(-0.1, 1.0, -2.0, 2.0)),
        (2, circle(up, 0.1, 12)),
        (0, circle(up, 0.1, 12)),
        (1, circle(z, 0.3, 12)),
    ];
    let m1 = RunConfig::m1();
    let right = rectangle(0.05, 1.0, -1.0, 1.0);
    let m1_contours: Vec<(i64, Vec<C64>)> = vec![
        (0, circle(z, 0.05, 12)),
        (0, circle(z, 0.1, 12)),
        (0, right.clone()),
        (1, right.clone()),
        (2, right.clone()),
        (3, right.clone()),
        (4, right.clone()),
        (-1, right),
        (1, rectangle(0.02, 2.0, -3.0, 3.0)),
        (2, circle(cz(0.5, 0.0), 0.3, 12)),
    ];
    let (ok0, d0) = spectral_consistency("M0", &m0, &m0_contours);
    let (ok1, d1) = spectral_consistency("M1", &m1, &m1_contours);
    // location: Evans zero vs grid-extrapolated eigenvalue of the crossing pair
    let ev = Evans::new(m0.model, 0.0, EvansOptions::default());
    let zero = ev.find_zero(cz(0.0, 0.8), 1, 1e-12).unwrap();
    let disc = extrapolated_eigenvalue(m0.model, m0.grid.l, 257, 1, zero);
    let loc = (zero - disc).norm();
    // translation eigenvalue of M1 at k = 0
    let pb1 = Problem::new(m1.model, 0.0, m1.grid.build().unwrap()).unwrap();
    let tr = eigenvalues_sorted(&assemble_lk(&pb1, 0)).unwrap().into_iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    let pass = ok0 && ok1 && loc <= C9_LOCATION_TOL && tr <= C9_TRANSLATION_TOL;
    report(9, "Evans vs matrix spectra", pass, format!("{d0}; {d1}; Evans zero {zero:.7} vs extrapolated {disc:.7} ({loc:.1e}); |lambda_0| {tr:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_10_symmetry_suite() {
    let cfg = RunConfig::m0();
    let (model, bundle) = prepare_crossing(&cfg).unwrap();
    let pb = Problem::new(model, bundle.eps0, cfg.grid.build().unwrap()).unwrap();
    let bio = bundle.residuals;
    let proj = Projections::new(bundle);
    let mut worst: f64 = bio.w_wadj.max(bio.sw_wadj);
    for s in C10_SEEDS {
        for theta in [0.3, 1.7, 2.0 * PI / 3.0] {
            let r = verify_equivariance(&pb, Some(&proj), theta, 3, s);
            assert!(r.projection_commutator.is_some() && r.biorthogonality.is_some());
            worst = worst.max(r.max_residual());
        }
    }
    let m1 = RunConfig::m1();
    let pb1 = Problem::new(m1.model, 0.0, m1.grid.build().unwrap()).unwrap();
    for s in C10_SEEDS {
        worst = worst.max(verify_equivariance(&pb1, None, 0.9, 3, s).max_residual());
    }
    let pass = worst <= C10_TOL;
    report(
        10,
        "O(2) equivariance and biorthogonality",
        pass,
        format!("max residual {worst:.1e} (<w,w~> - 1: {:.1e}, <Sw,w~>: {:.1e})", bio.w_wadj, bio.sw_wadj),
    );
    assert!(pass);
}
