//! The rescaled four-dimensional O(2) bifurcation system
//!
//! ```text
//! F1 = a1 (kappa sgn(eps) + i chi mu + Lambda |a1|^2 + Gamma |a2|^2)
//! F2 = a2 (kappa sgn(eps) + i chi mu + Lambda |a2|^2 + Gamma |a1|^2)
//! ```
//!
//! with its equilibria, genericity test, Jacobians, pinned Newton corrector and
//! a simple natural-parameter continuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det_real, C64};

pub const DEFAULT_GENERICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub kappa: f64,
    pub chi: f64,
    #[serde(rename = "Lambda")]
    pub lambda: C64,
    #[serde(rename = "Gamma")]
    pub gamma: C64,
}

impl CubicCoefficients {
    pub fn new(kappa: f64, chi: f64, lambda: C64, gamma: C64) -> Result<Self> {
        if kappa == 0.0 || chi == 0.0 || !kappa.is_finite() || !chi.is_finite() {
            return Err(Error::InvalidInput(format!("kappa and chi must be finite and non-zero (got {kappa}, {chi})")));
        }
        Ok(CubicCoefficients { kappa, chi, lambda, gamma })
    }

    pub fn real(kappa: f64, chi: f64, lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(kappa, chi, C64::new(lambda, 0.0), C64::new(gamma, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub a1: C64,
    pub a2: C64,
    pub mu_tilde: f64,
    pub sign_eps: i8,
    pub sqrt_eps: f64,
}

impl ReducedPoint {
    pub fn new(a1: C64, a2: C64, mu_tilde: f64, sign_eps: i8) -> Self {
        ReducedPoint { a1, a2, mu_tilde, sign_eps: if sign_eps < 0 { -1 } else { 1 }, sqrt_eps: 0.0 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.sign_eps = if eps < 0.0 { -1 } else { 1 };
        self.sqrt_eps = eps.abs().sqrt();
        self
    }

    /// Rotation (a1, a2) -> (a1 e^{i theta}, a2 e^{-i theta}).
    pub fn rotate(&self, theta: f64) -> Self {
        let mut p = *self;
        p.a1 = self.a1 * C64::from_polar(1.0, theta);
        p.a2 = self.a2 * C64::from_polar(1.0, -theta);
        p
    }

    /// Reflection (a1, a2) -> (a2, a1).
    pub fn reflect(&self) -> Self {
        let mut p = *self;
        p.a1 = self.a2;
        p.a2 = self.a1;
        p
    }
}

pub fn evaluate_truncated(c: &CubicCoefficients, p: &ReducedPoint) -> (C64, C64) {
    let s = p.sign_eps as f64;
    let lin = C64::new(c.kappa * s, c.chi * p.mu_tilde);
    let n1 = p.a1.norm_sqr();
    let n2 = p.a2.norm_sqr();
    let f1 = p.a1 * (lin + c.lambda * n1 + c.gamma * n2);
    let f2 = p.a2 * (lin + c.lambda * n2 + c.gamma * n1);
    (f1, f2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub lambda_ne_gamma: Condition,
    pub re_sum_nonzero: Condition,
    pub re_lambda_nonzero: Condition,
    pub tolerance: f64,
}

impl GenericityReport {
    pub fn all_hold(&self) -> bool {
        self.lambda_ne_gamma.holds && self.re_sum_nonzero.holds && self.re_lambda_nonzero.holds
    }

    fn failures(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.lambda_ne_gamma.holds {
            v.push("Lambda = Gamma");
        }
        if !self.re_sum_nonzero.holds {
            v.push("Re(Lambda + Gamma) = 0");
        }
        if !self.re_lambda_nonzero.holds {
            v.push("Re Lambda = 0");
        }
        v
    }
}

pub fn check_genericity(c: &CubicCoefficients) -> GenericityReport {
    check_genericity_with_tol(c, DEFAULT_GENERICITY_TOL)
}

pub fn check_genericity_with_tol(c: &CubicCoefficients, tol: f64) -> GenericityReport {
    let cond = |m: f64| Condition { holds: m > tol, margin: m };
    GenericityReport {
        lambda_ne_gamma: cond((c.lambda - c.gamma).norm()),
        re_sum_nonzero: cond((c.lambda + c.gamma).re.abs()),
        re_lambda_nonzero: cond(c.lambda.re.abs()),
        tolerance: tol,
    }
}

pub fn require_generic(c: &CubicCoefficients, tol: f64) -> Result<()> {
    let r = check_genericity_with_tol(c, tol);
    if r.all_hold() {
        Ok(())
    } else {
        Err(Error::GenericityViolation(r.failures().join(", ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchKind {
    Trivial,
    Traveling1,
    Traveling2,
    Standing { theta: f64 },
}

impl BranchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::Trivial => "trivial",
            BranchKind::Traveling1 => "traveling1",
            BranchKind::Traveling2 => "traveling2",
            BranchKind::Standing { .. } => "standing",
        }
    }

    pub fn is_traveling(&self) -> bool {
        matches!(self, BranchKind::Traveling1 | BranchKind::Traveling2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumBranch {
    pub kind: BranchKind,
    pub amplitude: f64,
    pub mu_star: f64,
    pub criticality: Criticality,
}

impl EquilibriumBranch {
    /// Representative point (theta = 0 for standing waves).
    pub fn point(&self, sign_eps: i8) -> ReducedPoint {
        let a = C64::new(self.amplitude, 0.0);
        let z = C64::new(0.0, 0.0);
        let (a1, a2) = match self.kind {
            BranchKind::Trivial => (z, z),
            BranchKind::Traveling1 => (a, z),
            BranchKind::Traveling2 => (z, a),
            BranchKind::Standing { theta } => (a, a * C64::from_polar(1.0, theta)),
        };
        ReducedPoint::new(a1, a2, self.mu_star, sign_eps)
    }
}

fn criticality_of(sign_eps: i8) -> Criticality {
    if sign_eps > 0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    }
}

pub fn solve_cubic_equilibria(c: &CubicCoefficients, sign_eps: i8) -> Result<Vec<EquilibriumBranch>> {
    solve_cubic_equilibria_with_tol(c, sign_eps, DEFAULT_GENERICITY_TOL)
}

pub fn solve_cubic_equilibria_with_tol(c: &CubicCoefficients, sign_eps: i8, tol: f64) -> Result<Vec<EquilibriumBranch>> {
    require_generic(c, tol)?;
    let s = if sign_eps < 0 { -1.0 } else { 1.0 };
    let mut out = vec![EquilibriumBranch {
        kind: BranchKind::Trivial,
        amplitude: 0.0,
        mu_star: 0.0,
        criticality: criticality_of(sign_eps),
    }];
    let trav_sq = -c.kappa * s / c.lambda.re;
    if trav_sq > 0.0 {
        let mu = -c.lambda.im * trav_sq / c.chi;
        for kind in [BranchKind::Traveling1, BranchKind::Traveling2] {
            out.push(EquilibriumBranch { kind, amplitude: trav_sq.sqrt(), mu_star: mu, criticality: criticality_of(sign_eps) });
        }
    }
    let sum = c.lambda + c.gamma;
    let stand_sq = -c.kappa * s / sum.re;
    if stand_sq > 0.0 {
        out.push(EquilibriumBranch {
            kind: BranchKind::Standing { theta: 0.0 },
            amplitude: stand_sq.sqrt(),
            mu_star: -sum.im * stand_sq / c.chi,
            criticality: criticality_of(sign_eps),
        });
    }
    Ok(out)
}

/// The criticality rule `sgn(eps) = -(Re Lambda |a1|^2 + Re Gamma |a2|^2) / kappa`, returned as its residual.
pub fn criticality_residual(c: &CubicCoefficients, p: &ReducedPoint) -> f64 {
    p.sign_eps as f64 * c.kappa + c.lambda.re * p.a1.norm_sqr() + c.gamma.re * p.a2.norm_sqr()
}

/// Real Jacobian of (Re F1, Im F1, Re F2, Im F2) with respect to
/// (Re a1, Im a1, Re a2, Im a2, mu), by exact differentiation.
pub fn real_jacobian(c: &CubicCoefficients, p: &ReducedPoint) -> [[f64; 5]; 4] {
    let s = p.sign_eps as f64;
    let lin = C64::new(c.kappa * s, c.chi * p.mu_tilde);
    let (a1, a2) = (p.a1, p.a2);
    let g1 = lin + c.lambda * a1.norm_sqr() + c.gamma * a2.norm_sqr();
    let g2 = lin + c.lambda * a2.norm_sqr() + c.gamma * a1.norm_sqr();
    let i = C64::new(0.0, 1.0);
    // dF/d(var) as complex numbers
    let d1 = [
        g1 + a1 * c.lambda * (2.0 * a1.re),
        i * g1 + a1 * c.lambda * (2.0 * a1.im),
        a1 * c.gamma * (2.0 * a2.re),
        a1 * c.gamma * (2.0 * a2.im),
        i * c.chi * a1,
    ];
    let d2 = [
        a2 * c.gamma * (2.0 * a1.re),
        a2 * c.gamma * (2.0 * a1.im),
        g2 + a2 * c.lambda * (2.0 * a2.re),
        i * g2 + a2 * c.lambda * (2.0 * a2.im),
        i * c.chi * a2,
    ];
    let mut j = [[0.0; 5]; 4];
    for v in 0..5 {
        j[0][v] = d1[v].re;
        j[1][v] = d1[v].im;
        j[2][v] = d2[v].re;
        j[3][v] = d2[v].im;
    }
    j
}

fn minor(j: &[[f64; 5]; 4], rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&r| cols.iter().map(|&c| j[r][c]).collect()).collect()
}

const RE_A1: usize = 0;
const IM_A1: usize = 1;
const RE_A2: usize = 2;
const IM_A2: usize = 3;
const MU: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianRecord {
    pub kind: BranchKind,
    /// Numeric determinant of the pinned real Jacobian (J1 / J2 / J4).
    pub numeric_det: f64,
    /// Closed form of the same determinant.
    pub closed_form: f64,
    /// Standing waves: the alternative row set (J3), numeric and closed form.
    pub alt_numeric_det: Option<f64>,
    pub alt_closed_form: Option<f64>,
    /// Traveling waves: the complex value 2 chi Re(Lambda) (Lambda - Gamma) a*^7, kept for
    /// comparison with the modulus-squared reading.
    pub complex_notation: Option<C64>,
}

pub fn jacobian_at(c: &CubicCoefficients, branch: &EquilibriumBranch, sign_eps: i8) -> Result<JacobianRecord> {
    let p = branch.point(sign_eps);
    let (f1, f2) = evaluate_truncated(c, &p);
    let res = (f1.norm_sqr() + f2.norm_sqr()).sqrt();
    if res > 1e-10 {
        return Err(Error::BranchMismatch(res));
    }
    let j = real_jacobian(c, &p);
    let a = branch.amplitude;
    let rec = match branch.kind {
        BranchKind::Trivial => JacobianRecord {
            kind: branch.kind,
            numeric_det: det_real(&minor(&j, &[0, 1, 2, 3], &[RE_A1, IM_A1, RE_A2, IM_A2])),
            closed_form: (c.kappa.powi(2) + (c.chi * p.mu_tilde).powi(2)).powi(2),
            alt_numeric_det: None,
            alt_closed_form: None,
            complex_notation: None,
        },
        BranchKind::Traveling1 | BranchKind::Traveling2 => {
            let m = if branch.kind == BranchKind::Traveling1 {
                minor(&j, &[0, 1, 2, 3], &[RE_A1, MU, RE_A2, IM_A2])
            } else {
                minor(&j, &[2, 3, 0, 1], &[RE_A2, MU, RE_A1, IM_A1])
            };
            let d = c.lambda - c.gamma;
            JacobianRecord {
                kind: branch.kind,
                numeric_det: det_real(&m),
                closed_form: 2.0 * c.chi * c.lambda.re * d.norm_sqr() * a.powi(7),
                alt_numeric_det: None,
                alt_closed_form: None,
                complex_notation: Some(d * (2.0 * c.chi * c.lambda.re * a.powi(7))),
            }
        }
        BranchKind::Standing { .. } => {
            let cols = [RE_A1, MU, RE_A2];
            let a5 = a.powi(5);
            let k = 4.0 * c.chi * (c.lambda.re + c.gamma.re);
            JacobianRecord {
                kind: branch.kind,
                numeric_det: det_real(&minor(&j, &[0, 1, 2], &cols)),
                closed_form: k * (c.lambda.re - c.gamma.re) * a5,
                alt_numeric_det: Some(det_real(&minor(&j, &[0, 1, 3], &cols))),
                alt_closed_form: Some(k * (c.lambda.im - c.gamma.im) * a5),
                complex_notation: None,
            }
        }
    };
    Ok(rec)
}

/// How the rotation degeneracy is removed during Newton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pinning {
    /// Unknowns (Re a1, Im a1, Re a2, Im a2); mu fixed.
    Trivial,
    /// Im a1 = 0; unknowns (Re a1, mu, Re a2, Im a2).
    Traveling1,
    /// Im a2 = 0; unknowns (Re a2, mu, Re a1, Im a1).
    Traveling2,
    /// a1, a2 real; unknowns (a1, mu, a2) and three of the four real equations.
    Standing,
}

impl Pinning {
    pub fn for_kind(kind: BranchKind) -> Self {
        match kind {
            BranchKind::Trivial => Pinning::Trivial,
            BranchKind::Traveling1 => Pinning::Traveling1,
            BranchKind::Traveling2 => Pinning::Traveling2,
            BranchKind::Standing { .. } => Pinning::Standing,
        }
    }

    fn vars(&self) -> &'static [usize] {
        match self {
            Pinning::Trivial => &[RE_A1, IM_A1, RE_A2, IM_A2],
            Pinning::Traveling1 => &[RE_A1, MU, RE_A2, IM_A2],
            Pinning::Traveling2 => &[RE_A2, MU, RE_A1, IM_A1],
            Pinning::Standing => &[RE_A1, MU, RE_A2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_cond: f64,
    /// Iterates may not move farther than this multiple of max(|seed|, 1) from the seed.
    pub basin_ratio: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 50, fd_step: 1e-7, max_cond: 1e12, basin_ratio: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub iterations: usize,
    pub residual: f64,
    /// Last observed r_{k+1} / r_k^2 (None if fewer than two steps were taken).
    pub quadratic_ratio: Option<f64>,
    /// Which row set was used for standing waves: 2 for (Re F1, Im F1, Re F2), 3 for (Re F1, Im F1, Im F2).
    pub row_set: Option<u8>,
}

fn pack(p: &ReducedPoint) -> [f64; 5] {
    [p.a1.re, p.a1.im, p.a2.re, p.a2.im, p.mu_tilde]
}

fn unpack(x: &[f64; 5], like: &ReducedPoint) -> ReducedPoint {
    let mut p = *like;
    p.a1 = C64::new(x[0], x[1]);
    p.a2 = C64::new(x[2], x[3]);
    p.mu_tilde = x[4];
    p
}

fn residual_vec<F: FnMut(&ReducedPoint) -> (C64, C64)>(f: &mut F, p: &ReducedPoint) -> [f64; 4] {
    let (f1, f2) = f(p);
    [f1.re, f1.im, f2.re, f2.im]
}

fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for cc in col..n {
                m[r][cc] -= f * m[col][cc];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for cc in r + 1..n {
            s -= m[r][cc] * x[cc];
        }
        x[r] = s / m[r][r];
    }
    Some(x)
}

fn cond_estimate(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    match m.thin_svd() {
        Ok(s) => {
            let sv: Vec<f64> = s.S().column_vector().iter().cloned().collect();
            let (mx, mn) = (sv[0], sv[n - 1]);
            if mn == 0.0 {
                f64::INFINITY
            } else {
                mx / mn
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Newton iteration on a residual callback with the rotation phase pinned.
/// The Jacobian is formed by central finite differences of the callback.
pub fn newton_refine<F>(mut system: F, seed: &ReducedPoint, pinning: Pinning, opts: &NewtonOptions) -> Result<(ReducedPoint, Certificate)>
where
    F: FnMut(&ReducedPoint) -> (C64, C64),
{
    let mut x = pack(seed);
    match pinning {
        Pinning::Traveling1 => x[IM_A1] = 0.0,
        Pinning::Traveling2 => x[IM_A2] = 0.0,
        Pinning::Standing => {
            x[IM_A1] = 0.0;
            x[IM_A2] = 0.0;
        }
        Pinning::Trivial => {}
    }
    let x0 = x;
    let seed_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let vars = pinning.vars();
    let norm4 = |r: &[f64; 4]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = residual_vec(&mut system, &unpack(&x, seed));
    let mut rn = norm4(&r);
    let mut history = vec![rn];
    let mut row_set: Option<u8> = None;
    let mut it = 0;
    while rn > opts.tol {
        if it >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rn });
        }
        // finite-difference Jacobian columns
        let mut jac = vec![[0.0; 4]; vars.len()];
        for (cidx, &v) in vars.iter().enumerate() {
            let h = opts.fd_step * x[v].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[v] += h;
            xm[v] -= h;
            let rp = residual_vec(&mut system, &unpack(&xp, seed));
            let rm = residual_vec(&mut system, &unpack(&xm, seed));
            for q in 0..4 {
                jac[cidx][q] = (rp[q] - rm[q]) / (2.0 * h);
            }
        }
        let rows: Vec<usize> = if pinning == Pinning::Standing {
            let build = |rs: [usize; 3]| -> Vec<Vec<f64>> { rs.iter().map(|&q| (0..3).map(|c| jac[c][q]).collect()).collect() };
            let d2 = det_real(&build([0, 1, 2])).abs();
            let d3 = det_real(&build([0, 1, 3])).abs();
            if d2 >= d3 {
                row_set = Some(2);
                vec![0, 1, 2]
            } else {
                row_set = Some(3);
                vec![0, 1, 3]
            }
        } else {
            vec![0, 1, 2, 3]
        };
        let a: Vec<Vec<f64>> = rows.iter().map(|&q| (0..vars.len()).map(|c| jac[c][q]).collect()).collect();
        let cond = cond_estimate(&a);
        if !(cond <= opts.max_cond) {
            return Err(Error::SingularJacobian(cond));
        }
        let b: Vec<f64> = rows.iter().map(|&q| -r[q]).collect();
        let dx = solve_dense(&a, &b).ok_or(Error::SingularJacobian(f64::INFINITY))?;
        for (cidx, &v) in vars.iter().enumerate() {
            x[v] += dx[cidx];
        }
        it += 1;
        let dist = x.iter().zip(&x0).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        if !dist.is_finite() || dist > opts.basin_ratio * seed_norm {
            return Err(Error::NoConvergence { iterations: it, residual: rn });
        }
        r = residual_vec(&mut system, &unpack(&x, seed));
        rn = norm4(&r);
        history.push(rn);
    }
    let quadratic_ratio = if history.len() >= 3 {
        let n = history.len();
        let (prev, last) = (history[n - 2], history[n - 1]);
        if prev > 0.0 {
            Some(last / (prev * prev))
        } else {
            None
        }
    } else {
        None
    };
    let cert = Certificate { iterations: it, residual: history[history.len() - 1], quadratic_ratio, row_set };
    Ok((unpack(&x, seed), cert))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub eps: f64,
    pub kind: BranchKind,
    pub amplitude: f64,
    pub a1: C64,
    pub a2: C64,
    pub mu_tilde: f64,
    pub criticality: Criticality,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationBranch {
    pub kind: BranchKind,
    pub samples: Vec<BranchSample>,
    pub failures: Vec<(f64, String)>,
    /// Least-squares slope of log|a| against log|eps|.
    pub exponent: Option<f64>,
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Continues one branch kind across an eps grid. `family(eps, p)` is the rescaled residual at
/// parameter eps; predictors come from the cubic closed forms of `coeffs`.
pub fn continue_branch<F>(
    coeffs: &CubicCoefficients,
    mut family: F,
    eps_grid: &[f64],
    kind: BranchKind,
    opts: &NewtonOptions,
) -> Result<BifurcationBranch>
where
    F: FnMut(f64, &ReducedPoint) -> (C64, C64),
{
    if eps_grid.is_empty() {
        return Err(Error::InvalidInput("empty eps grid".into()));
    }
    if eps_grid.iter().any(|e| *e == 0.0 || !e.is_finite()) {
        return Err(Error::InvalidInput("eps values must be finite and non-zero".into()));
    }
    let sgn = eps_grid[0].signum();
    if eps_grid.iter().any(|e| e.signum() != sgn) {
        return Err(Error::InvalidInput("eps grid must not change sign".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("eps grid must be sorted".into()));
    }
    let sign_eps: i8 = if sgn < 0.0 { -1 } else { 1 };
    let branches = solve_cubic_equilibria(coeffs, sign_eps)?;
    let target = branches
        .iter()
        .find(|b| b.kind.name() == kind.name())
        .ok_or_else(|| Error::InvalidInput(format!("no {} branch for sgn(eps) = {}", kind.name(), sign_eps)))?;
    let mut out = BifurcationBranch { kind, samples: Vec::new(), failures: Vec::new(), exponent: None };
    for &eps in eps_grid {
        let seed = target.point(sign_eps).with_eps(eps);
        let res = newton_refine(|p| family(eps, p), &seed, Pinning::for_kind(kind), opts);
        match res {
            Ok((p, cert)) => {
                let amp_tilde = (p.a1.norm_sqr() + p.a2.norm_sqr()).sqrt();
                out.samples.push(BranchSample {
                    eps,
                    kind,
                    amplitude: eps.abs().sqrt() * amp_tilde,
                    a1: p.a1,
                    a2: p.a2,
                    mu_tilde: p.mu_tilde,
                    criticality: criticality_of(sign_eps),
                    residual: cert.residual,
                    iterations: cert.iterations,
                });
            }
            Err(e) => out.failures.push((eps, e.to_string())),
        }
    }
    let xs: Vec<f64> = out.samples.iter().map(|s| s.eps.abs().ln()).collect();
    let ys: Vec<f64> = out.samples.iter().map(|s| s.amplitude.ln()).collect();
    out.exponent = fit_slope(&xs, &ys);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanMinimum {
    pub r1: f64,
    pub r2: f64,
    pub phase: f64,
    pub mu_tilde: f64,
    pub residual: f64,
    /// Distance in (r1, r2, mu) to the nearest closed-form orbit.
    pub distance: f64,
}

/// Brute-force residual scan over (|a1|, |a2|, relative phase, mu) on a uniform grid.
/// Returns all interior discrete local minima (over r1, r2, mu neighbours) together with their
/// distance to the closed-form orbit set.
pub fn scan_residual_minima(c: &CubicCoefficients, sign_eps: i8, resolution: f64, n_phase: usize) -> Result<Vec<ScanMinimum>> {
    let branches = solve_cubic_equilibria(c, sign_eps)?;
    let amax = branches.iter().map(|b| b.amplitude).fold(0.0, f64::max).max(0.5);
    let mumax = branches.iter().map(|b| b.mu_star.abs()).fold(0.0, f64::max);
    let rmax = 2.0 * amax;
    let nr = (rmax / resolution).round() as usize + 1;
    let mu_lo = -(2.0 * mumax + 0.2);
    let nm = ((2.0 * (2.0 * mumax + 0.2)) / resolution).round() as usize + 1;
    let r_at = |i: usize| i as f64 * resolution;
    let mu_at = |i: usize| mu_lo + i as f64 * resolution;
    let mut out = Vec::new();
    for ip in 0..n_phase.max(1) {
        let phase = 2.0 * std::f64::consts::PI * ip as f64 / n_phase.max(1) as f64;
        let rot = C64::from_polar(1.0, phase);
        let mut grid = vec![0.0; nr * nr * nm];
        let idx = |i: usize, j: usize, k: usize| (i * nr + j) * nm + k;
        for i in 0..nr {
            for j in 0..nr {
                for k in 0..nm {
                    let p = ReducedPoint::new(C64::new(r_at(i), 0.0), rot * r_at(j), mu_at(k), sign_eps);
                    let (f1, f2) = evaluate_truncated(c, &p);
                    grid[idx(i, j, k)] = f1.norm_sqr() + f2.norm_sqr();
                }
            }
        }
        for i in 0..nr - 1 {
            for j in 0..nr - 1 {
                for k in 1..nm - 1 {
                    let v = grid[idx(i, j, k)];
                    let mut is_min = true;
                    'nb: for di in -1i64..=1 {
                        for dj in -1i64..=1 {
                            for dk in -1i64..=1 {
                                if di == 0 && dj == 0 && dk == 0 {
                                    continue;
                                }
                                let (ii, jj, kk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                                if ii < 0 || jj < 0 {
                                    continue;
                                }
                                if grid[idx(ii as usize, jj as usize, kk as usize)] < v {
                                    is_min = false;
                                    break 'nb;
                                }
                            }
                        }
                    }
                    if !is_min {
                        continue;
                    }
                    let (r1, r2, mu) = (r_at(i), r_at(j), mu_at(k));
                    let mut dist = (r1 * r1 + r2 * r2).sqrt();
                    for b in &branches {
                        let (t1, t2) = match b.kind {
                            BranchKind::Trivial => continue,
                            BranchKind::Traveling1 => (b.amplitude, 0.0),
                            BranchKind::Traveling2 => (0.0, b.amplitude),
                            BranchKind::Standing { .. } => (b.amplitude, b.amplitude),
                        };
                        let d = ((r1 - t1).powi(2) + (r2 - t2).powi(2) + (mu - b.mu_star).powi(2)).sqrt();
                        dist = dist.min(d);
                    }
                    out.push(ScanMinimum { r1, r2, phase, mu_tilde: mu, residual: v, distance: dist });
                }
            }
        }
    }
    Ok(out)
}
