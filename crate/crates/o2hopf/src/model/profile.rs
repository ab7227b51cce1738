use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::grid::Grid;
use crate::model::system::{ModelSystem, ProfileKind};

/// Sampled standing profile on the x1 grid, stored node-major (x1, component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockProfile {
    pub eps: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    /// Max residual of the discrete standing-wave equations on the interior.
    pub residual: f64,
    /// Max distance of the boundary samples from the endstates.
    pub boundary_gap: f64,
    /// Derivative of the discrete profile family with respect to translation, if any.
    pub translation: Option<Vec<f64>>,
}

impl ShockProfile {
    pub fn at(&self, j: usize) -> &[f64] {
        &self.u[j * self.n..(j + 1) * self.n]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.u.iter().skip(c).step_by(self.n).cloned().collect()
    }
}

pub const DEFAULT_PROFILE_TOL: f64 = 1e-8;

/// Closed-form profile sampled on the grid.
pub fn exact_profile(model: &ModelSystem, eps: f64, grid: &Grid) -> ShockProfile {
    let n = model.n();
    let x = grid.xs();
    let (um, up) = model.endstates(eps);
    let mut u = Vec::with_capacity(n * x.len());
    let mut du = Vec::with_capacity(n * x.len());
    for &xi in &x {
        u.extend(model.exact_profile(eps, xi));
        du.extend(model.exact_profile_derivative(eps, xi));
    }
    let gap = boundary_gap(&u, n, &um, &up);
    let translation = match model.profile_kind() {
        ProfileKind::Zero => None,
        ProfileKind::ScalarViscous => Some(du),
    };
    let mut p = ShockProfile { eps, n, x, u, u_minus: um, u_plus: up, residual: 0.0, boundary_gap: gap, translation };
    p.residual = discrete_residual(model, &p, grid.h());
    p
}

fn boundary_gap(u: &[f64], n: usize, um: &[f64], up: &[f64]) -> f64 {
    let last = u.len() / n - 1;
    (0..n)
        .map(|c| (u[c] - um[c]).abs().max((u[last * n + c] - up[c]).abs()))
        .fold(0.0, f64::max)
}

/// Residual of the discrete standing-wave equations (the interior part of the discrete right-hand side
/// restricted to x2-independent states): hyperbolic rows must have constant flux, viscous rows satisfy the
/// central-difference balance.
pub fn discrete_residual(model: &ModelSystem, p: &ShockProfile, h: f64) -> f64 {
    let n = p.n;
    let n1 = p.x.len();
    let hyp = n - model.r();
    let fl: Vec<Vec<f64>> = (0..n1).map(|j| model.flux1(p.eps, p.at(j))).collect();
    let b = model.viscosity(0, 0);
    let mut res: f64 = 0.0;
    for j in 1..n1 - 1 {
        let g = model.source(p.eps, p.x[j], p.at(j));
        for c in 0..n {
            let v = if c < hyp {
                (fl[j][c] - fl[j - 1][c]) / h
            } else {
                let mut diff = 0.0;
                for cc in 0..n {
                    diff += b[c * n + cc] * (p.u[(j + 1) * n + cc] - 2.0 * p.u[j * n + cc] + p.u[(j - 1) * n + cc]) / (h * h);
                }
                diff - (fl[j + 1][c] - fl[j - 1][c]) / (2.0 * h) + g[c]
            };
            res = res.max(v.abs());
        }
    }
    res
}

struct Scalar<'a> {
    model: &'a ModelSystem,
    eps: f64,
    um: Vec<f64>,
    b: f64,
    hyp: usize,
}

impl Scalar<'_> {
    /// Full state from the viscous component by slaving the hyperbolic fluxes to their u_- values.
    fn state(&self, s: f64) -> Vec<f64> {
        let n = self.model.n();
        let hyp = self.hyp;
        let mut u = self.um.clone();
        u[hyp] = s;
        // hyperbolic fluxes are linear: solve A_hh u_h = A_hh u_-h - A_hv (s - s_-)
        let a = self.model.jac1(self.eps, &u);
        if hyp > 0 {
            let mut m = vec![vec![0.0; hyp]; hyp];
            let mut rhs = vec![0.0; hyp];
            for i in 0..hyp {
                for j in 0..hyp {
                    m[i][j] = a[i * n + j];
                }
                rhs[i] = -a[i * n + hyp] * (s - self.um[hyp]);
            }
            let du = solve_small(m, rhs);
            for i in 0..hyp {
                u[i] = self.um[i] + du[i];
            }
        }
        u
    }

    fn g(&self, s: f64) -> f64 {
        let f = self.model.flux1(self.eps, &self.state(s));
        let f0 = self.model.flux1(self.eps, &self.um);
        (f[self.hyp] - f0[self.hyp]) / self.b
    }

    fn dg(&self, s: f64) -> f64 {
        let n = self.model.n();
        let u = self.state(s);
        let du: Vec<f64> = self.state(s + 1.0).iter().zip(&u).map(|(a, b)| a - b).collect();
        let a = self.model.jac1(self.eps, &u);
        (0..n).map(|c| a[self.hyp * n + c] * du[c]).sum::<f64>() / self.b
    }
}

fn solve_small(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, p);
        r.swap(c, p);
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            for j in c..n {
                m[i][j] -= f * m[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    x
}

/// One implicit trapezoid step s_next - s - (h/2)(g(s_next) + g(s)) = 0, signed step `h`.
fn trapezoid_step(sc: &Scalar, s: f64, h: f64) -> Result<f64> {
    let gs = sc.g(s);
    let mut y = s + h * gs;
    for _ in 0..60 {
        let f = y - s - 0.5 * h * (sc.g(y) + gs);
        let df = 1.0 - 0.5 * h * sc.dg(y);
        let dy = f / df;
        y -= dy;
        if dy.abs() < 1e-15 * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    let f = y - s - 0.5 * h * (sc.g(y) + gs);
    if f.abs() < 1e-13 {
        Ok(y)
    } else {
        Err(Error::NoProfile(format!("trapezoid step did not converge (residual {f:e})")))
    }
}

/// Discrete standing profile: hyperbolic components slaved algebraically, the viscous component
/// marched outward from x1 = 0 by the implicit trapezoid rule, which makes the samples an exact
/// equilibrium of the discrete right-hand side. The center is pinned at the endstate midpoint.
pub fn solve_profile(model: &ModelSystem, eps: f64, grid: &Grid) -> Result<ShockProfile> {
    solve_profile_with_tol(model, eps, grid, DEFAULT_PROFILE_TOL)
}

pub fn solve_profile_with_tol(model: &ModelSystem, eps: f64, grid: &Grid, tol: f64) -> Result<ShockProfile> {
    model.validate()?;
    let n = model.n();
    let x = grid.xs();
    let n1 = grid.n1;
    let (um, up) = model.endstates(eps);
    if model.profile_kind() == ProfileKind::Zero {
        let u = vec![0.0; n * n1];
        let mut p = ShockProfile { eps, n, x, u, u_minus: um, u_plus: up, residual: 0.0, boundary_gap: 0.0, translation: None };
        p.residual = discrete_residual(model, &p, grid.h());
        return Ok(p);
    }
    let hyp = n - model.r();
    let b = model.viscosity(0, 0)[hyp * n + hyp];
    let sc = Scalar { model, eps, um: um.clone(), b, hyp };
    let h = grid.h();
    let mid = 0.5 * (um[hyp] + up[hyp]);
    let mut s = vec![0.0; n1];
    let (lo, hi) = if n1 % 2 == 1 {
        let c = n1 / 2;
        s[c] = mid;
        (c, c)
    } else {
        // two center nodes straddle x1 = 0: their mean is pinned and they obey one trapezoid step
        let c = n1 / 2;
        let mut d = 0.5 * h * sc.g(mid);
        for _ in 0..60 {
            let (a, bb) = (mid - d, mid + d);
            let f = 2.0 * d - 0.5 * h * (sc.g(a) + sc.g(bb));
            let df = 2.0 - 0.5 * h * (sc.dg(bb) - sc.dg(a));
            let step = f / df;
            d -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        s[c - 1] = mid - d;
        s[c] = mid + d;
        (c - 1, c)
    };
    for j in hi..n1 - 1 {
        s[j + 1] = trapezoid_step(&sc, s[j], h)?;
        if !s[j + 1].is_finite() {
            return Err(Error::NoProfile("profile march diverged".into()));
        }
    }
    for j in (1..=lo).rev() {
        s[j - 1] = trapezoid_step(&sc, s[j], -h)?;
        if !s[j - 1].is_finite() {
            return Err(Error::NoProfile("profile march diverged".into()));
        }
    }
    let mut u = Vec::with_capacity(n * n1);
    for &sj in &s {
        u.extend(sc.state(sj));
    }
    // translation mode: linearized trapezoid recursion seeded with the ODE slope at the center
    let mut d = vec![0.0; n1];
    let gp: Vec<f64> = s.iter().map(|&v| sc.dg(v)).collect();
    if lo == hi {
        d[lo] = sc.g(s[lo]);
    } else {
        d[lo] = sc.g(s[lo]);
        d[hi] = d[lo] * (1.0 / h + gp[lo] / 2.0) / (1.0 / h - gp[hi] / 2.0);
    }
    for j in hi..n1 - 1 {
        d[j + 1] = d[j] * (1.0 / h + gp[j] / 2.0) / (1.0 / h - gp[j + 1] / 2.0);
    }
    for j in (1..=lo).rev() {
        d[j - 1] = d[j] * (1.0 / h - gp[j] / 2.0) / (1.0 / h + gp[j - 1] / 2.0);
    }
    let mut tr = Vec::with_capacity(n * n1);
    for (j, &dj) in d.iter().enumerate() {
        let base = sc.state(s[j]);
        let pert = sc.state(s[j] + 1.0);
        for c in 0..n {
            tr.push((pert[c] - base[c]) * dj);
        }
    }
    let gap = boundary_gap(&u, n, &um, &up);
    let mut p = ShockProfile { eps, n, x, u, u_minus: um, u_plus: up, residual: 0.0, boundary_gap: gap, translation: Some(tr) };
    p.residual = discrete_residual(model, &p, h);
    if gap > tol {
        return Err(Error::NoProfile(format!("endstate gap {gap:e} at |x1| = L exceeds {tol:e}")));
    }
    if p.residual > 1e-10 {
        return Err(Error::NoProfile(format!("discrete profile residual {:e}", p.residual)));
    }
    Ok(p)
}
