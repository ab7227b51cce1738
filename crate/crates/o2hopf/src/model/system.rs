use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};

/// Quasilinear transport model: one hyperbolic component coupled to a viscous Burgers component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M1Params {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub b: f64,
    pub s0: f64,
}

impl Default for M1Params {
    fn default() -> Self {
        M1Params { c1: 1.0, c2: 0.5, c3: 0.5, b: 0.5, s0: 1.0 }
    }
}

/// Semilinear reaction-diffusion-advection model with a localized oscillatory source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M0Params {
    pub b: f64,
    pub b_w: f64,
    pub a: f64,
    pub d: f64,
    pub alpha_c: f64,
    pub beta: f64,
    pub tau: f64,
    pub sigma: f64,
    pub delta: f64,
    pub ell: f64,
    pub nu: f64,
    pub q: f64,
}

impl Default for M0Params {
    fn default() -> Self {
        M0Params {
            b: 0.2,
            b_w: 4.0,
            a: 0.1,
            d: 0.3,
            alpha_c: 1.2332,
            beta: 1.0,
            tau: 2.0,
            sigma: 2.0,
            delta: 1.0,
            ell: 1.0,
            nu: 1.0,
            q: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ModelSystem {
    M0(M0Params),
    M1(M1Params),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// The profile is identically zero.
    Zero,
    /// One viscous component; hyperbolic components are slaved algebraically.
    ScalarViscous,
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

impl ModelSystem {
    pub fn m0() -> Self {
        ModelSystem::M0(M0Params::default())
    }

    pub fn m1() -> Self {
        ModelSystem::M1(M1Params::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSystem::M0(_) => "m0",
            ModelSystem::M1(_) => "m1",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSystem::M0(_) => 3,
            ModelSystem::M1(_) => 2,
        }
    }

    pub fn r(&self) -> usize {
        match self {
            ModelSystem::M0(_) => 3,
            ModelSystem::M1(_) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSystem::M0(p) => {
                if !(p.b > 0.0 && p.b_w > 0.0 && p.ell > 0.0) {
                    return Err(Error::InvalidInput("m0 diffusion and width must be positive".into()));
                }
            }
            ModelSystem::M1(p) => {
                if !(p.b > 0.0 && p.c1 > 0.0 && p.s0 > 0.0) {
                    return Err(Error::InvalidInput("m1 needs b > 0, c1 > 0, s0 > 0".into()));
                }
                if p.c2 * p.c3 < 0.0 || (p.c2 == 0.0) != (p.c3 == 0.0) {
                    return Err(Error::InvalidInput("m1 needs c2 c3 > 0 or c2 = c3 = 0 for symmetrizability".into()));
                }
            }
        }
        Ok(())
    }

    /// First-direction flux F^1.
    pub fn flux1(&self, _eps: f64, u: &[f64]) -> Vec<f64> {
        match self {
            ModelSystem::M0(p) => u.iter().map(|v| p.a * v).collect(),
            ModelSystem::M1(p) => vec![p.c1 * u[0] + p.c2 * u[1], p.c3 * u[0] + 0.5 * u[1] * u[1]],
        }
    }

    pub fn flux2(&self, _eps: f64, u: &[f64]) -> Vec<f64> {
        vec![0.0; u.len()]
    }

    /// Row-major A^1 = dF^1/du.
    pub fn jac1(&self, _eps: f64, u: &[f64]) -> Vec<f64> {
        match self {
            ModelSystem::M0(p) => {
                let mut a = vec![0.0; 9];
                a[0] = p.a;
                a[4] = p.a;
                a[8] = p.a;
                a
            }
            ModelSystem::M1(p) => vec![p.c1, p.c2, p.c3, u[1]],
        }
    }

    pub fn jac2(&self, _eps: f64, u: &[f64]) -> Vec<f64> {
        vec![0.0; u.len() * u.len()]
    }

    fn diffusion_diag(&self) -> Vec<f64> {
        match self {
            ModelSystem::M0(p) => vec![p.b, p.b, p.b_w],
            ModelSystem::M1(p) => vec![0.0, p.b],
        }
    }

    /// Constant viscosity B^{jk} (row-major n x n); only the lower-right r x r block is nonzero.
    pub fn viscosity(&self, j: usize, k: usize) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        if j == k {
            for (i, d) in self.diffusion_diag().into_iter().enumerate() {
                out[i * n + i] = d;
            }
        }
        out
    }

    pub fn source(&self, eps: f64, x: f64, u: &[f64]) -> Vec<f64> {
        match self {
            ModelSystem::M0(p) => {
                let s = sech2(x / p.ell);
                let al = p.alpha_c + eps;
                let r2 = u[0] * u[0] + u[1] * u[1];
                vec![
                    (-p.d + al * s) * u[0] - p.beta * s * u[1] - p.tau * u[2] - p.nu * s * r2 * u[0],
                    p.beta * s * u[0] + (-p.d + al * s) * u[1] - p.nu * s * r2 * u[1],
                    p.sigma * u[0] - p.delta * u[2] + p.q * s * u[0] * u[0],
                ]
            }
            ModelSystem::M1(_) => vec![0.0; 2],
        }
    }

    /// Row-major dG/du.
    pub fn source_jac(&self, eps: f64, x: f64, u: &[f64]) -> Vec<f64> {
        match self {
            ModelSystem::M0(p) => {
                let s = sech2(x / p.ell);
                let al = p.alpha_c + eps;
                let (a, b) = (u[0], u[1]);
                let r2 = a * a + b * b;
                vec![
                    -p.d + al * s - p.nu * s * (r2 + 2.0 * a * a),
                    -p.beta * s - 2.0 * p.nu * s * a * b,
                    -p.tau,
                    p.beta * s - 2.0 * p.nu * s * a * b,
                    -p.d + al * s - p.nu * s * (r2 + 2.0 * b * b),
                    0.0,
                    p.sigma + 2.0 * p.q * s * a,
                    0.0,
                    -p.delta,
                ]
            }
            ModelSystem::M1(_) => vec![0.0; 4],
        }
    }

    /// Exact Taylor remainders (R^1, R^2, R^G) of (F^1, F^2, G) at base state `ub` in direction `v`.
    pub fn remainder(&self, _eps: f64, x: f64, ub: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self {
            ModelSystem::M0(p) => {
                let s = sech2(x / p.ell);
                let (a0, b0) = (ub[0], ub[1]);
                let (a, b) = (v[0], v[1]);
                // cubic c(u) = -nu s |u|^2 u expanded about the base state
                let cub = |base: f64, dir: f64| -> f64 {
                    let r2_full = (a0 + a) * (a0 + a) + (b0 + b) * (b0 + b);
                    let r2_base = a0 * a0 + b0 * b0;
                    let dr2 = 2.0 * (a0 * a + b0 * b);
                    -p.nu * s * (r2_full * (base + dir) - r2_base * base - r2_base * dir - dr2 * base)
                };
                let rg = vec![cub(a0, a), cub(b0, b), p.q * s * a * a];
                (vec![0.0; 3], vec![0.0; 3], rg)
            }
            ModelSystem::M1(_) => (vec![0.0, 0.5 * v[1] * v[1]], vec![0.0; 2], vec![0.0; 2]),
        }
    }

    /// Diagonal of the reflection matrix M.
    pub fn reflection(&self) -> Vec<f64> {
        vec![1.0; self.n()]
    }

    /// Endstates (u_-, u_+).
    pub fn endstates(&self, eps: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            ModelSystem::M0(_) => (vec![0.0; 3], vec![0.0; 3]),
            ModelSystem::M1(p) => {
                let s = p.s0 + eps;
                let beta = if p.c1 != 0.0 { p.c2 * p.c3 / p.c1 } else { 0.0 };
                let u2m = beta + s;
                let u2p = beta - s;
                let u1m = 0.0;
                let u1p = u1m - p.c2 / p.c1 * (u2p - u2m);
                (vec![u1m, u2m], vec![u1p, u2p])
            }
        }
    }

    pub fn profile_kind(&self) -> ProfileKind {
        match self {
            ModelSystem::M0(_) => ProfileKind::Zero,
            ModelSystem::M1(_) => ProfileKind::ScalarViscous,
        }
    }

    /// Closed-form standing profile centered at x = 0.
    pub fn exact_profile(&self, eps: f64, x: f64) -> Vec<f64> {
        match self {
            ModelSystem::M0(_) => vec![0.0; 3],
            ModelSystem::M1(p) => {
                let s = p.s0 + eps;
                let beta = p.c2 * p.c3 / p.c1;
                let u2 = beta - s * (s * x / (2.0 * p.b)).tanh();
                let (um, _) = self.endstates(eps);
                vec![um[0] - p.c2 / p.c1 * (u2 - um[1]), u2]
            }
        }
    }

    /// Derivative of the closed-form profile.
    pub fn exact_profile_derivative(&self, eps: f64, x: f64) -> Vec<f64> {
        match self {
            ModelSystem::M0(_) => vec![0.0; 3],
            ModelSystem::M1(p) => {
                let s = p.s0 + eps;
                let d2 = -s * s / (2.0 * p.b) * sech2(s * x / (2.0 * p.b));
                vec![-p.c2 / p.c1 * d2, d2]
            }
        }
    }

    /// Diagonal symmetrizer A^0 with A^0 A^1 symmetric and A^0 B^{jk} positive on the viscous block.
    pub fn symmetrizer(&self, _eps: f64, _u: &[f64]) -> Vec<f64> {
        match self {
            ModelSystem::M0(_) => vec![1.0; 3],
            ModelSystem::M1(p) => {
                if p.c2 == 0.0 {
                    vec![1.0, 1.0]
                } else {
                    vec![p.c3 / p.c2, 1.0]
                }
            }
        }
    }

    /// Signs of the (constant) hyperbolic characteristic speeds, used for upwinding.
    pub fn upwind_signs(&self) -> Vec<f64> {
        let n = self.n();
        let h = n - self.r();
        let (um, _) = self.endstates(0.0);
        let a = self.jac1(0.0, &um);
        (0..h).map(|i| if a[i * n + i] >= 0.0 { 1.0 } else { -1.0 }).collect()
    }

    /// Largest characteristic speed magnitude over the endstates and the profile range.
    pub fn max_speed(&self, eps: f64) -> f64 {
        let (um, up) = self.endstates(eps);
        let n = self.n();
        let mut m: f64 = 0.0;
        for u in [um, up] {
            let a = self.jac1(eps, &u);
            for i in 0..n {
                let row: f64 = (0..n).map(|j| a[i * n + j].abs()).sum();
                m = m.max(row);
            }
        }
        m
    }

    /// Number of Evans-system unknowns.
    pub fn evans_dim(&self) -> usize {
        match self {
            ModelSystem::M0(_) => 6,
            ModelSystem::M1(_) => 3,
        }
    }

    /// Dimension of the subspace decaying at -infinity (unstable at -infinity).
    pub fn evans_p(&self) -> usize {
        match self {
            ModelSystem::M0(_) => 3,
            ModelSystem::M1(_) => 1,
        }
    }

    /// First-order system W' = A(x, lambda) W equivalent to (lambda - L_k) v = 0.
    pub fn evans_matrix(&self, eps: f64, k: i64, lambda: C64, x: f64, ub: &[f64]) -> CMat {
        let kk = (k * k) as f64;
        match self {
            ModelSystem::M0(p) => {
                let gu = self.source_jac(eps, x, ub);
                let bd = [p.b, p.b, p.b_w];
                CMat::from_fn(6, 6, |i, j| {
                    if i < 3 {
                        if j == i + 3 {
                            ONE
                        } else {
                            ZERO
                        }
                    } else {
                        let r = i - 3;
                        if j < 3 {
                            let mut v = C64::new(-gu[r * 3 + j], 0.0);
                            if r == j {
                                v += lambda + kk * bd[r];
                            }
                            v / bd[r]
                        } else if j - 3 == r {
                            C64::new(p.a / bd[r], 0.0)
                        } else {
                            ZERO
                        }
                    }
                })
            }
            ModelSystem::M1(p) => {
                let u2 = ub[1];
                let cb = p.c1 * p.b;
                let mut a = CMat::zeros(3, 3);
                a[(0, 0)] = -lambda / p.c1 - C64::new(p.c2 * p.c3 / cb, 0.0);
                a[(0, 1)] = C64::new(-p.c2 * u2 / cb, 0.0);
                a[(0, 2)] = C64::new(-p.c2 / cb, 0.0);
                a[(1, 0)] = C64::new(p.c3 / p.b, 0.0);
                a[(1, 1)] = C64::new(u2 / p.b, 0.0);
                a[(1, 2)] = C64::new(1.0 / p.b, 0.0);
                a[(2, 1)] = lambda + p.b * kk;
                a
            }
        }
    }

    /// Number of endstate eigenvalues of the Evans matrix that vanish as lambda -> 0 (slow modes).
    pub fn evans_slow_modes(&self, k: i64) -> usize {
        match self {
            ModelSystem::M1(_) if k == 0 => 2,
            _ => 0,
        }
    }

    /// Parameter value entering the model at a given eps (M1: shock strength, M0: source gain).
    pub fn parameter_at(&self, eps: f64) -> f64 {
        match self {
            ModelSystem::M0(p) => p.alpha_c + eps,
            ModelSystem::M1(p) => p.s0 + eps,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub draws: usize,
    pub block_form: bool,
    pub linear_hyperbolic_defect: f64,
    pub ellipticity_theta: f64,
    pub reflection_defect: f64,
    pub symmetrizer_defect: f64,
}

impl StructuralReport {
    pub fn all_hold(&self) -> bool {
        self.block_form
            && self.linear_hyperbolic_defect < 1e-6
            && self.ellipticity_theta > 0.0
            && self.reflection_defect < 1e-12
            && self.symmetrizer_defect < 1e-12
    }
}

/// Randomized structural self-checks: block form of the viscosity, linearity of the hyperbolic
/// fluxes, ellipticity of the viscous block, reflection equivariance and symmetrizability.
pub fn structural_check<R: Rng>(model: &ModelSystem, eps: f64, draws: usize, rng: &mut R) -> StructuralReport {
    let n = model.n();
    let r = model.r();
    let h = n - r;
    let mut block_form = true;
    for j in 0..2 {
        for k in 0..2 {
            let b = model.viscosity(j, k);
            for row in 0..n {
                for col in 0..n {
                    if (row < h || col < h) && b[row * n + col] != 0.0 {
                        block_form = false;
                    }
                }
            }
        }
    }
    let m = model.reflection();
    let mut lin: f64 = 0.0;
    let mut theta = f64::INFINITY;
    let mut refl: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let fd = 1e-3;
    for _ in 0..draws {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + fd * b).collect();
        let um: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - fd * b).collect();
        for f in [ModelSystem::flux1 as fn(&ModelSystem, f64, &[f64]) -> Vec<f64>, ModelSystem::flux2] {
            let (fp, f0, fm) = (f(model, eps, &up), f(model, eps, &u), f(model, eps, &um));
            for i in 0..h {
                let second = (fp[i] - 2.0 * f0[i] + fm[i]) / (fd * fd);
                lin = lin.max(second.abs());
            }
        }
        let a0 = model.symmetrizer(eps, &u);
        let v1: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v2: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vs = [&v1, &v2];
        let mut quad = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                let b = model.viscosity(j, k);
                for p in 0..r {
                    for q in 0..r {
                        quad += vs[j][p] * a0[h + p] * b[(h + p) * n + h + q] * vs[k][q];
                    }
                }
            }
        }
        let vnorm: f64 = v1.iter().chain(v2.iter()).map(|x| x * x).sum();
        if vnorm > 0.0 {
            theta = theta.min(quad / vnorm);
        }
        let mu: Vec<f64> = u.iter().zip(&m).map(|(a, b)| a * b).collect();
        let f1 = model.flux1(eps, &u);
        let f1m = model.flux1(eps, &mu);
        let f2 = model.flux2(eps, &u);
        let f2m = model.flux2(eps, &mu);
        for i in 0..n {
            refl = refl.max((f1m[i] - m[i] * f1[i]).abs()).max((f2m[i] + m[i] * f2[i]).abs());
        }
        let a1 = model.jac1(eps, &u);
        for i in 0..n {
            for j in 0..n {
                sym = sym.max((a0[i] * a1[i * n + j] - a0[j] * a1[j * n + i]).abs());
            }
        }
    }
    StructuralReport {
        draws,
        block_form,
        linear_hyperbolic_defect: lin,
        ellipticity_theta: theta,
        reflection_defect: refl,
        symmetrizer_defect: sym,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn both_models_pass_structural_checks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in [ModelSystem::m0(), ModelSystem::m1()] {
            let rep = structural_check(&m, 0.0, 1000, &mut rng);
            assert!(rep.all_hold(), "{rep:?}");
        }
    }

    #[test]
    fn remainders_are_exact() {
        for m in [ModelSystem::m0(), ModelSystem::m1()] {
            let n = m.n();
            let ub: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.2).collect();
            let v: Vec<f64> = (0..n).map(|i| 0.7 - 0.4 * i as f64).collect();
            let x = 0.4;
            let uv: Vec<f64> = ub.iter().zip(&v).map(|(a, b)| a + b).collect();
            let (r1, _, rg) = m.remainder(0.1, x, &ub, &v);
            let (f, f0, a) = (m.flux1(0.1, &uv), m.flux1(0.1, &ub), m.jac1(0.1, &ub));
            let (g, g0, gu) = (m.source(0.1, x, &uv), m.source(0.1, x, &ub), m.source_jac(0.1, x, &ub));
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                let gv: f64 = (0..n).map(|j| gu[i * n + j] * v[j]).sum();
                assert!((f[i] - f0[i] - av - r1[i]).abs() < 1e-14);
                assert!((g[i] - g0[i] - gv - rg[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn source_jacobian_matches_differences() {
        let m = ModelSystem::m0();
        let u = [0.3, -0.2, 0.5];
        let gu = m.source_jac(0.05, 0.3, &u);
        let h = 1e-6;
        for j in 0..3 {
            let mut up = u;
            let mut dn = u;
            up[j] += h;
            dn[j] -= h;
            let gp = m.source(0.05, 0.3, &up);
            let gm = m.source(0.05, 0.3, &dn);
            for i in 0..3 {
                assert!(((gp[i] - gm[i]) / (2.0 * h) - gu[i * 3 + j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn m1_exact_profile_connects_endstates_and_solves_the_ode() {
        let m = ModelSystem::m1();
        let eps = 0.05;
        let (um, up) = m.endstates(eps);
        let a = m.exact_profile(eps, -40.0);
        let b = m.exact_profile(eps, 40.0);
        for i in 0..2 {
            assert!((a[i] - um[i]).abs() < 1e-12);
            assert!((b[i] - up[i]).abs() < 1e-12);
        }
        let ModelSystem::M1(p) = m else { unreachable!() };
        for x in [-2.0, 0.0, 0.7] {
            let u = m.exact_profile(eps, x);
            let du = m.exact_profile_derivative(eps, x);
            let f = m.flux1(eps, &u);
            let f0 = m.flux1(eps, &um);
            assert!((f[0] - f0[0]).abs() < 1e-13);
            assert!((p.b * du[1] - (f[1] - f0[1])).abs() < 1e-13);
        }
    }
}
