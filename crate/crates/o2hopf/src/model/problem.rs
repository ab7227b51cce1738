use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};
use crate::model::field::ChannelField;
use crate::model::grid::Grid;
use crate::model::profile::{self, ShockProfile};
use crate::model::system::ModelSystem;

/// ETD2RK propagators (e^{hL}, h phi1(hL), h phi2(hL)) for one Fourier mode.
pub struct Propagator {
    pub e: CMat,
    pub p1: CMat,
    pub p2: CMat,
}

type Stencil = Vec<(usize, f64)>;

const CACHE_CAP: usize = 12;

/// A model linearized about a standing profile on a fixed grid: the mode operators L_k, the
/// pseudo-spectral nonlinearity and cached propagators.
pub struct Problem {
    pub model: ModelSystem,
    pub eps: f64,
    pub grid: Grid,
    pub profile: ShockProfile,
    /// Drop the nonlinear remainder (linear model).
    pub linear_only: bool,
    n: usize,
    a1: Vec<Vec<f64>>,
    a2: Vec<Vec<f64>>,
    gu: Vec<Vec<f64>>,
    b: [Vec<f64>; 4],
    /// d/dx1 stencils per (component, node), all nodes interior to the grid.
    d1: Vec<Vec<Stencil>>,
    lk: Vec<CMat>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub(crate) etd_cache: Mutex<HashMap<u64, Arc<Vec<Propagator>>>>,
    pub(crate) expm_cache: Mutex<HashMap<u64, Arc<Vec<CMat>>>>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("model", &self.model).field("eps", &self.eps).field("grid", &self.grid).finish()
    }
}

impl Problem {
    /// Builds the problem on the discrete standing profile.
    pub fn new(model: ModelSystem, eps: f64, grid: Grid) -> Result<Self> {
        let p = profile::solve_profile(&model, eps, &grid)?;
        Self::with_profile(model, eps, grid, p)
    }

    pub fn with_profile(model: ModelSystem, eps: f64, grid: Grid, profile: ShockProfile) -> Result<Self> {
        model.validate()?;
        let n = model.n();
        if profile.n != n || profile.x.len() != grid.n1 {
            return Err(Error::InvalidInput("profile does not match model and grid".into()));
        }
        let n1 = grid.n1;
        let a1: Vec<Vec<f64>> = (0..n1).map(|j| model.jac1(eps, profile.at(j))).collect();
        let a2: Vec<Vec<f64>> = (0..n1).map(|j| model.jac2(eps, profile.at(j))).collect();
        let gu: Vec<Vec<f64>> = (0..n1).map(|j| model.source_jac(eps, profile.x[j], profile.at(j))).collect();
        let b = [model.viscosity(0, 0), model.viscosity(0, 1), model.viscosity(1, 0), model.viscosity(1, 1)];
        let hyp = n - model.r();
        let signs = model.upwind_signs();
        let h = grid.h();
        let mut d1 = vec![vec![Vec::new(); n1]; n];
        for (c, row) in d1.iter_mut().enumerate() {
            for j in 1..n1 - 1 {
                row[j] = if c < hyp {
                    if signs[c] > 0.0 {
                        if j == 1 {
                            vec![(j, 1.0 / h), (j - 1, -1.0 / h)]
                        } else {
                            vec![(j, 1.5 / h), (j - 1, -2.0 / h), (j - 2, 0.5 / h)]
                        }
                    } else if j == n1 - 2 {
                        vec![(j + 1, 1.0 / h), (j, -1.0 / h)]
                    } else {
                        vec![(j, -1.5 / h), (j + 1, 2.0 / h), (j + 2, -0.5 / h)]
                    }
                } else {
                    vec![(j + 1, 0.5 / h), (j - 1, -0.5 / h)]
                };
            }
        }
        let m2 = grid.m2();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m2);
        let inv = planner.plan_fft_inverse(m2);
        let mut pb = Problem {
            model,
            eps,
            grid,
            profile,
            linear_only: false,
            n,
            a1,
            a2,
            gu,
            b,
            d1,
            lk: Vec::new(),
            fwd,
            inv,
            etd_cache: Mutex::new(HashMap::new()),
            expm_cache: Mutex::new(HashMap::new()),
        };
        pb.lk = (0..=grid.k_max as i64).map(|k| pb.assemble(k)).collect();
        Ok(pb)
    }

    pub fn linear(mut self) -> Self {
        self.linear_only = true;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Interior unknowns per mode.
    pub fn dim(&self) -> usize {
        self.grid.m() * self.n
    }

    /// Cached mode operator for 0 <= k <= K.
    pub fn lk(&self, k: usize) -> &CMat {
        &self.lk[k]
    }

    pub fn d1_stencil(&self, c: usize, j: usize) -> &[(usize, f64)] {
        &self.d1[c][j]
    }

    /// Mode operator L_k on interior nodes with homogeneous Dirichlet closure, for any integer k.
    pub fn assemble(&self, k: i64) -> CMat {
        let n = self.n;
        let m = self.grid.m();
        let n1 = self.grid.n1;
        let h = self.grid.h();
        let kf = k as f64;
        let ik = C64::new(0.0, kf);
        let dim = m * n;
        let mut l = CMat::zeros(dim, dim);
        let col = |j: usize, c: usize| -> Option<usize> {
            if j >= 1 && j <= n1 - 2 {
                Some((j - 1) * n + c)
            } else {
                None
            }
        };
        let [b11, b12, b21, b22] = &self.b;
        for j in 1..n1 - 1 {
            for c in 0..n {
                let row = (j - 1) * n + c;
                for cc in 0..n {
                    let d = b11[c * n + cc];
                    if d != 0.0 {
                        for (jj, w) in [(j - 1, 1.0), (j, -2.0), (j + 1, 1.0)] {
                            if let Some(q) = col(jj, cc) {
                                l[(row, q)] += C64::new(d * w / (h * h), 0.0);
                            }
                        }
                    }
                    let d22 = b22[c * n + cc];
                    if d22 != 0.0 {
                        l[(row, (j - 1) * n + cc)] += C64::new(-kf * kf * d22, 0.0);
                    }
                    let x = b12[c * n + cc] + b21[c * n + cc];
                    if x != 0.0 && k != 0 {
                        for (jj, w) in [(j - 1, -0.5 / h), (j + 1, 0.5 / h)] {
                            if let Some(q) = col(jj, cc) {
                                l[(row, q)] += ik * x * w;
                            }
                        }
                    }
                    let a2 = self.a2[j][c * n + cc];
                    if a2 != 0.0 {
                        l[(row, (j - 1) * n + cc)] -= ik * a2;
                    }
                    let g = self.gu[j][c * n + cc];
                    if g != 0.0 {
                        l[(row, (j - 1) * n + cc)] += C64::new(g, 0.0);
                    }
                }
                for &(jj, w) in &self.d1[c][j] {
                    for cc in 0..n {
                        let a = self.a1[jj][c * n + cc];
                        if a != 0.0 {
                            if let Some(q) = col(jj, cc) {
                                l[(row, q)] -= C64::new(w * a, 0.0);
                            }
                        }
                    }
                }
            }
        }
        l
    }

    /// Physical samples at x2_q = 2 pi q / M2, laid out ((j M2 + q) n + c).
    pub fn to_physical(&self, f: &ChannelField) -> Vec<f64> {
        let (n, n1, kmax) = (self.n, self.grid.n1, self.grid.k_max);
        let m2 = self.grid.m2();
        let mut out = vec![0.0; n1 * m2 * n];
        let mut buf = vec![ZERO; m2];
        for j in 0..n1 {
            for c in 0..n {
                buf.iter_mut().for_each(|v| *v = ZERO);
                buf[0] = C64::new(f.get(0, j, c).re, 0.0);
                let mut any = buf[0] != ZERO;
                for k in 1..=kmax {
                    let v = f.get(k, j, c);
                    buf[k] = v;
                    buf[m2 - k] = v.conj();
                    any |= v != ZERO;
                }
                if !any {
                    continue;
                }
                self.inv.process(&mut buf);
                for q in 0..m2 {
                    out[(j * m2 + q) * n + c] = buf[q].re;
                }
            }
        }
        out
    }

    /// Fourier coefficients 0..=K of physical samples laid out as in `to_physical`.
    pub fn from_physical(&self, phys: &[f64]) -> ChannelField {
        let (n, n1, kmax) = (self.n, self.grid.n1, self.grid.k_max);
        let m2 = self.grid.m2();
        let mut f = ChannelField::zeros(n, &self.grid);
        let mut buf = vec![ZERO; m2];
        let scale = 1.0 / m2 as f64;
        for j in 0..n1 {
            for c in 0..n {
                let mut any = false;
                for q in 0..m2 {
                    let v = phys[(j * m2 + q) * n + c];
                    any |= v != 0.0;
                    buf[q] = C64::new(v, 0.0);
                }
                if !any {
                    continue;
                }
                self.fwd.process(&mut buf);
                for k in 0..=kmax {
                    f.set(k, j, c, buf[k] * scale);
                }
            }
        }
        f.enforce_reality();
        f
    }

    /// -d/dx1 R1 - i k R2 + RG on interior nodes, boundary left at zero.
    fn assemble_divergence(&self, r1: &ChannelField, r2: Option<&ChannelField>, rg: &ChannelField) -> ChannelField {
        let (n, n1) = (self.n, self.grid.n1);
        let mut out = ChannelField::zeros(n, &self.grid);
        for k in 0..=self.grid.k_max {
            let ik = C64::new(0.0, k as f64);
            for j in 1..n1 - 1 {
                for c in 0..n {
                    let mut v = rg.get(k, j, c);
                    for &(jj, w) in &self.d1[c][j] {
                        v -= r1.get(k, jj, c) * w;
                    }
                    if let Some(r2) = r2 {
                        v -= ik * r2.get(k, j, c);
                    }
                    out.set(k, j, c, v);
                }
            }
        }
        out.enforce_reality();
        out
    }

    /// Nonlinear remainder N(v) = F_h(u + v) - F_h(u) - L v, evaluated pseudo-spectrally with
    /// exact de-aliasing of up to cubic terms.
    pub fn nonlinear(&self, v: &ChannelField) -> ChannelField {
        if self.linear_only {
            return v.zeros_like();
        }
        let (n, n1) = (self.n, self.grid.n1);
        let m2 = self.grid.m2();
        let phys = self.to_physical(v);
        let len = phys.len();
        let mut r1 = vec![0.0; len];
        let mut r2 = vec![0.0; len];
        let mut rg = vec![0.0; len];
        let mut any2 = false;
        for j in 0..n1 {
            let x = self.profile.x[j];
            let ub = self.profile.at(j);
            for q in 0..m2 {
                let o = (j * m2 + q) * n;
                let vv = &phys[o..o + n];
                if vv.iter().all(|&z| z == 0.0) {
                    continue;
                }
                let (a, b, c) = self.model.remainder(self.eps, x, ub, vv);
                r1[o..o + n].copy_from_slice(&a);
                any2 |= b.iter().any(|&z| z != 0.0);
                r2[o..o + n].copy_from_slice(&b);
                rg[o..o + n].copy_from_slice(&c);
            }
        }
        let r1 = self.from_physical(&r1);
        let r2 = if any2 { Some(self.from_physical(&r2)) } else { None };
        let rg = self.from_physical(&rg);
        self.assemble_divergence(&r1, r2.as_ref(), &rg)
    }

    /// Linear part L v applied mode by mode.
    pub fn apply_linear(&self, v: &ChannelField) -> ChannelField {
        let mut out = v.zeros_like();
        for k in 0..=self.grid.k_max {
            let y = crate::linalg::matvec(&self.lk[k], v.interior(k));
            out.set_interior(k, &y);
        }
        out.enforce_reality();
        out
    }

    /// Full discrete right-hand side F_h(u) of the model for a full state u (boundary values used).
    pub fn evaluate_rhs(&self, u: &ChannelField) -> ChannelField {
        let (n, n1) = (self.n, self.grid.n1);
        let m2 = self.grid.m2();
        let h = self.grid.h();
        let phys = self.to_physical(u);
        let len = phys.len();
        let mut f1 = vec![0.0; len];
        let mut f2 = vec![0.0; len];
        let mut g = vec![0.0; len];
        for j in 0..n1 {
            let x = self.profile.x[j];
            for q in 0..m2 {
                let o = (j * m2 + q) * n;
                let uu = &phys[o..o + n];
                f1[o..o + n].copy_from_slice(&self.model.flux1(self.eps, uu));
                f2[o..o + n].copy_from_slice(&self.model.flux2(self.eps, uu));
                g[o..o + n].copy_from_slice(&self.model.source(self.eps, x, uu));
            }
        }
        let f1 = self.from_physical(&f1);
        let f2 = self.from_physical(&f2);
        let g = self.from_physical(&g);
        let mut out = self.assemble_divergence(&f1, Some(&f2), &g);
        let [b11, b12, b21, b22] = &self.b;
        for k in 0..=self.grid.k_max {
            let kf = k as f64;
            for j in 1..n1 - 1 {
                for c in 0..n {
                    let mut v = ZERO;
                    for cc in 0..n {
                        let d = b11[c * n + cc];
                        if d != 0.0 {
                            v += (u.get(k, j + 1, cc) - u.get(k, j, cc) * 2.0 + u.get(k, j - 1, cc)) * (d / (h * h));
                        }
                        v -= u.get(k, j, cc) * (kf * kf * b22[c * n + cc]);
                        let x = b12[c * n + cc] + b21[c * n + cc];
                        if x != 0.0 {
                            v += C64::new(0.0, kf * x) * (u.get(k, j + 1, cc) - u.get(k, j - 1, cc)) / (2.0 * h);
                        }
                    }
                    let i = out.idx(k, j, c);
                    out.data[i] += v;
                }
            }
        }
        out.enforce_reality();
        out
    }

    /// Base state as a full field (mode 0 only).
    pub fn base_field(&self) -> ChannelField {
        let mut f = ChannelField::zeros(self.n, &self.grid);
        for j in 0..self.grid.n1 {
            for c in 0..self.n {
                f.set(0, j, c, C64::new(self.profile.u[j * self.n + c], 0.0));
            }
        }
        f
    }

    /// Field carrying the discrete translation mode at k = 0, if the profile has one.
    pub fn translation_field(&self) -> Option<ChannelField> {
        let tr = self.profile.translation.as_ref()?;
        let mut f = ChannelField::zeros(self.n, &self.grid);
        for j in 1..self.grid.n1 - 1 {
            for c in 0..self.n {
                f.set(0, j, c, C64::new(tr[j * self.n + c], 0.0));
            }
        }
        Some(f)
    }

    /// CFL number dt max|A^1| / h, recorded at setup.
    pub fn cfl(&self) -> f64 {
        self.grid.cfl(self.model.max_speed(self.eps))
    }

    pub(crate) fn cache_insert<T>(map: &mut HashMap<u64, Arc<T>>, key: u64, v: Arc<T>) {
        if map.len() >= CACHE_CAP {
            map.clear();
        }
        map.insert(key, v);
    }
}
