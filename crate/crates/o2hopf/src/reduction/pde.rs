use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::model::{ChannelField, Grid, ModelSystem, Problem};
use crate::par_map;
use crate::reduction::ReducibleSystem;
use crate::spectral::crossing::{bundle_at, EigenBundle};
use crate::spectral::Projections;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeOptions {
    /// Singular values below this fraction of the largest count as kernel.
    pub kernel_tol: f64,
    pub cond_max: f64,
    /// Relative residual accepted from the right inverse.
    pub inverse_tol: f64,
    /// Kernel vectors must satisfy |(I - e^{TL~}) h| <= kernel_residual |h|.
    pub kernel_residual: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions { kernel_tol: 1e-4, cond_max: 1e10, inverse_tol: 1e-8, kernel_residual: 1e-6 }
    }
}

struct Inverses {
    pinv: Vec<CMat>,
    kernel: Option<(usize, Vec<C64>)>,
    cond: f64,
    near_null: usize,
}

/// Reduction setup for the channel PDE at a fixed eps (measured from the crossing).
pub struct PdeSetup {
    pub pb: Problem,
    pub proj: Option<Projections>,
    pub eps: f64,
    pub lambda: C64,
    pub k_star: usize,
    pub omega0: f64,
    pub gamma_prime0: f64,
    pub t_star: f64,
    pub nsteps: usize,
    pub opts: PdeOptions,
    cache: Mutex<HashMap<u64, Arc<Inverses>>>,
}

impl PdeSetup {
    /// Setup at eps0 + eps from the crossing data.
    pub fn new(model: ModelSystem, grid: Grid, crossing: &EigenBundle, eps: f64, opts: PdeOptions) -> Result<Self> {
        let pb = Problem::new(model, crossing.eps0 + eps, grid)?;
        let bundle = bundle_at(&pb, crossing.k_star, crossing.gamma_prime0)?;
        let lambda = bundle.lambda;
        let t_star = 2.0 * PI * crossing.k_star as f64 / lambda.im;
        let nsteps = pb.step_count(t_star);
        Ok(PdeSetup {
            pb,
            proj: Some(Projections::new(bundle)),
            eps,
            lambda,
            k_star: crossing.k_star,
            omega0: crossing.omega0,
            gamma_prime0: crossing.gamma_prime0,
            t_star,
            nsteps,
            opts,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Setup without a crossing: the complement is the whole space and `period` plays the role of T*.
    pub fn without_crossing(pb: Problem, period: f64, opts: PdeOptions) -> Self {
        let nsteps = pb.step_count(period);
        PdeSetup {
            eps: 0.0,
            lambda: C64::new(0.0, 2.0 * PI / period),
            k_star: 1,
            omega0: 2.0 * PI / period,
            gamma_prime0: 0.0,
            t_star: period,
            nsteps,
            pb,
            proj: None,
            opts,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.pb.grid
    }

    /// Horizons within 25% of T* share the step count of T*, so the time-T map is smooth in mu.
    pub fn steps_for(&self, t: f64) -> usize {
        if (t / self.t_star - 1.0).abs() <= 0.25 {
            self.nsteps
        } else {
            self.pb.step_count(t)
        }
    }

    pub fn time_t_map(&self, v0: &ChannelField, t: f64) -> Result<ChannelField> {
        Ok(self.pb.evolve_steps(v0, t, self.steps_for(t), 0)?.final_field)
    }

    fn complement_of(&self, v: &ChannelField) -> ChannelField {
        match &self.proj {
            Some(p) => p.complement(v, &self.pb.grid),
            None => v.clone(),
        }
    }

    fn inverses(&self, t: f64) -> Result<Arc<Inverses>> {
        if let Some(v) = self.cache.lock().unwrap().get(&t.to_bits()) {
            return Ok(v.clone());
        }
        let e = self.pb.linear_propagator(t);
        let kmax = self.pb.grid.k_max;
        let parts: Vec<Result<(CMat, Vec<(f64, Vec<C64>)>, f64, f64)>> = par_map(kmax + 1, |k| {
            let d = e[k].nrows();
            let mut a = CMat::from_fn(d, d, |i, j| if i == j { C64::new(1.0, 0.0) - e[k][(i, j)] } else { -e[k][(i, j)] });
            if let Some(p) = &self.proj {
                let b = &p.bundle;
                if k == b.k_star {
                    // (I - E)(I - P) + P with P = w <., w~> + sw <., sw~>
                    let pm = CMat::from_fn(d, d, |i, j| (b.w[i] * b.w_adj[j].conj() + b.sw[i] * b.sw_adj[j].conj()) * b.h);
                    let id = linalg::identity(d);
                    a = linalg::matmul(&a, &(&id - &pm)) + &pm;
                }
            }
            let sv = linalg::svd(&a)?;
            let smax = sv.s[0];
            let mut pinv = CMat::zeros(d, d);
            let mut null = Vec::new();
            let mut smin_kept = f64::INFINITY;
            for (i, &s) in sv.s.iter().enumerate() {
                if s < self.opts.kernel_tol * smax {
                    null.push((s, (0..d).map(|r| sv.v[(r, i)]).collect()));
                    continue;
                }
                smin_kept = smin_kept.min(s);
                for r in 0..d {
                    let vr = sv.v[(r, i)] / s;
                    for c in 0..d {
                        pinv[(r, c)] += vr * sv.u[(c, i)].conj();
                    }
                }
            }
            Ok((pinv, null, smax, smin_kept))
        });
        let mut pinv = Vec::with_capacity(kmax + 1);
        let mut kernel = None;
        let mut near_null = 0;
        let mut cond: f64 = 0.0;
        for (k, part) in parts.into_iter().enumerate() {
            let (p, null, smax, smin) = part?;
            cond = cond.max(smax / smin);
            near_null += null.len();
            if let Some((_, v)) = null.into_iter().next() {
                kernel.get_or_insert((k, v));
            }
            pinv.push(p);
        }
        let inv = Arc::new(Inverses { pinv, kernel, cond, near_null });
        let mut c = self.cache.lock().unwrap();
        if c.len() >= 8 {
            c.clear();
        }
        c.insert(t.to_bits(), inv.clone());
        Ok(inv)
    }

    /// Kernel direction of I - e^{T L~} on the complement, normalized to unit norm with its largest
    /// entry real and positive; None if the operator has no near-null singular value.
    pub fn kernel_basis(&self, t: f64) -> Result<Option<ChannelField>> {
        let inv = self.inverses(t)?;
        if inv.near_null > 1 {
            return Err(Error::KernelDimensionMismatch(format!("{} near-null singular values", inv.near_null)));
        }
        let Some((k, v)) = &inv.kernel else {
            return Ok(None);
        };
        let imax = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap();
        let ph = v[imax].conj() / v[imax].norm();
        let prof: Vec<C64> = v.iter().map(|z| z * ph).collect();
        let mut f = ChannelField::zeros(self.pb.n(), &self.pb.grid);
        f.set_interior(*k, &prof);
        f.enforce_reality();
        let nrm = f.l2_norm(&self.pb.grid);
        f.scale(1.0 / nrm);
        let img = self.pb.evolve_linearized(&f, t)?;
        let res = f.sub(&img).l2_norm(&self.pb.grid);
        if res > self.opts.kernel_residual {
            return Err(Error::KernelDimensionMismatch(format!("kernel residual {res:.3e} above {:.1e}", self.opts.kernel_residual)));
        }
        Ok(Some(f))
    }

    /// Minimum-norm solution of (I - e^{T L~}) x = y orthogonal to the kernel, with the relative
    /// residual of the verification product.
    pub fn right_inverse_apply(&self, y: &ChannelField, t: f64) -> Result<(ChannelField, f64)> {
        let g = &self.pb.grid;
        let ny = y.l2_norm(g);
        let leak = self.complement_of(y).sub(y).l2_norm(g);
        if leak > 1e-8 * ny.max(1e-300) {
            return Err(Error::InvalidInput(format!("right-hand side is not in the complement (leak {leak:.3e})")));
        }
        let inv = self.inverses(t)?;
        if !(inv.cond <= self.opts.cond_max) {
            return Err(Error::IllConditioned(inv.cond));
        }
        let mut x = y.zeros_like();
        for k in 0..=g.k_max {
            linalg::matvec_into(&inv.pinv[k], y.interior(k), x.interior_mut(k));
        }
        x.enforce_reality();
        let ex = self.pb.evolve_linearized(&x, t)?;
        let r = x.sub(&ex).sub(y).l2_norm(g);
        Ok((x, if ny > 0.0 { r / ny } else { r }))
    }

    /// Condition number of the deflated system at horizon t.
    pub fn condition(&self, t: f64) -> Result<f64> {
        Ok(self.inverses(t)?.cond)
    }
}

impl ReducibleSystem for PdeSetup {
    type State = ChannelField;

    fn eps(&self) -> f64 {
        self.eps
    }

    fn lambda(&self) -> C64 {
        self.lambda
    }

    fn k_star(&self) -> usize {
        self.k_star
    }

    fn omega0(&self) -> f64 {
        self.omega0
    }

    fn gamma_prime0(&self) -> f64 {
        self.gamma_prime0
    }

    fn t_star(&self) -> f64 {
        self.t_star
    }

    fn zero(&self) -> ChannelField {
        ChannelField::zeros(self.pb.n(), &self.pb.grid)
    }

    fn lin_comb(&self, a: &ChannelField, s: f64, b: &ChannelField) -> ChannelField {
        let mut out = a.clone();
        out.axpy(s, b);
        out
    }

    fn norm(&self, v: &ChannelField) -> f64 {
        v.l2_norm(&self.pb.grid)
    }

    fn center(&self, a1: C64, a2: C64) -> ChannelField {
        match &self.proj {
            Some(p) => p.center_field(a1, a2, &self.pb.grid),
            None => self.zero(),
        }
    }

    fn coords(&self, v: &ChannelField) -> (C64, C64) {
        match &self.proj {
            Some(p) => p.coords(v),
            None => (ZERO, ZERO),
        }
    }

    fn complement(&self, v: &ChannelField) -> ChannelField {
        self.complement_of(v)
    }

    fn reality_defect(&self, v: &ChannelField) -> f64 {
        v.reality_defect()
    }

    fn rotate(&self, v: &ChannelField, theta: f64) -> ChannelField {
        v.rotate(theta)
    }

    fn flow_parts(&self, v0: &ChannelField, t: f64, parts: usize) -> Result<Vec<ChannelField>> {
        let n = self.steps_for(t);
        let parts = parts.max(1);
        let n = n.div_ceil(parts) * parts;
        let tr = self.pb.evolve_steps(v0, t, n, n / parts)?;
        Ok(tr.snapshots.into_iter().skip(1).collect())
    }

    fn flow_recorded(&self, v0: &ChannelField, t: f64) -> Result<(ChannelField, Vec<f64>, Vec<(C64, C64)>)> {
        let tr = self.pb.evolve_steps(v0, t, self.steps_for(t), 1)?;
        let phis = tr.snapshots.iter().map(|s| self.coords(&self.pb.nonlinear(s))).collect();
        Ok((tr.final_field, tr.times, phis))
    }

    fn linear_flow(&self, v: &ChannelField, t: f64) -> Result<ChannelField> {
        self.pb.evolve_linearized(v, t)
    }

    fn right_inverse(&self, y: &ChannelField, t: f64) -> Result<ChannelField> {
        let (x, r) = self.right_inverse_apply(y, t)?;
        if r > self.opts.inverse_tol && y.l2_norm(&self.pb.grid) * r > 1e-10 {
            return Err(Error::SolverFailure(format!("right-hand side leaves the range: relative residual {r:.3e}")));
        }
        Ok(x)
    }

    fn kernel(&self, t: f64) -> Result<Option<ChannelField>> {
        self.kernel_basis(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::M0Params;
    use crate::reduction::{displacement, displacement_quadrature, reduced_maps, solve_transverse, ReductionOptions};
    use crate::spectral::crossing::{find_crossing, tune_m0, CrossingOptions};

    fn m0_setup(eps: f64) -> PdeSetup {
        let g = Grid::new(8.0, 65, 4, 0.1).unwrap();
        let p = tune_m0(M0Params::default(), &g, 0.8).unwrap();
        let m = ModelSystem::M0(p);
        let b = find_crossing(&m, &g, (-0.1, 0.1), &CrossingOptions::default()).unwrap();
        PdeSetup::new(m, g, &b, eps, PdeOptions::default()).unwrap()
    }

    #[test]
    fn t_star_times_omega() {
        let s = m0_setup(0.0);
        assert!((s.t_star * s.lambda.im - 2.0 * PI * s.k_star as f64).abs() < 1e-10);
    }

    #[test]
    fn right_inverse_solves_constructed_rhs() {
        let s = m0_setup(0.0);
        let g = *s.grid();
        let mut z = s.zero();
        for k in 0..=g.k_max {
            let m = z.interior(k).len();
            let prof: Vec<C64> = (0..m).map(|i| C64::new((0.1 * i as f64 + k as f64).sin(), if k == 0 { 0.0 } else { (0.07 * i as f64).cos() })).collect();
            z.set_interior(k, &prof);
        }
        let z = s.complement(&z);
        let y = z.sub(&s.pb.evolve_linearized(&z, s.t_star).unwrap());
        let (x, r) = s.right_inverse_apply(&y, s.t_star).unwrap();
        assert!(r < 1e-8, "{r}");
        assert!(x.sub(&z).l2_norm(&g) < 1e-8 * z.l2_norm(&g));
        assert!(s.kernel_basis(s.t_star).unwrap().is_none());
        let zero = s.right_inverse_apply(&s.zero(), s.t_star).unwrap().0;
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn displacement_forms_agree_and_vanish_at_zero() {
        let s = m0_setup(0.0);
        let opts = ReductionOptions::default();
        let d = displacement(&s, ZERO, ZERO, &s.zero(), s.t_star).unwrap();
        assert_eq!((d.d1, d.d2, d.d3_norm), (ZERO, ZERO, 0.0));
        let (a1, a2) = (C64::new(0.02, 0.01), C64::new(-0.005, 0.015));
        let z = solve_transverse(&s, a1, a2, s.t_star, 0.0, &opts).unwrap();
        let d = displacement(&s, a1, a2, &z.field, s.t_star).unwrap();
        let q = displacement_quadrature(&s, a1, a2, &z.field, s.t_star).unwrap();
        let scale = d.d1.norm().max(d.d2.norm());
        assert!((q.d1 - d.d1).norm() < 1e-2 * scale, "{} {}", q.d1, d.d1);
        assert!((q.d2 - d.d2).norm() < 1e-2 * scale);
        assert!(d.d3_norm < 1e-10, "{}", d.d3_norm);
    }

    #[test]
    fn reduced_maps_are_equivariant() {
        let s = m0_setup(0.0);
        let opts = ReductionOptions::default();
        let (a1, a2) = (C64::new(0.03, 0.01), C64::new(0.01, -0.02));
        let (n1, n2) = reduced_maps(&s, a1, a2, 0.0, 0.0, &opts).unwrap();
        let (m1, m2) = reduced_maps(&s, a2, a1, 0.0, 0.0, &opts).unwrap();
        assert!((m1 - n2).norm() < 1e-8 * n1.norm().max(n2.norm()), "{m1} {n2}");
        assert!((m2 - n1).norm() < 1e-8 * n1.norm().max(n2.norm()));
        let r = C64::from_polar(1.0, 0.7);
        let (r1, r2) = reduced_maps(&s, a1 * r, a2 * r.conj(), 0.0, 0.0, &opts).unwrap();
        assert!((r1 - n1 * r).norm() < 1e-8 * n1.norm());
        assert!((r2 - n2 * r.conj()).norm() < 1e-8 * n2.norm());
    }
}
