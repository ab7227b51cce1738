use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::{FullField, Grid, M0Params, ModelSystem, Problem};
use crate::spectral::eigen::{self, assemble_lk};

/// Crossing data: the eigenvalue lambda_+ at mode k*, its eigenfunction w, the reflected companion
/// sw = M conj(w) (the mode-k* profile of the reflected eigenfunction's conjugate), and biorthonormal
/// adjoints. Profiles live on interior nodes ordered (x1, component).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenBundle {
    pub eps0: f64,
    pub k_star: usize,
    pub lambda: C64,
    pub omega0: f64,
    pub gamma_prime0: f64,
    pub n: usize,
    pub h: f64,
    pub m_diag: Vec<f64>,
    pub w: Vec<C64>,
    pub sw: Vec<C64>,
    pub w_adj: Vec<C64>,
    pub sw_adj: Vec<C64>,
    pub residuals: BiorthoResiduals,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiorthoResiduals {
    /// |<w, w~> - 1|
    pub w_wadj: f64,
    /// |<sw, w~>|
    pub sw_wadj: f64,
    /// |<w, sw~>|
    pub w_swadj: f64,
    /// |<sw, sw~> - 1|
    pub sw_swadj: f64,
    pub eig_residual: f64,
    pub adj_residual: f64,
}

impl BiorthoResiduals {
    pub fn max(&self) -> f64 {
        [self.w_wadj, self.sw_wadj, self.w_swadj, self.sw_swadj].into_iter().fold(0.0, f64::max)
    }
}

/// Discrete pairing h sum u conj(v).
pub fn pairing(h: f64, u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() * h
}

fn reflect_conj(m: &[f64], v: &[C64]) -> Vec<C64> {
    let n = m.len();
    v.iter().enumerate().map(|(i, z)| z.conj() * m[i % n]).collect()
}

/// Rightmost eigenvalue with nonnegative imaginary part, with its eigenvector.
pub fn rightmost(mat: &CMat) -> Result<(C64, Vec<C64>)> {
    let (vals, vecs) = linalg::eig(mat).map_err(|e| Error::SolverFailure(e.to_string()))?;
    let mut best: Option<usize> = None;
    for (i, l) in vals.iter().enumerate() {
        if l.im < -1e-12 {
            continue;
        }
        if best.is_none_or(|b| l.re > vals[b].re) {
            best = Some(i);
        }
    }
    let i = best.ok_or_else(|| Error::SolverFailure("empty spectrum".into()))?;
    let v: Vec<C64> = (0..vecs.nrows()).map(|r| vecs[(r, i)]).collect();
    let (l, v, _) = eigen::refine(mat, vals[i], v)?;
    Ok((l, v))
}

fn gamma_at(model: &ModelSystem, grid: &Grid, eps: f64, k: usize) -> Result<C64> {
    let pb = Problem::new(*model, eps, *grid)?;
    Ok(rightmost(pb.lk(k))?.0)
}

/// Eigen-data of the rightmost oscillatory eigenvalue at mode k on an assembled problem.
pub fn bundle_at(pb: &Problem, k_star: usize, gamma_prime0: f64) -> Result<EigenBundle> {
    let l = pb.lk(k_star);
    let (lambda, mut w) = rightmost(l)?;
    if lambda.im.abs() < 1e-10 {
        return Err(Error::GenericityViolation("crossing eigenvalue is real (omega = 0)".into()));
    }
    let h = pb.grid.h();
    let m = pb.model.reflection();
    // phase: largest entry real positive, unit pairing norm
    let imax = (0..w.len()).max_by(|&a, &b| w[a].norm().total_cmp(&w[b].norm())).unwrap();
    let ph = w[imax].conj() / w[imax].norm();
    let nw = pairing(h, &w, &w).re.sqrt();
    w.iter_mut().for_each(|z| *z = *z * ph / nw);
    let eig_residual = eigen::residual(l, lambda, &w);
    let lh = linalg::adjoint(l);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let start: Vec<C64> = (0..w.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let (mu, wt, adj_residual) = eigen::refine(&lh, lambda.conj(), start)?;
    if (mu - lambda.conj()).norm() > 1e-8 * (1.0 + lambda.norm()) {
        return Err(Error::SolverFailure(format!("adjoint eigenvalue {mu} does not match {}", lambda.conj())));
    }
    let sw = reflect_conj(&m, &w);
    let swt = reflect_conj(&m, &wt);
    // 2x2 Gram solve: <v_i, v~'_j> = delta_ij with v~'_j = sum_l v~_l c_lj and c = conj(G^{-1})
    let basis = [&w, &sw];
    let duals = [&wt, &swt];
    let g = CMat::from_fn(2, 2, |i, j| pairing(h, basis[i], duals[j]));
    let gi = linalg::Lu::new(&g).inverse();
    let mk = |j: usize| -> Vec<C64> {
        (0..w.len()).map(|r| duals[0][r] * gi[(0, j)].conj() + duals[1][r] * gi[(1, j)].conj()).collect()
    };
    let w_adj = mk(0);
    let sw_adj = mk(1);
    let residuals = BiorthoResiduals {
        w_wadj: (pairing(h, &w, &w_adj) - 1.0).norm(),
        sw_wadj: pairing(h, &sw, &w_adj).norm(),
        w_swadj: pairing(h, &w, &sw_adj).norm(),
        sw_swadj: (pairing(h, &sw, &sw_adj) - 1.0).norm(),
        eig_residual,
        adj_residual,
    };
    Ok(EigenBundle {
        eps0: pb.eps,
        k_star,
        lambda,
        omega0: lambda.im,
        gamma_prime0,
        n: pb.n(),
        h,
        m_diag: m,
        w,
        sw,
        w_adj,
        sw_adj,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingOptions {
    pub gamma_tol: f64,
    pub max_iter: usize,
    pub derivative_step: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions { gamma_tol: 1e-10, max_iter: 60, derivative_step: 1e-4 }
    }
}

/// Locates eps0 in the interval where the rightmost eigenvalue of some L_k, 1 <= k <= K, crosses
/// the imaginary axis, and returns the crossing eigen-data.
pub fn find_crossing(model: &ModelSystem, grid: &Grid, interval: (f64, f64), opts: &CrossingOptions) -> Result<EigenBundle> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
    }
    let mut crossing = Vec::new();
    for k in 1..=grid.k_max {
        let ga = gamma_at(model, grid, a, k)?.re;
        let gb = gamma_at(model, grid, b, k)?.re;
        if ga * gb < 0.0 {
            crossing.push((k, ga, gb));
        }
    }
    if crossing.is_empty() {
        return Err(Error::NoCrossing(format!("growth rate keeps its sign on [{}, {}] for every mode", interval.0, interval.1)));
    }
    if crossing.len() > 1 {
        return Err(Error::MultiplicityAnomaly(crossing.iter().map(|c| c.0).collect()));
    }
    let (k, mut fa, mut fb) = crossing[0];
    let (mut xa, mut xb) = (a, b);
    let mut x = xa;
    let mut side = 0i32;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        x = (xa * fb - xb * fa) / (fb - fa);
        let fx = gamma_at(model, grid, x, k)?.re;
        if fx.abs() <= opts.gamma_tol {
            converged = true;
            break;
        }
        if fx * fb > 0.0 {
            xb = x;
            fb = fx;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            xa = x;
            fa = fx;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: opts.max_iter, residual: gamma_at(model, grid, x, k)?.re.abs() });
    }
    let d = opts.derivative_step;
    let gp = (gamma_at(model, grid, x + d, k)?.re - gamma_at(model, grid, x - d, k)?.re) / (2.0 * d);
    let pb = Problem::new(*model, x, *grid)?;
    bundle_at(&pb, k, gp)
}

/// Tunes (alpha_c, beta) of M0 so that L_1 at eps = 0 carries the eigenvalue i omega0.
pub fn tune_m0(params: M0Params, grid: &Grid, omega0: f64) -> Result<M0Params> {
    if !(omega0 > 0.0) {
        return Err(Error::InvalidInput(format!("omega0 must be positive (got {omega0})")));
    }
    let f = |p: &M0Params| -> Result<[f64; 2]> {
        let l = gamma_at(&ModelSystem::M0(*p), grid, 0.0, 1)?;
        Ok([l.re, l.im - omega0])
    };
    let mut p = params;
    for _ in 0..40 {
        let r = f(&p)?;
        if r[0].abs().max(r[1].abs()) < 1e-12 {
            return Ok(p);
        }
        let hstep = 1e-6;
        let mut pa = p;
        pa.alpha_c += hstep;
        let mut pbb = p;
        pbb.beta += hstep;
        let ra = f(&pa)?;
        let rb = f(&pbb)?;
        let j = [[(ra[0] - r[0]) / hstep, (rb[0] - r[0]) / hstep], [(ra[1] - r[1]) / hstep, (rb[1] - r[1]) / hstep]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return Err(Error::SingularJacobian(det.abs()));
        }
        let da = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let db = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let damp = 1.0f64.min(0.5 / da.abs().max(db.abs()).max(1e-300));
        p.alpha_c -= damp * da;
        p.beta -= damp * db;
    }
    let r = f(&p)?;
    Err(Error::NoConvergence { iterations: 40, residual: r[0].abs().max(r[1].abs()) })
}

/// Singular values of the Gram matrix of candidate lambda_+ eigenfunctions over modes +-k*,
/// including rotated and reflected images.
pub fn multiplicity_check(pb: &Problem, bundle: &EigenBundle) -> Result<Vec<f64>> {
    let k = bundle.k_star as i64;
    let grid = &pb.grid;
    let n = pb.n();
    let lift = |mode: i64, prof: &[C64]| -> FullField {
        let mut f = FullField::zeros(n, grid);
        f.mode_mut(mode)[n..n + prof.len()].copy_from_slice(prof);
        f
    };
    let mw: Vec<C64> = bundle.w.iter().enumerate().map(|(i, z)| z * bundle.m_diag[i % n]).collect();
    let e1 = lift(k, &bundle.w);
    let e2 = lift(-k, &mw);
    let mut cands = vec![e1.clone(), e2.clone(), e1.rotate(0.7), e2.rotate(-1.9), e1.reflect(&bundle.m_diag), e2.reflect(&bundle.m_diag)];
    let tol = 1e-6 * (1.0 + bundle.lambda.norm());
    for kk in [k, -k] {
        let op = assemble_lk(pb, kk);
        let (vals, vecs) = linalg::eig(&op.mat).map_err(|e| Error::SolverFailure(e.to_string()))?;
        for (i, l) in vals.iter().enumerate() {
            if (l - bundle.lambda).norm() < tol {
                let v: Vec<C64> = (0..vecs.nrows()).map(|r| vecs[(r, i)]).collect();
                cands.push(lift(kk, &v));
            }
        }
    }
    let m = cands.len();
    let g = CMat::from_fn(m, m, |i, j| {
        cands[i].data.iter().zip(&cands[j].data).map(|(a, b)| a.conj() * b).sum::<C64>()
    });
    Ok(linalg::svd(&g).map_err(|e| Error::SolverFailure(e.to_string()))?.s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(8.0, 65, 4, 0.05).unwrap()
    }

    #[test]
    fn tuned_m0_crosses_at_zero_with_target_frequency() {
        let g = grid();
        let p = tune_m0(M0Params::default(), &g, 0.8).unwrap();
        let m = ModelSystem::M0(p);
        let b = find_crossing(&m, &g, (-0.1, 0.1), &CrossingOptions::default()).unwrap();
        assert_eq!(b.k_star, 1);
        assert!(b.eps0.abs() < 1e-8, "{}", b.eps0);
        assert!((b.omega0 - 0.8).abs() < 1e-6);
        assert!(b.gamma_prime0 > 0.0);
        assert!(b.residuals.max() < 1e-8, "{:?}", b.residuals);
        let pb = Problem::new(m, b.eps0, g).unwrap();
        let sv = multiplicity_check(&pb, &b).unwrap();
        assert!(sv[2] < 1e-6 * sv[0], "{sv:?}");
        assert!(sv[1] > 1e-3 * sv[0]);
    }

    #[test]
    fn stable_interval_has_no_crossing() {
        let g = grid();
        let r = find_crossing(&ModelSystem::m0(), &g, (-1.0, -0.5), &CrossingOptions::default());
        assert!(matches!(r, Err(Error::NoCrossing(_))));
    }
}
