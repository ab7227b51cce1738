use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::Problem;

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region { re_min, re_max, im_min, im_max }
    }

    pub fn is_empty(&self) -> bool {
        !(self.re_min < self.re_max && self.im_min < self.im_max)
    }

    pub fn contains(&self, z: C64) -> bool {
        !self.is_empty() && z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// Matrix of L_k on the interior grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub k: i64,
    pub eps: f64,
    pub mat: CMat,
}

pub fn assemble_lk(pb: &Problem, k: i64) -> OperatorMatrix {
    let mat = if k >= 0 && (k as usize) <= pb.grid.k_max { pb.lk(k as usize).clone() } else { pb.assemble(k) };
    OperatorMatrix { k, eps: pb.eps, mat }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// Dense eigensolve restricted to a region, sorted by real part descending.
pub fn spectrum_in_region(op: &OperatorMatrix, region: &Region) -> Result<Vec<EigenPair>> {
    if region.is_empty() {
        return Ok(Vec::new());
    }
    let (vals, vecs) = linalg::eig(&op.mat).map_err(|e| Error::SolverFailure(e.to_string()))?;
    let mut out = Vec::new();
    for (i, &l) in vals.iter().enumerate() {
        if !region.contains(l) {
            continue;
        }
        let mut v: Vec<C64> = (0..vecs.nrows()).map(|r| vecs[(r, i)]).collect();
        let nv = linalg::vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        let res = residual(&op.mat, l, &v);
        let (l, v, res) = if res > EIG_RESIDUAL_TOL { refine(&op.mat, l, v)? } else { (l, v, res) };
        if res > EIG_RESIDUAL_TOL {
            return Err(Error::SolverFailure(format!("eigenpair residual {res:e} at {l}")));
        }
        out.push(EigenPair { lambda: l, vector: v, residual: res });
    }
    out.sort_by(|a, b| b.lambda.re.total_cmp(&a.lambda.re).then(b.lambda.im.total_cmp(&a.lambda.im)));
    Ok(out)
}

pub fn residual(a: &CMat, l: C64, v: &[C64]) -> f64 {
    let av = linalg::matvec(a, v);
    let r: Vec<C64> = av.iter().zip(v).map(|(x, y)| x - l * y).collect();
    linalg::vec_norm(&r) / linalg::vec_norm(v)
}

/// Rayleigh-quotient inverse iteration polish of an eigenpair.
pub fn refine(a: &CMat, mut l: C64, mut v: Vec<C64>) -> Result<(C64, Vec<C64>, f64)> {
    let n = a.nrows();
    for _ in 0..4 {
        let shift = l + C64::new(1e-12 * (1.0 + l.norm()), 0.0);
        let m = CMat::from_fn(n, n, |i, j| if i == j { a[(i, j)] - shift } else { a[(i, j)] });
        let mut x = linalg::Lu::new(&m).solve_vec(&v);
        let nx = linalg::vec_norm(&x);
        if !nx.is_finite() || nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|z| *z /= nx);
        let ax = linalg::matvec(a, &x);
        l = x.iter().zip(&ax).map(|(p, q)| p.conj() * q).sum();
        v = x;
    }
    let r = residual(a, l, &v);
    Ok((l, v, r))
}

/// All eigenvalues of L_k sorted by real part descending.
pub fn eigenvalues_sorted(op: &OperatorMatrix) -> Result<Vec<C64>> {
    let mut v = linalg::eigenvalues(&op.mat).map_err(|e| Error::SolverFailure(e.to_string()))?;
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(v)
}

/// Right edge of the essential spectrum from the endstate symbols, sampled over xi.
pub fn essential_bound(pb: &Problem, k: i64) -> f64 {
    let model = &pb.model;
    let n = model.n();
    let (um, up) = model.endstates(pb.eps);
    let xl = pb.grid.x(0) - 1e3;
    let xr = -xl;
    let b: Vec<Vec<f64>> = (0..2).flat_map(|j| (0..2).map(move |kk| (j, kk))).map(|(j, kk)| model.viscosity(j, kk)).collect();
    let mut best = f64::NEG_INFINITY;
    for (u, x) in [(um, xl), (up, xr)] {
        let a1 = model.jac1(pb.eps, &u);
        let a2 = model.jac2(pb.eps, &u);
        let g = model.source_jac(pb.eps, x, &u);
        for i in 0..=400 {
            let xi = -40.0 + 80.0 * i as f64 / 400.0;
            let kf = k as f64;
            let m = CMat::from_fn(n, n, |r, c| {
                let idx = r * n + c;
                let diff = -(xi * xi * b[0][idx] + xi * kf * (b[1][idx] + b[2][idx]) + kf * kf * b[3][idx]);
                C64::new(diff + g[idx], -(xi * a1[idx] + kf * a2[idx]))
            });
            if let Ok(ev) = linalg::eigenvalues(&m) {
                for e in ev {
                    best = best.max(e.re);
                }
            }
        }
    }
    best
}
