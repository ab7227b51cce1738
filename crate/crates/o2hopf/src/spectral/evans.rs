use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::model::ModelSystem;
use crate::spectral::ode::{dopri, DpOptions};

/// Increasing p-subsets of 0..n in lexicographic order.
pub fn subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, p, &mut Vec::new(), &mut out);
    out
}

/// Exterior-power basis with lookup from subset to index.
#[derive(Debug, Clone)]
pub struct Wedge {
    pub n: usize,
    pub p: usize,
    pub sets: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl Wedge {
    pub fn new(n: usize, p: usize) -> Self {
        let sets = subsets(n, p);
        let index = sets.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Wedge { n, p, sets, index }
    }

    pub fn dim(&self) -> usize {
        self.sets.len()
    }

    /// Induced derivation A^{(p)} on the p-th exterior power.
    pub fn compound(&self, a: &CMat) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (ii, set) in self.sets.iter().enumerate() {
            let diag: C64 = set.iter().map(|&i| a[(i, i)]).sum();
            out[(ii, ii)] = diag;
            for (pos, &aa) in set.iter().enumerate() {
                for b in 0..self.n {
                    if set.contains(&b) {
                        continue;
                    }
                    let mut j: Vec<usize> = set.clone();
                    j[pos] = b;
                    let between = set.iter().filter(|&&s| s != aa && ((s > aa && s < b) || (s < aa && s > b))).count();
                    j.sort_unstable();
                    let jj = self.index[&j];
                    let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
                    out[(jj, ii)] += a[(b, aa)] * sign;
                }
            }
        }
        out
    }

    /// Coordinates of v_1 ^ ... ^ v_p for the columns of an n x p matrix.
    pub fn of_columns(&self, v: &CMat) -> Vec<C64> {
        self.sets
            .iter()
            .map(|set| {
                let m = CMat::from_fn(self.p, self.p, |r, c| v[(set[r], c)]);
                linalg::det(&m)
            })
            .collect()
    }
}

/// Scalar u ^ s for u in the p-th and s in the (n-p)-th exterior power.
pub fn wedge_pair(wp: &Wedge, wq: &Wedge, u: &[C64], s: &[C64]) -> C64 {
    let n = wp.n;
    let mut acc = ZERO;
    for (i, set) in wp.sets.iter().enumerate() {
        let comp: Vec<usize> = (0..n).filter(|x| !set.contains(x)).collect();
        let j = wq.index[&comp];
        let inv: usize = set.iter().enumerate().map(|(pos, &v)| v - pos).sum();
        let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
        acc += u[i] * s[j] * sign;
    }
    acc
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvansOptions {
    /// Half-length of the integration interval.
    pub l: f64,
    pub rtol: f64,
    pub renorm_every: usize,
    /// Real reference point for frame selection and radial normalization.
    pub lambda_ref: f64,
    pub splitting_tol: f64,
}

impl Default for EvansOptions {
    fn default() -> Self {
        EvansOptions { l: 16.0, rtol: 1e-10, renorm_every: 10, lambda_ref: 1.0, splitting_tol: 1e-8 }
    }
}

/// Evans function evaluator on the exact continuous profile.
pub struct Evans {
    pub model: ModelSystem,
    pub eps: f64,
    pub opts: EvansOptions,
    wp: Wedge,
    wq: Wedge,
    frames: Mutex<HashMap<i64, (Vec<usize>, Vec<usize>, f64)>>,
}

struct Side {
    init: Vec<C64>,
    shift: C64,
}

impl Evans {
    pub fn new(model: ModelSystem, eps: f64, opts: EvansOptions) -> Self {
        let n = model.evans_dim();
        let p = model.evans_p();
        Evans { model, eps, opts, wp: Wedge::new(n, p), wq: Wedge::new(n, n - p), frames: Mutex::new(HashMap::new()) }
    }

    fn far_matrix(&self, k: i64, lambda: C64, minus: bool) -> CMat {
        let (um, up) = self.model.endstates(self.eps);
        let x = if minus { -1e3 } else { 1e3 };
        self.model.evans_matrix(self.eps, k, lambda, x, if minus { &um } else { &up })
    }

    /// Spectral projector onto the growing (minus side) or decaying (plus side) subspace, with the
    /// trace of the matrix on that subspace.
    fn projector(&self, k: i64, lambda: C64, minus: bool) -> Result<(CMat, C64)> {
        let a = self.far_matrix(k, lambda, minus);
        let n = a.nrows();
        let (vals, vecs) = linalg::eig(&a).map_err(|e| Error::SolverFailure(e.to_string()))?;
        let slow = self.model.evans_slow_modes(k);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[i].norm().total_cmp(&vals[j].norm()));
        let slow_set: Vec<usize> = order[..slow].to_vec();
        let mut sel = vec![false; n];
        for i in 0..n {
            let mu = vals[i];
            let growing = if slow_set.contains(&i) {
                if lambda.norm() == 0.0 {
                    return Err(Error::SplittingFailure(0.0));
                }
                (mu / lambda).re > 0.0
            } else {
                if mu.re.abs() < self.opts.splitting_tol {
                    return Err(Error::SplittingFailure(mu.re.abs()));
                }
                mu.re > 0.0
            };
            sel[i] = if minus { growing } else { !growing };
        }
        let want = if minus { self.model.evans_p() } else { n - self.model.evans_p() };
        let count = sel.iter().filter(|&&s| s).count();
        if count != want {
            let gap = (0..n).filter(|i| !slow_set.contains(i)).map(|i| vals[i].re.abs()).fold(f64::INFINITY, f64::min);
            return Err(Error::SplittingFailure(gap));
        }
        let vinv = linalg::Lu::new(&vecs).inverse();
        let mut p = CMat::zeros(n, n);
        let mut tr = ZERO;
        for (i, &s) in sel.iter().enumerate() {
            if !s {
                continue;
            }
            tr += vals[i];
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] += vecs[(r, i)] * vinv[(i, c)];
                }
            }
        }
        Ok((p, tr))
    }

    fn pick_columns(&self, p: &CMat, count: usize) -> Vec<usize> {
        let n = p.nrows();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for cols in subsets(n, count) {
            let m = CMat::from_fn(n, count, |r, c| p[(r, cols[c])]);
            let g = linalg::matmul(&linalg::adjoint(&m), &m);
            let v = linalg::det(&g).norm();
            if v > best.0 {
                best = (v, cols);
            }
        }
        best.1
    }

    fn frames(&self, k: i64) -> Result<(Vec<usize>, Vec<usize>, f64)> {
        if let Some(f) = self.frames.lock().unwrap().get(&k) {
            return Ok(f.clone());
        }
        let lr = C64::new(self.opts.lambda_ref, 0.0);
        let (pm, _) = self.projector(k, lr, true)?;
        let (pp, _) = self.projector(k, lr, false)?;
        let cm = self.pick_columns(&pm, self.wp.p);
        let cp = self.pick_columns(&pp, self.wq.p);
        let mut f = (cm, cp, 1.0);
        self.frames.lock().unwrap().insert(k, f.clone());
        let raw = self.raw(lr, k)?;
        f.2 = raw.norm();
        if !(f.2 > 0.0) {
            return Err(Error::SolverFailure("Evans function vanishes at the reference point".into()));
        }
        self.frames.lock().unwrap().insert(k, f.clone());
        Ok(f)
    }

    fn side(&self, k: i64, lambda: C64, minus: bool, cols: &[usize]) -> Result<Side> {
        let (p, tr) = self.projector(k, lambda, minus)?;
        let n = p.nrows();
        let frame = CMat::from_fn(n, cols.len(), |r, c| p[(r, cols[c])]);
        let w = if minus { &self.wp } else { &self.wq };
        Ok(Side { init: w.of_columns(&frame), shift: tr })
    }

    fn integrate(&self, k: i64, lambda: C64, side: Side, minus: bool) -> Result<(Vec<C64>, f64)> {
        let w = if minus { &self.wp } else { &self.wq };
        let (x0, x1) = if minus { (-self.opts.l, 0.0) } else { (self.opts.l, 0.0) };
        let opts = DpOptions { rtol: self.opts.rtol, renorm_every: self.opts.renorm_every, ..DpOptions::default() };
        let d = w.dim();
        dopri(
            |x, y, dy| {
                let ub = self.model.exact_profile(self.eps, x);
                let a = self.model.evans_matrix(self.eps, k, lambda, x, &ub);
                let c = w.compound(&a);
                for i in 0..d {
                    let mut acc = -side.shift * y[i];
                    for j in 0..d {
                        acc += c[(i, j)] * y[j];
                    }
                    dy[i] = acc;
                }
            },
            x0,
            x1,
            side.init.clone(),
            &opts,
        )
    }

    fn raw(&self, lambda: C64, k: i64) -> Result<C64> {
        let (cm, cp, _) = self.frames.lock().unwrap().get(&k).cloned().expect("frames initialized");
        let sm = self.side(k, lambda, true, &cm)?;
        let sp = self.side(k, lambda, false, &cp)?;
        let (u, lu) = self.integrate(k, lambda, sm, true)?;
        let (s, ls) = self.integrate(k, lambda, sp, false)?;
        Ok(wedge_pair(&self.wp, &self.wq, &u, &s) * (lu + ls).exp())
    }

    /// Normalized Evans function D(lambda, k): analytic in lambda on the region of consistent
    /// splitting, scaled by |D(lambda_ref, k)|.
    pub fn evaluate(&self, lambda: C64, k: i64) -> Result<C64> {
        let (_, _, norm) = self.frames(k)?;
        Ok(self.raw(lambda, k)? / norm)
    }

    /// Winding number of D along a closed polyline. Edges are cut to at most max_step, then
    /// refined until the argument changes by less than pi/4 on each piece.
    pub fn root_count(&self, contour: &[C64], k: i64, opts: &WindingOptions) -> Result<i64> {
        if contour.len() < 3 {
            return Err(Error::InvalidInput("contour needs at least 3 vertices".into()));
        }
        if !(opts.max_step > 0.0) {
            return Err(Error::InvalidInput(format!("max_step must be positive (got {})", opts.max_step)));
        }
        let nv = contour.len();
        let mut pts = Vec::new();
        for i in 0..nv {
            let (a, b) = (contour[i], contour[(i + 1) % nv]);
            let pieces = ((b - a).norm() / opts.max_step).ceil().max(1.0) as usize;
            pts.extend((0..pieces).map(|j| a + (b - a) * (j as f64 / pieces as f64)));
        }
        let vals: Vec<C64> = crate::par_map(pts.len(), |i| self.checked(pts[i], k, opts)).into_iter().collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut evals = pts.len();
        for i in 0..pts.len() {
            let j = (i + 1) % pts.len();
            total += self.segment(pts[i], pts[j], vals[i], vals[j], k, opts, 0, &mut evals)?;
        }
        Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
    }

    fn checked(&self, z: C64, k: i64, opts: &WindingOptions) -> Result<C64> {
        let d = self.evaluate(z, k)?;
        if d.norm() < opts.root_tol {
            return Err(Error::RootOnContour(format!("|D({z})| = {:e}", d.norm())));
        }
        Ok(d)
    }

    #[allow(clippy::too_many_arguments)]
    fn segment(&self, a: C64, b: C64, da: C64, db: C64, k: i64, opts: &WindingOptions, depth: usize, evals: &mut usize) -> Result<f64> {
        let darg = (db / da).arg();
        if darg.abs() < std::f64::consts::FRAC_PI_4 {
            return Ok(darg);
        }
        if depth >= opts.max_depth || *evals >= opts.max_evals {
            return Err(Error::ContourTooCoarse(depth));
        }
        let m = (a + b) * 0.5;
        let dm = self.checked(m, k, opts)?;
        *evals += 1;
        Ok(self.segment(a, m, da, dm, k, opts, depth + 1, evals)? + self.segment(m, b, dm, db, k, opts, depth + 1, evals)?)
    }

    /// Zero of D near a guess by the secant method.
    pub fn find_zero(&self, guess: C64, k: i64, tol: f64) -> Result<C64> {
        let mut x0 = guess;
        let mut x1 = guess + C64::new(1e-4, 1e-4);
        let mut f0 = self.evaluate(x0, k)?;
        let mut f1 = self.evaluate(x1, k)?;
        for _ in 0..50 {
            if f1 == f0 {
                break;
            }
            let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = self.evaluate(x1, k)?;
            if (x1 - x0).norm() < tol {
                return Ok(x1);
            }
        }
        Err(Error::NoConvergence { iterations: 50, residual: f1.norm() })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindingOptions {
    pub root_tol: f64,
    pub max_depth: usize,
    pub max_evals: usize,
    /// Edges are first cut into pieces no longer than this; an endpoint-only argument test
    /// cannot see a full turn along one edge.
    pub max_step: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions { root_tol: 1e-10, max_depth: 14, max_evals: 4000, max_step: 0.05 }
    }
}

/// Closed polyline approximating a circle.
pub fn circle(center: C64, radius: f64, vertices: usize) -> Vec<C64> {
    (0..vertices)
        .map(|i| center + C64::from_polar(radius, 2.0 * std::f64::consts::PI * i as f64 / vertices as f64))
        .collect()
}

/// Closed rectangle polyline.
pub fn rectangle(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Vec<C64> {
    vec![C64::new(re_min, im_min), C64::new(re_max, im_min), C64::new(re_max, im_max), C64::new(re_min, im_max)]
}
