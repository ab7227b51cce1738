//! Reduction of the time-T displacement map to the two complex center coordinates, extraction of
//! the cubic coefficients, and location and verification of periodic orbits.

pub mod pde;
pub mod synthetic;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::par_map;
use crate::reduced_o2::{self, BranchKind, CubicCoefficients, NewtonOptions, Pinning, ReducedPoint};

pub use pde::{PdeOptions, PdeSetup};
pub use synthetic::{SyntheticParams, SyntheticSystem};

/// A finite-dimensional view of an evolution problem near a crossing: two complex center
/// coordinates rotating with lambda_+ and a strongly stable complement.
pub trait ReducibleSystem: Sync {
    type State: Clone + Send + Sync;

    /// Bifurcation parameter of this instance.
    fn eps(&self) -> f64;
    /// lambda_+ at this eps.
    fn lambda(&self) -> C64;
    fn k_star(&self) -> usize;
    /// omega and gamma' at the crossing.
    fn omega0(&self) -> f64;
    fn gamma_prime0(&self) -> f64;

    fn t_star(&self) -> f64 {
        2.0 * PI * self.k_star() as f64 / self.lambda().im
    }

    fn zero(&self) -> Self::State;
    /// a + s b
    fn lin_comb(&self, a: &Self::State, s: f64, b: &Self::State) -> Self::State;
    fn norm(&self, v: &Self::State) -> f64;
    fn center(&self, a1: C64, a2: C64) -> Self::State;
    fn coords(&self, v: &Self::State) -> (C64, C64);
    fn complement(&self, v: &Self::State) -> Self::State;
    /// Size of the imaginary part that a real state may not carry.
    fn reality_defect(&self, _v: &Self::State) -> f64 {
        0.0
    }
    /// Spatial rotation by theta.
    fn rotate(&self, v: &Self::State, theta: f64) -> Self::State;

    /// Nonlinear flow sampled at t j / parts, j = 1..=parts, from one integration.
    fn flow_parts(&self, v0: &Self::State, t: f64, parts: usize) -> Result<Vec<Self::State>>;
    /// Times and center coordinates of the nonlinearity along the trajectory from v0, one sample per step.
    fn flow_recorded(&self, v0: &Self::State, t: f64) -> Result<(Self::State, Vec<f64>, Vec<(C64, C64)>)>;
    /// e^{t L} on complement states.
    fn linear_flow(&self, v: &Self::State, t: f64) -> Result<Self::State>;
    /// Minimum-norm solution of (I - e^{t L~}) x = y on the complement.
    fn right_inverse(&self, y: &Self::State, t: f64) -> Result<Self::State>;
    /// Kernel direction of I - e^{t L~}, if any.
    fn kernel(&self, t: f64) -> Result<Option<Self::State>>;

    fn flow(&self, v0: &Self::State, t: f64) -> Result<Self::State> {
        Ok(self.flow_parts(v0, t, 1)?.pop().expect("one part"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionOptions {
    /// Picard stops when the update is below picard_tol ((|a1| + |a2|)^2 + |b|).
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub contraction_limit: f64,
    pub smallness_radius: f64,
    /// Spurious coefficients are flagged above this multiple of max(|Lambda|, |Gamma|).
    pub spurious_ratio: f64,
    pub fit_cond_max: f64,
    /// Relative quartic-to-cubic ratio above which the sample radius is halved.
    pub fit_quartic_ratio: f64,
    /// Genericity tolerance for fitted coefficients, relative to max(|Lambda|, |Gamma|).
    pub genericity_rel_tol: f64,
    pub newton: NewtonOptions,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            picard_tol: 1e-10,
            picard_max_iter: 60,
            contraction_limit: 0.9,
            smallness_radius: 0.5,
            spurious_ratio: 1e-3,
            fit_cond_max: 1e8,
            fit_quartic_ratio: 0.1,
            genericity_rel_tol: 1e-3,
            newton: NewtonOptions { tol: 1e-9, max_iter: 20, fd_step: 1e-5, max_cond: 1e12, basin_ratio: 0.5 },
        }
    }
}

/// Displacement v(T) - v(0) in reduced coordinates.
#[derive(Debug, Clone)]
pub struct DisplacementValue<S> {
    pub d1: C64,
    pub d2: C64,
    pub d3: S,
    pub d3_norm: f64,
}

/// Direct displacement: reconstructs v0 from (a1, a2, v_perp0), evolves to T and projects.
pub fn displacement<S: ReducibleSystem>(sys: &S, a1: C64, a2: C64, perp: &S::State, t: f64) -> Result<DisplacementValue<S::State>> {
    let v0 = sys.lin_comb(&sys.center(a1, a2), 1.0, perp);
    let leak = sys.reality_defect(&v0);
    if leak > 1e-10 {
        return Err(Error::ProjectionLeak(leak));
    }
    let vt = sys.flow(&v0, t)?;
    let dv = sys.lin_comb(&vt, -1.0, &v0);
    let (d1, d2) = sys.coords(&dv);
    let d3 = sys.complement(&dv);
    let d3_norm = sys.norm(&d3);
    Ok(DisplacementValue { d1, d2, d3, d3_norm })
}

/// Center displacement in integral form: (e^{T lambda} - 1) a + int_0^T e^{(T-s) lambda} Phi(s) ds by the
/// composite trapezoid rule on every step, with a Richardson correction from every other step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureDisplacement {
    pub d1: C64,
    pub d2: C64,
    /// Trapezoid values before extrapolation.
    pub d1_trapezoid: C64,
    pub d2_trapezoid: C64,
}

pub fn displacement_quadrature<S: ReducibleSystem>(sys: &S, a1: C64, a2: C64, perp: &S::State, t: f64) -> Result<QuadratureDisplacement> {
    let v0 = sys.lin_comb(&sys.center(a1, a2), 1.0, perp);
    let (_, times, phis) = sys.flow_recorded(&v0, t)?;
    let lam = sys.lambda();
    let lin = (lam * t).exp() - 1.0;
    let trap = |stride: usize| -> (C64, C64) {
        let idx: Vec<usize> = (0..times.len()).step_by(stride).collect();
        let mut s = (ZERO, ZERO);
        for w in idx.windows(2) {
            let (i, j) = (w[0], w[1]);
            let h = times[j] - times[i];
            let ei = (lam * (t - times[i])).exp();
            let ej = (lam * (t - times[j])).exp();
            s.0 += (ei * phis[i].0 + ej * phis[j].0) * (0.5 * h);
            s.1 += (ei * phis[i].1 + ej * phis[j].1) * (0.5 * h);
        }
        s
    };
    let fine = trap(1);
    let coarse = if (times.len() - 1) % 2 == 0 { trap(2) } else { fine };
    let ex = |f: C64, c: C64| (f * 4.0 - c) / 3.0;
    Ok(QuadratureDisplacement {
        d1: lin * a1 + ex(fine.0, coarse.0),
        d2: lin * a2 + ex(fine.1, coarse.1),
        d1_trapezoid: lin * a1 + fine.0,
        d2_trapezoid: lin * a2 + fine.1,
    })
}

#[derive(Debug, Clone)]
pub struct TransverseSolution<S> {
    pub field: S,
    pub iterations: usize,
    /// Largest observed ratio of successive updates.
    pub contraction: f64,
}

/// Fixed point v~0 = R(N3(a1, a2, v~0)) + b h, where N3 is the complement part of the Duhamel
/// term and R the right inverse of I - e^{T L~}.
pub fn solve_transverse<S: ReducibleSystem>(sys: &S, a1: C64, a2: C64, t: f64, b: f64, opts: &ReductionOptions) -> Result<TransverseSolution<S::State>> {
    let amp = a1.norm() + a2.norm();
    if amp > opts.smallness_radius || b.abs() > opts.smallness_radius {
        return Err(Error::InvalidInput(format!("amplitude {amp:.3e} or b {b:.3e} exceeds the smallness radius {}", opts.smallness_radius)));
    }
    let h = if b != 0.0 {
        Some(sys.kernel(t)?.ok_or_else(|| Error::KernelDimensionMismatch("b != 0 needs a kernel direction".into()))?)
    } else {
        None
    };
    let center = sys.center(a1, a2);
    let scale = amp * amp + b.abs();
    let mut v = sys.zero();
    let mut prev_update = f64::INFINITY;
    let mut contraction: f64 = 0.0;
    let mut bad = 0;
    for it in 1..=opts.picard_max_iter {
        let v0 = sys.lin_comb(&center, 1.0, &v);
        let vt = sys.flow(&v0, t)?;
        let n3 = sys.lin_comb(&sys.complement(&vt), -1.0, &sys.linear_flow(&v, t)?);
        let mut next = sys.right_inverse(&n3, t)?;
        if let Some(h) = &h {
            next = sys.lin_comb(&next, b, h);
        }
        let upd = sys.norm(&sys.lin_comb(&next, -1.0, &v));
        v = next;
        if upd <= opts.picard_tol * scale {
            return Ok(TransverseSolution { field: v, iterations: it, contraction });
        }
        if prev_update.is_finite() && prev_update > 0.0 {
            let q = upd / prev_update;
            contraction = contraction.max(q);
            bad = if q >= opts.contraction_limit { bad + 1 } else { 0 };
            if bad >= 3 {
                return Err(Error::NoContraction(q));
            }
        }
        prev_update = upd;
    }
    Err(Error::NoConvergence { iterations: opts.picard_max_iter, residual: prev_update })
}

/// Reduced maps (N1~, N2~) at T = T*(1 + mu) with the complement slaved.
pub fn reduced_maps<S: ReducibleSystem>(sys: &S, a1: C64, a2: C64, mu: f64, b: f64, opts: &ReductionOptions) -> Result<(C64, C64)> {
    let t = sys.t_star() * (1.0 + mu);
    if a1 == ZERO && a2 == ZERO && b == 0.0 {
        return Ok((ZERO, ZERO));
    }
    let z = solve_transverse(sys, a1, a2, t, b, opts)?;
    let d = displacement(sys, a1, a2, &z.field, t)?;
    Ok((d.d1, d.d2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub kappa: f64,
    pub chi: f64,
    #[serde(rename = "Lambda")]
    pub lambda: C64,
    #[serde(rename = "Gamma")]
    pub gamma: C64,
    /// Relative least-squares misfit.
    pub residual: f64,
    /// |Upsilon_1|, |Lambda_2|, |Upsilon_2|, |Gamma_2|.
    pub spurious: [f64; 4],
    pub sample_radius: f64,
    pub condition: f64,
    /// Relative change of the cubic quotient between radius r and r/2.
    pub quartic_ratio: f64,
}

impl CoefficientFit {
    pub fn spurious_max(&self) -> f64 {
        self.spurious.iter().cloned().fold(0.0, f64::max)
    }

    pub fn spurious_ok(&self, ratio: f64) -> bool {
        self.spurious_max() <= ratio * self.lambda.norm().max(self.gamma.norm())
    }

    pub fn coefficients(&self) -> Result<CubicCoefficients> {
        CubicCoefficients::new(self.kappa, self.chi, self.lambda, self.gamma)
    }
}

/// Sample directions: the five of the structure lemma, (1, -i), then extra phases.
pub fn fit_directions(n: usize) -> Vec<(C64, C64)> {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let mut d = vec![(one, ZERO), (ZERO, one), (one, one), (one, i), (one, -one), (one, -i)];
    let mut j = 0;
    while d.len() < n {
        let phi = 0.7 + 1.3 * j as f64;
        let r = if j % 2 == 0 { 0.5 } else { 1.0 };
        d.push((one, C64::from_polar(r, phi)));
        j += 1;
    }
    d.truncate(n.max(3));
    d
}

/// Cubic monomials of N1~ multiplying (Lambda1, Upsilon1, Gamma1, Lambda2, Upsilon2, Gamma2).
fn monomials_1(a1: C64, a2: C64) -> [C64; 6] {
    let (n1, n2) = (a1.norm_sqr(), a2.norm_sqr());
    [a1 * n1, a1 * a1 * a2, a1 * n2, a2.conj() * n1, a2.conj() * a1.conj() * a2.conj(), a2.conj() * n2]
}

/// The same coefficients in N2~ (swap symmetry).
fn monomials_2(a1: C64, a2: C64) -> [C64; 6] {
    let (n1, n2) = (a1.norm_sqr(), a2.norm_sqr());
    [a2 * n2, a2 * a1 * a2, a2 * n1, a1.conj() * n2, a1.conj() * a1.conj() * a2.conj(), a1.conj() * n1]
}

/// Least-squares fit of the cubic structure at eps = mu = 0, with the exact linear part removed and
/// the quintic remainder cancelled by Richardson extrapolation over radii r and r/2.
pub fn fit_coefficients<S: ReducibleSystem>(sys: &S, sample_radius: f64, n_samples: usize, opts: &ReductionOptions) -> Result<CoefficientFit> {
    let dirs = fit_directions(n_samples);
    let t = sys.t_star();
    let lin = (sys.lambda() * t).exp() - 1.0;
    let kappa = 2.0 * PI * sys.k_star() as f64 * sys.gamma_prime0() / sys.omega0();
    let chi = 2.0 * PI * sys.k_star() as f64;
    let mut r = sample_radius;
    for _ in 0..6 {
        let pts: Vec<(C64, C64, f64)> = dirs.iter().flat_map(|&(u1, u2)| [(u1, u2, r), (u1, u2, 0.5 * r)]).collect();
        let vals = par_map(pts.len(), |i| {
            let (u1, u2, rr) = pts[i];
            reduced_maps(sys, u1 * rr, u2 * rr, 0.0, 0.0, opts).map(|(d1, d2)| {
                let c = rr * rr * rr;
                ((d1 - lin * u1 * rr) / c, (d2 - lin * u2 * rr) / c)
            })
        });
        let vals: Vec<(C64, C64)> = vals.into_iter().collect::<Result<_>>()?;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut change: f64 = 0.0;
        let mut signal: f64 = 0.0;
        for (j, &(u1, u2)) in dirs.iter().enumerate() {
            let (big, small) = (vals[2 * j], vals[2 * j + 1]);
            let ex1 = (small.0 * 4.0 - big.0) / 3.0;
            let ex2 = (small.1 * 4.0 - big.1) / 3.0;
            change = change.max((small.0 - big.0).norm()).max((small.1 - big.1).norm());
            signal = signal.max(ex1.norm()).max(ex2.norm());
            rows.push(monomials_1(u1, u2));
            rhs.push(ex1);
            rows.push(monomials_2(u1, u2));
            rhs.push(ex2);
        }
        let quartic_ratio = if signal > 0.0 { change / signal } else { 0.0 };
        if quartic_ratio > opts.fit_quartic_ratio {
            r *= 0.5;
            continue;
        }
        let a = CMat::from_fn(rows.len(), 6, |i, j| rows[i][j]);
        let sv = linalg::svd(&a)?;
        let cond = sv.s[0] / sv.s[5];
        if !(cond <= opts.fit_cond_max) {
            return Err(Error::FitDegenerate(cond));
        }
        // x = V S^-1 U^H rhs
        let uh = linalg::adjoint(&sv.u);
        let utb = linalg::matvec(&uh, &rhs);
        let scaled: Vec<C64> = utb.iter().zip(&sv.s).map(|(z, s)| z / s).collect();
        let x = linalg::matvec(&sv.v, &scaled);
        let fitted = linalg::matvec(&a, &x);
        let miss: f64 = fitted.iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let total = linalg::vec_norm(&rhs);
        return Ok(CoefficientFit {
            kappa,
            chi,
            lambda: x[0],
            gamma: x[2],
            residual: if total > 0.0 { miss / total } else { 0.0 },
            spurious: [x[1].norm(), x[3].norm(), x[4].norm(), x[5].norm()],
            sample_radius: r,
            condition: cond,
            quartic_ratio,
        });
    }
    Err(Error::FitDegenerate(f64::INFINITY))
}

/// Genericity check on fitted coefficients with a tolerance relative to their size.
pub fn fitted_genericity(fit: &CoefficientFit, opts: &ReductionOptions) -> Result<CubicCoefficients> {
    let c = fit.coefficients()?;
    let tol = opts.genericity_rel_tol * fit.lambda.norm().max(fit.gamma.norm()).max(f64::MIN_POSITIVE);
    reduced_o2::require_generic(&c, tol)?;
    Ok(c)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitCheck {
    /// |v(T) - v0| / |v0|.
    pub return_residual: f64,
    /// Fitted transverse speed for traveling candidates.
    pub traveling_speed: Option<f64>,
    /// Shift-matched residual at T/4, T/2, 3T/4 (max over the three), relative to |v0|.
    pub shift_residual: f64,
    /// Unshifted residual at the same times.
    pub unshifted_residual: f64,
}

fn wrap(x: f64, period: f64) -> f64 {
    let y = x.rem_euclid(period);
    if y > 0.5 * period {
        y - period
    } else {
        y
    }
}

/// Return residual and shift-matched comparison at intermediate times.
pub fn verify_orbit<S: ReducibleSystem>(sys: &S, v0: &S::State, t: f64, traveling: bool) -> Result<OrbitCheck> {
    let n0 = sys.norm(v0);
    if n0 == 0.0 {
        return Ok(OrbitCheck { return_residual: 0.0, traveling_speed: traveling.then_some(0.0), shift_residual: 0.0, unshifted_residual: 0.0 });
    }
    let parts = sys.flow_parts(v0, t, 4)?;
    let ret = sys.norm(&sys.lin_comb(&parts[3], -1.0, v0)) / n0;
    let ks = sys.k_star() as f64;
    let period = 2.0 * PI / ks;
    let (c1, c2) = sys.coords(v0);
    let dist = |v: &S::State, th: f64| sys.norm(&sys.lin_comb(v, -1.0, &sys.rotate(v0, th)));
    let mut thetas = Vec::new();
    let mut prev = 0.0;
    let mut unshifted: f64 = 0.0;
    for v in &parts[..3] {
        let (b1, b2) = sys.coords(v);
        // a1 -> a1 e^{i k theta}, a2 -> a2 e^{-i k theta}
        let guess = if c1.norm() >= c2.norm() { (b1 * c1.conj()).arg() / ks } else { -(b2 * c2.conj()).arg() / ks };
        let (mut lo, mut hi) = (guess - 0.25 * period, guess + 0.25 * period);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if dist(v, m1) < dist(v, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let th = 0.5 * (lo + hi);
        let th = prev + wrap(th - prev, period);
        prev = th;
        thetas.push(th);
        unshifted = unshifted.max(dist(v, 0.0) / n0);
    }
    let times = [0.25 * t, 0.5 * t, 0.75 * t];
    let d = thetas.iter().zip(&times).map(|(a, b)| a * b).sum::<f64>() / times.iter().map(|b| b * b).sum::<f64>();
    let shift = parts[..3].iter().zip(&times).map(|(v, &tt)| dist(v, d * tt) / n0).fold(0.0, f64::max);
    Ok(OrbitCheck { return_residual: ret, traveling_speed: traveling.then_some(d), shift_residual: shift, unshifted_residual: unshifted })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub eps: f64,
    pub kind: String,
    /// sqrt(|a1|^2 + |a2|^2).
    pub amplitude: f64,
    /// Norm of the full initial perturbation.
    pub field_norm: f64,
    pub a1: C64,
    pub a2: C64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub return_residual: f64,
    pub traveling_speed: Option<f64>,
    pub shift_residual: f64,
    pub unshifted_residual: f64,
    pub omega: f64,
    pub newton_residual: f64,
    pub newton_iterations: usize,
    pub coefficients: CubicCoefficients,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitFailure {
    pub eps: f64,
    pub kind: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OrbitSearch {
    pub orbits: Vec<OrbitRecord>,
    pub failures: Vec<OrbitFailure>,
}

/// One verified orbit from a seed of the rescaled cubic system.
pub fn refine_orbit<S: ReducibleSystem>(sys: &S, coeffs: &CubicCoefficients, kind: BranchKind, seed: &ReducedPoint, opts: &ReductionOptions) -> Result<(OrbitRecord, S::State)> {
    let eps = sys.eps();
    let ae = eps.abs();
    let sq = ae.sqrt();
    let scale = ae * sq;
    let resid = |p: &ReducedPoint| -> (C64, C64) {
        match reduced_maps(sys, p.a1 * sq, p.a2 * sq, p.mu_tilde * ae, 0.0, opts) {
            Ok((d1, d2)) => (d1 / scale, d2 / scale),
            Err(_) => (C64::new(f64::NAN, 0.0), C64::new(f64::NAN, 0.0)),
        }
    };
    let (p, cert) = reduced_o2::newton_refine(resid, seed, Pinning::for_kind(kind), &opts.newton)?;
    let (a1, a2, mu) = (p.a1 * sq, p.a2 * sq, p.mu_tilde * ae);
    let t = sys.t_star() * (1.0 + mu);
    let z = solve_transverse(sys, a1, a2, t, 0.0, opts)?;
    let v0 = sys.lin_comb(&sys.center(a1, a2), 1.0, &z.field);
    let check = verify_orbit(sys, &v0, t, kind.is_traveling())?;
    let rec = OrbitRecord {
        eps,
        kind: kind.name().into(),
        amplitude: (a1.norm_sqr() + a2.norm_sqr()).sqrt(),
        field_norm: sys.norm(&v0),
        a1,
        a2,
        mu,
        period: t,
        return_residual: check.return_residual,
        traveling_speed: check.traveling_speed,
        shift_residual: check.shift_residual,
        unshifted_residual: check.unshifted_residual,
        omega: sys.lambda().im,
        newton_residual: cert.residual,
        newton_iterations: cert.iterations,
        coefficients: *coeffs,
    };
    Ok((rec, v0))
}

/// For each eps: predicts the branches from the cubic system, corrects them on the full reduced
/// maps and verifies the resulting orbits. Traveling waves are located on the a2 = 0 branch; the
/// a1 = 0 branch is its reflection.
pub fn locate_periodic_orbits<S, F>(setup_at: F, fit: &CoefficientFit, eps_list: &[f64], opts: &ReductionOptions) -> Result<OrbitSearch>
where
    S: ReducibleSystem,
    F: Fn(f64) -> Result<S>,
{
    let coeffs = fitted_genericity(fit, opts)?;
    let mut out = OrbitSearch::default();
    for &eps in eps_list {
        if eps == 0.0 {
            return Err(Error::InvalidInput("eps = 0 has no rescaled branches".into()));
        }
        let sign: i8 = if eps > 0.0 { 1 } else { -1 };
        let sys = setup_at(eps)?;
        let branches = reduced_o2::solve_cubic_equilibria_with_tol(&coeffs, sign, 0.0)?;
        for br in branches {
            if br.kind == BranchKind::Traveling2 {
                continue;
            }
            if br.kind == BranchKind::Trivial {
                let z = sys.zero();
                let check = verify_orbit(&sys, &z, sys.t_star(), false)?;
                out.orbits.push(OrbitRecord {
                    eps,
                    kind: "trivial".into(),
                    amplitude: 0.0,
                    field_norm: 0.0,
                    a1: ZERO,
                    a2: ZERO,
                    mu: 0.0,
                    period: sys.t_star(),
                    return_residual: check.return_residual,
                    traveling_speed: None,
                    shift_residual: 0.0,
                    unshifted_residual: 0.0,
                    omega: sys.lambda().im,
                    newton_residual: 0.0,
                    newton_iterations: 0,
                    coefficients: coeffs,
                });
                continue;
            }
            let seed = br.point(sign);
            match refine_orbit(&sys, &coeffs, br.kind, &seed, opts) {
                Ok((rec, _)) => out.orbits.push(rec),
                Err(e) => out.failures.push(OrbitFailure { eps, kind: br.kind.name().into(), error: e.to_string() }),
            }
        }
    }
    Ok(out)
}
