use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::field::ChannelField;
use crate::model::grid::Grid;
use crate::model::problem::Problem;

pub const WEIGHT_CAP: f64 = 1e8;

fn check_order(s: usize) -> Result<()> {
    if s > 2 {
        return Err(Error::InvalidInput(format!("derivative order {s} exceeds 2")));
    }
    Ok(())
}

/// Central x1-difference of one mode (all nodes; zero at the boundary nodes).
fn dx1(f: &ChannelField, h: f64) -> ChannelField {
    let mut out = f.zeros_like();
    for k in 0..=f.k_max {
        for j in 1..f.n1 - 1 {
            for c in 0..f.n {
                out.set(k, j, c, (f.get(k, j + 1, c) - f.get(k, j - 1, c)) / (2.0 * h));
            }
        }
    }
    out
}

fn dx2(f: &ChannelField) -> ChannelField {
    let mut out = f.clone();
    for k in 0..=f.k_max {
        let ik = C64::new(0.0, k as f64);
        for v in out.mode_mut(k) {
            *v *= ik;
        }
    }
    out
}

/// All derivatives D^alpha v with |alpha| <= s.
pub fn derivatives(v: &ChannelField, grid: &Grid, s: usize) -> Result<Vec<ChannelField>> {
    check_order(s)?;
    let h = grid.h();
    let mut out = vec![v.clone()];
    let mut layer = vec![v.clone()];
    for _ in 0..s {
        let mut next = Vec::new();
        for (i, f) in layer.iter().enumerate() {
            if i == 0 {
                next.push(dx1(f, h));
            }
            next.push(dx2(f));
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

/// Channel integral of sum_c weight(x1_j) a_c |f_c|^2, real-field convention.
fn weighted_sq(f: &ChannelField, grid: &Grid, a: &[f64], w: &dyn Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for k in 0..=f.k_max {
        let mk = if k == 0 { 1.0 } else { 2.0 };
        for j in 0..f.n1 {
            let wj = w(j);
            for c in 0..f.n {
                s += mk * wj * a[c] * f.get(k, j, c).norm_sqr();
            }
        }
    }
    2.0 * std::f64::consts::PI * grid.h() * s
}

/// Squared discrete H^s norm of a channel field.
pub fn hs_norm_sq(v: &ChannelField, grid: &Grid, s: usize) -> Result<f64> {
    let ones = vec![1.0; v.n];
    Ok(derivatives(v, grid, s)?.iter().map(|d| weighted_sq(d, grid, &ones, &|_| 1.0)).sum())
}

pub fn hs_norm(v: &ChannelField, grid: &Grid, s: usize) -> Result<f64> {
    Ok(hs_norm_sq(v, grid, s)?.sqrt())
}

/// Symmetrizer-weighted energy E(v) = 1/2 sum_{|alpha|<=s} <D^alpha v, A^0 D^alpha v>.
pub fn energy_functional(pb: &Problem, v: &ChannelField, s: usize) -> Result<f64> {
    let n = pb.n();
    let a0: Vec<Vec<f64>> = (0..pb.grid.n1).map(|j| pb.model.symmetrizer(pb.eps, pb.profile.at(j))).collect();
    let mut e = 0.0;
    for d in derivatives(v, &pb.grid, s)? {
        let mut acc = 0.0;
        for k in 0..=d.k_max {
            let mk = if k == 0 { 1.0 } else { 2.0 };
            for j in 0..d.n1 {
                for c in 0..n {
                    acc += mk * a0[j][c] * d.get(k, j, c).norm_sqr();
                }
            }
        }
        e += 2.0 * std::f64::consts::PI * pb.grid.h() * acc;
    }
    Ok(0.5 * e)
}

/// Equivalence constants (c, C) with c |v|^2_{H^s} <= E(v) <= C |v|^2_{H^s}.
pub fn energy_bounds(pb: &Problem) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in 0..pb.grid.n1 {
        for a in pb.model.symmetrizer(pb.eps, pb.profile.at(j)) {
            lo = lo.min(a);
            hi = hi.max(a);
        }
    }
    (0.5 * lo, 0.5 * hi)
}

fn weight(eta: f64, x: f64) -> f64 {
    (eta * (1.0 + x * x).sqrt()).exp()
}

fn check_weight(eta: f64, l: f64) -> Result<()> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!("eta must be nonnegative (got {eta})")));
    }
    let w = weight(eta, l);
    if !(w <= WEIGHT_CAP) {
        return Err(Error::WeightOverflow(w));
    }
    Ok(())
}

/// Discrete H^s norm with measure e^{eta (1 + x1^2)^{1/2}} dx1 dx2.
pub fn weighted_norm(v: &ChannelField, grid: &Grid, eta: f64, s: usize) -> Result<f64> {
    check_weight(eta, grid.l)?;
    let ones = vec![1.0; v.n];
    let xs = grid.xs();
    let w = |j: usize| weight(eta, xs[j]);
    Ok(derivatives(v, grid, s)?.iter().map(|d| weighted_sq(d, grid, &ones, &w)).sum::<f64>().sqrt())
}

/// Weighted discrete H^s norm of a sampled function of x1 on a uniform grid.
pub fn weighted_norm_1d(x: &[f64], values: &[f64], eta: f64, s: usize) -> Result<f64> {
    check_order(s)?;
    if x.len() != values.len() || x.len() < 3 {
        return Err(Error::InvalidInput("need matching samples on at least 3 nodes".into()));
    }
    let l = x[0].abs().max(x[x.len() - 1].abs());
    check_weight(eta, l)?;
    let h = x[1] - x[0];
    let mut layers = vec![values.to_vec()];
    for _ in 0..s {
        let f = layers.last().unwrap();
        let mut d = vec![0.0; f.len()];
        for j in 1..f.len() - 1 {
            d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
        }
        layers.push(d);
    }
    let mut acc = 0.0;
    for f in &layers {
        for (j, &v) in f.iter().enumerate() {
            acc += weight(eta, x[j]) * v * v;
        }
    }
    Ok((h * acc).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationError {
    pub amplitude: f64,
    pub err: f64,
    pub en_bound_ratio: f64,
}

/// Distance between nonlinear and linearized evolution in the discrete H^s norm.
pub fn linearization_error(pb: &Problem, v0: &ChannelField, t: f64, s: usize) -> Result<LinearizationError> {
    let a = pb.evolve(v0, t)?;
    let b = pb.evolve_linearized(v0, t)?;
    let err = hs_norm(&a.sub(&b), &pb.grid, s)?;
    let amp = hs_norm(v0, &pb.grid, s)?;
    let ratio = if amp > 0.0 { err / (amp * amp) } else { 0.0 };
    Ok(LinearizationError { amplitude: amp, err, en_bound_ratio: ratio })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyCheck {
    pub amplitudes: Vec<f64>,
    /// max_t E_s(v(t)) / E_s(v0) for each amplitude.
    pub growth: Vec<f64>,
    /// Trapezoid integral over [0, T0] of the squared H^{s+1} norm of the viscous components.
    pub dissipation: Vec<f64>,
    pub dissipation_exponent: f64,
    pub growth_spread: f64,
}

/// Energy growth and viscous dissipation along nonlinear evolution of `shape` scaled to each amplitude.
pub fn energy_check(pb: &Problem, shape: &ChannelField, amplitudes: &[f64], t0: f64, s: usize) -> Result<EnergyCheck> {
    check_order(s)?;
    if amplitudes.len() < 2 {
        return Err(Error::InvalidInput("need at least two amplitudes".into()));
    }
    let base = hs_norm(shape, &pb.grid, s)?;
    if base == 0.0 {
        return Err(Error::InvalidInput("shape is zero".into()));
    }
    let hyp = pb.n() - pb.model.r();
    let mask: Vec<f64> = (0..pb.n()).map(|c| if c >= hyp { 1.0 } else { 0.0 }).collect();
    let mut growth = vec![];
    let mut diss = vec![];
    for &a in amplitudes {
        let v0 = shape.scaled(a / base);
        let e0 = energy_functional(pb, &v0, s)?;
        let traj = pb.evolve_snapshots(&v0, t0, 1)?;
        let mut g: f64 = 1.0;
        let mut d = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for (t, v) in traj.times.iter().zip(&traj.snapshots) {
            g = g.max(energy_functional(pb, v, s)? / e0);
            let p: f64 = derivatives(v, &pb.grid, (s + 1).min(2))?
                .iter()
                .map(|dv| weighted_sq(dv, &pb.grid, &mask, &|_| 1.0))
                .sum();
            if let Some((tp, pp)) = prev {
                d += 0.5 * (t - tp) * (p + pp);
            }
            prev = Some((*t, p));
        }
        growth.push(g);
        diss.push(d);
    }
    let lx: Vec<f64> = amplitudes.iter().map(|a| a.ln()).collect();
    let ly: Vec<f64> = diss.iter().map(|d| d.ln()).collect();
    let exponent = crate::reduced_o2::fit_slope(&lx, &ly).unwrap_or(f64::NAN);
    let gmax = growth.iter().cloned().fold(0.0, f64::max);
    let gmin = growth.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(EnergyCheck {
        amplitudes: amplitudes.to_vec(),
        growth,
        dissipation: diss,
        dissipation_exponent: exponent,
        growth_spread: (gmax - gmin) / gmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSystem, Problem};

    fn pb() -> Problem {
        Problem::new(ModelSystem::m0(), 0.0, Grid::new(8.0, 65, 4, 0.05).unwrap()).unwrap()
    }

    fn field(pb: &Problem) -> ChannelField {
        let mut f = ChannelField::zeros(3, &pb.grid);
        for j in 1..pb.grid.n1 - 1 {
            let x = pb.grid.x(j);
            f.set(0, j, 0, C64::new((-x * x).exp(), 0.0));
            f.set(2, j, 1, C64::new(0.3, -0.1) * (-x * x / 2.0).exp());
        }
        f
    }

    #[test]
    fn energy_reduces_to_half_l2_for_identity_symmetrizer() {
        let p = pb();
        let v = field(&p);
        let e = energy_functional(&p, &v, 0).unwrap();
        let l2 = v.l2_norm(&p.grid);
        assert!((e - 0.5 * l2 * l2).abs() < 1e-12 * e);
        assert!((energy_functional(&p, &v.scaled(2.0), 2).unwrap() - 4.0 * energy_functional(&p, &v, 2).unwrap()).abs() < 1e-12);
        assert_eq!(energy_functional(&p, &v.zeros_like(), 1).unwrap(), 0.0);
    }

    #[test]
    fn point_support_weight() {
        let p = pb();
        let mut v = ChannelField::zeros(3, &p.grid);
        v.set(0, 32, 0, C64::new(1.0, 0.0));
        let eta = 0.3;
        let r = weighted_norm(&v, &p.grid, eta, 0).unwrap() / weighted_norm(&v, &p.grid, 0.0, 0).unwrap();
        assert!((r * r - eta.exp()).abs() < 1e-10);
        assert!((weighted_norm(&v, &p.grid, 0.0, 2).unwrap() - hs_norm(&v, &p.grid, 2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn overflowing_weight_is_refused() {
        let p = pb();
        let v = field(&p);
        assert!(matches!(weighted_norm(&v, &p.grid, 3.0, 0), Err(Error::WeightOverflow(_))));
        assert!(matches!(hs_norm(&v, &p.grid, 3), Err(Error::InvalidInput(_))));
    }
}
