use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::reduction::ReducibleSystem;

/// Six-dimensional ODE with an O(2)-equivariant Hopf pair (a1, a2) and two damped real modes:
///
/// ```text
/// a1' = lambda(eps) a1 + (p |a1|^2 + q |a2|^2) a1 + e y1 a1 + g y2 a1
/// a2' = lambda(eps) a2 + (p |a2|^2 + q |a1|^2) a2 + e y1 a2 + g y2 a2
/// y1' = -d1 y1 + c1 (|a1|^2 + |a2|^2)
/// y2' = -d2 y2 + c2 |a1|^2 |a2|^2
/// ```
///
/// with lambda(eps) = gamma' eps + i omega. On the slow manifold y1 = c1/d1 (|a1|^2 + |a2|^2), so
/// the time-T* displacement has cubic coefficients Lambda = T* (p + e c1/d1), Gamma = T* (q + e c1/d1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub omega: f64,
    pub gamma_prime: f64,
    pub p: C64,
    pub q: C64,
    pub e: f64,
    pub g: f64,
    pub d1: f64,
    pub d2: f64,
    pub c1: f64,
    pub c2: f64,
    /// RK4 steps per period.
    pub steps: usize,
}

impl SyntheticParams {
    /// Parameters whose displacement map has the prescribed (kappa, chi, Lambda, Gamma), with k* = 1.
    pub fn prescribed(kappa: f64, chi: f64, lambda: C64, gamma: C64) -> Result<Self> {
        if (chi - 2.0 * PI).abs() > 1e-12 || kappa == 0.0 {
            return Err(Error::InvalidInput(format!("need chi = 2 pi (k* = 1) and kappa != 0 (got {kappa}, {chi})")));
        }
        let omega = 1.0;
        let t = 2.0 * PI / omega;
        let (e, c1, d1) = (0.5, 1.0, 5.0);
        let slave = e * c1 / d1;
        Ok(SyntheticParams {
            omega,
            gamma_prime: kappa * omega / chi,
            p: lambda / t - slave,
            q: gamma / t - slave,
            e,
            g: 0.3,
            d1,
            d2: 8.0,
            c1,
            c2: 1.0,
            steps: 400,
        })
    }

    pub fn t_star(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Cubic coefficients of the displacement map implied by the parameters.
    pub fn expected(&self) -> (C64, C64) {
        let slave = self.e * self.c1 / self.d1;
        let t = self.t_star();
        ((self.p + slave) * t, (self.q + slave) * t)
    }
}

/// The synthetic system at a fixed eps. States are [a1, a2, y1, y2].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSystem {
    pub params: SyntheticParams,
    pub eps: f64,
}

impl SyntheticSystem {
    pub fn new(params: SyntheticParams, eps: f64) -> Self {
        SyntheticSystem { params, eps }
    }

    fn nonlinear(&self, s: &[C64]) -> [C64; 4] {
        let p = &self.params;
        let (a1, a2) = (s[0], s[1]);
        let (y1, y2) = (s[2].re, s[3].re);
        let (n1, n2) = (a1.norm_sqr(), a2.norm_sqr());
        let fb = p.e * y1 + p.g * y2;
        [
            (p.p * n1 + p.q * n2 + fb) * a1,
            (p.p * n2 + p.q * n1 + fb) * a2,
            C64::new(p.c1 * (n1 + n2), 0.0),
            C64::new(p.c2 * n1 * n2, 0.0),
        ]
    }

    fn rhs(&self, s: &[C64]) -> [C64; 4] {
        let lam = self.lambda();
        let n = self.nonlinear(s);
        [lam * s[0] + n[0], lam * s[1] + n[1], n[2] - s[2] * self.params.d1, n[3] - s[3] * self.params.d2]
    }

    fn steps_for(&self, t: f64) -> usize {
        let per = self.params.steps as f64 / self.params.t_star();
        ((t * per).ceil() as usize).max(4)
    }

    fn integrate(&self, v0: &[C64], t: f64, n: usize, mut visit: impl FnMut(usize, f64, &[C64])) -> Result<Vec<C64>> {
        let h = t / n as f64;
        let mut s: Vec<C64> = v0.to_vec();
        visit(0, 0.0, &s);
        for step in 1..=n {
            let k1 = self.rhs(&s);
            let tmp: Vec<C64> = (0..4).map(|i| s[i] + k1[i] * (0.5 * h)).collect();
            let k2 = self.rhs(&tmp);
            let tmp: Vec<C64> = (0..4).map(|i| s[i] + k2[i] * (0.5 * h)).collect();
            let k3 = self.rhs(&tmp);
            let tmp: Vec<C64> = (0..4).map(|i| s[i] + k3[i] * h).collect();
            let k4 = self.rhs(&tmp);
            for i in 0..4 {
                s[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
            let nrm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm > crate::model::evolve::BLOWUP_NORM {
                return Err(Error::BlowUp { t: step as f64 * h, norm: nrm });
            }
            visit(step, step as f64 * h, &s);
        }
        Ok(s)
    }
}

impl ReducibleSystem for SyntheticSystem {
    type State = Vec<C64>;

    fn eps(&self) -> f64 {
        self.eps
    }

    fn lambda(&self) -> C64 {
        C64::new(self.params.gamma_prime * self.eps, self.params.omega)
    }

    fn k_star(&self) -> usize {
        1
    }

    fn omega0(&self) -> f64 {
        self.params.omega
    }

    fn gamma_prime0(&self) -> f64 {
        self.params.gamma_prime
    }

    fn t_star(&self) -> f64 {
        self.params.t_star()
    }

    fn zero(&self) -> Vec<C64> {
        vec![ZERO; 4]
    }

    fn lin_comb(&self, a: &Vec<C64>, s: f64, b: &Vec<C64>) -> Vec<C64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    }

    fn norm(&self, v: &Vec<C64>) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn center(&self, a1: C64, a2: C64) -> Vec<C64> {
        vec![a1, a2, ZERO, ZERO]
    }

    fn coords(&self, v: &Vec<C64>) -> (C64, C64) {
        (v[0], v[1])
    }

    fn complement(&self, v: &Vec<C64>) -> Vec<C64> {
        vec![ZERO, ZERO, v[2], v[3]]
    }

    fn reality_defect(&self, v: &Vec<C64>) -> f64 {
        v[2].im.abs().max(v[3].im.abs())
    }

    fn rotate(&self, v: &Vec<C64>, theta: f64) -> Vec<C64> {
        let r = C64::from_polar(1.0, theta);
        vec![v[0] * r, v[1] * r.conj(), v[2], v[3]]
    }

    fn flow_parts(&self, v0: &Vec<C64>, t: f64, parts: usize) -> Result<Vec<Vec<C64>>> {
        let parts = parts.max(1);
        let n = self.steps_for(t).div_ceil(parts) * parts;
        let mut out = Vec::new();
        self.integrate(v0, t, n, |step, _, s| {
            if step > 0 && step % (n / parts) == 0 {
                out.push(s.to_vec());
            }
        })?;
        Ok(out)
    }

    fn flow_recorded(&self, v0: &Vec<C64>, t: f64) -> Result<(Vec<C64>, Vec<f64>, Vec<(C64, C64)>)> {
        let mut times = Vec::new();
        let mut phis = Vec::new();
        let fin = self.integrate(v0, t, self.steps_for(t), |_, tt, s| {
            let n = self.nonlinear(s);
            times.push(tt);
            phis.push((n[0], n[1]));
        })?;
        Ok((fin, times, phis))
    }

    fn linear_flow(&self, v: &Vec<C64>, t: f64) -> Result<Vec<C64>> {
        let lam = self.lambda();
        let e = (lam * t).exp();
        Ok(vec![v[0] * e, v[1] * e, v[2] * (-self.params.d1 * t).exp(), v[3] * (-self.params.d2 * t).exp()])
    }

    fn right_inverse(&self, y: &Vec<C64>, t: f64) -> Result<Vec<C64>> {
        if y[0] != ZERO || y[1] != ZERO {
            return Err(Error::InvalidInput("right-hand side is not in the complement".into()));
        }
        Ok(vec![ZERO, ZERO, y[2] / (1.0 - (-self.params.d1 * t).exp()), y[3] / (1.0 - (-self.params.d2 * t).exp())])
    }

    fn kernel(&self, _t: f64) -> Result<Option<Vec<C64>>> {
        Ok(None)
    }
}
