use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::field::ChannelField;
use crate::model::problem::{Problem, Propagator};
use crate::par_map;

pub const BLOWUP_NORM: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ChannelField>,
    pub final_field: ChannelField,
    pub steps: usize,
    pub dt: f64,
}

impl Problem {
    /// Number of steps used for a horizon T: ceil(T / dt) rounded up to a multiple of 4.
    pub fn step_count(&self, t: f64) -> usize {
        let n = (t / self.grid.dt).ceil().max(1.0) as usize;
        n.div_ceil(4) * 4
    }

    fn check_input(&self, v0: &ChannelField, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be finite and nonnegative (got {t})")));
        }
        if v0.n != self.n() || v0.n1 != self.grid.n1 || v0.k_max != self.grid.k_max {
            return Err(Error::InvalidInput("field does not match the problem grid".into()));
        }
        Ok(())
    }

    pub fn propagators(&self, dt: f64) -> Arc<Vec<Propagator>> {
        let key = dt.to_bits();
        if let Some(p) = self.etd_cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let props = par_map(self.grid.k_max + 1, |k| {
            let (e, p1, p2) = linalg::exp_phi(self.lk(k), dt);
            Propagator { e, p1, p2 }
        });
        let arc = Arc::new(props);
        Problem::cache_insert(&mut self.etd_cache.lock().unwrap(), key, arc.clone());
        arc
    }

    /// e^{T L_k} for every mode.
    pub fn linear_propagator(&self, t: f64) -> Arc<Vec<CMat>> {
        let key = t.to_bits();
        if let Some(p) = self.expm_cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let mats = par_map(self.grid.k_max + 1, |k| linalg::expm(self.lk(k), t));
        let arc = Arc::new(mats);
        Problem::cache_insert(&mut self.expm_cache.lock().unwrap(), key, arc.clone());
        arc
    }

    /// Nonlinear perturbation evolution over [0, T] by second-order exponential time differencing
    /// (the stiff linear part is propagated exactly, the remainder explicitly).
    pub fn evolve(&self, v0: &ChannelField, t: f64) -> Result<ChannelField> {
        Ok(self.evolve_steps(v0, t, self.step_count(t), 0)?.final_field)
    }

    /// As `evolve`, storing a snapshot every `every` steps (0 keeps none besides the endpoints).
    pub fn evolve_snapshots(&self, v0: &ChannelField, t: f64, every: usize) -> Result<Trajectory> {
        self.evolve_steps(v0, t, self.step_count(t), every)
    }

    pub fn evolve_steps(&self, v0: &ChannelField, t: f64, nsteps: usize, every: usize) -> Result<Trajectory> {
        self.check_input(v0, t)?;
        let mut times = vec![0.0];
        let mut snaps = vec![v0.clone()];
        if t == 0.0 {
            return Ok(Trajectory { times, snapshots: snaps, final_field: v0.clone(), steps: 0, dt: 0.0 });
        }
        let nsteps = nsteps.max(1);
        let dt = t / nsteps as f64;
        let props = self.propagators(dt);
        let mut u = v0.clone();
        u.zero_boundary();
        u.enforce_reality();
        let kmax = self.grid.k_max;
        let dim = self.dim();
        let mut tmp = vec![linalg::ZERO; dim];
        for step in 1..=nsteps {
            let nu = self.nonlinear(&u);
            let mut a = u.zeros_like();
            for k in 0..=kmax {
                let pr = &props[k];
                let out = a.interior_mut(k);
                linalg::matvec_into(&pr.e, u.interior(k), out);
                if !self.linear_only {
                    linalg::matvec_add(&pr.p1, nu.interior(k), out);
                }
            }
            a.enforce_reality();
            if !self.linear_only {
                let na = self.nonlinear(&a);
                for k in 0..=kmax {
                    for (i, v) in tmp.iter_mut().enumerate() {
                        *v = na.interior(k)[i] - nu.interior(k)[i];
                    }
                    linalg::matvec_add(&props[k].p2, &tmp, a.interior_mut(k));
                }
                a.enforce_reality();
            }
            u = a;
            let nrm = u.l2_norm(&self.grid);
            if !nrm.is_finite() || nrm > BLOWUP_NORM {
                return Err(Error::BlowUp { t: step as f64 * dt, norm: nrm });
            }
            if every > 0 && step % every == 0 && step != nsteps {
                times.push(step as f64 * dt);
                snaps.push(u.clone());
            }
        }
        times.push(t);
        snaps.push(u.clone());
        Ok(Trajectory { times, snapshots: snaps, final_field: u, steps: nsteps, dt })
    }

    /// Linearized evolution e^{T L} v0, mode by mode.
    pub fn evolve_linearized(&self, v0: &ChannelField, t: f64) -> Result<ChannelField> {
        self.check_input(v0, t)?;
        if t == 0.0 {
            return Ok(v0.clone());
        }
        let e = self.linear_propagator(t);
        let mut out = v0.zeros_like();
        for k in 0..=self.grid.k_max {
            linalg::matvec_into(&e[k], v0.interior(k), out.interior_mut(k));
        }
        out.enforce_reality();
        Ok(out)
    }

    /// Step-halving check: L2 distance between the solutions with the default and the halved step.
    pub fn richardson_defect(&self, v0: &ChannelField, t: f64) -> Result<f64> {
        let n = self.step_count(t);
        let a = self.evolve_steps(v0, t, n, 0)?.final_field;
        let b = self.evolve_steps(v0, t, 2 * n, 0)?.final_field;
        Ok(a.sub(&b).l2_norm(&self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::model::{Grid, ModelSystem};

    fn m1() -> Problem {
        Problem::new(ModelSystem::m1(), 0.0, Grid::new(12.0, 65, 4, 0.05).unwrap()).unwrap()
    }

    fn bump(pb: &Problem, amp: f64) -> ChannelField {
        let mut f = ChannelField::zeros(pb.n(), &pb.grid);
        for j in 1..pb.grid.n1 - 1 {
            let x = pb.grid.x(j);
            for c in 0..pb.n() {
                f.set(0, j, c, C64::new(amp * (-x * x).exp(), 0.0));
                f.set(1, j, c, C64::new(0.5 * amp * (-(x - 1.0) * (x - 1.0)).exp(), 0.2 * amp));
            }
        }
        f
    }

    #[test]
    fn zero_and_zero_horizon() {
        let pb = m1();
        let z = ChannelField::zeros(2, &pb.grid);
        assert_eq!(pb.evolve(&z, 1.0).unwrap().max_abs(), 0.0);
        let v = bump(&pb, 0.1);
        assert_eq!(pb.evolve(&v, 0.0).unwrap(), v);
    }

    #[test]
    fn linear_problem_matches_exponential() {
        let pb = m1().linear();
        let v = bump(&pb, 0.1);
        let a = pb.evolve(&v, 1.3).unwrap();
        let b = pb.evolve_linearized(&v, 1.3).unwrap();
        assert!(a.sub(&b).l2_norm(&pb.grid) < 1e-10 * v.l2_norm(&pb.grid));
    }

    #[test]
    fn second_order_in_time() {
        let pb = m1();
        let v = bump(&pb, 0.3);
        let t = 1.0;
        let n = pb.step_count(t);
        let r = |m: usize| pb.evolve_steps(&v, t, m, 0).unwrap().final_field;
        let (a, b, c) = (r(n), r(2 * n), r(4 * n));
        let ratio = a.sub(&b).l2_norm(&pb.grid) / b.sub(&c).l2_norm(&pb.grid);
        assert!((ratio.log2() - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn step_counts_are_multiples_of_four() {
        let pb = m1();
        for t in [0.01, 0.3, 1.0, 7.77] {
            let n = pb.step_count(t);
            assert_eq!(n % 4, 0);
            assert!(t / n as f64 <= pb.grid.dt + 1e-15);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let pb = m1();
        let v = bump(&pb, 1e7);
        assert!(matches!(pb.evolve(&v, 0.5), Err(Error::BlowUp { .. })));
    }
}
