use crate::linalg::C64;
use crate::model::{ChannelField, FullField, Grid};
use crate::spectral::crossing::{pairing, EigenBundle};

/// Spectral projections onto the crossing eigenspaces.
///
/// A real field's mode-k* profile decomposes as a1 w + conj(a2) M conj(w) + (complement), which
/// is the coordinate convention used for the reduced maps.
#[derive(Debug, Clone)]
pub struct Projections {
    pub bundle: EigenBundle,
    n: usize,
}

impl Projections {
    pub fn new(bundle: EigenBundle) -> Self {
        let n = bundle.n;
        Projections { bundle, n }
    }

    fn interior<'a>(&self, mode: &'a [C64]) -> &'a [C64] {
        &mode[self.n..mode.len() - self.n]
    }

    /// Reduced coordinates (a1, a2) of a real field.
    pub fn coords(&self, v: &ChannelField) -> (C64, C64) {
        let b = &self.bundle;
        let vk = v.interior(b.k_star);
        (pairing(b.h, vk, &b.w_adj), pairing(b.h, vk, &b.sw_adj).conj())
    }

    /// Real field with reduced coordinates (a1, a2) and no complement part.
    pub fn center_field(&self, a1: C64, a2: C64, grid: &Grid) -> ChannelField {
        let b = &self.bundle;
        let mut f = ChannelField::zeros(self.n, grid);
        let prof: Vec<C64> = b.w.iter().zip(&b.sw).map(|(w, s)| a1 * w + a2.conj() * s).collect();
        f.set_interior(b.k_star, &prof);
        f
    }

    /// Complement projection Pi = I - Pi_+ - Pi_- on real fields.
    pub fn complement(&self, v: &ChannelField, grid: &Grid) -> ChannelField {
        let (a1, a2) = self.coords(v);
        v.sub(&self.center_field(a1, a2, grid))
    }

    /// Pi_+ on complex fields: <u_k, w~> w at k plus <u_{-k}, M w~> M w at -k.
    pub fn pi_plus(&self, u: &FullField) -> FullField {
        let b = &self.bundle;
        let k = b.k_star as i64;
        let m = &b.m_diag;
        let n = self.n;
        let mw: Vec<C64> = b.w.iter().enumerate().map(|(i, z)| z * m[i % n]).collect();
        let mwt: Vec<C64> = b.w_adj.iter().enumerate().map(|(i, z)| z * m[i % n]).collect();
        let mut out = FullField { n, n1: u.n1, k_max: u.k_max, data: vec![C64::new(0.0, 0.0); u.data.len()] };
        let c1 = pairing(b.h, self.interior(u.mode(k)), &b.w_adj);
        let c2 = pairing(b.h, self.interior(u.mode(-k)), &mwt);
        let len = b.w.len();
        for (i, z) in out.mode_mut(k)[n..n + len].iter_mut().enumerate() {
            *z = c1 * b.w[i];
        }
        for (i, z) in out.mode_mut(-k)[n..n + len].iter_mut().enumerate() {
            *z = c2 * mw[i];
        }
        out
    }

    /// Pi_- u = conj(Pi_+ conj(u)).
    pub fn pi_minus(&self, u: &FullField) -> FullField {
        let conj = |f: &FullField| -> FullField {
            let mut g = f.clone();
            for k in -(f.k_max as i64)..=f.k_max as i64 {
                let src: Vec<C64> = f.mode(-k).iter().map(|z| z.conj()).collect();
                g.mode_mut(k).copy_from_slice(&src);
            }
            g
        };
        conj(&self.pi_plus(&conj(u)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{M0Params, ModelSystem, Problem};
    use crate::spectral::crossing::{find_crossing, tune_m0, CrossingOptions};
    use rand::{Rng, SeedableRng};

    fn setup() -> (Problem, Projections) {
        let g = Grid::new(8.0, 65, 4, 0.05).unwrap();
        let p = tune_m0(M0Params::default(), &g, 0.8).unwrap();
        let m = ModelSystem::M0(p);
        let b = find_crossing(&m, &g, (-0.1, 0.1), &CrossingOptions::default()).unwrap();
        (Problem::new(m, b.eps0, g).unwrap(), Projections::new(b))
    }

    #[test]
    fn coordinates_invert_center_fields() {
        let (pb, pr) = setup();
        let a1 = C64::new(0.3, -0.2);
        let a2 = C64::new(-0.1, 0.5);
        let f = pr.center_field(a1, a2, &pb.grid);
        let (b1, b2) = pr.coords(&f);
        assert!((a1 - b1).norm() < 1e-10 && (a2 - b2).norm() < 1e-10);
        assert!(pr.complement(&f, &pb.grid).max_abs() < 1e-10);
    }

    #[test]
    fn projections_are_idempotent_and_complementary() {
        let (pb, pr) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut u = FullField::zeros(3, &pb.grid);
        for k in -4i64..=4 {
            for (i, z) in u.mode_mut(k).iter_mut().enumerate() {
                if i >= 3 && i < 3 * 64 {
                    *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
        }
        let p = pr.pi_plus(&u);
        assert!(pr.pi_plus(&p).sub(&p).norm(&pb.grid) < 1e-8 * p.norm(&pb.grid));
        let q = pr.pi_minus(&u);
        assert!(pr.pi_minus(&q).sub(&q).norm(&pb.grid) < 1e-8 * q.norm(&pb.grid));
        assert!(pr.pi_plus(&q).norm(&pb.grid) < 1e-8 * q.norm(&pb.grid));
        let mut zero_mode = FullField::zeros(3, &pb.grid);
        zero_mode.mode_mut(0).iter_mut().for_each(|z| *z = C64::new(1.0, 0.0));
        assert_eq!(pr.pi_plus(&zero_mode).norm(&pb.grid), 0.0);
    }
}
