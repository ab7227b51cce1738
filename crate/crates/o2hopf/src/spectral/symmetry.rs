use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::linalg::{self, CMat, C64};
use crate::model::{ChannelField, FullField, Problem};
use crate::spectral::projections::Projections;

/// Mode operators L_k for k = -K..=K acting on complex fields.
pub struct FullOperator {
    mats: Vec<CMat>,
    k_max: usize,
    n: usize,
}

impl FullOperator {
    pub fn new(pb: &Problem) -> Self {
        let k_max = pb.grid.k_max;
        let mats = (-(k_max as i64)..=k_max as i64).map(|k| pb.assemble(k)).collect();
        FullOperator { mats, k_max, n: pb.n() }
    }

    pub fn apply(&self, u: &FullField) -> FullField {
        let mut out = FullField { n: u.n, n1: u.n1, k_max: u.k_max, data: vec![linalg::ZERO; u.data.len()] };
        let n = self.n;
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            let src = u.mode(k);
            let y = linalg::matvec(&self.mats[(k + self.k_max as i64) as usize], &src[n..src.len() - n]);
            let dst = out.mode_mut(k);
            let len = dst.len();
            dst[n..len - n].copy_from_slice(&y);
        }
        out
    }
}

/// Residuals of the O(2) equivariance checks; each entry is a relative max over the random draws.
#[derive(Debug, Clone, Serialize)]
pub struct EquivarianceReport {
    pub theta: f64,
    pub rotation_commutator: f64,
    pub reflection_commutator: f64,
    pub nonlinear_rotation: f64,
    pub nonlinear_reflection: f64,
    pub generator_antisymmetry: f64,
    pub generator_reflection: f64,
    pub reflection_involution: f64,
    pub phase_action: Option<f64>,
    pub projection_commutator: Option<f64>,
    pub biorthogonality: Option<f64>,
}

impl EquivarianceReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.rotation_commutator,
            self.reflection_commutator,
            self.nonlinear_rotation,
            self.nonlinear_reflection,
            self.generator_antisymmetry,
            self.generator_reflection,
            self.reflection_involution,
            self.phase_action.unwrap_or(0.0),
            self.projection_commutator.unwrap_or(0.0),
            self.biorthogonality.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn random_real(pb: &Problem, rng: &mut impl Rng, amp: f64) -> ChannelField {
    let mut f = ChannelField::zeros(pb.n(), &pb.grid);
    for k in 0..=pb.grid.k_max {
        for j in 1..pb.grid.n1 - 1 {
            let x = pb.grid.x(j);
            let env = amp * (-x * x / 8.0).exp();
            for c in 0..pb.n() {
                f.set(k, j, c, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env);
            }
        }
    }
    f.enforce_reality();
    f
}

fn random_full(pb: &Problem, rng: &mut impl Rng) -> FullField {
    let mut f = FullField::zeros(pb.n(), &pb.grid);
    let n = pb.n();
    for k in -(pb.grid.k_max as i64)..=pb.grid.k_max as i64 {
        let m = f.mode_mut(k);
        let len = m.len();
        for z in m[n..len - n].iter_mut() {
            *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    f
}

fn generator(u: &FullField) -> FullField {
    let mut g = u.clone();
    for k in -(u.k_max as i64)..=u.k_max as i64 {
        for z in g.mode_mut(k) {
            *z *= C64::new(0.0, k as f64);
        }
    }
    g
}

fn inner(h: f64, a: &FullField, b: &FullField) -> C64 {
    a.data.iter().zip(&b.data).map(|(x, y)| x * y.conj()).sum::<C64>() * (2.0 * std::f64::consts::PI * h)
}

/// Checks L R(theta) = R(theta) L, L S = S L, the same for the nonlinearity, antisymmetry of the
/// rotation generator G and GS = -SG, S^2 = I and, given crossing data, R(theta) w = e^{i k* theta} w,
/// commutation of Pi_+ with L and the biorthogonality relations.
pub fn verify_equivariance(pb: &Problem, proj: Option<&Projections>, theta: f64, draws: usize, seed: u64) -> EquivarianceReport {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = pb.model.reflection();
    let grid = &pb.grid;
    let h = grid.h();
    let full = FullOperator::new(pb);
    let rel = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    let mut rep = EquivarianceReport {
        theta,
        rotation_commutator: 0.0,
        reflection_commutator: 0.0,
        nonlinear_rotation: 0.0,
        nonlinear_reflection: 0.0,
        generator_antisymmetry: 0.0,
        generator_reflection: 0.0,
        reflection_involution: 0.0,
        phase_action: None,
        projection_commutator: None,
        biorthogonality: None,
    };
    for _ in 0..draws {
        let v = random_real(pb, &mut rng, 0.2);
        let lv = pb.apply_linear(&v);
        let scale = lv.l2_norm(grid);
        let a = pb.apply_linear(&v.rotate(theta)).sub(&lv.rotate(theta));
        rep.rotation_commutator = rep.rotation_commutator.max(rel(a.l2_norm(grid), scale));
        let b = pb.apply_linear(&v.reflect(&m)).sub(&lv.reflect(&m));
        rep.reflection_commutator = rep.reflection_commutator.max(rel(b.l2_norm(grid), scale));
        let nv = pb.nonlinear(&v);
        let ns = nv.l2_norm(grid);
        let c = pb.nonlinear(&v.rotate(theta)).sub(&nv.rotate(theta));
        rep.nonlinear_rotation = rep.nonlinear_rotation.max(rel(c.l2_norm(grid), ns));
        let d = pb.nonlinear(&v.reflect(&m)).sub(&nv.reflect(&m));
        rep.nonlinear_reflection = rep.nonlinear_reflection.max(rel(d.l2_norm(grid), ns));
        let u = random_full(pb, &mut rng);
        let w = random_full(pb, &mut rng);
        let gu = generator(&u);
        let gw = generator(&w);
        let lhs = inner(h, &gu, &w);
        let rhs = inner(h, &u, &gw);
        rep.generator_antisymmetry = rep.generator_antisymmetry.max(rel((lhs + rhs).norm(), lhs.norm()));
        let gs = generator(&u.reflect(&m));
        let sg = gu.reflect(&m);
        let mut sum = gs.clone();
        sum.axpy(C64::new(1.0, 0.0), &sg);
        rep.generator_reflection = rep.generator_reflection.max(rel(sum.norm(grid), gs.norm(grid)));
        let ss = u.reflect(&m).reflect(&m).sub(&u);
        rep.reflection_involution = rep.reflection_involution.max(rel(ss.norm(grid), u.norm(grid)));
        if let Some(pr) = proj {
            let lp = full.apply(&pr.pi_plus(&u));
            let pl = pr.pi_plus(&full.apply(&u));
            let r = rel(lp.sub(&pl).norm(grid), full.apply(&u).norm(grid));
            rep.projection_commutator = Some(rep.projection_commutator.unwrap_or(0.0).max(r));
        }
    }
    if let Some(pr) = proj {
        let b = &pr.bundle;
        let k = b.k_star as i64;
        let n = pb.n();
        let mut wf = FullField::zeros(n, grid);
        wf.mode_mut(k)[n..n + b.w.len()].copy_from_slice(&b.w);
        let rw = wf.rotate(theta);
        let mut expect = wf.clone();
        for z in expect.data.iter_mut() {
            *z *= C64::from_polar(1.0, k as f64 * theta);
        }
        rep.phase_action = Some(rel(rw.sub(&expect).norm(grid), wf.norm(grid)));
        rep.biorthogonality = Some(b.residuals.max());
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid, ModelSystem};

    #[test]
    fn identity_rotation_commutes_exactly() {
        let pb = Problem::new(ModelSystem::m1(), 0.0, Grid::new(12.0, 65, 4, 0.05).unwrap()).unwrap();
        let r = verify_equivariance(&pb, None, 0.0, 3, 1);
        assert_eq!(r.rotation_commutator, 0.0);
        assert_eq!(r.nonlinear_rotation, 0.0);
        assert!(r.reflection_involution < 1e-12);
    }

    #[test]
    fn random_rotation_commutes() {
        let pb = Problem::new(ModelSystem::m0(), 0.0, Grid::new(8.0, 65, 4, 0.05).unwrap()).unwrap();
        let r = verify_equivariance(&pb, None, 1.234, 5, 2);
        assert!(r.max_residual() < 1e-8, "{r:?}");
    }
}
