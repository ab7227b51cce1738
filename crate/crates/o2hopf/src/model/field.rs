use serde::{Deserialize, Serialize};

use crate::linalg::{C64, ZERO};
use crate::model::grid::Grid;

/// Real n-component field stored as x2-Fourier coefficients for k = 0..=K on all N1 nodes,
/// ordered (k, x1, component). Mode k carries e^{i k x2}; mode -k is the conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelField {
    pub n: usize,
    pub n1: usize,
    pub k_max: usize,
    pub data: Vec<C64>,
}

impl ChannelField {
    pub fn zeros(n: usize, grid: &Grid) -> Self {
        ChannelField { n, n1: grid.n1, k_max: grid.k_max, data: vec![ZERO; (grid.k_max + 1) * grid.n1 * n] }
    }

    pub fn zeros_like(&self) -> Self {
        ChannelField { n: self.n, n1: self.n1, k_max: self.k_max, data: vec![ZERO; self.data.len()] }
    }

    #[inline]
    pub fn idx(&self, k: usize, j: usize, c: usize) -> usize {
        (k * self.n1 + j) * self.n + c
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize, c: usize) -> C64 {
        self.data[self.idx(k, j, c)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, c: usize, v: C64) {
        let i = self.idx(k, j, c);
        self.data[i] = v;
    }

    pub fn mode(&self, k: usize) -> &[C64] {
        let s = self.n1 * self.n;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [C64] {
        let s = self.n1 * self.n;
        &mut self.data[k * s..(k + 1) * s]
    }

    /// Interior nodes of mode k, ordered (x1, component).
    pub fn interior(&self, k: usize) -> &[C64] {
        let s = self.n1 * self.n;
        &self.data[k * s + self.n..(k + 1) * s - self.n]
    }

    pub fn interior_mut(&mut self, k: usize) -> &mut [C64] {
        let s = self.n1 * self.n;
        let n = self.n;
        &mut self.data[k * s + n..(k + 1) * s - n]
    }

    pub fn set_interior(&mut self, k: usize, v: &[C64]) {
        self.interior_mut(k).copy_from_slice(v);
    }

    /// Builds a field from a single mode profile; `profile` is ordered (x1, component) over all nodes.
    pub fn from_mode(n: usize, grid: &Grid, k: usize, profile: &[C64]) -> Self {
        let mut f = Self::zeros(n, grid);
        f.mode_mut(k).copy_from_slice(profile);
        f.enforce_reality();
        f
    }

    /// Mode 0 of a real field is real.
    pub fn enforce_reality(&mut self) {
        for v in self.mode_mut(0) {
            v.im = 0.0;
        }
    }

    pub fn reality_defect(&self) -> f64 {
        self.mode(0).iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn zero_boundary(&mut self) {
        let n = self.n;
        let n1 = self.n1;
        for k in 0..=self.k_max {
            for c in 0..n {
                self.set(k, 0, c, ZERO);
                self.set(k, n1 - 1, c, ZERO);
            }
        }
    }

    pub fn boundary_max(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..=self.k_max {
            for c in 0..self.n {
                m = m.max(self.get(k, 0, c).norm()).max(self.get(k, self.n1 - 1, c).norm());
            }
        }
        m
    }

    pub fn axpy(&mut self, a: f64, x: &ChannelField) {
        for (y, v) in self.data.iter_mut().zip(&x.data) {
            *y += v * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for y in self.data.iter_mut() {
            *y *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut f = self.clone();
        f.scale(a);
        f
    }

    pub fn add(&self, x: &ChannelField) -> Self {
        let mut f = self.clone();
        f.axpy(1.0, x);
        f
    }

    pub fn sub(&self, x: &ChannelField) -> Self {
        let mut f = self.clone();
        f.axpy(-1.0, x);
        f
    }

    /// Discrete L2 norm of the real field on the channel: 2 pi h sum_j (|v_0|^2 + 2 sum_k |v_k|^2).
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        let mut s = 0.0;
        for k in 0..=self.k_max {
            let w = if k == 0 { 1.0 } else { 2.0 };
            s += w * self.mode(k).iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        (2.0 * std::f64::consts::PI * grid.h() * s).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Rotation (R(theta) u)(x2) = u(x2 + theta): mode k picks up e^{i k theta}.
    pub fn rotate(&self, theta: f64) -> Self {
        let mut f = self.clone();
        for k in 1..=self.k_max {
            let ph = C64::from_polar(1.0, k as f64 * theta);
            for v in f.mode_mut(k) {
                *v *= ph;
            }
        }
        f
    }

    /// Reflection (S u)(x2) = M u(-x2): mode k becomes M conj(u_k).
    pub fn reflect(&self, m_diag: &[f64]) -> Self {
        let mut f = self.clone();
        let n = self.n;
        for (i, v) in f.data.iter_mut().enumerate() {
            *v = v.conj() * m_diag[i % n];
        }
        f
    }

    /// Physical values at (x1 node j, x2) for component c.
    pub fn eval_at(&self, j: usize, c: usize, x2: f64) -> f64 {
        let mut s = self.get(0, j, c).re;
        for k in 1..=self.k_max {
            s += 2.0 * (self.get(k, j, c) * C64::from_polar(1.0, k as f64 * x2)).re;
        }
        s
    }
}

/// Complex field on the channel with modes -K..=K, ordered (k + K, x1, component).
#[derive(Debug, Clone, PartialEq)]
pub struct FullField {
    pub n: usize,
    pub n1: usize,
    pub k_max: usize,
    pub data: Vec<C64>,
}

impl FullField {
    pub fn zeros(n: usize, grid: &Grid) -> Self {
        FullField { n, n1: grid.n1, k_max: grid.k_max, data: vec![ZERO; (2 * grid.k_max + 1) * grid.n1 * n] }
    }

    pub fn mode(&self, k: i64) -> &[C64] {
        let s = self.n1 * self.n;
        let q = (k + self.k_max as i64) as usize;
        &self.data[q * s..(q + 1) * s]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut [C64] {
        let s = self.n1 * self.n;
        let q = (k + self.k_max as i64) as usize;
        &mut self.data[q * s..(q + 1) * s]
    }

    pub fn from_real(f: &ChannelField) -> Self {
        let mut out = FullField { n: f.n, n1: f.n1, k_max: f.k_max, data: vec![ZERO; (2 * f.k_max + 1) * f.n1 * f.n] };
        for k in 0..=f.k_max {
            out.mode_mut(k as i64).copy_from_slice(f.mode(k));
            if k > 0 {
                let conj: Vec<C64> = f.mode(k).iter().map(|v| v.conj()).collect();
                out.mode_mut(-(k as i64)).copy_from_slice(&conj);
            }
        }
        out
    }

    /// Real part of the field (average of the k and conj(-k) coefficients).
    pub fn to_real(&self) -> ChannelField {
        let mut f = ChannelField { n: self.n, n1: self.n1, k_max: self.k_max, data: vec![ZERO; (self.k_max + 1) * self.n1 * self.n] };
        for k in 0..=self.k_max {
            let a = self.mode(k as i64);
            let b = self.mode(-(k as i64));
            for (i, v) in f.mode_mut(k).iter_mut().enumerate() {
                *v = (a[i] + b[i].conj()) * 0.5;
            }
        }
        f.enforce_reality();
        f
    }

    /// Largest |u_k - conj(u_{-k})|, zero for the image of a real field.
    pub fn reality_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..=self.k_max as i64 {
            let a = self.mode(k);
            let b = self.mode(-k);
            for i in 0..a.len() {
                m = m.max((a[i] - b[i].conj()).norm());
            }
        }
        m
    }

    pub fn axpy(&mut self, a: C64, x: &FullField) {
        for (y, v) in self.data.iter_mut().zip(&x.data) {
            *y += v * a;
        }
    }

    pub fn sub(&self, x: &FullField) -> FullField {
        let mut f = self.clone();
        f.axpy(C64::new(-1.0, 0.0), x);
        f
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        (2.0 * std::f64::consts::PI * grid.h() * self.data.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn rotate(&self, theta: f64) -> Self {
        let mut f = self.clone();
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            let ph = C64::from_polar(1.0, k as f64 * theta);
            for v in f.mode_mut(k) {
                *v *= ph;
            }
        }
        f
    }

    /// (S u)(x2) = M u(-x2): mode k of the image is M u_{-k}.
    pub fn reflect(&self, m_diag: &[f64]) -> Self {
        let mut f = self.clone();
        let n = self.n;
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            let src: Vec<C64> = self.mode(-k).to_vec();
            for (i, v) in f.mode_mut(k).iter_mut().enumerate() {
                *v = src[i] * m_diag[i % n];
            }
        }
        f
    }
}

/// Discrete pairing h * sum over interior nodes and components of u conj(v).
pub fn pair(h: f64, u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(4.0, 64, 4, 0.01).unwrap()
    }

    fn sample(g: &Grid) -> ChannelField {
        let mut f = ChannelField::zeros(2, g);
        for k in 0..=g.k_max {
            for j in 1..g.n1 - 1 {
                for c in 0..2 {
                    let x = g.x(j);
                    f.set(k, j, c, C64::new((x + k as f64).sin() + c as f64, if k == 0 { 0.0 } else { (x * 0.3 * k as f64).cos() }));
                }
            }
        }
        f
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = grid();
        let f = sample(&g);
        let m = [1.0, -1.0];
        let ff = f.reflect(&m).reflect(&m);
        assert!(ff.sub(&f).max_abs() < 1e-15);
    }

    #[test]
    fn rotation_matches_physical_shift() {
        let g = grid();
        let f = sample(&g);
        let r = f.rotate(0.7);
        for x2 in [0.0, 1.1, 4.0] {
            assert!((r.eval_at(10, 1, x2) - f.eval_at(10, 1, x2 + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_field_round_trip() {
        let g = grid();
        let f = sample(&g);
        let full = FullField::from_real(&f);
        assert!(full.reality_defect() < 1e-15);
        assert!(full.to_real().sub(&f).max_abs() < 1e-15);
        assert!((full.norm(&g) - f.l2_norm(&g)).abs() < 1e-12 * f.l2_norm(&g));
    }

    #[test]
    fn reflections_agree_between_representations() {
        let g = grid();
        let f = sample(&g);
        let m = [1.0, -1.0];
        let a = FullField::from_real(&f.reflect(&m));
        let b = FullField::from_real(&f).reflect(&m);
        assert!(a.sub(&b).data.iter().all(|v| v.norm() < 1e-15));
    }
}
