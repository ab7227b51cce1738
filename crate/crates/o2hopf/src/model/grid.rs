use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform x1 grid on [-L, L] with N1 nodes, x2 Fourier modes 0..=K, time step dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub l: f64,
    pub n1: usize,
    pub k_max: usize,
    pub dt: f64,
}

impl Grid {
    pub fn new(l: f64, n1: usize, k_max: usize, dt: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidInput(format!("L must be positive (got {l})")));
        }
        if n1 < 64 {
            return Err(Error::InvalidInput(format!("N1 must be at least 64 (got {n1})")));
        }
        if k_max < 4 {
            return Err(Error::InvalidInput(format!("K must be at least 4 (got {k_max})")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive (got {dt})")));
        }
        Ok(Grid { l, n1, k_max, dt })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n1 - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.l + self.h() * j as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n1).map(|j| self.x(j)).collect()
    }

    /// Number of interior x1 nodes.
    pub fn m(&self) -> usize {
        self.n1 - 2
    }

    /// Physical x2 points; 4K + 2 removes all aliasing of cubic products.
    pub fn m2(&self) -> usize {
        4 * self.k_max + 2
    }

    pub fn with_n1(&self, n1: usize) -> Result<Self> {
        Grid::new(self.l, n1, self.k_max, self.dt)
    }

    /// dt * max|speed| / h.
    pub fn cfl(&self, max_speed: f64) -> f64 {
        self.dt * max_speed / self.h()
    }
}
