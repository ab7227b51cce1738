//! Thin dense linear-algebra layer over `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("eigendecomposition did not converge")]
    Eigen,
    #[error("singular value decomposition did not converge")]
    Svd,
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn matvec(a: &CMat, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; a.nrows()];
    matvec_into(a, x, &mut y);
    y
}

pub fn matvec_into(a: &CMat, x: &[C64], y: &mut [C64]) {
    assert_eq!(a.ncols(), x.len());
    assert_eq!(a.nrows(), y.len());
    faer::linalg::matmul::matmul(
        faer::ColMut::from_slice_mut(y),
        faer::Accum::Replace,
        a,
        faer::ColRef::from_slice(x),
        ONE,
        faer::Par::Seq,
    );
}

/// y += A x
pub fn matvec_add(a: &CMat, x: &[C64], y: &mut [C64]) {
    faer::linalg::matmul::matmul(
        faer::ColMut::from_slice_mut(y),
        faer::Accum::Add,
        a,
        faer::ColRef::from_slice(x),
        ONE,
        faer::Par::Seq,
    );
}

/// Max-abs-row-sum norm.
pub fn norm_inf(a: &CMat) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_fro(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues and right eigenvectors (columns).
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat), LinalgError> {
    let e = a.eigen().map_err(|_| LinalgError::Eigen)?;
    let vals: Vec<C64> = e.S().column_vector().iter().cloned().collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>, LinalgError> {
    a.eigenvalues().map_err(|_| LinalgError::Eigen)
}

pub struct Lu {
    lu: faer::linalg::solvers::PartialPivLu<C64>,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMat) -> Self {
        Lu { lu: a.partial_piv_lu(), n: a.nrows() }
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let mut rhs = b.clone();
        self.lu.solve_in_place(&mut rhs);
        rhs
    }

    pub fn inverse(&self) -> CMat {
        self.lu.inverse()
    }
}

pub struct SvdParts {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(a: &CMat) -> Result<SvdParts, LinalgError> {
    let s = a.thin_svd().map_err(|_| LinalgError::Svd)?;
    let sv: Vec<f64> = s.S().column_vector().iter().map(|z| z.re).collect();
    Ok(SvdParts { u: s.U().to_owned(), s: sv, v: s.V().to_owned() })
}

pub fn det(a: &CMat) -> C64 {
    a.determinant()
}

pub fn det_real(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    m.determinant()
}

/// Condition number in the 2-norm.
pub fn cond(a: &CMat) -> Result<f64, LinalgError> {
    let s = svd(a)?.s;
    let smax = s.first().cloned().unwrap_or(0.0);
    let smin = s.last().cloned().unwrap_or(0.0);
    Ok(if smin == 0.0 { f64::INFINITY } else { smax / smin })
}

/// Returns (e^{hA}, h phi1(hA), h phi2(hA)) by Taylor scaling and squaring.
pub fn exp_phi(a: &CMat, h: f64) -> (CMat, CMat, CMat) {
    let n = a.nrows();
    let mut z = a.clone();
    for j in 0..n {
        for i in 0..n {
            z[(i, j)] *= h;
        }
    }
    let nrm = norm_inf(&z);
    let theta = 0.25;
    let squarings = if nrm > theta { (nrm / theta).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    for j in 0..n {
        for i in 0..n {
            z[(i, j)] *= scale;
        }
    }
    const DEG: usize = 14;
    let mut powers = Vec::with_capacity(DEG + 1);
    powers.push(identity(n));
    for p in 1..=DEG {
        let next = &powers[p - 1] * &z;
        powers.push(next);
    }
    // phi_j(z) = sum_i z^i / (i + j)!
    let fact = |m: usize| -> f64 { (1..=m).map(|v| v as f64).product() };
    let mut e = zeros(n, n);
    let mut p1 = zeros(n, n);
    let mut p2 = zeros(n, n);
    for (i, pw) in powers.iter().enumerate() {
        let c0 = 1.0 / fact(i);
        let c1 = 1.0 / fact(i + 1);
        let c2 = 1.0 / fact(i + 2);
        for col in 0..n {
            for row in 0..n {
                let v = pw[(row, col)];
                e[(row, col)] += v * c0;
                p1[(row, col)] += v * c1;
                p2[(row, col)] += v * c2;
            }
        }
    }
    let eye = identity(n);
    for _ in 0..squarings {
        // phi2(2z) = (phi1 + phi2 (e + I)) / 4, phi1(2z) = (e + I) phi1 / 2, e(2z) = e e
        let epi = &e + &eye;
        let new_p2 = (&p1 + &(&p2 * &epi)) * faer::Scale(C64::new(0.25, 0.0));
        let new_p1 = (&epi * &p1) * faer::Scale(C64::new(0.5, 0.0));
        let new_e = &e * &e;
        e = new_e;
        p1 = new_p1;
        p2 = new_p2;
    }
    for col in 0..n {
        for row in 0..n {
            p1[(row, col)] *= h;
            p2[(row, col)] *= h;
        }
    }
    (e, p1, p2)
}

pub fn expm(a: &CMat, t: f64) -> CMat {
    exp_phi(a, t).0
}
