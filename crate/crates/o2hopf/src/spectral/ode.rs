use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Rescale the state to unit norm every this many accepted steps.
    pub renorm_every: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { rtol: 1e-10, atol: 1e-14, max_steps: 200_000, renorm_every: 10 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn norm(y: &[C64]) -> f64 {
    y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Adaptive Dormand-Prince 5(4) integration of y' = f(x, y) from x0 to x1 (either direction).
/// Returns the final state and the accumulated log of the renormalization factors, so that the
/// true solution is exp(log_scale) * y.
pub fn dopri<F>(mut f: F, x0: f64, x1: f64, y0: Vec<C64>, opts: &DpOptions) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let span = x1 - x0;
    if span == 0.0 {
        return Ok((y0, 0.0));
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut log_scale = 0.0;
    let ny = norm(&y);
    if ny > 0.0 {
        y.iter_mut().for_each(|z| *z /= ny);
        log_scale = ny.ln();
    }
    let mut h = dir * (span.abs() * 1e-3).min(1e-2);
    let hmin = span.abs() * 1e-14;
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut accepted = 0usize;
    f(x, &y, &mut k[0]);
    for _ in 0..opts.max_steps {
        if (x1 - x) * dir <= 0.0 {
            return Ok((y, log_scale));
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * (h * A[s][j]);
                    }
                }
                tmp[i] = acc;
            }
            f(x + C[s] * h, &tmp, &mut k[s]);
        }
        let mut err: f64 = 0.0;
        let mut y5 = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut a5 = y[i];
            let mut e = C64::new(0.0, 0.0);
            for s in 0..7 {
                a5 += k[s][i] * (h * B5[s]);
                e += k[s][i] * (h * (B5[s] - B4[s]));
            }
            y5[i] = a5;
            let sc = opts.atol + opts.rtol * y[i].norm().max(a5.norm()).max(1e-300);
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            h *= 0.25;
            if h.abs() < hmin {
                return Err(Error::StiffnessFailure(format!("non-finite state near x = {x}")));
            }
            continue;
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            accepted += 1;
            // FSAL: last stage is f at the new point
            let last = k[6].clone();
            k[0] = last;
            if opts.renorm_every > 0 && accepted % opts.renorm_every == 0 {
                let ny = norm(&y);
                if ny > 0.0 {
                    y.iter_mut().for_each(|z| *z /= ny);
                    k[0].iter_mut().for_each(|z| *z /= ny);
                    log_scale += ny.ln();
                }
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h.abs() < hmin {
            return Err(Error::StiffnessFailure(format!("step size underflow near x = {x}")));
        }
    }
    Err(Error::StiffnessFailure(format!("step budget {} exhausted", opts.max_steps)))
}
