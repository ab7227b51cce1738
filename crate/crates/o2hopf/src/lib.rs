//! Numerical toolkit for transverse O(2) Hopf bifurcation of planar fronts in a
//! periodic channel: model PDE evolution, spectral crossing detection,
//! Lyapunov-Schmidt reduction of the time-T map and the reduced cubic system.

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod reduced_o2;
pub mod reduction;
pub mod spectral;

pub use error::{Error, Result};

static THREADS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

/// Worker threads used for independent per-mode and per-sample work.
pub fn threads() -> usize {
    match THREADS.load(std::sync::atomic::Ordering::Relaxed) {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8),
        n => n,
    }
}

pub fn set_threads(n: usize) {
    THREADS.store(n, std::sync::atomic::Ordering::Relaxed);
}

/// Order-preserving parallel map over 0..count on scoped threads.
pub(crate) fn par_map<T: Send, F: Fn(usize) -> T + Sync>(count: usize, f: F) -> Vec<T> {
    let threads = threads().min(count).max(1);
    if threads == 1 {
        return (0..count).map(&f).collect();
    }
    let size = count.div_ceil(threads);
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|s| {
        let f = &f;
        for (ci, chunk) in out.chunks_mut(size).enumerate() {
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(ci * size + i));
                }
            });
        }
    });
    out.into_iter().map(|v| v.unwrap()).collect()
}
