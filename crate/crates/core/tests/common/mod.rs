#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};

use ncagd::{KnownConstants, Objective, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect())
        .collect()
}

/// Largest relative error of the analytic gradient against central
/// differences, `‖g_fd − g‖ / max(‖g‖, 1e-3)`, over `points`.
pub fn fd_max_rel_error(f: &dyn Fn(&[f64]) -> (f64, Vec<f64>), points: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for p in points {
        let (_, g) = f(p);
        let mut err2 = 0.0;
        let mut x = p.clone();
        for i in 0..p.len() {
            x[i] = p[i] + FD_STEP;
            let up = f(&x).0;
            x[i] = p[i] - FD_STEP;
            let down = f(&x).0;
            x[i] = p[i];
            let fd = (up - down) / (2.0 * FD_STEP);
            err2 += (fd - g[i]).powi(2);
        }
        let gn = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        worst = worst.max(err2.sqrt() / gn.max(1e-3));
    }
    worst
}

pub fn objective_fn(obj: &dyn Objective) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + '_ {
    move |x| {
        let v = obj.value(x).unwrap();
        let g = obj.gradient(x).unwrap();
        (v, g)
    }
}

/// Counts raw calls that reach the wrapped objective.
pub struct Spy<O> {
    pub inner: O,
    pub values: AtomicU64,
    pub gradients: AtomicU64,
}

impl<O> Spy<O> {
    pub fn new(inner: O) -> Self {
        Spy {
            inner,
            values: AtomicU64::new(0),
            gradients: AtomicU64::new(0),
        }
    }

    pub fn counts(&self) -> (u64, u64) {
        (
            self.values.load(Ordering::Relaxed),
            self.gradients.load(Ordering::Relaxed),
        )
    }
}

impl<O: Objective> Objective for Spy<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.value_and_gradient(x)
    }

    fn constants(&self) -> KnownConstants {
        self.inner.constants()
    }
}

/// `f(x) = Σ a_k x^k` in one variable, for hand-checkable examples.
pub struct Poly(pub Vec<f64>);

impl Objective for Poly {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.iter().rev().fold(0.0, |acc, c| acc * x[0] + c))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d: f64 = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x[0] + k as f64 * c);
        Ok(vec![d])
    }
}
