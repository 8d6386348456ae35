//! Test problems: robust biweight regression, diagonal quadratics and
//! separable/ridge double wells with certified smoothness constants.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::oracle::{KnownConstants, Objective};
use crate::rng::CounterRng;

pub const BIWEIGHT_DIM: usize = 30;
pub const BIWEIGHT_SAMPLES: usize = 60;

/// Random streams used by [`gen_biweight`].
pub mod streams {
    pub const DESIGN: u64 = 0;
    pub const TRUTH: u64 = 1;
    pub const GAUSSIAN_NOISE: u64 = 2;
    pub const BERNOULLI_NOISE: u64 = 3;
}

/// Biweight loss `φ(θ) = θ²/(1 + θ²)`.
pub fn biweight_phi(theta: f64) -> f64 {
    let t2 = theta * theta;
    t2 / (1.0 + t2)
}

/// `φ'(θ) = 2θ/(1 + θ²)²`.
pub fn biweight_phi_prime(theta: f64) -> f64 {
    let s = 1.0 + theta * theta;
    2.0 * theta / (s * s)
}

/// Robust regression `f(x) = (1/m) Σ φ(aᵢᵀx − bᵢ)`.
///
/// `a` is stored row-major, `m` rows of length `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiweightInstance {
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// The hidden draws behind a generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BiweightLatents {
    pub truth: Vec<f64>,
    pub gaussian_noise: Vec<f64>,
    pub bernoulli_noise: Vec<f64>,
}

/// Generates the default 60 × 30 instance for `seed`.
pub fn gen_biweight(seed: u64) -> BiweightInstance {
    BiweightInstance::generate(seed, BIWEIGHT_DIM, BIWEIGHT_SAMPLES).0
}

impl BiweightInstance {
    /// `aᵢ ~ N(0, I_d)`, `z ~ N(0, 4 I_d)`, `b = Az + 3ν₁ + ν₂` with
    /// `ν₁ ~ N(0, I_m)` and `ν₂` elementwise Bernoulli(0.3) in `{0, 1}`.
    /// Each quantity comes from its own stream (see [`streams`]); `A` is
    /// drawn in row-major order.
    pub fn generate(seed: u64, d: usize, m: usize) -> (Self, BiweightLatents) {
        let mut design = CounterRng::stream(seed, streams::DESIGN);
        let a: Vec<f64> = (0..m * d).map(|_| design.standard_normal()).collect();
        let mut truth_rng = CounterRng::stream(seed, streams::TRUTH);
        let truth: Vec<f64> = (0..d).map(|_| 2.0 * truth_rng.standard_normal()).collect();
        let mut g = CounterRng::stream(seed, streams::GAUSSIAN_NOISE);
        let gaussian_noise: Vec<f64> = (0..m).map(|_| g.standard_normal()).collect();
        let mut bern = CounterRng::stream(seed, streams::BERNOULLI_NOISE);
        let bernoulli_noise: Vec<f64> = (0..m)
            .map(|_| if bern.bernoulli(0.3) { 1.0 } else { 0.0 })
            .collect();
        let b = (0..m)
            .map(|i| {
                let row = &a[i * d..(i + 1) * d];
                let az: f64 = row.iter().zip(&truth).map(|(r, z)| r * z).sum();
                az + 3.0 * gaussian_noise[i] + bernoulli_noise[i]
            })
            .collect();
        (
            BiweightInstance { seed, d, m, a, b },
            BiweightLatents {
                truth,
                gaussian_noise,
                bernoulli_noise,
            },
        )
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b[i]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: BiweightInstance = serde_json::from_str(text)?;
        if inst.a.len() != inst.m * inst.d || inst.b.len() != inst.m {
            return Err(OptError::InvalidParameter(
                "biweight instance has inconsistent sizes".into(),
            ));
        }
        Ok(inst)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(OptError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl Objective for BiweightInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let s: f64 = (0..self.m).map(|i| biweight_phi(self.residual(i, x))).sum();
        Ok(s / self.m as f64)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(x)?.1)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        let inv_m = 1.0 / self.m as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; self.d];
        for i in 0..self.m {
            let r = self.residual(i, x);
            value += biweight_phi(r);
            let w = biweight_phi_prime(r) * inv_m;
            for (g, a) in grad.iter_mut().zip(self.row(i)) {
                *g += w * a;
            }
        }
        Ok((value * inv_m, grad))
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants {
            f_lower_bound: Some(0.0),
            ..KnownConstants::default()
        }
    }
}

/// `f(x) = ½ Σ λᵢ xᵢ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub eigenvalues: Vec<f64>,
}

pub fn quadratic(eigenvalues: Vec<f64>) -> Result<Quadratic> {
    Quadratic::new(eigenvalues)
}

impl Quadratic {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(OptError::InvalidParameter(
                "quadratic eigenvalues must be positive and finite".into(),
            ));
        }
        Ok(Quadratic { eigenvalues })
    }

    /// Eigenvalues `λ_min·κ^{i/(d−1)}`, log-uniformly spaced from 1 to `κ`.
    pub fn log_spaced(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 || !(kappa >= 1.0) {
            return Err(OptError::InvalidParameter(format!(
                "need dim ≥ 1 and κ ≥ 1, got dim={dim}, κ={kappa}"
            )));
        }
        let eig = (0..dim)
            .map(|i| {
                if dim == 1 {
                    1.0
                } else {
                    kappa.powf(i as f64 / (dim - 1) as f64)
                }
            })
            .collect();
        Quadratic::new(eig)
    }

    pub fn smoothness(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn strong_convexity(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::MAX, f64::min)
    }

    pub fn kappa(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.eigenvalues.len() {
            return Err(OptError::DimensionMismatch {
                expected: self.eigenvalues.len(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5
            * self
                .eigenvalues
                .iter()
                .zip(x)
                .map(|(l, x)| l * x * x)
                .sum::<f64>())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.eigenvalues.iter().zip(x).map(|(l, x)| l * x).collect())
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants {
            l1: Some(self.smoothness()),
            sigma: Some(self.strong_convexity()),
            l2: Some(0.0),
            l3: Some(0.0),
            f_lower_bound: Some(0.0),
        }
    }
}

/// Radius of the box on which the double-well constants hold.
pub const WELL_BOX: f64 = 2.0;

/// `w(s) = ¼s⁴ − ½s²` and its first three derivatives.
fn well(s: f64) -> f64 {
    0.25 * s.powi(4) - 0.5 * s * s
}

fn well_prime(s: f64) -> f64 {
    s * s * s - s
}

/// `f(x) = Σ (¼xᵢ⁴ − ½xᵢ²)` on the box `‖x‖_∞ ≤ 2`.
///
/// On the box `|f''| = |3x² − 1| ≤ 11`, `|f'''| = |6x| ≤ 12` and `f'''' = 6`,
/// giving `L1 = 11`, `L2 = 12`, `L3 = 6`. Minima sit at `±1` per coordinate
/// with value `−d/4`. Points outside the box are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub dim: usize,
}

pub fn double_well(dim: usize) -> DoubleWell {
    DoubleWell { dim }
}

impl DoubleWell {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(OptError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|c| c.abs() > WELL_BOX) {
            return Err(OptError::OutOfDomain {
                point: x.to_vec(),
                reason: format!("double well constants hold only for ‖x‖_∞ ≤ {WELL_BOX}"),
            });
        }
        Ok(())
    }
}

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(x.iter().map(|&c| well(c)).sum())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter().map(|&c| well_prime(c)).collect())
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants {
            l1: Some(11.0),
            sigma: None,
            l2: Some(12.0),
            l3: Some(6.0),
            f_lower_bound: Some(-0.25 * self.dim as f64),
        }
    }
}

/// `f(x) = Σ cos(xᵢ)`: saddles and maxima at multiples of `π`, minima at odd
/// multiples with value `−d`. All derivatives are bounded by 1, so
/// `L1 = L2 = L3 = 1` on the whole space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ripple {
    pub dim: usize,
}

pub fn ripple(dim: usize) -> Ripple {
    Ripple { dim }
}

impl Ripple {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(OptError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl Objective for Ripple {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(x.iter().map(|c| c.cos()).sum())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter().map(|c| -c.sin()).collect())
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants {
            l1: Some(1.0),
            sigma: None,
            l2: Some(1.0),
            l3: Some(1.0),
            f_lower_bound: Some(-(self.dim as f64)),
        }
    }
}

/// A double well along one direction with a quadratic valley across it:
/// `f(x) = w(aᵀx − b) + (μ/2)(‖x‖² − (aᵀx)²)` with unit `a`.
///
/// The Hessian is `w''(s)·aaᵀ + μ(I − aaᵀ)`, so on the slab `|aᵀx − b| ≤ 2`
/// the constants are `L1 = max(11, μ)`, `L2 = 12` and `L3 = 6`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeWell {
    pub direction: Vec<f64>,
    pub offset: f64,
    pub valley_curvature: f64,
}

impl RidgeWell {
    pub fn new(direction: Vec<f64>, offset: f64, valley_curvature: f64) -> Result<Self> {
        let n = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n > 0.0) || !(valley_curvature >= 0.0) {
            return Err(OptError::InvalidParameter(
                "ridge well needs a nonzero direction and μ ≥ 0".into(),
            ));
        }
        Ok(RidgeWell {
            direction: direction.iter().map(|c| c / n).collect(),
            offset,
            valley_curvature,
        })
    }

    fn along(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.direction.len() {
            return Err(OptError::DimensionMismatch {
                expected: self.direction.len(),
                got: x.len(),
            });
        }
        let p: f64 = self.direction.iter().zip(x).map(|(a, x)| a * x).sum();
        if (p - self.offset).abs() > WELL_BOX {
            return Err(OptError::OutOfDomain {
                point: x.to_vec(),
                reason: format!("ridge well constants hold only for |aᵀx − b| ≤ {WELL_BOX}"),
            });
        }
        Ok(p)
    }
}

impl Objective for RidgeWell {
    fn dim(&self) -> usize {
        self.direction.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let p = self.along(x)?;
        let sq: f64 = x.iter().map(|c| c * c).sum();
        Ok(well(p - self.offset) + 0.5 * self.valley_curvature * (sq - p * p))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.along(x)?;
        let w1 = well_prime(p - self.offset);
        let mu = self.valley_curvature;
        Ok(x.iter()
            .zip(&self.direction)
            .map(|(xi, ai)| w1 * ai + mu * (xi - p * ai))
            .collect())
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants {
            l1: Some(self.valley_curvature.max(11.0)),
            sigma: None,
            l2: Some(12.0),
            l3: Some(6.0),
            f_lower_bound: Some(-0.25),
        }
    }
}
