//! Turning a non-convexity certificate into function decrease.
//!
//! Given a pair `(u, v)` along which `f` curves downward, step along
//! `δ = (u − v)/‖u − v‖` in both directions and keep the lower point. The
//! symmetric variant steps `±η` from `u`; the asymmetric variant, suited to
//! objectives with Lipschitz third derivatives, steps `+η'` from `u` and `−η`
//! from `v`.
//!
//! Best-iterate selection picks the lowest value among AGD iterates and a few
//! extra points on the line through the last two iterates.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::oracle::Oracle;
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NcStepResult {
    pub z: Vector,
    pub f_z: f64,
    pub chosen_side: Side,
}

fn unit_direction(u: &Vector, v: &Vector) -> Result<(Vector, f64)> {
    let diff = u.sub(v);
    let len = diff.norm();
    if len == 0.0 {
        return Err(OptError::InvalidParameter(
            "negative-curvature step needs u ≠ v".into(),
        ));
    }
    Ok((diff.scaled(1.0 / len), len))
}

/// Returns the lower of `u + ηδ` and `u − ηδ`; ties go to the plus side.
/// Costs two value evaluations.
pub fn exploit_nc_pair(
    f: &mut dyn Oracle,
    u: &Vector,
    v: &Vector,
    eta: f64,
) -> Result<NcStepResult> {
    if !(eta > 0.0) {
        return Err(OptError::InvalidParameter(format!("η must be positive, got {eta}")));
    }
    let (delta, _) = unit_direction(u, v)?;
    let plus = u.add_scaled(eta, &delta);
    let minus = u.add_scaled(-eta, &delta);
    lower_of(f, plus, minus)
}

/// `η' = √(η(η + s)) − s` with `s = ‖u − v‖`.
pub fn asymmetric_step(eta: f64, separation: f64) -> f64 {
    (eta * (eta + separation)).sqrt() - separation
}

/// Returns the lower of `u + η'δ` and `v − ηδ`; ties go to the plus side
/// (`u + η'δ`). Costs two value evaluations.
pub fn exploit_nc_pair_3(
    f: &mut dyn Oracle,
    u: &Vector,
    v: &Vector,
    eta: f64,
) -> Result<NcStepResult> {
    if !(eta > 0.0) {
        return Err(OptError::InvalidParameter(format!("η must be positive, got {eta}")));
    }
    let (delta, sep) = unit_direction(u, v)?;
    let eta_prime = asymmetric_step(eta, sep);
    if eta_prime < 0.0 {
        return Err(OptError::InvalidParameter(format!(
            "η' = {eta_prime} < 0: ‖u − v‖ = {sep} is too large for η = {eta}"
        )));
    }
    let plus = u.add_scaled(eta_prime, &delta);
    let minus = v.add_scaled(-eta, &delta);
    lower_of(f, plus, minus)
}

fn lower_of(f: &mut dyn Oracle, plus: Vector, minus: Vector) -> Result<NcStepResult> {
    let f_plus = f.value(&plus)?;
    let f_minus = f.value(&minus)?;
    Ok(if f_minus < f_plus {
        NcStepResult {
            z: minus,
            f_z: f_minus,
            chosen_side: Side::Minus,
        }
    } else {
        NcStepResult {
            z: plus,
            f_z: f_plus,
            chosen_side: Side::Plus,
        }
    })
}

/// A point with a value that may already be known.
#[derive(Clone, Copy, Debug)]
pub struct Candidate<'a> {
    pub point: &'a Vector,
    pub value: Option<f64>,
}

impl<'a> Candidate<'a> {
    pub fn new(point: &'a Vector, value: Option<f64>) -> Self {
        Candidate { point, value }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub point: Vector,
    pub value: f64,
    /// Position of the winner in the enumeration order.
    pub index: usize,
}

/// Argmin of `f` over the candidates. Unknown values are evaluated; the
/// earliest candidate wins ties.
pub fn argmin_candidates<'a, I>(f: &mut dyn Oracle, candidates: I) -> Result<Best>
where
    I: IntoIterator<Item = Candidate<'a>>,
{
    let mut best: Option<(usize, &Vector, f64)> = None;
    for (i, c) in candidates.into_iter().enumerate() {
        let value = match c.value {
            Some(v) => v,
            None => f.value(c.point)?,
        };
        if best.map_or(true, |(_, _, b)| value < b) {
            best = Some((i, c.point, value));
        }
    }
    let (index, point, value) = best.ok_or_else(|| {
        OptError::InvalidParameter("argmin over an empty candidate set".into())
    })?;
    Ok(Best {
        point: point.clone(),
        value,
        index,
    })
}

/// Argmin of `f` over `u, y_0, …, y_t`, in that order.
///
/// `y_values[i]`, when present, is used instead of evaluating `f(y_i)`; only
/// uncached points cost evaluations.
pub fn find_best(
    f: &mut dyn Oracle,
    ys: &[Vector],
    y_values: &[Option<f64>],
    u: &Vector,
    u_value: Option<f64>,
) -> Result<Best> {
    if ys.is_empty() {
        return Err(OptError::InvalidParameter("find_best needs y_0".into()));
    }
    let cands = std::iter::once(Candidate::new(u, u_value)).chain(
        ys.iter()
            .enumerate()
            .map(|(i, y)| Candidate::new(y, y_values.get(i).copied().flatten())),
    );
    argmin_candidates(f, cands)
}

/// The two extra points on the line through `y_{j−1}` and `y_j`:
/// `c_j = (y_j + y_{j−1})/2` and `q_j = −2y_j + 3y_{j−1}`.
/// For `j = 0` both equal `y_0`.
pub fn line_probes(ys: &[Vector], j: usize) -> (Vector, Vector) {
    if j == 0 {
        return (ys[0].clone(), ys[0].clone());
    }
    let c = ys[j].lin_comb(0.5, &ys[j - 1], 0.5);
    let q = ys[j].lin_comb(-2.0, &ys[j - 1], 3.0);
    (c, q)
}

/// Finds `j` with `v = x_j` (exact equality).
pub fn locate_iterate(xs: &[Vector], v: &Vector) -> Result<usize> {
    xs.iter().position(|x| x == v).ok_or_else(|| OptError::PointNotFound {
        point: v.to_vec(),
    })
}

/// Argmin of `f` over `y_0, …, y_t, c_j, q_j, u` (in that order), where `j`
/// is the index with `v = x_j`.
pub fn find_best_3(
    f: &mut dyn Oracle,
    ys: &[Vector],
    y_values: &[Option<f64>],
    xs: &[Vector],
    u: &Vector,
    u_value: Option<f64>,
    v: &Vector,
) -> Result<Best> {
    if ys.is_empty() {
        return Err(OptError::InvalidParameter("find_best_3 needs y_0".into()));
    }
    let j = locate_iterate(xs, v)?;
    let (c, q) = line_probes(ys, j);
    let cands = ys
        .iter()
        .enumerate()
        .map(|(i, y)| Candidate::new(y, y_values.get(i).copied().flatten()))
        .chain([
            Candidate::new(&c, None),
            Candidate::new(&q, None),
            Candidate::new(u, u_value),
        ]);
    argmin_candidates(f, cands)
}

/// Value at `θ` of the cubic interpolating `h` at `θ ∈ {0, −1/2, −1, −3}`.
///
/// `h = [h(0), h(−1/2), h(−1), h(−3)]`. Uses the closed-form combination
///
/// ```text
/// h(θ) = h(0)
///      − h(−3)  (θ/30  + θ²/10  + θ³/15)
///      + h(−1)  (3θ/2  + 7θ²/2  + θ³)
///      − h(−½)  (24θ/5 + 32θ²/5 + 8θ³/5)
///      + h(0)   (10θ/3 + 3θ²    + 2θ³/3)
/// ```
pub fn cubic_reconstruct(h: [f64; 4], theta: f64) -> f64 {
    let [h0, h_half, h_one, h_three] = h;
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    h0 - h_three * (t / 30.0 + t2 / 10.0 + t3 / 15.0)
        + h_one * (1.5 * t + 3.5 * t2 + t3)
        - h_half * (24.0 / 5.0 * t + 32.0 / 5.0 * t2 + 8.0 / 5.0 * t3)
        + h0 * (10.0 / 3.0 * t + 3.0 * t2 + 2.0 / 3.0 * t3)
}
