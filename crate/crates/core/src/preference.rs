//! From a preferred point on the fitted front to the linear weights under
//! which that point is the optimum of the weighted metric.
//!
//! On a strictly convex front the weighted-sum level set that touches the
//! front at `f_u` is its tangent hyperplane there, so the optimal weights are
//! the normalized front gradient: `w_i ∝ b / (f_u_i - a_i)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontfit::{FrontError, FrontModel};

/// Relative on-surface tolerance for preference points.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
pub const MAX_PROJECTION_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreferenceError {
    #[error("weights need at least two positive finite components")]
    InvalidWeights,
    #[error("weights must sum to one (sum = {0})")]
    NotNormalized(f64),
    #[error("front slope {0} is not negative")]
    NonNegativeSlope(f64),
    #[error("point is not on the fitted front (relative residual {0:e})")]
    OffSurface(f64),
    #[error("projection onto the front did not converge")]
    ProjectionDiverged,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Front(#[from] FrontError),
}

impl PreferenceError {
    pub fn name(&self) -> &'static str {
        match self {
            PreferenceError::InvalidWeights => "InvalidWeights",
            PreferenceError::NotNormalized(_) => "NotNormalized",
            PreferenceError::NonNegativeSlope(_) => "NonNegativeSlope",
            PreferenceError::OffSurface(_) => "OffSurface",
            PreferenceError::ProjectionDiverged => "ProjectionDiverged",
            PreferenceError::LengthMismatch { .. } => "LengthMismatch",
            PreferenceError::Front(e) => e.name(),
        }
    }
}

/// Positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts already-normalized weights (sum within `1e-12` of one).
    pub fn new(w: Vec<f64>) -> Result<Self, PreferenceError> {
        check_positive(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PreferenceError::NotNormalized(sum));
        }
        Ok(Self(w))
    }

    /// Divides positive raw weights by their sum.
    pub fn normalize(raw: &[f64]) -> Result<Self, PreferenceError> {
        check_positive(raw)?;
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() {
            return Err(PreferenceError::InvalidWeights);
        }
        Ok(Self(raw.iter().map(|v| v / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_positive(w: &[f64]) -> Result<(), PreferenceError> {
    if w.len() < 2 || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(PreferenceError::InvalidWeights);
    }
    Ok(())
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = PreferenceError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `sum_m w_m f_m`.
pub fn weighted_metric(w: &WeightVector, f: &[f64]) -> Result<f64, PreferenceError> {
    if w.len() != f.len() {
        return Err(PreferenceError::LengthMismatch { expected: w.len(), got: f.len() });
    }
    Ok(w.0.iter().zip(f).map(|(w, f)| w * f).sum())
}

/// Closed-form weights for two metrics given the front slope `df_2/df_1`
/// at the preferred point.
pub fn bi_metric_weights(slope: f64) -> Result<WeightVector, PreferenceError> {
    if !(slope < 0.0) || !slope.is_finite() {
        return Err(PreferenceError::NonNegativeSlope(slope));
    }
    let denom = 1.0 - slope;
    Ok(WeightVector(vec![-slope / denom, 1.0 / denom]))
}

/// How a preference point was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSource {
    Direct,
    Projected { reference: Vec<f64>, distance: f64 },
}

/// A point on the fitted front chosen as the preferred trade-off.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePoint {
    f_u: Vec<f64>,
    source: PointSource,
}

impl PreferencePoint {
    /// Wraps a point the caller asserts is on the front; checked against
    /// the relative feasibility tolerance.
    pub fn direct(model: &FrontModel, f_u: Vec<f64>) -> Result<Self, PreferenceError> {
        check_on_surface(model, &f_u)?;
        Ok(Self { f_u, source: PointSource::Direct })
    }

    pub fn f_u(&self) -> &[f64] {
        &self.f_u
    }

    pub fn source(&self) -> &PointSource {
        &self.source
    }

    /// Distance from the reference point, zero for direct points.
    pub fn distance(&self) -> f64 {
        match self.source {
            PointSource::Direct => 0.0,
            PointSource::Projected { distance, .. } => distance,
        }
    }

    pub fn reference(&self) -> Option<&[f64]> {
        match &self.source {
            PointSource::Direct => None,
            PointSource::Projected { reference, .. } => Some(reference),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PreferencePointWire {
    f_u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance: Option<f64>,
}

impl Serialize for PreferencePoint {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (f_r, distance) = match &self.source {
            PointSource::Direct => (None, None),
            PointSource::Projected { reference, distance } => (Some(reference.clone()), Some(*distance)),
        };
        PreferencePointWire { f_u: self.f_u.clone(), f_r, distance }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PreferencePoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = PreferencePointWire::deserialize(deserializer)?;
        let source = match wire.f_r {
            None => PointSource::Direct,
            Some(reference) => {
                let distance = wire.distance.unwrap_or_else(|| euclidean(&reference, &wire.f_u));
                PointSource::Projected { reference, distance }
            }
        };
        Ok(Self { f_u: wire.f_u, source })
    }
}

fn check_on_surface(model: &FrontModel, f: &[f64]) -> Result<(), PreferenceError> {
    let residual = model.eval(f)?;
    let relative = residual.abs() / model.b();
    if relative > FEASIBILITY_TOLERANCE {
        return Err(PreferenceError::OffSurface(relative));
    }
    Ok(())
}

/// Weights under which `point` minimizes the weighted metric over the front.
pub fn optimal_weights(model: &FrontModel, point: &PreferencePoint) -> Result<WeightVector, PreferenceError> {
    check_on_surface(model, &point.f_u)?;
    let gaps = model.gaps(&point.f_u)?;
    let raw: Vec<f64> = gaps.iter().map(|g| model.b() / g).collect();
    WeightVector::normalize(&raw)
}

/// Angle in radians between the line through `f_r - f_u` and the front
/// normal at `f_u`. Zero when `f_u` is a stationary point of the distance.
pub fn normal_angle(model: &FrontModel, f_r: &[f64], f_u: &[f64]) -> Result<f64, PreferenceError> {
    let normal = model.grad(f_u)?;
    let diff: Vec<f64> = f_r.iter().zip(f_u).map(|(r, u)| r - u).collect();
    let dn = euclidean_norm(&diff);
    if dn == 0.0 {
        return Ok(0.0);
    }
    let nn = euclidean_norm(&normal);
    // Unsigned: a reference below the front points against the normal.
    let sign = if diff.iter().zip(&normal).map(|(d, n)| d * n).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    // 2 atan2(|u - v|, |u + v|) stays accurate for nearly parallel vectors.
    let (mut minus, mut plus) = (0.0, 0.0);
    for (d, n) in diff.iter().zip(&normal) {
        let (u, v) = (d / dn, sign * n / nn);
        minus += (u - v) * (u - v);
        plus += (u + v) * (u + v);
    }
    Ok(2.0 * minus.sqrt().atan2(plus.sqrt()))
}

fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest point on the fitted front to a reference point.
///
/// Works in gap coordinates `y = f - a`, where the front is
/// `sum_m log y_m = log b`. Stationary points satisfy
/// `y_m (y_ref_m - y_m) = t` for a shared multiplier `t`, so each coordinate
/// follows one of the two roots of a quadratic in `t`. A minimizer takes the
/// smaller root in at most one coordinate (two would give negative curvature
/// along the front), so the candidates lie on at most `M + 1` one-parameter
/// curves. Each curve is scanned for crossings of the front, every crossing
/// is refined by bisection, and the closest crossing wins. Points on these
/// curves satisfy the stationarity condition exactly; bisection drives the
/// constraint residual to rounding level.
pub fn project_to_front(model: &FrontModel, f_r: &[f64]) -> Result<PreferencePoint, PreferenceError> {
    if f_r.iter().any(|v| !v.is_finite()) {
        return Err(PreferenceError::Front(FrontError::InvalidModel("reference must be finite".into())));
    }
    let y_ref = model.gaps(f_r)?;
    let log_b = model.b().ln();
    let m = y_ref.len();

    let relative = (y_ref.iter().product::<f64>() - model.b()).abs() / model.b();
    if relative <= 4.0 * f64::EPSILON * m as f64 {
        return Ok(PreferencePoint {
            f_u: f_r.to_vec(),
            source: PointSource::Projected { reference: f_r.to_vec(), distance: 0.0 },
        });
    }

    let excess: f64 = y_ref.iter().map(|y| y.ln()).sum::<f64>() - log_b;
    let mut budget = MAX_PROJECTION_ITERATIONS;
    let candidates = if excess < 0.0 {
        vec![project_outward(&y_ref, log_b, &mut budget)?]
    } else {
        project_inward(&y_ref, log_b, &mut budget)?
    };

    let best = candidates
        .into_iter()
        .map(|y| {
            let f_u: Vec<f64> = y.iter().zip(model.a()).map(|(y, a)| a + y).collect();
            let distance = euclidean(f_r, &f_u);
            (f_u, distance)
        })
        .filter(|(f, d)| d.is_finite() && f.iter().all(|v| v.is_finite()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or(PreferenceError::ProjectionDiverged)?;

    let (f_u, distance) = best;
    check_on_surface(model, &f_u).map_err(|_| PreferenceError::ProjectionDiverged)?;
    Ok(PreferencePoint { f_u, source: PointSource::Projected { reference: f_r.to_vec(), distance } })
}

/// Larger root of `y (r - y) = t`, valid for `t <= r^2 / 4` (any sign).
fn large_root(r: f64, t: f64) -> f64 {
    0.5 * (r + (r * r - 4.0 * t).max(0.0).sqrt())
}

/// Smaller root of `y (r - y) = t` for `0 <= t <= r^2 / 4`, written to avoid
/// cancellation for small `t`.
fn small_root(r: f64, t: f64) -> f64 {
    2.0 * t / (r + (r * r - 4.0 * t).max(0.0).sqrt())
}

fn log_excess(y: &[f64], log_b: f64) -> f64 {
    y.iter().map(|v| v.ln()).sum::<f64>() - log_b
}

/// Reference strictly below the front: the projection onto the convex
/// superlevel set is unique and every coordinate takes the larger root.
fn project_outward(y_ref: &[f64], log_b: f64, budget: &mut usize) -> Result<Vec<f64>, PreferenceError> {
    let at = |s: f64| -> Vec<f64> { y_ref.iter().map(|&r| large_root(r, -s)).collect() };
    let scale = y_ref.iter().fold(0.0f64, |acc, r| acc.max(r * r));
    let mut hi = scale.max(f64::MIN_POSITIVE);
    while log_excess(&at(hi), log_b) < 0.0 {
        hi *= 4.0;
        spend(budget)?;
        if !hi.is_finite() {
            return Err(PreferenceError::ProjectionDiverged);
        }
    }
    let s = bisect(|s| log_excess(&at(s), log_b), 0.0, hi, budget)?;
    Ok(at(s))
}

/// Reference on or above the front: enumerate the stationary curves.
fn project_inward(y_ref: &[f64], log_b: f64, budget: &mut usize) -> Result<Vec<Vec<f64>>, PreferenceError> {
    let (j, r_j) = y_ref
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two metrics");
    let t_max = 0.25 * r_j * r_j;
    let grid = scan_grid();
    let mut candidates = Vec::new();

    // Main curve: u runs from 1 (the reference itself) down to 0, moving the
    // tightest coordinate from its larger root through the double root at
    // u = 1/2 into its smaller root.
    let main = |u: f64| -> Vec<f64> {
        let t = r_j * r_j * u * (1.0 - u);
        y_ref
            .iter()
            .enumerate()
            .map(|(m, &r)| if m == j { r * u } else { large_root(r, t) })
            .collect()
    };
    collect_crossings(&main, log_b, &grid, budget, &mut candidates)?;

    // Side curves: coordinate k != j on its smaller root, t in (0, t_max].
    for k in (0..y_ref.len()).filter(|&k| k != j) {
        let side = |v: f64| -> Vec<f64> {
            let t = t_max * v;
            y_ref
                .iter()
                .enumerate()
                .map(|(m, &r)| if m == k { small_root(r, t) } else { large_root(r, t) })
                .collect()
        };
        collect_crossings(&side, log_b, &grid, budget, &mut candidates)?;
    }
    Ok(candidates)
}

/// Curve parameters in (0, 1]: dense near zero geometrically, uniform
/// elsewhere.
fn scan_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=1000).rev().map(|k| 0.5f64.powi(k)).collect();
    grid.extend((1..=1024).map(|k| k as f64 / 1024.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Every curve here tends to `y = 0` in one coordinate as the parameter goes
/// to zero, so the excess starts at minus infinity.
fn collect_crossings<F>(
    curve: &F,
    log_b: f64,
    grid: &[f64],
    budget: &mut usize,
    out: &mut Vec<Vec<f64>>,
) -> Result<(), PreferenceError>
where
    F: Fn(f64) -> Vec<f64>,
{
    let excess = |u: f64| log_excess(&curve(u), log_b);
    let mut lo = 0.0;
    let mut lo_val = f64::NEG_INFINITY;
    for &u in grid {
        let val = excess(u);
        if val == 0.0 {
            out.push(curve(u));
        } else if lo_val.is_nan() || val.is_nan() {
            // skip undefined segments
        } else if (lo_val < 0.0) != (val < 0.0) && lo_val != 0.0 {
            let root = bisect(excess, lo, u, budget)?;
            out.push(curve(root));
        }
        lo = u;
        lo_val = val;
    }
    Ok(())
}

/// Bisection on a sign change of `f` over `[lo, hi]`, run to floating-point
/// resolution.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, budget: &mut usize) -> Result<f64, PreferenceError> {
    let lo_negative = f(lo) < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        spend(budget)?;
        let val = f(mid);
        if val == 0.0 {
            return Ok(mid);
        }
        if (val < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Report the endpoint with the smaller residual.
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

fn spend(budget: &mut usize) -> Result<(), PreferenceError> {
    *budget = budget.checked_sub(1).ok_or(PreferenceError::ProjectionDiverged)?;
    Ok(())
}
