//! Hyperbolic Pareto-front surrogate `prod_m (f_m - a_m) = b`.
//!
//! The fit minimizes the log-space residual
//! `sum_n (sum_m log(f_nm - a_m) - log b)^2` over the Pareto points. For a
//! fixed `a` the optimal `log b` is the mean of the per-point log sums, so
//! the search runs over `a` alone. The offsets are parameterized as
//! `a_m = f_min[m] - exp(theta_m)`, which keeps every Pareto point strictly
//! inside the branch, and `theta` is solved with Levenberg-Marquardt,
//! started from a first-order distance fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::{metric_extrema, MetricExtrema, ParetoSet};

pub const MAX_FIT_ITERATIONS: usize = 10_000;
const STEP_TOLERANCE: f64 = 1e-10;
const DECREASE_TOLERANCE: f64 = 1e-12;
const BRANCH_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontError {
    #[error("at least two metrics are required, got {0}")]
    InsufficientMetrics(usize),
    #[error("need at least {needed} Pareto points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("metric {0} is constant across the Pareto set")]
    DegenerateFront(usize),
    #[error("fit did not converge within {0} iterations")]
    FitDiverged(usize),
    #[error("metric {metric}: value {value} is not above the asymptote {offset}")]
    OutsideBranch { metric: usize, value: f64, offset: f64 },
    #[error("expected {expected} metrics, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid front model: {0}")]
    InvalidModel(String),
}

impl FrontError {
    pub fn name(&self) -> &'static str {
        match self {
            FrontError::InsufficientMetrics(_) => "InsufficientMetrics",
            FrontError::InsufficientPoints { .. } => "InsufficientPoints",
            FrontError::DegenerateFront(_) => "DegenerateFront",
            FrontError::FitDiverged(_) => "FitDiverged",
            FrontError::OutsideBranch { .. } => "OutsideBranch",
            FrontError::LengthMismatch { .. } => "LengthMismatch",
            FrontError::InvalidModel(_) => "InvalidModel",
        }
    }
}

/// Fitted surrogate front. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontModel {
    a: Vec<f64>,
    b: f64,
    fit_rms: f64,
    #[serde(skip)]
    domain: Option<MetricExtrema>,
}

impl FrontModel {
    /// A hand-specified front with no fit statistics attached.
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self, FrontError> {
        if a.len() < 2 {
            return Err(FrontError::InsufficientMetrics(a.len()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(FrontError::InvalidModel("offsets must be finite".into()));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(FrontError::InvalidModel("level must be positive".into()));
        }
        Ok(Self { a, b, fit_rms: 0.0, domain: None })
    }

    /// Per-metric asymptote offsets.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Product level.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Root-mean-square log-space residual over the points the model was
    /// fitted to; zero for hand-built models.
    pub fn fit_rms(&self) -> f64 {
        self.fit_rms
    }

    /// Extrema of the Pareto set the model was fitted to.
    pub fn domain(&self) -> Option<&MetricExtrema> {
        self.domain.as_ref()
    }

    pub fn n_metrics(&self) -> usize {
        self.a.len()
    }

    /// `f - a`, checked to be strictly positive in every coordinate.
    pub fn gaps(&self, f: &[f64]) -> Result<Vec<f64>, FrontError> {
        if f.len() != self.a.len() {
            return Err(FrontError::LengthMismatch { expected: self.a.len(), got: f.len() });
        }
        f.iter()
            .zip(&self.a)
            .enumerate()
            .map(|(metric, (&value, &offset))| {
                let gap = value - offset;
                if gap > 0.0 && value.is_finite() {
                    Ok(gap)
                } else {
                    Err(FrontError::OutsideBranch { metric, value, offset })
                }
            })
            .collect()
    }

    /// Signed residual `g(f) - b`; zero on the surrogate.
    pub fn eval(&self, f: &[f64]) -> Result<f64, FrontError> {
        Ok(self.gaps(f)?.iter().product::<f64>() - self.b)
    }

    /// `dg/df_i = prod_{m != i} (f_m - a_m)`.
    pub fn grad(&self, f: &[f64]) -> Result<Vec<f64>, FrontError> {
        let gaps = self.gaps(f)?;
        Ok((0..gaps.len())
            .map(|i| gaps.iter().enumerate().filter(|&(m, _)| m != i).map(|(_, g)| g).product())
            .collect())
    }

    /// Slope `df_2/df_1` of the two-metric front `f_2 = b / (f_1 - a_1) + a_2`.
    pub fn bi_metric_slope(&self, f1: f64) -> Result<f64, FrontError> {
        if self.a.len() != 2 {
            return Err(FrontError::LengthMismatch { expected: 2, got: self.a.len() });
        }
        let gap = f1 - self.a[0];
        if !(gap > 0.0) {
            return Err(FrontError::OutsideBranch { metric: 0, value: f1, offset: self.a[0] });
        }
        Ok(-self.b / (gap * gap))
    }

    /// Completes a point on the surrogate from its first `M - 1` coordinates.
    pub fn complete_point(&self, leading: &[f64]) -> Result<Vec<f64>, FrontError> {
        let m = self.a.len();
        if leading.len() + 1 != m {
            return Err(FrontError::LengthMismatch { expected: m - 1, got: leading.len() });
        }
        let partial: f64 = leading
            .iter()
            .zip(&self.a)
            .enumerate()
            .map(|(metric, (&value, &offset))| {
                let gap = value - offset;
                if gap > 0.0 {
                    Ok(gap)
                } else {
                    Err(FrontError::OutsideBranch { metric, value, offset })
                }
            })
            .product::<Result<f64, _>>()?;
        let mut point = leading.to_vec();
        point.push(self.a[m - 1] + self.b / partial);
        Ok(point)
    }
}

/// Knobs for [`fit_front_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting gaps `f_min[m] - a_m` (all positive). Defaults to half the
    /// observed range of each metric.
    pub initial_gaps: Option<Vec<f64>>,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { initial_gaps: None, max_iterations: MAX_FIT_ITERATIONS }
    }
}

pub fn fit_front(pareto: &ParetoSet) -> Result<FrontModel, FrontError> {
    fit_front_with(pareto, &FitOptions::default())
}

pub fn fit_front_with(pareto: &ParetoSet, options: &FitOptions) -> Result<FrontModel, FrontError> {
    let m = pareto.n_metrics();
    if m < 2 {
        return Err(FrontError::InsufficientMetrics(m));
    }
    if pareto.len() < m + 1 {
        return Err(FrontError::InsufficientPoints { needed: m + 1, got: pareto.len() });
    }
    let domain = metric_extrema(&pareto.points).map_err(|e| FrontError::InvalidModel(e.to_string()))?;
    if let Some(k) = (0..m).find(|&k| !(domain.range(k) > 0.0)) {
        return Err(FrontError::DegenerateFront(k));
    }

    let floor = theta_floor(&domain);
    let theta0: Vec<f64> = match &options.initial_gaps {
        Some(gaps) => {
            if gaps.len() != m {
                return Err(FrontError::LengthMismatch { expected: m, got: gaps.len() });
            }
            if gaps.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                return Err(FrontError::InvalidModel("initial gaps must be positive".into()));
            }
            gaps.iter().zip(&floor).map(|(g, lo)| g.ln().max(*lo)).collect()
        }
        None => (0..m).map(|k| (0.5 * domain.range(k) + 1e-6).ln()).collect(),
    };

    let log_fit = LogProductFit { points: &pareto.points, f_min: &domain.f_min };
    let start = seed_with_distance_fit(&pareto.points, &domain.f_min, &floor, theta0, &log_fit);
    let theta = levenberg_marquardt(&log_fit, start.clone(), &floor, options.max_iterations)
        .map_err(|_| FrontError::FitDiverged(options.max_iterations))?;
    let theta = if runs_away(&theta, &domain) { start } else { theta };
    let eval = log_fit.evaluate(&theta).ok_or(FrontError::FitDiverged(options.max_iterations))?;
    let a = offsets(&domain.f_min, &theta);
    let n = pareto.len() as f64;
    Ok(FrontModel { a, b: log_fit.mean_log(&theta).exp(), fit_rms: (eval.1 / n).sqrt(), domain: Some(domain) })
}

/// Iteration budget for the seeding stage.
const SEED_ITERATIONS: usize = 500;

/// The log-space objective tends to zero as every offset runs off to
/// minus infinity, so from a poor start the log fit can slide away from the
/// front. The first-order distance residual has no such limit, so it is
/// solved first and its offsets seed the log fit.
fn seed_with_distance_fit(
    points: &[Vec<f64>],
    f_min: &[f64],
    floor: &[f64],
    theta0: Vec<f64>,
    log_fit: &LogProductFit<'_>,
) -> Vec<f64> {
    let distance_fit = DistanceFit { points, f_min };
    let m = theta0.len();
    let mut x0 = theta0;
    x0.push(log_fit.mean_log(&x0));
    let mut bounds = floor.to_vec();
    bounds.push(f64::NEG_INFINITY);
    let (Ok(mut x) | Err(mut x)) = levenberg_marquardt(&distance_fit, x0, &bounds, SEED_ITERATIONS);
    x.truncate(m);
    x
}

/// Offsets further than this many metric ranges below the minimum mean the
/// log fit has followed its objective toward the flat limit.
const RUNAWAY_RANGES: f64 = 1e6;

/// On noisy fronts the log objective can keep decreasing all the way to the
/// flat limit, where every weight vector is the same. The distance fit is
/// kept in that case.
fn runs_away(theta: &[f64], domain: &MetricExtrema) -> bool {
    theta.iter().enumerate().any(|(k, t)| t.exp() > RUNAWAY_RANGES * domain.range(k))
}

fn theta_floor(domain: &MetricExtrema) -> Vec<f64> {
    (0..domain.f_min.len()).map(|k| (BRANCH_MARGIN * (domain.range(k) + 1.0)).ln()).collect()
}

fn offsets(f_min: &[f64], theta: &[f64]) -> Vec<f64> {
    f_min.iter().zip(theta).map(|(lo, t)| lo - t.exp()).collect()
}

/// A nonlinear least-squares problem over a parameter vector.
trait LeastSquares {
    /// Residual vector and its squared norm, or `None` if not finite.
    fn evaluate(&self, x: &[f64]) -> Option<(DVector<f64>, f64)>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// Centered per-point log sums: the log-space residual with `log b`
/// profiled out. Parameters are `theta`.
struct LogProductFit<'a> {
    points: &'a [Vec<f64>],
    f_min: &'a [f64],
}

impl LogProductFit<'_> {
    fn log_sums(&self, theta: &[f64]) -> Vec<f64> {
        let a = offsets(self.f_min, theta);
        self.points.iter().map(|p| p.iter().zip(&a).map(|(f, a)| (f - a).ln()).sum()).collect()
    }

    fn mean_log(&self, theta: &[f64]) -> f64 {
        let sums = self.log_sums(theta);
        sums.iter().sum::<f64>() / sums.len() as f64
    }
}

impl LeastSquares for LogProductFit<'_> {
    fn evaluate(&self, theta: &[f64]) -> Option<(DVector<f64>, f64)> {
        let sums = self.log_sums(theta);
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let residuals = DVector::from_iterator(sums.len(), sums.iter().map(|s| s - mean));
        let sse = residuals.norm_squared();
        sse.is_finite().then_some((residuals, sse))
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let a = offsets(self.f_min, theta);
        let scale: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let n = self.points.len();
        let mut jac = DMatrix::from_fn(n, theta.len(), |row, col| scale[col] / (self.points[row][col] - a[col]));
        for mut column in jac.column_iter_mut() {
            let mean = column.mean();
            column.add_scalar_mut(-mean);
        }
        jac
    }
}

/// First-order distance from each point to the surface,
/// `(g - b) / |grad g| = (1 - b / g) / sqrt(sum_m gap_m^-2)`. Parameters
/// are `theta` followed by `log b`.
struct DistanceFit<'a> {
    points: &'a [Vec<f64>],
    f_min: &'a [f64],
}

impl DistanceFit<'_> {
    /// Per point: gaps, `b / g` and the gradient norm scale.
    fn terms<'p>(&'p self, x: &[f64]) -> impl Iterator<Item = (Vec<f64>, f64, f64)> + 'p {
        let m = x.len() - 1;
        let a = offsets(self.f_min, &x[..m]);
        let log_b = x[m];
        self.points.iter().map(move |p| {
            let gaps: Vec<f64> = p.iter().zip(&a).map(|(f, a)| f - a).collect();
            let log_g: f64 = gaps.iter().map(|g| g.ln()).sum();
            let ratio = (log_b - log_g).exp();
            let norm = gaps.iter().map(|g| g.powi(-2)).sum::<f64>().sqrt();
            (gaps, ratio, norm)
        })
    }
}

impl LeastSquares for DistanceFit<'_> {
    fn evaluate(&self, x: &[f64]) -> Option<(DVector<f64>, f64)> {
        let residuals: Vec<f64> = self.terms(x).map(|(_, ratio, norm)| (1.0 - ratio) / norm).collect();
        let residuals = DVector::from_vec(residuals);
        let sse = residuals.norm_squared();
        sse.is_finite().then_some((residuals, sse))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let m = x.len() - 1;
        let scale: Vec<f64> = x[..m].iter().map(|t| t.exp()).collect();
        let mut jac = DMatrix::zeros(self.points.len(), x.len());
        for (row, (gaps, ratio, norm)) in self.terms(x).enumerate() {
            for j in 0..m {
                jac[(row, j)] = scale[j] * (ratio / (gaps[j] * norm) + (1.0 - ratio) / (gaps[j].powi(3) * norm.powi(3)));
            }
            jac[(row, m)] = -ratio / norm;
        }
        jac
    }
}

/// Damped Gauss-Newton with box lower bounds. Stops on a step below
/// `STEP_TOLERANCE` (relative), a decrease below `DECREASE_TOLERANCE`
/// (relative to the objective), or an exact zero. `Err` carries the last
/// iterate when the budget runs out.
fn levenberg_marquardt<P: LeastSquares>(
    problem: &P,
    mut x: Vec<f64>,
    lower: &[f64],
    max_iterations: usize,
) -> Result<Vec<f64>, Vec<f64>> {
    let Some(mut current) = problem.evaluate(&x) else {
        return Err(x);
    };
    let mut damping = 1e-3;

    for _ in 0..max_iterations {
        if current.1 == 0.0 {
            return Ok(x);
        }
        let jac = problem.jacobian(&x);
        let jtj = jac.tr_mul(&jac);
        let gradient = jac.tr_mul(&current.0);
        if gradient.amax() == 0.0 {
            return Ok(x);
        }

        let mut system = jtj.clone();
        for k in 0..x.len() {
            system[(k, k)] += damping * jtj[(k, k)].max(f64::MIN_POSITIVE);
        }
        let Some(chol) = system.cholesky() else {
            damping *= 10.0;
            continue;
        };
        let step = chol.solve(&(-&gradient));

        let trial: Vec<f64> = x.iter().zip(step.iter()).zip(lower).map(|((t, s), lo)| (t + s).max(*lo)).collect();
        let moved = x.iter().zip(&trial).map(|(t, u)| (u - t).powi(2)).sum::<f64>().sqrt();
        let scale = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let small_step = moved <= STEP_TOLERANCE * (scale + STEP_TOLERANCE);

        match problem.evaluate(&trial) {
            Some(next) if next.1 < current.1 => {
                let small_decrease = current.1 - next.1 <= DECREASE_TOLERANCE * current.1;
                x = trial;
                current = next;
                if small_step || small_decrease {
                    return Ok(x);
                }
                damping = (damping / 3.0).max(1e-12);
            }
            _ => {
                // No representable improvement left at this resolution.
                if small_step {
                    return Ok(x);
                }
                damping *= 4.0;
            }
        }
    }
    Err(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticSpec};
    use crate::pareto::pareto_front;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_free(offsets: Vec<f64>, level: f64, n: usize, seed: u64) -> ParetoSet {
        let spec = SyntheticSpec {
            n_params: 2,
            n_metrics: offsets.len(),
            n_records: n,
            offsets,
            level,
            noise: 0.0,
            seed,
        };
        pareto_front(&generate_synthetic(&spec).unwrap())
    }

    #[test]
    fn recovers_shifted_hyperbola() {
        let set = noise_free(vec![0.1, 0.2], 0.5, 200, 1);
        assert_eq!(set.len(), 200);
        let model = fit_front(&set).unwrap();
        assert!((model.a()[0] - 0.1).abs() <= 1e-6, "{:?}", model.a());
        assert!((model.a()[1] - 0.2).abs() <= 1e-6);
        assert!((model.b() - 0.5).abs() <= 1e-6);
        assert!(model.fit_rms() <= 1e-8);
    }

    #[test]
    fn recovers_symmetric_three_metric_front() {
        let model = fit_front(&noise_free(vec![0.0; 3], 1.0, 200, 2)).unwrap();
        for a in model.a() {
            assert!(a.abs() <= 1e-6, "{:?}", model.a());
        }
        assert!((model.b() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn recovery_is_independent_of_start() {
        let set = noise_free(vec![-0.4, 0.3, -0.1], 2.0, 200, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let gaps: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..3.0)).collect();
            let model = fit_front_with(&set, &FitOptions { initial_gaps: Some(gaps.clone()), ..Default::default() })
                .unwrap();
            for (got, want) in model.a().iter().zip([-0.4, 0.3, -0.1]) {
                assert!((got - want).abs() <= 1e-6, "start {gaps:?}: {:?}", model.a());
            }
            assert!((model.b() - 2.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn fitted_offsets_stay_below_minimum() {
        let ds = generate_synthetic(&SyntheticSpec::experiment_shape(4)).unwrap();
        let set = pareto_front(&ds);
        let model = fit_front(&set).unwrap();
        let dom = model.domain().unwrap();
        for k in 0..3 {
            assert!(model.a()[k] < dom.f_min[k] - BRANCH_MARGIN * (dom.range(k) + 1.0) * 0.5);
        }
        assert!(model.b() > 0.0);
        for p in &set.points {
            assert!(model.gaps(p).is_ok());
        }
    }

    #[test]
    fn fit_preconditions() {
        let two = ParetoSet { indices: vec![0, 1], points: vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.5]] };
        assert_eq!(fit_front(&two), Err(FrontError::InsufficientPoints { needed: 4, got: 2 }));
        let flat = ParetoSet {
            indices: vec![0, 1, 2],
            points: vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 2.0]],
        };
        assert_eq!(fit_front(&flat), Err(FrontError::DegenerateFront(1)));
        let single = ParetoSet { indices: vec![0, 1], points: vec![vec![1.0], vec![2.0]] };
        assert_eq!(fit_front(&single), Err(FrontError::InsufficientMetrics(1)));
    }

    fn check_jacobian<P: LeastSquares>(problem: &P, x: &[f64]) {
        let jac = problem.jacobian(x);
        for col in 0..x.len() {
            let h = 1e-6 * (1.0 + x[col].abs());
            let (mut up, mut down) = (x.to_vec(), x.to_vec());
            up[col] += h;
            down[col] -= h;
            let (ru, rd) = (problem.evaluate(&up).unwrap().0, problem.evaluate(&down).unwrap().0);
            for row in 0..jac.nrows() {
                let fd = (ru[row] - rd[row]) / (2.0 * h);
                assert!((fd - jac[(row, col)]).abs() <= 1e-6 * (1.0 + fd.abs()), "({row},{col}): {fd} vs {}", jac[(row, col)]);
            }
        }
    }

    #[test]
    fn jacobians_match_central_differences() {
        let noisy = SyntheticSpec { n_records: 200, ..SyntheticSpec::experiment_shape(4) };
        let set = pareto_front(&generate_synthetic(&noisy).unwrap());
        let domain = metric_extrema(&set.points).unwrap();
        let theta = vec![-1.0, 0.3, -0.2];
        check_jacobian(&LogProductFit { points: &set.points, f_min: &domain.f_min }, &theta);
        check_jacobian(&DistanceFit { points: &set.points, f_min: &domain.f_min }, &[-1.0, 0.3, -0.2, 0.4]);
    }

    #[test]
    fn noisy_fronts_keep_a_curved_fit() {
        for seed in 0..10 {
            let noisy = SyntheticSpec { n_records: 200, ..SyntheticSpec::experiment_shape(seed) };
            let set = pareto_front(&generate_synthetic(&noisy).unwrap());
            let model = fit_front(&set).unwrap();
            // True offsets are zero; the slack only shifts the fit by about its own scale.
            assert!(model.a().iter().all(|a| a.abs() < 1.0), "seed {seed}: {:?}", model.a());
            assert!(model.fit_rms() > 1e-3);
        }
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let noisy = SyntheticSpec { n_records: 300, ..SyntheticSpec::experiment_shape(8) };
        let set = pareto_front(&generate_synthetic(&noisy).unwrap());
        let opts = FitOptions { max_iterations: 1, ..Default::default() };
        assert_eq!(fit_front_with(&set, &opts), Err(FrontError::FitDiverged(1)));
    }

    #[test]
    fn eval_cases() {
        let model = FrontModel::new(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(model.eval(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(model.eval(&[2.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(model.eval(&[-1.0, 2.0]), Err(FrontError::OutsideBranch { metric: 0, .. })));
        assert!(matches!(model.eval(&[1.0]), Err(FrontError::LengthMismatch { .. })));
    }

    #[test]
    fn grad_cases() {
        let model = FrontModel::new(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(model.grad(&[1.0, 2.0]).unwrap(), vec![2.0, 1.0]);
        let model = FrontModel::new(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(model.grad(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0; 3]);
        assert!(model.grad(&[1.0, 0.0, 1.0]).is_err());
    }

    fn finite_difference_grad(model: &FrontModel, f: &[f64], h: f64) -> Vec<f64> {
        let g = |x: &[f64]| -> f64 { x.iter().zip(model.a()).map(|(v, a)| v - a).product() };
        (0..f.len())
            .map(|i| {
                let mut hi = f.to_vec();
                let mut lo = f.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (g(&hi) - g(&lo)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn grad_matches_central_differences() {
        let model = FrontModel::new(vec![0.0, 0.0], 2.0).unwrap();
        let fd = finite_difference_grad(&model, &[1.0, 2.0], 1e-6);
        assert!((fd[0] - 2.0).abs() <= 1e-6 && (fd[1] - 1.0).abs() <= 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = rng.random_range(2..=5);
            let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..0.0)).collect();
            let model = FrontModel::new(a.clone(), rng.random_range(0.1..10.0)).unwrap();
            let f: Vec<f64> = a.iter().map(|a| a + rng.random_range(0.1..3.0)).collect();
            let exact = model.grad(&f).unwrap();
            let fd = finite_difference_grad(&model, &f, 1e-6);
            for (e, d) in exact.iter().zip(&fd) {
                assert!(((e - d) / e).abs() <= 1e-6, "{exact:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn grad_on_surface_is_level_over_gap() {
        let model = FrontModel::new(vec![-0.2, 0.1, 0.3], 1.7).unwrap();
        let f = model.complete_point(&[0.5, 1.2]).unwrap();
        let grad = model.grad(&f).unwrap();
        let gaps = model.gaps(&f).unwrap();
        for (g, gap) in grad.iter().zip(&gaps) {
            assert!((g - model.b() / gap).abs() <= 1e-12 * g);
        }
    }

    #[test]
    fn level_set_is_strictly_convex() {
        // The superlevel set {g >= b} is convex: midpoints of two distinct
        // points on the front land strictly on the dominated side.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let m = rng.random_range(2..=4);
            let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let model = FrontModel::new(a.clone(), rng.random_range(0.1..10.0)).unwrap();
            let mut draw = || {
                let lead: Vec<f64> = a[..m - 1].iter().map(|a| a + rng.random_range(0.05..4.0)).collect();
                model.complete_point(&lead).unwrap()
            };
            let (p, q) = (draw(), draw());
            let mid: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
            assert!(model.eval(&mid).unwrap() > 0.0);
        }
    }

    #[test]
    fn bi_metric_form_agrees() {
        let set = noise_free(vec![-0.3, 0.25], 1.3, 150, 21);
        let model = fit_front(&set).unwrap();
        let (a, c, b) = (model.a()[0], model.a()[1], model.b());
        let dom = model.domain().unwrap();
        for k in 0..100 {
            let f1 = dom.f_min[0] + dom.range(0) * k as f64 / 99.0;
            let product_form = model.complete_point(&[f1]).unwrap()[1];
            let hyperbola = b / (f1 - a) + c;
            assert!((product_form - hyperbola).abs() <= 1e-9);
            assert!(model.eval(&[f1, hyperbola]).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn json_shape() {
        let model = FrontModel::new(vec![0.5, -1.0], 2.0).unwrap();
        assert_eq!(serde_json::to_string(&model).unwrap(), r#"{"a":[0.5,-1.0],"b":2.0,"fit_rms":0.0}"#);
        let back: FrontModel = serde_json::from_str(r#"{"a":[0.5,-1.0],"b":2.0,"fit_rms":0.0}"#).unwrap();
        assert_eq!(back, model);
    }
}
