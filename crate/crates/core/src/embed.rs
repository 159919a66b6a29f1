//! Planar layout of the Pareto set, lattice partitioning, and per-cell radar
//! profiles.
//!
//! Two layouts are available. `pca` projects the centered metric vectors on
//! their top two principal directions and is fully deterministic. `neighbor`
//! builds a fuzzy k-nearest-neighbor graph and optimizes a 2D layout of it
//! with seeded stochastic gradient steps, so points with similar trade-off
//! profiles end up near each other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::{MetricExtrema, ParetoSet};

pub const DEFAULT_GRID: usize = 8;
pub const MAX_GRID: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("need at least two points to embed, got {0}")]
    TooFewPoints(usize),
    #[error("grid must be between 1 and {MAX_GRID}, got {0}")]
    InvalidGrid(usize),
    #[error("unknown embedding method `{0}` (expected `pca` or `neighbor`)")]
    UnknownMethod(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl EmbedError {
    pub fn name(&self) -> &'static str {
        match self {
            EmbedError::TooFewPoints(_) => "TooFewPoints",
            EmbedError::InvalidGrid(_) => "InvalidGrid",
            EmbedError::UnknownMethod(_) => "UnknownMethod",
            EmbedError::LengthMismatch { .. } => "LengthMismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    #[default]
    Pca,
    Neighbor,
}

impl fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedMethod::Pca => "pca",
            EmbedMethod::Neighbor => "neighbor",
        })
    }
}

impl FromStr for EmbedMethod {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pca" => Ok(EmbedMethod::Pca),
            "neighbor" => Ok(EmbedMethod::Neighbor),
            other => Err(EmbedError::UnknownMethod(other.to_string())),
        }
    }
}

/// Embedding and lattice settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub method: EmbedMethod,
    pub seed: u64,
    pub grid: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self { method: EmbedMethod::Pca, seed: 0, grid: DEFAULT_GRID }
    }
}

/// One `[0, 1]^2` coordinate per input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub method: EmbedMethod,
    pub seed: u64,
}

pub fn embed_2d<P: AsRef<[f64]>>(points: &[P], method: EmbedMethod, seed: u64) -> Result<Embedding2D, EmbedError> {
    if points.len() < 2 {
        return Err(EmbedError::TooFewPoints(points.len()));
    }
    let dim = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(EmbedError::LengthMismatch { expected: dim, got: p.as_ref().len() });
    }
    let raw = match method {
        EmbedMethod::Pca => pca_layout(points),
        EmbedMethod::Neighbor => neighbor_layout(points, seed),
    };
    Ok(Embedding2D { coords: rescale_unit(raw), method, seed })
}

/// Affine rescale of each axis onto `[0, 1]`; axes without spread sit at
/// the center.
fn rescale_unit(raw: Vec<[Option<f64>; 2]>) -> Vec<[f64; 2]> {
    let mut out = vec![[0.5; 2]; raw.len()];
    for axis in 0..2 {
        if raw.iter().any(|c| c[axis].is_none()) {
            continue;
        }
        let values: Vec<f64> = raw.iter().map(|c| c[axis].unwrap_or(0.0)).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if !(span > 0.0) || !span.is_finite() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(values) {
            o[axis] = ((v - lo) / span).clamp(0.0, 1.0);
        }
    }
    out
}

/// Relative eigenvalue below which a principal direction counts as empty.
const DEGENERATE_EIGENVALUE: f64 = 1e-12;
const POWER_ITERATIONS: usize = 10_000;

/// Scores on the top two principal components, `None` for a component that
/// carries no variance.
fn pca_layout<P: AsRef<[f64]>>(points: &[P]) -> Vec<[Option<f64>; 2]> {
    let n = points.len() as f64;
    let dim = points[0].as_ref().len();
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.as_ref()) {
            *m += v / n;
        }
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.as_ref().iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    let mut cov = vec![vec![0.0; dim]; dim];
    for row in &centered {
        for i in 0..dim {
            for k in 0..dim {
                cov[i][k] += row[i] * row[k] / n;
            }
        }
    }

    let components = principal_components(cov, 2);
    let top = components.first().map_or(0.0, |c| c.0);
    let axes: Vec<Option<Vec<f64>>> = (0..2)
        .map(|k| {
            components
                .get(k)
                .filter(|(value, _)| top > 0.0 && *value > DEGENERATE_EIGENVALUE * top)
                .map(|(_, v)| v.clone())
        })
        .collect();

    centered
        .iter()
        .map(|row| {
            let score = |axis: &Option<Vec<f64>>| axis.as_ref().map(|v| dot(row, v));
            [score(&axes[0]), score(&axes[1])]
        })
        .collect()
}

/// Leading eigenpairs of a symmetric positive semidefinite matrix by power
/// iteration with deflation. Each eigenvector is oriented so its
/// largest-magnitude entry is positive.
fn principal_components(mut cov: Vec<Vec<f64>>, count: usize) -> Vec<(f64, Vec<f64>)> {
    let dim = cov.len();
    let mut out = Vec::new();
    for _ in 0..count.min(dim) {
        // Several fixed starts guard against one being orthogonal to the
        // dominant direction.
        let starts = std::iter::once(vec![1.0; dim]).chain((0..dim).map(|k| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            e
        }));
        let (value, mut vector) = starts
            .map(|start| power_iterate(&cov, start))
            .fold((f64::NEG_INFINITY, vec![0.0; dim]), |best, cand| if cand.0 > best.0 { cand } else { best });

        let lead = vector
            .iter()
            .enumerate()
            .fold(0, |best, (k, v)| if v.abs() > vector[best].abs() { k } else { best });
        if vector[lead] < 0.0 {
            vector.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..dim {
            for k in 0..dim {
                cov[i][k] -= value * vector[i] * vector[k];
            }
        }
        out.push((value.max(0.0), vector));
    }
    out
}

fn power_iterate(matrix: &[Vec<f64>], start: Vec<f64>) -> (f64, Vec<f64>) {
    let mut v = normalized(start);
    for _ in 0..POWER_ITERATIONS {
        let next = mat_vec(matrix, &v);
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return (0.0, v);
        }
        let next: Vec<f64> = next.iter().map(|x| x / norm).collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    let rayleigh = dot(&v, &mat_vec(matrix, &v));
    (rayleigh, v)
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn mat_vec(matrix: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    matrix.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const NEIGHBORS: usize = 15;
const EPOCHS: usize = 200;
const NEGATIVE_SAMPLES: usize = 5;
// Curve parameters for min_dist = 0.1, spread = 1.
const CURVE_A: f64 = 1.577;
const CURVE_B: f64 = 0.8951;

fn neighbor_layout<P: AsRef<[f64]>>(points: &[P], seed: u64) -> Vec<[Option<f64>; 2]> {
    let n = points.len();
    let k = NEIGHBORS.min(n - 1);
    let dist = |i: usize, j: usize| -> f64 {
        points[i].as_ref().iter().zip(points[j].as_ref()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };

    // Directed fuzzy memberships over each point's k nearest neighbors.
    let mut membership: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let target = (k as f64).log2().max(1e-3);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.truncate(k);
        let rho = others.iter().map(|o| o.0).find(|d| *d > 0.0).unwrap_or(0.0);
        let sigma = bandwidth(&others, rho, target);
        for &(d, j) in &others {
            let w = (-((d - rho).max(0.0)) / sigma).exp();
            membership.insert((i, j), w);
        }
    }
    // Fuzzy union of the two directions.
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &membership {
        let back = membership.get(&(j, i)).copied().unwrap_or(0.0);
        let key = (i.min(j), i.max(j));
        edges.insert(key, w + back - w * back);
    }
    let edges: Vec<(usize, usize, f64)> = edges.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);

    // Start from the principal-component layout spread over [0, 10]^2.
    let init = rescale_unit(pca_layout(points));
    let mut y: Vec<[f64; 2]> = init.iter().map(|c| [10.0 * c[0], 10.0 * c[1]]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Tiny jitter separates coincident starts.
    for p in &mut y {
        p[0] += 1e-4 * (rng.random::<f64>() - 0.5);
        p[1] += 1e-4 * (rng.random::<f64>() - 0.5);
    }
    if max_w <= 0.0 {
        return y.iter().map(|p| [Some(p[0]), Some(p[1])]).collect();
    }

    for epoch in 0..EPOCHS {
        let alpha = 1.0 - epoch as f64 / EPOCHS as f64;
        for &(i, j, w) in &edges {
            if rng.random::<f64>() > w / max_w {
                continue;
            }
            let delta = [y[i][0] - y[j][0], y[i][1] - y[j][1]];
            let d2 = delta[0] * delta[0] + delta[1] * delta[1];
            if d2 > 0.0 {
                let coeff = -2.0 * CURVE_A * CURVE_B * d2.powf(CURVE_B - 1.0) / (1.0 + CURVE_A * d2.powf(CURVE_B));
                for c in 0..2 {
                    let g = (coeff * delta[c]).clamp(-4.0, 4.0) * alpha;
                    y[i][c] += g;
                    y[j][c] -= g;
                }
            }
            for _ in 0..NEGATIVE_SAMPLES {
                let other = rng.random_range(0..n);
                if other == i {
                    continue;
                }
                let delta = [y[i][0] - y[other][0], y[i][1] - y[other][1]];
                let d2 = delta[0] * delta[0] + delta[1] * delta[1];
                let coeff = 2.0 * CURVE_B / ((0.001 + d2) * (1.0 + CURVE_A * d2.powf(CURVE_B)));
                for c in 0..2 {
                    let g = if coeff > 0.0 { (coeff * delta[c]).clamp(-4.0, 4.0) } else { 4.0 };
                    y[i][c] += g * alpha;
                }
            }
        }
    }
    y.iter().map(|p| [Some(p[0]), Some(p[1])]).collect()
}

/// Bandwidth such that the memberships of the neighbor list sum to `target`.
fn bandwidth(neighbors: &[(f64, usize)], rho: f64, target: f64) -> f64 {
    let total = |sigma: f64| -> f64 { neighbors.iter().map(|(d, _)| (-((d - rho).max(0.0)) / sigma).exp()).sum() };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut sigma = 1.0;
    for _ in 0..64 {
        let s = total(sigma);
        if (s - target).abs() < 1e-5 {
            break;
        }
        if s > target {
            hi = sigma;
            sigma = 0.5 * (lo + hi);
        } else {
            lo = sigma;
            sigma = if hi.is_finite() { 0.5 * (lo + hi) } else { sigma * 2.0 };
        }
    }
    sigma.max(1e-12)
}

/// Positions (into the embedded point list) grouped by lattice cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeAssignment {
    pub grid: usize,
    pub cells: BTreeMap<(usize, usize), Vec<usize>>,
}

/// Splits `[0, 1]^2` into `grid x grid` equal cells; the upper boundary
/// belongs to the last cell. Empty cells are omitted.
pub fn lattice_partition(emb: &Embedding2D, grid: usize) -> Result<LatticeAssignment, EmbedError> {
    if grid == 0 || grid > MAX_GRID {
        return Err(EmbedError::InvalidGrid(grid));
    }
    let g = grid as f64;
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (pos, &[x, y]) in emb.coords.iter().enumerate() {
        let i = ((x * g).floor().max(0.0) as usize).min(grid - 1);
        let j = ((y * g).floor().max(0.0) as usize).min(grid - 1);
        cells.entry((i, j)).or_default().push(pos);
    }
    Ok(LatticeAssignment { grid, cells })
}

/// Mean Pareto solution of one lattice cell and its radar profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub i: usize,
    pub j: usize,
    /// Dataset record indices of the member Pareto solutions.
    pub members: Vec<usize>,
    pub mean_f: Vec<f64>,
    /// Per-metric score in `[0, 1]`; 1 is the best observed value.
    pub radar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarGrid {
    pub grid: usize,
    pub cells: Vec<CellSummary>,
    /// Metrics with no spread over the Pareto set; their radar entries are
    /// pinned to 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_metrics: Vec<usize>,
}

impl RadarGrid {
    pub fn cell(&self, i: usize, j: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.i == i && c.j == j)
    }

    pub fn member_count(&self) -> usize {
        self.cells.iter().map(|c| c.members.len()).sum()
    }
}

/// `1 - (mean - min) / (max - min)`, clamped to `[0, 1]`.
pub fn radar_profile(mean_f: &[f64], extrema: &MetricExtrema) -> Vec<f64> {
    mean_f
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let span = extrema.range(m);
            if span > 0.0 {
                (1.0 - (v - extrema.f_min[m]) / span).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Attaches mean metric vectors and radar profiles to every occupied cell.
/// `extrema` should be taken over the Pareto set.
pub fn summarize_cells(
    lattice: &LatticeAssignment,
    pareto: &ParetoSet,
    extrema: &MetricExtrema,
) -> Result<RadarGrid, EmbedError> {
    let m = extrema.f_min.len();
    if pareto.n_metrics() != m {
        return Err(EmbedError::LengthMismatch { expected: m, got: pareto.n_metrics() });
    }
    let cells = lattice
        .cells
        .iter()
        .map(|(&(i, j), positions)| {
            let count = positions.len() as f64;
            let mut mean_f = vec![0.0; m];
            for &pos in positions {
                for (acc, v) in mean_f.iter_mut().zip(&pareto.points[pos]) {
                    *acc += v;
                }
            }
            mean_f.iter_mut().for_each(|v| *v /= count);
            let radar = radar_profile(&mean_f, extrema);
            let members = positions.iter().map(|&pos| pareto.indices[pos]).collect();
            CellSummary { i, j, members, mean_f, radar }
        })
        .collect();
    let constant_metrics = (0..m).filter(|&k| !(extrema.range(k) > 0.0)).collect();
    Ok(RadarGrid { grid: lattice.grid, cells, constant_metrics })
}
