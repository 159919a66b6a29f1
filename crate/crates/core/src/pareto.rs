//! Pareto dominance, non-dominated filtering and per-metric extrema.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParetoError {
    #[error("metric vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("point set is empty")]
    EmptySet,
}

impl ParetoError {
    pub fn name(&self) -> &'static str {
        match self {
            ParetoError::LengthMismatch(..) => "LengthMismatch",
            ParetoError::EmptySet => "EmptySet",
        }
    }
}

/// `true` iff `a` is no worse than `b` on every metric and strictly better on
/// at least one (all metrics minimized).
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::LengthMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

/// The non-dominated records of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    /// Ascending record indices into the source dataset.
    pub indices: Vec<usize>,
    /// Metric vectors of those records, in the same order.
    pub points: Vec<Vec<f64>>,
}

impl ParetoSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_metrics(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn contains(&self, record: usize) -> bool {
        self.indices.binary_search(&record).is_ok()
    }
}

/// Extracts every non-dominated record. Records with identical metric
/// vectors do not dominate each other, so all copies are kept.
pub fn pareto_front(dataset: &Dataset) -> ParetoSet {
    let points: Vec<&[f64]> = dataset.metric_vectors().collect();
    let indices = non_dominated_indices(&points);
    let points = indices.iter().map(|&i| points[i].to_vec()).collect();
    ParetoSet { indices, points }
}

/// Indices (ascending) of the non-dominated members of `points`.
///
/// Candidates are visited in lexicographic order: a dominator always sorts
/// strictly before what it dominates, so each candidate only has to be
/// checked against the front accumulated so far.
pub fn non_dominated_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(points[i].as_ref(), points[j].as_ref()).then(i.cmp(&j)));

    let mut front: Vec<usize> = Vec::new();
    for &i in &order {
        let p = points[i].as_ref();
        if !front.iter().any(|&j| dominates_unchecked(points[j].as_ref(), p)) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Coordinate-wise minimum and maximum over a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricExtrema {
    pub f_min: Vec<f64>,
    pub f_max: Vec<f64>,
}

impl MetricExtrema {
    pub fn range(&self, m: usize) -> f64 {
        self.f_max[m] - self.f_min[m]
    }
}

pub fn metric_extrema<P: AsRef<[f64]>>(points: &[P]) -> Result<MetricExtrema, ParetoError> {
    let first = points.first().ok_or(ParetoError::EmptySet)?.as_ref();
    let mut f_min = first.to_vec();
    let mut f_max = first.to_vec();
    for p in &points[1..] {
        let p = p.as_ref();
        if p.len() != f_min.len() {
            return Err(ParetoError::LengthMismatch(f_min.len(), p.len()));
        }
        for (m, &v) in p.iter().enumerate() {
            f_min[m] = f_min[m].min(v);
            f_max[m] = f_max[m].max(v);
        }
    }
    Ok(MetricExtrema { f_min, f_max })
}
