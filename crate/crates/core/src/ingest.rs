//! Evaluation datasets: parsing, validation, serialization and synthetic
//! fixtures.
//!
//! A dataset pairs every evaluated control-parameter vector with the metric
//! vector it produced. All metrics are minimized; callers that want to
//! maximize a quantity must negate it before ingestion.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PARAM_PREFIX: &str = "param:";
const METRIC_PREFIX: &str = "metric:";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("input has no header row")]
    MissingHeader,
    #[error("column `{0}` must be prefixed with `param:` or `metric:`")]
    UnknownColumnPrefix(String),
    #[error("header needs at least one `param:` and one `metric:` column")]
    MissingRole,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("row {row}, column `{col}`: `{value}` is not a finite number")]
    NonNumericCell { row: usize, col: String, value: String },
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("schema violation at {0}")]
    SchemaViolation(String),
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("record {record}: parameter `{param}` = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain { record: usize, param: String, value: f64, lo: f64, hi: f64 },
    #[error("invalid synthetic shape: {0}")]
    InvalidShape(String),
}

impl IngestError {
    /// Stable variant name, used as the error tag on the wire.
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::MissingHeader => "MissingHeader",
            IngestError::UnknownColumnPrefix(_) => "UnknownColumnPrefix",
            IngestError::MissingRole => "MissingRole",
            IngestError::RaggedRow { .. } => "RaggedRow",
            IngestError::NonNumericCell { .. } => "NonNumericCell",
            IngestError::EmptyDataset => "EmptyDataset",
            IngestError::SchemaViolation(_) => "SchemaViolation",
            IngestError::DuplicateName(_) => "DuplicateName",
            IngestError::OutOfDomain { .. } => "OutOfDomain",
            IngestError::InvalidShape(_) => "InvalidShape",
        }
    }
}

/// One evaluated configuration: its control parameters and the metrics it
/// scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub params: Vec<f64>,
    pub metrics: Vec<f64>,
}

/// Closed interval `[lo, hi]` a control parameter is allowed to take.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl From<[f64; 2]> for Domain {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Domain> for [f64; 2] {
    fn from(d: Domain) -> Self {
        [d.lo, d.hi]
    }
}

/// A validated collection of evaluation records sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    param_names: Vec<String>,
    metric_names: Vec<String>,
    param_domains: Vec<Domain>,
    records: Vec<EvaluationRecord>,
}

impl Dataset {
    /// Validates and assembles a dataset. When `param_domains` is `None`,
    /// each domain is the observed `[min, max]` of its column.
    pub fn new(
        param_names: Vec<String>,
        metric_names: Vec<String>,
        records: Vec<EvaluationRecord>,
        param_domains: Option<Vec<Domain>>,
    ) -> Result<Self, IngestError> {
        if param_names.is_empty() || metric_names.is_empty() {
            return Err(IngestError::MissingRole);
        }
        let mut seen = HashSet::new();
        for name in param_names.iter().chain(&metric_names) {
            if !seen.insert(name.as_str()) {
                return Err(IngestError::DuplicateName(name.clone()));
            }
        }
        if records.is_empty() {
            return Err(IngestError::EmptyDataset);
        }
        let (d, m) = (param_names.len(), metric_names.len());
        for (n, rec) in records.iter().enumerate() {
            if rec.params.len() != d {
                return Err(IngestError::SchemaViolation(format!("records[{n}].params")));
            }
            if rec.metrics.len() != m {
                return Err(IngestError::SchemaViolation(format!("records[{n}].metrics")));
            }
            if let Some(k) = rec.params.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::SchemaViolation(format!("records[{n}].params[{k}]")));
            }
            if let Some(k) = rec.metrics.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::SchemaViolation(format!("records[{n}].metrics[{k}]")));
            }
        }

        let param_domains = match param_domains {
            Some(domains) => {
                if domains.len() != d {
                    return Err(IngestError::SchemaViolation("param_domains".into()));
                }
                for (k, dom) in domains.iter().enumerate() {
                    if !(dom.lo.is_finite() && dom.hi.is_finite() && dom.lo <= dom.hi) {
                        return Err(IngestError::SchemaViolation(format!("param_domains[{k}]")));
                    }
                }
                domains
            }
            None => (0..d)
                .map(|k| {
                    let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r.params[k]), hi.max(r.params[k]))
                    });
                    Domain::new(lo, hi)
                })
                .collect(),
        };

        for (n, rec) in records.iter().enumerate() {
            for (k, (&v, dom)) in rec.params.iter().zip(&param_domains).enumerate() {
                if !dom.contains(v) {
                    return Err(IngestError::OutOfDomain {
                        record: n,
                        param: param_names[k].clone(),
                        value: v,
                        lo: dom.lo,
                        hi: dom.hi,
                    });
                }
            }
        }

        Ok(Self { param_names, metric_names, param_domains, records })
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn param_domains(&self) -> &[Domain] {
        &self.param_domains
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    /// Number of control parameters (D).
    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    /// Number of metrics (M).
    pub fn n_metrics(&self) -> usize {
        self.metric_names.len()
    }

    /// Number of records (N).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn metric_vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.metrics.as_slice())
    }

    /// Serializes to the CSV layout accepted by [`parse_csv`]. Values use the
    /// shortest decimal form that round-trips to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .param_names
            .iter()
            .map(|n| format!("{PARAM_PREFIX}{n}"))
            .chain(self.metric_names.iter().map(|n| format!("{METRIC_PREFIX}{n}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for rec in &self.records {
            let mut first = true;
            for v in rec.params.iter().chain(&rec.metrics) {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v:?}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("dataset serialization cannot fail")
    }

    fn to_document(&self) -> DatasetDocument {
        DatasetDocument {
            params: self.param_names.clone(),
            metrics: self.metric_names.clone(),
            param_domains: Some(self.param_domains.clone()),
            records: self.records.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDocument {
    params: Vec<String>,
    metrics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param_domains: Option<Vec<Domain>>,
    records: Vec<EvaluationRecord>,
}

/// Parses a CSV dataset whose header names every column `param:<name>` or
/// `metric:<name>`. Column order is preserved within each role.
pub fn parse_csv(text: &str) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = loop {
        match rows.next() {
            None => return Err(IngestError::MissingHeader),
            Some(Err(e)) => return Err(IngestError::SchemaViolation(e.to_string())),
            Some(Ok(r)) if r.iter().all(str::is_empty) => continue,
            Some(Ok(r)) => break r,
        }
    };

    enum Role {
        Param,
        Metric,
    }
    let mut roles = Vec::with_capacity(header.len());
    let mut param_names = Vec::new();
    let mut metric_names = Vec::new();
    for col in header.iter() {
        if let Some(name) = col.strip_prefix(PARAM_PREFIX) {
            roles.push(Role::Param);
            param_names.push(name.to_string());
        } else if let Some(name) = col.strip_prefix(METRIC_PREFIX) {
            roles.push(Role::Metric);
            metric_names.push(name.to_string());
        } else {
            return Err(IngestError::UnknownColumnPrefix(col.to_string()));
        }
    }
    if param_names.is_empty() || metric_names.is_empty() {
        return Err(IngestError::MissingRole);
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| IngestError::SchemaViolation(e.to_string()))?;
        // 1-based line number in the source text.
        let line = row.position().map(|p| p.line() as usize).unwrap_or(records.len() + 2);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != roles.len() {
            return Err(IngestError::RaggedRow { row: line, found: row.len(), expected: roles.len() });
        }
        let mut rec = EvaluationRecord {
            params: Vec::with_capacity(param_names.len()),
            metrics: Vec::with_capacity(metric_names.len()),
        };
        for ((cell, role), col) in row.iter().zip(&roles).zip(header.iter()) {
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NonNumericCell {
                    row: line,
                    col: col.to_string(),
                    value: cell.to_string(),
                })?;
            match role {
                Role::Param => rec.params.push(value),
                Role::Metric => rec.metrics.push(value),
            }
        }
        records.push(rec);
    }

    Dataset::new(param_names, metric_names, records, None)
}

/// Parses the JSON dataset document
/// `{"params":[..], "metrics":[..], "param_domains":[[lo,hi]]?, "records":[{"params":[..],"metrics":[..]}]}`.
pub fn parse_json(text: &str) -> Result<Dataset, IngestError> {
    let doc: DatasetDocument = serde_json::from_str(text).map_err(|e| {
        if text.trim().is_empty() {
            IngestError::EmptyDataset
        } else {
            IngestError::SchemaViolation(format!("line {} column {}: {e}", e.line(), e.column()))
        }
    })?;
    Dataset::new(doc.params, doc.metrics, doc.records, doc.param_domains)
}

/// Parses either format, picking JSON when the first non-blank character is
/// `{`.
pub fn parse_auto(text: &str) -> Result<Dataset, IngestError> {
    match text.trim_start().chars().next() {
        None => Err(IngestError::EmptyDataset),
        Some('{') => parse_json(text),
        Some(_) => parse_csv(text),
    }
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_params: usize,
    pub n_metrics: usize,
    pub n_records: usize,
    /// Asymptote offsets of the product front, one per metric.
    pub offsets: Vec<f64>,
    /// Product level of the front.
    pub level: f64,
    /// Scale of the nonnegative slack added to every metric.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Five parameters, three metrics, 1000 records; a mildly noisy front so
    /// that dominated records exist.
    pub fn experiment_shape(seed: u64) -> Self {
        Self {
            n_params: 5,
            n_metrics: 3,
            n_records: 1000,
            offsets: vec![0.0; 3],
            level: 1.0,
            noise: 0.3,
            seed,
        }
    }
}

/// Half-width of the log-gap spread used to place points on the front.
const LOG_GAP_SPREAD: f64 = 1.5;

/// Draws records whose metrics sit on or above `prod(f_m - a_m) = b`.
///
/// Points are placed by sampling per-metric log-gaps `log(f_m - a_m)`
/// uniformly, centering them, and shifting so they sum to `log b`; slack
/// `noise * U[0, 1)` is then added to every metric independently. Parameters
/// are uniform on `[0, 1]^d` and the metric placement is driven by them, so
/// the resulting PCPs show structure.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, IngestError> {
    let SyntheticSpec { n_params: d, n_metrics: m, n_records: n, .. } = *spec;
    if d < 1 {
        return Err(IngestError::InvalidShape("need at least one parameter".into()));
    }
    if m < 2 {
        return Err(IngestError::InvalidShape("need at least two metrics".into()));
    }
    if n < m + 1 {
        return Err(IngestError::InvalidShape(format!("need at least {} records", m + 1)));
    }
    if spec.offsets.len() != m {
        return Err(IngestError::InvalidShape(format!(
            "expected {m} offsets, got {}",
            spec.offsets.len()
        )));
    }
    if !(spec.level > 0.0 && spec.level.is_finite()) {
        return Err(IngestError::InvalidShape("level must be positive".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(IngestError::InvalidShape("noise must be nonnegative".into()));
    }
    if spec.offsets.iter().any(|a| !a.is_finite()) {
        return Err(IngestError::InvalidShape("offsets must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let log_level = spec.level.ln();
    let records = (0..n)
        .map(|_| {
            let params: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            // Each metric's log-gap mixes one parameter with fresh jitter.
            let mut z: Vec<f64> = (0..m)
                .map(|k| {
                    let u = 0.5 * params[k % d] + 0.5 * rng.random::<f64>();
                    LOG_GAP_SPREAD * (2.0 * u - 1.0)
                })
                .collect();
            let mean = z.iter().sum::<f64>() / m as f64;
            z.iter_mut().for_each(|v| *v -= mean);

            let mut gaps: Vec<f64> = z.iter().map(|v| (log_level / m as f64 + v).exp()).collect();
            // Close the product exactly on the last coordinate.
            let partial: f64 = gaps[..m - 1].iter().product();
            gaps[m - 1] = spec.level / partial;

            let metrics = gaps
                .iter()
                .zip(&spec.offsets)
                .map(|(g, a)| a + g + spec.noise * rng.random::<f64>())
                .collect();
            EvaluationRecord { params, metrics }
        })
        .collect();

    let param_names = (1..=d).map(|k| format!("lambda{k}")).collect();
    let metric_names = (1..=m).map(|k| format!("f{k}")).collect();
    Dataset::new(param_names, metric_names, records, Some(vec![Domain::new(0.0, 1.0); d]))
}
