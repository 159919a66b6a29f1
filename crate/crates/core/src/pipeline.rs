//! The whole exploration loop behind one type: build once per dataset,
//! then answer any number of preference selections.

use serde::Serialize;

use crate::embed::{embed_2d, lattice_partition, summarize_cells, EmbedOptions, RadarGrid};
use crate::frontfit::{fit_front, FrontModel};
use crate::ingest::Dataset;
use crate::pareto::{metric_extrema, pareto_front, MetricExtrema, ParetoSet};
use crate::pcpmodel::{build_pcp, PcpModel};
use crate::preference::{optimal_weights, project_to_front, PreferenceError, WeightVector};
use crate::Error;

/// What the user picked as the reference point.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// A lattice cell; its mean Pareto solution becomes the reference.
    Cell(usize, usize),
    /// An explicit reference point in metric space.
    Point(Vec<f64>),
}

/// Dataset shape and fit quality reported after an upload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UploadSummary {
    pub id: String,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub n_pareto: usize,
    pub fit_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceOutcome {
    pub weights: WeightVector,
    pub f_u: Vec<f64>,
    pub distance: f64,
    pub pcp: PcpModel,
}

/// Immutable per-dataset state: Pareto set, fitted front and radar grid.
#[derive(Debug, Clone)]
pub struct Analysis {
    dataset: Dataset,
    pareto: ParetoSet,
    front: FrontModel,
    extrema: MetricExtrema,
    grid: RadarGrid,
    options: EmbedOptions,
}

impl Analysis {
    pub fn build(dataset: Dataset, options: EmbedOptions) -> Result<Self, Error> {
        let pareto = pareto_front(&dataset);
        let front = fit_front(&pareto)?;
        let extrema = metric_extrema(&pareto.points)?;
        let emb = embed_2d(&pareto.points, options.method, options.seed)?;
        let lattice = lattice_partition(&emb, options.grid)?;
        let grid = summarize_cells(&lattice, &pareto, &extrema)?;
        Ok(Self { dataset, pareto, front, extrema, grid, options })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn pareto(&self) -> &ParetoSet {
        &self.pareto
    }

    pub fn front(&self) -> &FrontModel {
        &self.front
    }

    /// Per-metric extrema over the Pareto set.
    pub fn extrema(&self) -> &MetricExtrema {
        &self.extrema
    }

    pub fn grid(&self) -> &RadarGrid {
        &self.grid
    }

    pub fn options(&self) -> EmbedOptions {
        self.options
    }

    pub fn summary(&self, id: impl Into<String>) -> UploadSummary {
        UploadSummary {
            id: id.into(),
            n: self.dataset.len(),
            d: self.dataset.n_params(),
            m: self.dataset.n_metrics(),
            n_pareto: self.pareto.len(),
            fit_rms: self.front.fit_rms(),
        }
    }

    pub fn reference(&self, selection: &Selection) -> Result<Vec<f64>, Error> {
        match selection {
            Selection::Cell(i, j) => self
                .grid
                .cell(*i, *j)
                .map(|c| c.mean_f.clone())
                .ok_or(Error::UnknownCell(*i, *j)),
            Selection::Point(f_r) => Ok(f_r.clone()),
        }
    }

    /// Projects the reference onto the front, derives the weights and
    /// colors the plot with them.
    pub fn respond(&self, selection: &Selection, top_k: usize) -> Result<PreferenceOutcome, Error> {
        let f_r = self.reference(selection)?;
        if f_r.len() != self.front.n_metrics() {
            return Err(PreferenceError::LengthMismatch { expected: self.front.n_metrics(), got: f_r.len() }.into());
        }
        let point = project_to_front(&self.front, &f_r)?;
        let weights = optimal_weights(&self.front, &point)?;
        let pcp = build_pcp(&self.dataset, &self.pareto, &weights, top_k)?;
        Ok(PreferenceOutcome { distance: point.distance(), f_u: point.f_u().to_vec(), weights, pcp })
    }
}
