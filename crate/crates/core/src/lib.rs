//! Turn a preferred trade-off among competing metrics into the linear
//! weights that make it optimal, and use those weights to color a parallel
//! coordinate plot of the evaluated configurations.
//!
//! The usual flow is [`ingest`] → [`pareto`] → [`frontfit`] → [`embed`] for
//! the overview, then [`preference`] → [`pcpmodel`] for each selection.
//! [`pipeline::Analysis`] wires the stages together.

// `!(x > 0.0)` rejects NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod frontfit;
pub mod ingest;
pub mod pareto;
pub mod pcpmodel;
pub mod pipeline;
pub mod preference;

use thiserror::Error;

pub use embed::{EmbedMethod, EmbedOptions, RadarGrid};
pub use frontfit::{fit_front, FrontModel};
pub use ingest::{parse_auto, Dataset};
pub use pareto::{pareto_front, ParetoSet};
pub use pcpmodel::{build_pcp, render_svg, PcpModel};
pub use pipeline::{Analysis, PreferenceOutcome, Selection, UploadSummary};
pub use preference::{optimal_weights, project_to_front, PreferencePoint, WeightVector};

/// Coarse failure class, used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input.
    Input,
    /// The math cannot proceed on otherwise valid input.
    Numeric,
    /// A selection that does not exist.
    Selection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Pareto(#[from] pareto::ParetoError),
    #[error(transparent)]
    Front(#[from] frontfit::FrontError),
    #[error(transparent)]
    Preference(#[from] preference::PreferenceError),
    #[error(transparent)]
    Embed(#[from] embed::EmbedError),
    #[error(transparent)]
    Pcp(#[from] pcpmodel::PcpError),
    #[error("no lattice cell ({0}, {1}) in the radar grid")]
    UnknownCell(usize, usize),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.name(),
            Error::Pareto(e) => e.name(),
            Error::Front(e) => e.name(),
            Error::Preference(e) => e.name(),
            Error::Embed(e) => e.name(),
            Error::Pcp(e) => e.name(),
            Error::UnknownCell(..) => "UnknownCell",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use embed::EmbedError as E;
        use frontfit::FrontError as F;
        use pcpmodel::PcpError as P;
        use preference::PreferenceError as R;
        match self {
            Error::Ingest(_) | Error::Pareto(_) => ErrorKind::Input,
            Error::Front(F::LengthMismatch { .. } | F::InvalidModel(_)) => ErrorKind::Input,
            Error::Front(_) => ErrorKind::Numeric,
            Error::Preference(R::LengthMismatch { .. } | R::Front(F::LengthMismatch { .. })) => ErrorKind::Input,
            Error::Preference(_) => ErrorKind::Numeric,
            Error::Embed(E::TooFewPoints(_)) => ErrorKind::Numeric,
            Error::Embed(_) => ErrorKind::Input,
            Error::Pcp(P::OutOfRange { .. }) => ErrorKind::Numeric,
            Error::Pcp(_) => ErrorKind::Input,
            Error::UnknownCell(..) => ErrorKind::Selection,
        }
    }
}
