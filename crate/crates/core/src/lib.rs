//! Predictive intelligence measurement.
//!
//! An agent's intelligence is measured by how well its predictions about its
//! own sensory world match what actually happens, corrected for random
//! guessing, discounted by the compressibility of the predictions and of the
//! environments, and reported on a log2 scale.
//!
//! Two reference agents are included: a grid-maze agent ([`maze`]) and a
//! recurrent-network time-series agent ([`timeseries`]).

pub mod complexity;
pub mod error;
pub mod maze;
pub mod measure;
pub mod stats;
pub mod timeseries;

pub use complexity::{k_hat, k_ratio, CompressorSpec, SerializedUmwelt};
pub use error::{Error, Result};
pub use measure::{
    intelligence, measure, Baseline, CategoricalDistribution, ContinuousEnsemblePrediction,
    MeasurementResult, PredictionEvent, UmweltId, UmweltRecord,
};
