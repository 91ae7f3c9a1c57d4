//! Experiment harness: composition statistics, kernel correlation, timing,
//! and gram matrices.

pub mod experiments;
pub mod gram;
pub mod stats;
pub mod synth;
pub mod timing;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtk::DtkError;
use crate::format::format_sig;

pub use experiments::{correlation_experiment, norm_drift_experiment, orthogonality_experiment, CorrelationConfig};
pub use gram::{gram_from_vectors, gram_matrix, GramMatrix, KernelChoice};
pub use stats::spearman;
pub use synth::{SynthConfig, TreeGenerator};
pub use timing::{bins_around, synthetic_pairs, timing_benchmark, BenchConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("ranks are degenerate (a constant series)")]
    DegenerateRanks,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dtk(#[from] DtkError),
}

impl From<crate::embedding::EmbeddingError> for AnalysisError {
    fn from(e: crate::embedding::EmbeddingError) -> Self {
        AnalysisError::Dtk(e.into())
    }
}

/// One measured value of a named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub series: String,
    pub x: f64,
    pub value: f64,
    pub samples: usize,
}

/// Output of an experiment: the config it ran with, its data points, and
/// summary scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    pub points: Vec<DataPoint>,
    pub summary: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        ExperimentReport { experiment: experiment.to_owned(), config, points: Vec::new(), summary: BTreeMap::new() }
    }

    pub fn push(&mut self, series: &str, x: f64, value: f64, samples: usize) {
        self.points.push(DataPoint { series: series.to_owned(), x, value, samples });
    }

    /// Points of one series, in insertion order.
    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        self.points.iter().filter(|p| p.series == name).map(|p| (p.x, p.value)).collect()
    }

    /// Value of `series` at `x`, if present.
    pub fn value(&self, series: &str, x: f64) -> Option<f64> {
        self.points.iter().find(|p| p.series == series && p.x == x).map(|p| p.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `experiment,series,x,value,samples`, numbers with 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "series", "x", "value", "samples"]).unwrap();
        for p in &self.points {
            w.write_record([
                self.experiment.as_str(),
                p.series.as_str(),
                &format_sig(p.x),
                &format_sig(p.value),
                &p.samples.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
