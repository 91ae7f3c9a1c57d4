//! Statistical experiments on composition operators and on the DTK ≈ TK
//! approximation.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::stats::{mean, pearson, spearman, variance};
use super::{AnalysisError, ExperimentReport};
use crate::dtk::Encoder;
use crate::embedding::{dot, gaussian_unit_vector, seeded_rng, CompositionKind, CompositionSpec, DenseVector, Domain};
use crate::tk::tk_fast;
use crate::tree::Tree;

const NORM_STREAM: u64 = 0x6e6f_726d;
const ORTHO_SINGLE_STREAM: u64 = 0x6f72_7431;
const ORTHO_SHARED_STREAM: u64 = 0x6f72_7432;
const PAIR_STREAM: u64 = 0x7061_6972;

fn dot_vectors(a: &DenseVector, b: &DenseVector) -> f64 {
    dot(a.as_slice(), b.as_slice())
}

fn spec_config(spec: &CompositionSpec) -> serde_json::Value {
    json!({
        "dim": spec.dim(),
        "composition": spec.kind(),
        "master_seed": spec.master_seed(),
        "gamma": spec.gamma(),
    })
}

/// Mean and variance of ‖v1 ∘ v2 ∘ … ∘ vk‖ (left fold) for k = 2..=max_k.
pub fn norm_drift_experiment(
    max_k: usize,
    samples: usize,
    spec: &CompositionSpec,
) -> Result<ExperimentReport, AnalysisError> {
    if max_k < 2 {
        return Err(AnalysisError::InvalidParameter(format!("max_k must be at least 2, got {max_k}")));
    }
    if samples == 0 {
        return Err(AnalysisError::InvalidParameter("samples must be positive".into()));
    }
    let dim = spec.dim();
    // norms[k-2][sample]
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = seeded_rng(spec.master_seed(), Domain::Sampling, NORM_STREAM.wrapping_add((s as u64) << 20));
            let mut acc = gaussian_unit_vector(&mut rng, dim);
            (2..=max_k)
                .map(|_| {
                    let v = gaussian_unit_vector(&mut rng, dim);
                    acc = spec.compose(&acc, &v).expect("dimensions match");
                    acc.norm()
                })
                .collect()
        })
        .collect();

    let mut config = spec_config(spec);
    config["max_k"] = json!(max_k);
    config["samples"] = json!(samples);
    let mut report = ExperimentReport::new("norm_drift", config);
    let mut worst = 0.0f64;
    for k in 2..=max_k {
        let norms: Vec<f64> = per_sample.iter().map(|row| row[k - 2]).collect();
        let m = mean(&norms);
        worst = worst.max((m - 1.0).abs());
        report.push("mean_norm", k as f64, m, samples);
        report.push("norm_variance", k as f64, variance(&norms), samples);
    }
    report.summary.insert("max_abs_mean_deviation".into(), worst);
    Ok(report)
}

/// Two similarity tests on random compositions:
/// * `single_vs_composition_*`: a vs a chain of k other vectors (k = 1..=max_k);
/// * `shared_tail_*`: (a ∘ t) vs (b ∘ t) with t a chain of k vectors (k = 0..=max_k,
///   k = 0 meaning plain a vs b).
pub fn orthogonality_experiment(
    max_k: usize,
    samples: usize,
    spec: &CompositionSpec,
) -> Result<ExperimentReport, AnalysisError> {
    if max_k < 1 {
        return Err(AnalysisError::InvalidParameter(format!("max_k must be at least 1, got {max_k}")));
    }
    if samples == 0 {
        return Err(AnalysisError::InvalidParameter("samples must be positive".into()));
    }
    let dim = spec.dim();
    let compose = |a: &DenseVector, b: &DenseVector| spec.compose(a, b).expect("dimensions match");

    // single[sample][k-1]
    let single: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                seeded_rng(spec.master_seed(), Domain::Sampling, ORTHO_SINGLE_STREAM.wrapping_add((s as u64) << 20));
            let a = gaussian_unit_vector(&mut rng, dim);
            let mut t = gaussian_unit_vector(&mut rng, dim);
            let mut out = vec![dot_vectors(&a, &t)];
            for _ in 2..=max_k {
                t = compose(&t, &gaussian_unit_vector(&mut rng, dim));
                out.push(dot_vectors(&a, &t));
            }
            out
        })
        .collect();

    // shared[sample][k]
    let shared: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                seeded_rng(spec.master_seed(), Domain::Sampling, ORTHO_SHARED_STREAM.wrapping_add((s as u64) << 20));
            let a = gaussian_unit_vector(&mut rng, dim);
            let b = gaussian_unit_vector(&mut rng, dim);
            let mut out = vec![dot_vectors(&a, &b)];
            let mut t: Option<DenseVector> = None;
            for _ in 1..=max_k {
                let v = gaussian_unit_vector(&mut rng, dim);
                let tail = match t.take() {
                    None => v,
                    Some(prev) => compose(&prev, &v),
                };
                out.push(dot_vectors(&compose(&a, &tail), &compose(&b, &tail)));
                t = Some(tail);
            }
            out
        })
        .collect();

    let mut config = spec_config(spec);
    config["max_k"] = json!(max_k);
    config["samples"] = json!(samples);
    let mut report = ExperimentReport::new("orthogonality", config);
    let mut worst_single = 0.0f64;
    for k in 1..=max_k {
        let abs: Vec<f64> = single.iter().map(|row| row[k - 1].abs()).collect();
        let m = mean(&abs);
        worst_single = worst_single.max(m);
        report.push("single_vs_composition_mean_abs_dot", k as f64, m, samples);
    }
    for k in 0..=max_k {
        let dots: Vec<f64> = shared.iter().map(|row| row[k]).collect();
        let abs: Vec<f64> = dots.iter().map(|d| d.abs()).collect();
        report.push("shared_tail_mean_dot", k as f64, mean(&dots), samples);
        report.push("shared_tail_dot_variance", k as f64, variance(&dots), samples);
        report.push("shared_tail_mean_abs_dot", k as f64, mean(&abs), samples);
    }
    report.summary.insert("max_single_vs_composition_mean_abs_dot".into(), worst_single);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub lambdas: Vec<f64>,
    pub composition: CompositionKind,
    pub dim: usize,
    pub seed: u64,
    /// All pairs are used when there are at most this many; otherwise a
    /// seeded uniform sample of this size.
    pub max_pairs: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            lambdas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            composition: CompositionKind::ShuffledConvolution,
            dim: crate::embedding::DEFAULT_DIM,
            seed: 42,
            max_pairs: 500,
        }
    }
}

/// Index pairs `(i, j)`, `i < j`: all of them, or a seeded sample of `max_pairs`.
pub fn select_pairs(n: usize, max_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total <= max_pairs {
        return (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    }
    let mut rng = seeded_rng(seed, Domain::Sampling, PAIR_STREAM);
    let mut seen = HashSet::with_capacity(max_pairs);
    let mut pairs = Vec::with_capacity(max_pairs);
    while pairs.len() < max_pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let p = (i.min(j), i.max(j));
        if seen.insert(p) {
            pairs.push(p);
        }
    }
    pairs
}

/// Spearman correlation between DTK and exact TK values per λ.
///
/// Series: `spearman` (ρ per λ), `pearson_scaled` (Pearson of λ·DTK vs TK) and
/// `mean_relative_error` (|λ·DTK − TK| / TK over pairs with TK > 0).
pub fn correlation_experiment(corpus: &[Tree], config: &CorrelationConfig) -> Result<ExperimentReport, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    if corpus.len() < 2 {
        return Err(AnalysisError::TooFewPoints(corpus.len()));
    }
    if config.lambdas.is_empty() {
        return Err(AnalysisError::InvalidParameter("no lambda values".into()));
    }
    let pairs = select_pairs(corpus.len(), config.max_pairs, config.seed);
    let base_spec = CompositionSpec::new(config.composition, config.dim, config.seed)?;

    let mut report = ExperimentReport::new(
        "correlation",
        json!({
            "lambdas": config.lambdas,
            "composition": config.composition,
            "dim": config.dim,
            "master_seed": config.seed,
            "max_pairs": config.max_pairs,
            "pairs": pairs.len(),
            "corpus_size": corpus.len(),
            "gamma": base_spec.gamma(),
        }),
    );

    let mut degenerate = 0usize;
    for &lambda in &config.lambdas {
        let encoder = Encoder::from_parts(base_spec.clone(), lambda)?;
        let dts = corpus.par_iter().map(|t| encoder.encode(t)).collect::<Result<Vec<_>, _>>()?;
        let values = pairs
            .par_iter()
            .map(|&(i, j)| {
                let d = crate::dtk::dtk(&dts[i], &dts[j])?;
                let t = tk_fast(&corpus[i], &corpus[j], lambda)?;
                Ok((d, t))
            })
            .collect::<Result<Vec<_>, AnalysisError>>()?;
        let (dtk_vals, tk_vals): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();

        match spearman(&dtk_vals, &tk_vals) {
            Ok(rho) => report.push("spearman", lambda, rho, pairs.len()),
            Err(AnalysisError::DegenerateRanks) => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        }
        let scaled: Vec<f64> = dtk_vals.iter().map(|d| lambda * d).collect();
        if let Ok(r) = pearson(&scaled, &tk_vals) {
            report.push("pearson_scaled", lambda, r, pairs.len());
        }
        let rel: Vec<f64> = scaled
            .iter()
            .zip(&tk_vals)
            .filter(|(_, &t)| t > 0.0)
            .map(|(d, t)| (d - t).abs() / t)
            .collect();
        if !rel.is_empty() {
            report.push("mean_relative_error", lambda, mean(&rel), rel.len());
        }
    }
    if degenerate == config.lambdas.len() {
        return Err(AnalysisError::DegenerateRanks);
    }
    report.summary.insert("degenerate_lambdas".into(), degenerate as f64);
    Ok(report)
}
