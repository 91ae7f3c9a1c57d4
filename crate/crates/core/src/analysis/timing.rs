//! Wall-clock comparison of DTK against the exact tree kernels, binned by
//! the total node count of each tree pair. Runs on the calling thread only.
//! Median per-call times are taken over repetitions that cycle through every
//! pair and kernel in turn.

use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::stats::median;
use super::synth::TreeGenerator;
use super::{AnalysisError, ExperimentReport};
use crate::dtk::{dtk, DistributedTree, Encoder};
use crate::tk::{tk_exact, tk_fast};
use crate::tree::Tree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub warmup: usize,
    pub repetitions: usize,
    /// Explicit inclusive `(lo, hi)` ranges of total pair size. When empty,
    /// pairs are grouped into consecutive bins of `bin_width` nodes.
    pub bins: Vec<(usize, usize)>,
    pub bin_width: usize,
    /// Each timed repetition runs the kernel enough times to cover this span.
    pub min_sample_time: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup: 5,
            repetitions: 30,
            bins: Vec::new(),
            bin_width: 20,
            min_sample_time: Duration::from_millis(1),
        }
    }
}

/// Kernels timed per pair, in measurement order.
const KERNELS: [&str; 4] = ["dtk_seconds", "dt_build_seconds", "tk_fast_seconds", "tk_exact_seconds"];

struct Job<'a> {
    a: &'a Tree,
    b: &'a Tree,
    da: DistributedTree,
    db: DistributedTree,
    /// Calls per timed sample, per kernel.
    inner: [usize; 4],
    samples: [Vec<f64>; 4],
}

fn call(kernel: usize, job: &Job<'_>, encoder: &Encoder) {
    let lambda = encoder.lambda;
    match kernel {
        0 => {
            black_box(dtk(black_box(&job.da), black_box(&job.db)).unwrap());
        }
        1 => {
            black_box(encoder.encode(black_box(job.a)).unwrap());
            black_box(encoder.encode(black_box(job.b)).unwrap());
        }
        2 => {
            black_box(tk_fast(black_box(job.a), black_box(job.b), lambda).unwrap());
        }
        _ => {
            black_box(tk_exact(black_box(job.a), black_box(job.b), lambda).unwrap());
        }
    }
}

fn bins_for(pairs: &[(Tree, Tree)], config: &BenchConfig) -> Vec<(usize, usize)> {
    if !config.bins.is_empty() {
        return config.bins.clone();
    }
    let w = config.bin_width.max(1);
    let mut starts: Vec<usize> = pairs.iter().map(|(a, b)| (a.node_count() + b.node_count()) / w * w).collect();
    starts.sort_unstable();
    starts.dedup();
    starts.into_iter().map(|s| (s, s + w - 1)).collect()
}

/// Pair-size bins around each target total: `[0.9·t, 1.1·t]`.
pub fn bins_around(totals: &[usize]) -> Vec<(usize, usize)> {
    totals.iter().map(|&t| (t * 9 / 10, (t * 11).div_ceil(10))).collect()
}

/// `per_bin` synthetic pairs for each bin, both trees of a pair about half
/// the bin's total.
pub fn synthetic_pairs(generator: &TreeGenerator, bins: &[(usize, usize)], per_bin: usize) -> Vec<(Tree, Tree)> {
    let mut pairs = Vec::with_capacity(bins.len() * per_bin);
    let mut index = 0u64;
    for &(lo, hi) in bins {
        let (half_lo, half_hi) = (lo.div_ceil(2).max(1), (hi / 2).max(1));
        for _ in 0..per_bin {
            let a = generator.tree_with_size(index, half_lo, half_hi);
            let b = generator.tree_with_size(index + 1, half_lo, half_hi);
            index += 2;
            pairs.push((a, b));
        }
    }
    pairs
}

/// Per bin, the median over pairs of the median time per evaluation of:
/// `dtk_seconds` (dot product of precomputed distributed trees),
/// `dt_build_seconds` (encoding both trees), `tk_fast_seconds` and
/// `tk_exact_seconds`. `x` is the bin midpoint; the `pairs` series holds
/// per-bin sample counts.
pub fn timing_benchmark(
    pairs: &[(Tree, Tree)],
    encoder: &Encoder,
    config: &BenchConfig,
) -> Result<ExperimentReport, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    if config.repetitions == 0 {
        return Err(AnalysisError::InvalidParameter("repetitions must be positive".into()));
    }
    let lambda = encoder.lambda;
    let bins = bins_for(pairs, config);
    let mut report = ExperimentReport::new(
        "timing",
        json!({
            "dim": encoder.spec.dim(),
            "composition": encoder.spec.kind(),
            "master_seed": encoder.spec.master_seed(),
            "lambda": lambda,
            "warmup": config.warmup,
            "repetitions": config.repetitions,
            "min_sample_time_us": config.min_sample_time.as_micros() as u64,
            "bins": bins,
        }),
    );

    let mut jobs: Vec<(usize, Job<'_>)> = Vec::new();
    for (bin, &(lo, hi)) in bins.iter().enumerate() {
        for (a, b) in pairs.iter().filter(|(a, b)| (lo..=hi).contains(&(a.node_count() + b.node_count()))) {
            let (da, db) = (encoder.encode(a)?, encoder.encode(b)?);
            jobs.push((bin, Job { a, b, da, db, inner: [1; 4], samples: Default::default() }));
        }
    }

    // Warm up and size each sample to cover at least `min_sample_time`.
    for (_, job) in jobs.iter_mut() {
        for k in 0..KERNELS.len() {
            for _ in 0..config.warmup {
                call(k, job, encoder);
            }
            let start = Instant::now();
            call(k, job, encoder);
            let single = start.elapsed().max(Duration::from_nanos(1)).as_secs_f64();
            job.inner[k] = (config.min_sample_time.as_secs_f64() / single).ceil().clamp(1.0, 10_000.0) as usize;
        }
    }

    // Round-robin over all pairs and kernels, so that slow periods of the
    // machine spread over every bin instead of skewing the one being timed.
    for _ in 0..config.repetitions {
        for (_, job) in jobs.iter_mut() {
            for k in 0..KERNELS.len() {
                let start = Instant::now();
                for _ in 0..job.inner[k] {
                    call(k, job, encoder);
                }
                let t = start.elapsed().as_secs_f64() / job.inner[k] as f64;
                job.samples[k].push(t);
            }
        }
    }

    let mut dtk_medians = Vec::new();
    for (bin, &(lo, hi)) in bins.iter().enumerate() {
        let members: Vec<&Job<'_>> = jobs.iter().filter(|(b, _)| *b == bin).map(|(_, j)| j).collect();
        if members.is_empty() {
            continue;
        }
        let x = (lo + hi) as f64 / 2.0;
        let n = members.len();
        for (k, name) in KERNELS.iter().enumerate() {
            let per_pair: Vec<f64> = members.iter().map(|j| median(&j.samples[k])).collect();
            let m = median(&per_pair);
            if k == 0 {
                dtk_medians.push(m);
            }
            report.push(name, x, m, n);
        }
        let sizes: f64 = members.iter().map(|j| (j.a.node_count() + j.b.node_count()) as f64).sum();
        report.push("mean_total_nodes", x, sizes / n as f64, n);
        report.push("pairs", x, n as f64, n);
    }
    if let (Some(max), Some(min)) = (
        dtk_medians.iter().copied().reduce(f64::max),
        dtk_medians.iter().copied().reduce(f64::min),
    ) {
        report.summary.insert("dtk_max_over_min".into(), max / min);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::CompositionKind;
    use crate::tree::parse_tree;

    fn quick() -> BenchConfig {
        BenchConfig { warmup: 1, repetitions: 3, min_sample_time: Duration::from_micros(1), ..BenchConfig::default() }
    }

    #[test]
    fn synthetic_pairs_fall_in_their_bins() {
        let g = TreeGenerator::new(crate::analysis::SynthConfig::default());
        let bins = bins_around(&[20, 100]);
        assert_eq!(bins, vec![(18, 22), (90, 110)]);
        let pairs = synthetic_pairs(&g, &bins, 3);
        assert_eq!(pairs.len(), 6);
        for (k, (a, b)) in pairs.iter().enumerate() {
            let (lo, hi) = bins[k / 3];
            assert!((lo..=hi).contains(&(a.node_count() + b.node_count())));
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 64, 1, 0.4).unwrap();
        assert_eq!(timing_benchmark(&[], &enc, &quick()), Err(AnalysisError::EmptyCorpus));
    }

    #[test]
    fn auto_bins_group_pairs() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 64, 1, 0.4).unwrap();
        let small = (parse_tree("(A a)").unwrap(), parse_tree("(A b)").unwrap());
        let big = (parse_tree("(S (A a) (B b) (C c) (D d) (E e) (F f) (G g) (H h) (I i) (J j) (K k) (L l))").unwrap(), small.0.clone());
        let r = timing_benchmark(&[small.clone(), small, big], &enc, &quick()).unwrap();
        assert_eq!(r.series("pairs"), vec![(9.5, 2.0), (29.5, 1.0)]);
        assert_eq!(r.series("tk_exact_seconds").len(), 2);
        assert!(r.summary["dtk_max_over_min"] >= 1.0);
    }
}
