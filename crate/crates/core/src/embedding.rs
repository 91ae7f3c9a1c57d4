//! Node vectors and the binding operators used to compose them.
//!
//! Every random quantity here is derived from a counter-based ChaCha8
//! generator keyed by `(master_seed, domain)`, with the stream selected by
//! what is being drawn (the FNV-1a hash of a label, a permutation id, ...).
//! Normal variates come from the Box–Muller transform. A node vector is
//! therefore a pure function of `(master_seed, dim, label)` and does not
//! depend on query order or threading.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dimension used throughout the reference experiments.
pub const DEFAULT_DIM: usize = 8192;

/// Pairs drawn when estimating γ for the shuffled product.
pub const DEFAULT_GAMMA_SAMPLES: usize = 1000;

/// Name of the label hash recorded in exported lexicons.
pub const HASH_ALGO: &str = "fnv1a64";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("fast circular convolution needs a power-of-two dimension, got {0}")]
    UnsupportedDimension(usize),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("at least one sample is required")]
    NoSamples,
    #[error("invalid lexicon file: {0}")]
    InvalidLexicon(String),
}

/// Random-stream domains. Each one keys an independent ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Lexicon = 1,
    Permutation = 2,
    Gamma = 3,
    Sampling = 4,
}

/// 64-bit FNV-1a over the UTF-8 bytes of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    fnv1a64_bytes(text.as_bytes())
}

pub fn fnv1a64_bytes(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Generator for `(master_seed, domain)` positioned at the start of `stream`.
pub fn seeded_rng(master_seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

/// Box–Muller pair of independent N(0,1) draws.
fn normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// A vector with N(0,1) components, normalized to unit length.
pub fn gaussian_unit_vector(rng: &mut impl RngCore, dim: usize) -> DenseVector {
    let mut v = Vec::with_capacity(dim + 1);
    while v.len() < dim {
        let (a, b) = normal_pair(rng);
        v.push(a);
        v.push(b);
    }
    v.truncate(dim);
    let mut v = DenseVector(v);
    let n = v.norm();
    v.scale_in_place(1.0 / n);
    v
}

/// A dense real vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseVector(dim={}, norm={:.6})", self.dim(), self.norm())
    }
}

impl DenseVector {
    pub fn zeros(dim: usize) -> Self {
        DenseVector(vec![0.0; dim])
    }

    pub fn from_vec(components: Vec<f64>) -> Self {
        DenseVector(components)
    }

    /// Standard basis vector e_index.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        DenseVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    fn check(&self, other: &DenseVector) -> Result<(), EmbeddingError> {
        if self.dim() != other.dim() {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64, EmbeddingError> {
        self.check(other)?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector, EmbeddingError> {
        self.check(other)?;
        Ok(DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector, EmbeddingError> {
        self.check(other)?;
        Ok(DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, s: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.0.iter_mut().for_each(|x| *x *= s);
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &DenseVector) -> Result<(), EmbeddingError> {
        self.check(other)?;
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a += s * b);
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Plain dot product over equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Deterministic label -> unit vector map with a concurrent cache.
pub struct NodeLexicon {
    master_seed: u64,
    dim: usize,
    cache: RwLock<HashMap<String, Arc<DenseVector>>>,
}

impl fmt::Debug for NodeLexicon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeLexicon")
            .field("master_seed", &self.master_seed)
            .field("dim", &self.dim)
            .field("cached", &self.cache.read().len())
            .finish()
    }
}

impl NodeLexicon {
    pub fn new(master_seed: u64, dim: usize) -> Self {
        NodeLexicon { master_seed, dim, cache: RwLock::new(HashMap::new()) }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The unit vector for `label`.
    pub fn node_vector(&self, label: &str) -> Arc<DenseVector> {
        if let Some(v) = self.cache.read().get(label) {
            return Arc::clone(v);
        }
        let v = Arc::new(self.generate(label));
        // A racing writer may have inserted the same vector; keep whichever is there.
        Arc::clone(self.cache.write().entry(label.to_owned()).or_insert(v))
    }

    /// Draws the vector for `label` without touching the cache.
    pub fn generate(&self, label: &str) -> DenseVector {
        let mut rng = seeded_rng(self.master_seed, Domain::Lexicon, fnv1a64(label));
        gaussian_unit_vector(&mut rng, self.dim)
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().len()
    }

    pub fn export<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> LexiconFile {
        let vectors = labels
            .into_iter()
            .map(|l| (l.to_owned(), self.node_vector(l).as_slice().to_vec()))
            .collect();
        LexiconFile {
            dim: self.dim,
            master_seed: self.master_seed,
            hash_algo: HASH_ALGO.to_owned(),
            vectors,
        }
    }

    /// Builds a lexicon whose cache is preloaded from `file`. Labels absent
    /// from the file are generated as usual.
    pub fn from_file(file: &LexiconFile) -> Result<Self, EmbeddingError> {
        if file.hash_algo != HASH_ALGO {
            return Err(EmbeddingError::InvalidLexicon(format!("unknown hash_algo {:?}", file.hash_algo)));
        }
        let lex = NodeLexicon::new(file.master_seed, file.dim);
        {
            let mut cache = lex.cache.write();
            for (label, v) in &file.vectors {
                if v.len() != file.dim {
                    return Err(EmbeddingError::InvalidLexicon(format!(
                        "vector for {label:?} has {} components, header says {}",
                        v.len(),
                        file.dim
                    )));
                }
                cache.insert(label.clone(), Arc::new(DenseVector(v.clone())));
            }
        }
        Ok(lex)
    }
}

/// JSON interchange form of a lexicon, for cross-implementation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFile {
    pub dim: usize,
    pub master_seed: u64,
    pub hash_algo: String,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl LexiconFile {
    /// Largest absolute component difference against freshly generated vectors.
    pub fn max_deviation(&self) -> f64 {
        let lex = NodeLexicon::new(self.master_seed, self.dim);
        self.vectors
            .iter()
            .flat_map(|(label, v)| {
                let fresh = lex.generate(label);
                v.iter().zip(fresh.0).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

/// A bijection of `[0, d)` applied as `out[i] = v[mapping[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(dim: usize) -> Self {
        Permutation { mapping: (0..dim).collect() }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; mapping.len()];
        for &i in &mapping {
            if i >= mapping.len() || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Permutation { mapping })
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn dim(&self) -> usize {
        self.mapping.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mapping.iter().map(|&i| v[i]).collect()
    }
}

/// Uniform random permutation from a seeded Fisher–Yates shuffle.
pub fn random_permutation(master_seed: u64, stream_id: u64, dim: usize) -> Permutation {
    let mut mapping: Vec<usize> = (0..dim).collect();
    let mut rng = seeded_rng(master_seed, Domain::Permutation, stream_id);
    mapping.shuffle(&mut rng);
    Permutation { mapping }
}

/// The two permutations of a composition: stream 1, then the first of
/// streams 2, 3, ... that differs from it (always stream 2 in practice).
pub fn permutation_pair(master_seed: u64, dim: usize) -> (Permutation, Permutation) {
    let p1 = random_permutation(master_seed, 1, dim);
    if dim < 2 {
        return (p1.clone(), p1);
    }
    let mut stream = 2;
    loop {
        let p2 = random_permutation(master_seed, stream, dim);
        if p2 != p1 {
            return (p1, p2);
        }
        stream += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Direct,
    Fast,
}

/// FFT-backed circular convolution for one power-of-two dimension.
#[derive(Clone)]
pub struct CircularConvolver {
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CircularConvolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircularConvolver").field("dim", &self.dim).finish()
    }
}

impl CircularConvolver {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        if !dim.is_power_of_two() {
            return Err(EmbeddingError::UnsupportedDimension(dim));
        }
        let mut planner = FftPlanner::new();
        Ok(CircularConvolver {
            dim,
            forward: planner.plan_fft_forward(dim),
            inverse: planner.plan_fft_inverse(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Both real inputs go through a single complex FFT as `a + i b`.
    pub fn convolve(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        debug_assert!(a.len() == d && b.len() == d);
        let mut z: Vec<Complex<f64>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
        self.forward.process(&mut z);
        let mut prod = vec![Complex::new(0.0, 0.0); d];
        for k in 0..d {
            let zk = z[k];
            let zn = z[(d - k) % d].conj();
            let fa = (zk + zn) * 0.5;
            // (zk - zn) / 2i
            let fb = (zk - zn) * Complex::new(0.0, -0.5);
            prod[k] = fa * fb;
        }
        self.inverse.process(&mut prod);
        let inv = 1.0 / d as f64;
        prod.iter().map(|c| c.re * inv).collect()
    }
}

/// O(d²) evaluation of `(a ⊛ b)_k = Σ_i a_i b_{(k-i) mod d}`.
pub fn circular_convolution_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    let mut out = vec![0.0; d];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        // k = i + j (mod d) for b index j
        for (j, &bj) in b.iter().enumerate() {
            let k = if i + j >= d { i + j - d } else { i + j };
            out[k] += ai * bj;
        }
    }
    out
}

pub fn circular_convolution(
    a: &DenseVector,
    b: &DenseVector,
    method: ConvolutionMethod,
) -> Result<DenseVector, EmbeddingError> {
    a.check(b)?;
    match method {
        ConvolutionMethod::Direct => Ok(DenseVector(circular_convolution_direct(&a.0, &b.0))),
        ConvolutionMethod::Fast => {
            let conv = CircularConvolver::new(a.dim())?;
            Ok(DenseVector(conv.convolve(&a.0, &b.0)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionKind {
    /// γ · p1(a) ⊗ p2(b)
    ShuffledProduct,
    /// p1(a) ⊛ p2(b)
    ShuffledConvolution,
}

impl CompositionKind {
    pub fn short_name(self) -> &'static str {
        match self {
            CompositionKind::ShuffledProduct => "prod",
            CompositionKind::ShuffledConvolution => "conv",
        }
    }
}

impl fmt::Display for CompositionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Estimates γ = 1 / mean ‖p1(a) ⊗ p2(b)‖ over `samples` pairs of random
/// unit vectors, using the permutations derived from `master_seed`.
pub fn estimate_gamma(dim: usize, master_seed: u64, samples: usize) -> Result<f64, EmbeddingError> {
    if samples == 0 {
        return Err(EmbeddingError::NoSamples);
    }
    if dim == 0 {
        return Err(EmbeddingError::ZeroDimension);
    }
    let (p1, p2) = permutation_pair(master_seed, dim);
    let mut rng = seeded_rng(master_seed, Domain::Gamma, 0);
    let mut total = 0.0;
    for _ in 0..samples {
        let a = p1.apply(&gaussian_unit_vector(&mut rng, dim).0);
        let b = p2.apply(&gaussian_unit_vector(&mut rng, dim).0);
        total += a.iter().zip(&b).map(|(x, y)| (x * y) * (x * y)).sum::<f64>().sqrt();
    }
    Ok(samples as f64 / total)
}

/// A concrete composition operator: kind, dimension, permutations and γ.
#[derive(Debug, Clone)]
pub struct CompositionSpec {
    kind: CompositionKind,
    dim: usize,
    p1: Permutation,
    p2: Permutation,
    gamma: f64,
    master_seed: u64,
    convolver: Option<CircularConvolver>,
}

impl CompositionSpec {
    /// Derives permutations (and γ for the shuffled product) from `master_seed`.
    pub fn new(kind: CompositionKind, dim: usize, master_seed: u64) -> Result<Self, EmbeddingError> {
        let gamma = match kind {
            CompositionKind::ShuffledProduct => estimate_gamma(dim, master_seed, DEFAULT_GAMMA_SAMPLES)?,
            CompositionKind::ShuffledConvolution => 1.0,
        };
        Self::with_gamma(kind, dim, master_seed, gamma)
    }

    pub fn with_gamma(kind: CompositionKind, dim: usize, master_seed: u64, gamma: f64) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        assert!(gamma > 0.0 && gamma.is_finite(), "gamma must be positive, got {gamma}");
        let (p1, p2) = permutation_pair(master_seed, dim);
        let convolver = match kind {
            CompositionKind::ShuffledConvolution if dim.is_power_of_two() => Some(CircularConvolver::new(dim)?),
            CompositionKind::ShuffledConvolution => {
                log::warn!("direct convolution fallback: dim {dim} is not a power of two, composition is O(d^2)");
                None
            }
            CompositionKind::ShuffledProduct => None,
        };
        Ok(CompositionSpec { kind, dim, p1, p2, gamma, master_seed, convolver })
    }

    pub fn kind(&self) -> CompositionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn permutations(&self) -> (&Permutation, &Permutation) {
        (&self.p1, &self.p2)
    }

    pub fn uses_fast_convolution(&self) -> bool {
        self.convolver.is_some()
    }

    /// `a ∘ b` under this operator.
    pub fn compose(&self, a: &DenseVector, b: &DenseVector) -> Result<DenseVector, EmbeddingError> {
        for v in [a, b] {
            if v.dim() != self.dim {
                return Err(EmbeddingError::DimensionMismatch { expected: self.dim, actual: v.dim() });
            }
        }
        let pa = self.p1.apply(&a.0);
        let pb = self.p2.apply(&b.0);
        let out = match self.kind {
            CompositionKind::ShuffledProduct => pa.iter().zip(&pb).map(|(x, y)| self.gamma * x * y).collect(),
            CompositionKind::ShuffledConvolution => match &self.convolver {
                Some(c) => c.convolve(&pa, &pb),
                None => circular_convolution_direct(&pa, &pb),
            },
        };
        Ok(DenseVector(out))
    }

    /// Left fold `((v1 ∘ v2) ∘ v3) ∘ ...`.
    pub fn compose_chain(&self, vectors: &[&DenseVector]) -> Result<DenseVector, EmbeddingError> {
        let (first, rest) = vectors.split_first().expect("compose_chain needs at least one vector");
        let mut acc = (*first).clone();
        for v in rest {
            acc = self.compose(&acc, v)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn fnv1a_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn node_vectors_are_deterministic_unit_vectors() {
        let lex = NodeLexicon::new(42, 1024);
        let a = lex.node_vector("NP");
        let b = lex.node_vector("NP");
        assert_eq!(a.as_slice(), b.as_slice());
        assert!((a.norm() - 1.0).abs() < 1e-9);

        // Query order and cache do not matter.
        let other = NodeLexicon::new(42, 1024);
        let _ = other.node_vector("VP");
        assert_eq!(other.node_vector("NP").as_slice(), a.as_slice());
        assert_eq!(lex.generate("NP").as_slice(), a.as_slice());

        // Different seeds or labels give different vectors.
        assert_ne!(NodeLexicon::new(43, 1024).node_vector("NP").as_slice(), a.as_slice());
        assert_ne!(lex.node_vector("np").as_slice(), a.as_slice());
    }

    #[test]
    fn concurrent_queries_agree() {
        let lex = Arc::new(NodeLexicon::new(7, 256));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let lex = Arc::clone(&lex);
                std::thread::spawn(move || (0..50).map(|i| lex.node_vector(&format!("L{i}")).as_slice().to_vec()).collect::<Vec<_>>())
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for r in &results[1..] {
            assert_eq!(r, &results[0]);
        }
        assert_eq!(lex.cached_len(), 50);
    }

    #[test]
    fn box_muller_moments() {
        let mut rng = seeded_rng(1, Domain::Sampling, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n / 2 {
            let (a, b) = normal_pair(&mut rng);
            sum += a + b;
            sq += a * a + b * b;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn permutations_are_bijections() {
        let p = random_permutation(42, 1, 8192);
        let mut seen = vec![false; 8192];
        for &i in p.mapping() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(random_permutation(42, 1, 8192), p);
        assert_ne!(random_permutation(42, 2, 8192), p);
        assert_eq!(random_permutation(42, 1, 1), Permutation::identity(1));
    }

    #[test]
    fn permutation_pair_differs_even_in_tiny_dims() {
        for seed in 0..50 {
            let (p1, p2) = permutation_pair(seed, 2);
            assert_ne!(p1, p2);
        }
        let (p1, p2) = permutation_pair(0, 1);
        assert_eq!(p1, p2);
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::from_mapping(vec![2, 0, 1]).is_some());
        assert!(Permutation::from_mapping(vec![0, 0, 1]).is_none());
        assert!(Permutation::from_mapping(vec![0, 3, 1]).is_none());
    }

    #[test]
    fn convolution_identity_and_small_cases() {
        let lex = NodeLexicon::new(3, 16);
        let a = lex.node_vector("a");
        let e0 = DenseVector::basis(16, 0);
        for m in [ConvolutionMethod::Direct, ConvolutionMethod::Fast] {
            let r = circular_convolution(&a, &e0, m).unwrap();
            assert!(close(r.as_slice(), a.as_slice(), 1e-12));
        }

        let a = DenseVector::from_vec(vec![2.0, 3.0]);
        let b = DenseVector::from_vec(vec![5.0, 7.0]);
        let expected = [2.0 * 5.0 + 3.0 * 7.0, 2.0 * 7.0 + 3.0 * 5.0];
        for m in [ConvolutionMethod::Direct, ConvolutionMethod::Fast] {
            let r = circular_convolution(&a, &b, m).unwrap();
            assert!(close(r.as_slice(), &expected, 1e-12), "{m:?}: {:?}", r.as_slice());
        }
    }

    #[test]
    fn direct_and_fast_agree() {
        let mut rng = seeded_rng(9, Domain::Sampling, 0);
        let conv = CircularConvolver::new(1024).unwrap();
        for _ in 0..20 {
            let a = gaussian_unit_vector(&mut rng, 1024);
            let b = gaussian_unit_vector(&mut rng, 1024);
            let slow = circular_convolution_direct(a.as_slice(), b.as_slice());
            let fast = conv.convolve(a.as_slice(), b.as_slice());
            let diff = slow.iter().zip(&fast).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "max diff {diff}");
        }
    }

    #[test]
    fn convolution_errors() {
        let a = DenseVector::zeros(6);
        let b = DenseVector::zeros(8);
        assert!(matches!(
            circular_convolution(&a, &b, ConvolutionMethod::Direct),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert_eq!(
            circular_convolution(&a, &a, ConvolutionMethod::Fast).unwrap_err(),
            EmbeddingError::UnsupportedDimension(6)
        );
    }

    #[test]
    fn one_dimensional_composition() {
        let spec = CompositionSpec::new(CompositionKind::ShuffledConvolution, 1, 0).unwrap();
        let r = spec.compose(&DenseVector::from_vec(vec![3.0]), &DenseVector::from_vec(vec![-2.5])).unwrap();
        assert_eq!(r.as_slice(), &[-7.5]);
        assert_eq!(estimate_gamma(1, 0, 10).unwrap(), 1.0);
    }

    #[test]
    fn non_power_of_two_falls_back_to_direct() {
        let spec = CompositionSpec::new(CompositionKind::ShuffledConvolution, 12, 5).unwrap();
        assert!(!spec.uses_fast_convolution());
        let lex = NodeLexicon::new(5, 12);
        let (a, b) = (lex.node_vector("a"), lex.node_vector("b"));
        let (p1, p2) = spec.permutations();
        let expected = circular_convolution_direct(&p1.apply(a.as_slice()), &p2.apply(b.as_slice()));
        assert!(close(spec.compose(&a, &b).unwrap().as_slice(), &expected, 1e-15));
    }

    #[test]
    fn compose_checks_dimensions() {
        let spec = CompositionSpec::new(CompositionKind::ShuffledConvolution, 8, 0).unwrap();
        let err = spec.compose(&DenseVector::zeros(8), &DenseVector::zeros(4)).unwrap_err();
        assert_eq!(err, EmbeddingError::DimensionMismatch { expected: 8, actual: 4 });
    }

    #[test]
    fn gamma_errors_and_determinism() {
        assert_eq!(estimate_gamma(16, 0, 0), Err(EmbeddingError::NoSamples));
        assert_eq!(estimate_gamma(256, 11, 50).unwrap(), estimate_gamma(256, 11, 50).unwrap());
    }

    #[test]
    fn lexicon_export_import() {
        let lex = NodeLexicon::new(42, 32);
        let file = lex.export(["NP", "VP"]);
        let json = serde_json::to_string(&file).unwrap();
        let back: LexiconFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.max_deviation(), 0.0);
        let loaded = NodeLexicon::from_file(&back).unwrap();
        assert_eq!(loaded.node_vector("NP").as_slice(), lex.node_vector("NP").as_slice());

        let mut bad = file.clone();
        bad.hash_algo = "md5".into();
        assert!(NodeLexicon::from_file(&bad).is_err());
        let mut bad = file;
        bad.vectors.insert("X".into(), vec![1.0]);
        assert!(NodeLexicon::from_file(&bad).is_err());
    }
}
