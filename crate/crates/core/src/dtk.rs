//! Distributed trees: fragment vectors, the linear-time recursive encoder,
//! the brute-force fragment-enumeration oracle, and the kernel itself.
//!
//! A fragment vector is built bottom-up: a frontier node maps to its lexicon
//! vector, a node with children maps to `ñ ∘ seq(children)`, and a child
//! sequence is right-nested, `f(τ1) ∘ (f(τ2) ∘ (… ∘ f(τk)))`.
//!
//! The encoder computes, for every non-terminal `n` with children `c1..cm`,
//!
//! ```text
//! s(n) = ñ ∘ (x1 ∘ (x2 ∘ … ∘ xm)),   xi = c̃i + √λ · s(ci)
//! ```
//!
//! with `s(terminal) = 0`, and returns `Σ_n s(n)`. Because `∘` is bilinear
//! and the grouping matches the fragment vectors, this equals
//! `Σ_τ √λ^(P(τ)-1) · f(τ)` over all fragments, where `P(τ)` is the number
//! of productions in `τ`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{dot, CompositionKind, CompositionSpec, DenseVector, EmbeddingError, NodeLexicon};
use crate::tree::{IndexedTree, Tree};

/// Default cap on the number of fragments the enumeration oracle will build.
pub const DEFAULT_FRAGMENT_CAP: usize = 1_000_000;

/// Default decay factor.
pub const DEFAULT_LAMBDA: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtkError {
    #[error("lambda must lie in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("fragment enumeration would produce {count} fragments, cap is {cap}")]
    FragmentCapExceeded { count: u128, cap: usize },
    #[error("distributed trees are not comparable: {left} vs {right}")]
    ProvenanceMismatch { left: Provenance, right: Provenance },
    #[error("normalization undefined: zero self-kernel")]
    ZeroSelfKernel,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub fn check_lambda(lambda: f64) -> Result<(), DtkError> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(DtkError::InvalidLambda(lambda))
    }
}

/// Everything that must match for two distributed trees to be comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub lambda: f64,
    pub dim: usize,
    pub composition: CompositionKind,
    pub master_seed: u64,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(lambda={}, dim={}, composition={}, seed={})",
            self.lambda, self.dim, self.composition, self.master_seed
        )
    }
}

/// The vector of a whole tree plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedTree {
    pub vector: DenseVector,
    pub provenance: Provenance,
}

impl DistributedTree {
    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.provenance.lambda
    }
}

/// How fragment weights ω(τ) are derived from λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightConvention {
    /// ω = λ^((P-1)/2), P = productions in τ; what the recursive encoder computes.
    #[default]
    Recursion,
    /// ω = λ^((|τ|-1)/2), |τ| = all nodes in τ.
    NodeCount,
}

impl fmt::Display for WeightConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightConvention::Recursion => "recursion",
            WeightConvention::NodeCount => "node_count",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragmentWeights {
    pub convention: WeightConvention,
    pub lambda: f64,
}

impl FragmentWeights {
    pub fn new(convention: WeightConvention, lambda: f64) -> Self {
        FragmentWeights { convention, lambda }
    }

    pub fn weight(&self, fragment: &Tree) -> f64 {
        let exponent = match self.convention {
            WeightConvention::Recursion => fragment.internal_count(),
            WeightConvention::NodeCount => fragment.node_count(),
        };
        self.lambda.powf((exponent as f64 - 1.0) / 2.0)
    }
}

/// Vector of a single fragment (or any tree read as one).
pub fn dtf(spec: &CompositionSpec, lex: &NodeLexicon, fragment: &Tree) -> Result<DenseVector, DtkError> {
    let node = lex.node_vector(fragment.label().as_str());
    if fragment.is_terminal() {
        return Ok((*node).clone());
    }
    let seq = dtf_sequence(spec, lex, fragment.children())?;
    Ok(spec.compose(&node, &seq)?)
}

/// Right-nested vector of a sequence of trees.
fn dtf_sequence(spec: &CompositionSpec, lex: &NodeLexicon, trees: &[Tree]) -> Result<DenseVector, DtkError> {
    let (last, init) = trees.split_last().expect("non-empty child sequence");
    let mut acc = dtf(spec, lex, last)?;
    for t in init.iter().rev() {
        acc = spec.compose(&dtf(spec, lex, t)?, &acc)?;
    }
    Ok(acc)
}

/// Vector operations issued by [`distributed_tree_with_cost`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeCost {
    /// Calls to the composition operator.
    pub compose_calls: usize,
    /// Child combinations `c̃ + √λ s(c)`.
    pub combine_calls: usize,
}

/// The distributed tree of `t`.
pub fn distributed_tree(
    spec: &CompositionSpec,
    lex: &NodeLexicon,
    t: &Tree,
    lambda: f64,
) -> Result<DistributedTree, DtkError> {
    distributed_tree_with_cost(spec, lex, t, lambda).map(|(dt, _)| dt)
}

pub fn distributed_tree_with_cost(
    spec: &CompositionSpec,
    lex: &NodeLexicon,
    t: &Tree,
    lambda: f64,
) -> Result<(DistributedTree, EncodeCost), DtkError> {
    check_lambda(lambda)?;
    if lex.dim() != spec.dim() {
        return Err(EmbeddingError::DimensionMismatch { expected: spec.dim(), actual: lex.dim() }.into());
    }
    let sqrt_lambda = lambda.sqrt();
    let ix = IndexedTree::new(t);
    let mut s: Vec<Option<DenseVector>> = vec![None; ix.len()];
    let mut total = DenseVector::zeros(spec.dim());
    let mut cost = EncodeCost::default();

    for n in (0..ix.len()).rev() {
        let kids = &ix.children[n];
        if kids.is_empty() {
            continue;
        }
        let mut combined: Vec<DenseVector> = Vec::with_capacity(kids.len());
        for &c in kids {
            let mut x = (*lex.node_vector(ix.nodes[c].label().as_str())).clone();
            if let Some(sc) = s[c].take() {
                x.axpy(sqrt_lambda, &sc)?;
            }
            cost.combine_calls += 1;
            combined.push(x);
        }
        let mut acc = combined.pop().expect("non-terminal has children");
        while let Some(x) = combined.pop() {
            acc = spec.compose(&x, &acc)?;
            cost.compose_calls += 1;
        }
        let node = lex.node_vector(ix.nodes[n].label().as_str());
        let sn = spec.compose(&node, &acc)?;
        cost.compose_calls += 1;
        total.axpy(1.0, &sn)?;
        s[n] = Some(sn);
    }

    let provenance = Provenance {
        lambda,
        dim: spec.dim(),
        composition: spec.kind(),
        master_seed: spec.master_seed(),
    };
    Ok((DistributedTree { vector: total, provenance }, cost))
}

/// Number of fragments rooted at each node of `t`, in preorder, saturating.
fn rooted_fragment_counts(ix: &IndexedTree<'_>) -> Vec<u128> {
    let mut counts = vec![0u128; ix.len()];
    for n in (0..ix.len()).rev() {
        if !ix.children[n].is_empty() {
            counts[n] = ix.children[n]
                .iter()
                .fold(1u128, |acc, &c| acc.saturating_mul(counts[c].saturating_add(1)));
        }
    }
    counts
}

/// Total number of fragments of `t`.
pub fn fragment_count(t: &Tree) -> u128 {
    let ix = IndexedTree::new(t);
    rooted_fragment_counts(&ix).into_iter().fold(0u128, u128::saturating_add)
}

/// All fragments rooted at `node`: for children c1..cm, every
/// `(node τ1 … τm)` with τi either the bare label of ci or a fragment rooted at ci.
pub fn enumerate_rooted_fragments(node: &Tree, cap: usize) -> Result<Vec<Tree>, DtkError> {
    let ix = IndexedTree::new(node);
    let count = rooted_fragment_counts(&ix)[0];
    if count > cap as u128 {
        return Err(DtkError::FragmentCapExceeded { count, cap });
    }
    Ok(rooted_fragments(node))
}

fn rooted_fragments(node: &Tree) -> Vec<Tree> {
    if node.is_terminal() {
        return Vec::new();
    }
    let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
    for child in node.children() {
        let mut options = vec![Tree::leaf(child.label().clone())];
        options.extend(rooted_fragments(child));
        partial = partial
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |opt| {
                    let mut p = prefix.clone();
                    p.push(opt.clone());
                    p
                })
            })
            .collect();
    }
    partial.into_iter().map(|kids| Tree::node(node.label().clone(), kids)).collect()
}

/// Every fragment of `t` (one entry per occurrence), after checking the cap.
pub fn enumerate_fragments(t: &Tree, cap: usize) -> Result<Vec<Tree>, DtkError> {
    let count = fragment_count(t);
    if count > cap as u128 {
        return Err(DtkError::FragmentCapExceeded { count, cap });
    }
    Ok(t.preorder().into_iter().flat_map(rooted_fragments).collect())
}

/// Distinct fragment strings of `t`.
pub fn fragment_set(t: &Tree, cap: usize) -> Result<BTreeSet<String>, DtkError> {
    Ok(enumerate_fragments(t, cap)?.iter().map(Tree::serialize).collect())
}

/// `Σ_τ ω(τ) f(τ)` by explicit enumeration; the oracle for [`distributed_tree`].
pub fn distributed_tree_by_enumeration(
    spec: &CompositionSpec,
    lex: &NodeLexicon,
    t: &Tree,
    lambda: f64,
    convention: WeightConvention,
    cap: usize,
) -> Result<DenseVector, DtkError> {
    check_lambda(lambda)?;
    let weights = FragmentWeights::new(convention, lambda);
    let mut total = DenseVector::zeros(spec.dim());
    for frag in enumerate_fragments(t, cap)? {
        total.axpy(weights.weight(&frag), &dtf(spec, lex, &frag)?)?;
    }
    Ok(total)
}

/// Dot product of two comparable distributed trees.
pub fn dtk(a: &DistributedTree, b: &DistributedTree) -> Result<f64, DtkError> {
    if a.provenance != b.provenance {
        return Err(DtkError::ProvenanceMismatch { left: a.provenance, right: b.provenance });
    }
    Ok(dot(a.vector.as_slice(), b.vector.as_slice()))
}

/// `dtk(a,b) / sqrt(dtk(a,a) dtk(b,b))`.
pub fn dtk_normalized(a: &DistributedTree, b: &DistributedTree) -> Result<f64, DtkError> {
    let ab = dtk(a, b)?;
    let aa = dtk(a, a)?;
    let bb = dtk(b, b)?;
    if aa <= 0.0 || bb <= 0.0 {
        return Err(DtkError::ZeroSelfKernel);
    }
    Ok(ab / (aa * bb).sqrt())
}

/// A composition operator, a lexicon and λ bundled for repeated encoding.
#[derive(Debug)]
pub struct Encoder {
    pub spec: CompositionSpec,
    pub lexicon: NodeLexicon,
    pub lambda: f64,
}

impl Encoder {
    pub fn new(kind: CompositionKind, dim: usize, master_seed: u64, lambda: f64) -> Result<Self, DtkError> {
        check_lambda(lambda)?;
        Ok(Encoder {
            spec: CompositionSpec::new(kind, dim, master_seed)?,
            lexicon: NodeLexicon::new(master_seed, dim),
            lambda,
        })
    }

    pub fn from_parts(spec: CompositionSpec, lambda: f64) -> Result<Self, DtkError> {
        check_lambda(lambda)?;
        let lexicon = NodeLexicon::new(spec.master_seed(), spec.dim());
        Ok(Encoder { spec, lexicon, lambda })
    }

    /// Same operator and lexicon seed, different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, DtkError> {
        Self::from_parts(self.spec.clone(), lambda)
    }

    pub fn encode(&self, t: &Tree) -> Result<DistributedTree, DtkError> {
        distributed_tree(&self.spec, &self.lexicon, t, self.lambda)
    }

    pub fn fragment_vector(&self, fragment: &Tree) -> Result<DenseVector, DtkError> {
        dtf(&self.spec, &self.lexicon, fragment)
    }
}
