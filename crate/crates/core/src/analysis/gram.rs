//! Pairwise kernel matrices over a corpus.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dtk::{dtk, DtkError, Encoder};
use crate::embedding::DenseVector;
use crate::format::format_sig;
use crate::tk::tk_fast;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Dtk,
    Tk,
    DtkNormalized,
    TkNormalized,
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelChoice::Dtk => "dtk",
            KernelChoice::Tk => "tk",
            KernelChoice::DtkNormalized => "dtk_normalized",
            KernelChoice::TkNormalized => "tk_normalized",
        })
    }
}

/// Symmetric n×n kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub n: usize,
    pub values: Vec<f64>,
    pub ids: Vec<String>,
    pub kernel: KernelChoice,
    pub config: serde_json::Value,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.values);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.n);
        self.ids = ids;
        self
    }

    /// One CSV row per matrix row, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format_sig(self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Kernel matrix of `corpus`. The DTK variants encode every tree once and
/// then take dot products; the TK variants evaluate the fast exact kernel.
pub fn gram_matrix(corpus: &[Tree], kernel: KernelChoice, encoder: &Encoder) -> Result<GramMatrix, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let n = corpus.len();
    let lambda = encoder.lambda;
    let config = serde_json::json!({
        "kernel": kernel,
        "lambda": lambda,
        "dim": encoder.spec.dim(),
        "composition": encoder.spec.kind(),
        "master_seed": encoder.spec.master_seed(),
    });
    match kernel {
        KernelChoice::Dtk | KernelChoice::DtkNormalized => {
            let dts = corpus.par_iter().map(|t| encoder.encode(t)).collect::<Result<Vec<_>, _>>()?;
            let upper = upper_pairs(n);
            let raw = upper.par_iter().map(|&(i, j)| dtk(&dts[i], &dts[j])).collect::<Result<Vec<_>, _>>()?;
            assemble(n, &upper, &raw, kernel, config)
        }
        KernelChoice::Tk | KernelChoice::TkNormalized => {
            let upper = upper_pairs(n);
            let raw = upper
                .par_iter()
                .map(|&(i, j)| tk_fast(&corpus[i], &corpus[j], lambda))
                .collect::<Result<Vec<_>, _>>()?;
            assemble(n, &upper, &raw, kernel, config)
        }
    }
}

/// Gramian of precomputed vectors; `kernel` must be a DTK variant.
pub fn gram_from_vectors(
    vectors: &[DenseVector],
    kernel: KernelChoice,
    config: serde_json::Value,
) -> Result<GramMatrix, AnalysisError> {
    if vectors.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    if matches!(kernel, KernelChoice::Tk | KernelChoice::TkNormalized) {
        return Err(AnalysisError::InvalidParameter("exact kernels need trees, not vectors".into()));
    }
    let n = vectors.len();
    let upper = upper_pairs(n);
    let raw = upper.par_iter().map(|&(i, j)| vectors[i].dot(&vectors[j])).collect::<Result<Vec<_>, _>>()?;
    assemble(n, &upper, &raw, kernel, config)
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn assemble(
    n: usize,
    upper: &[(usize, usize)],
    raw: &[f64],
    kernel: KernelChoice,
    config: serde_json::Value,
) -> Result<GramMatrix, AnalysisError> {
    let mut values = vec![0.0; n * n];
    for (&(i, j), &v) in upper.iter().zip(raw) {
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    if matches!(kernel, KernelChoice::DtkNormalized | KernelChoice::TkNormalized) {
        let diag: Vec<f64> = (0..n).map(|i| values[i * n + i]).collect();
        if diag.iter().any(|&d| d <= 0.0) {
            return Err(DtkError::ZeroSelfKernel.into());
        }
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = if i == j { 1.0 } else { values[i * n + j] / (diag[i] * diag[j]).sqrt() };
            }
        }
    }
    Ok(GramMatrix { n, values, ids: (0..n).map(|i| i.to_string()).collect(), kernel, config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::CompositionKind;
    use crate::tree::parse_tree;

    fn corpus() -> Vec<Tree> {
        ["(S (A a) (B b))", "(S (A a) (B c))", "(T (A a))"].iter().map(|s| parse_tree(s).unwrap()).collect()
    }

    #[test]
    fn single_tree_gives_one_by_one() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 64, 0, 0.4).unwrap();
        let g = gram_matrix(&corpus()[..1], KernelChoice::Tk, &enc).unwrap();
        assert_eq!(g.n, 1);
        let s = 0.4 * 2.0 + 0.4 * 1.4 * 1.4;
        assert!((g.get(0, 0) - s).abs() < 1e-12);
        assert_eq!(g.to_csv().lines().count(), 1);
    }

    #[test]
    fn normalized_variants_have_unit_diagonal() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 256, 0, 0.4).unwrap();
        for k in [KernelChoice::DtkNormalized, KernelChoice::TkNormalized] {
            let g = gram_matrix(&corpus(), k, &enc).unwrap();
            assert!((0..3).all(|i| g.get(i, i) == 1.0));
            assert_eq!(g.max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn errors() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 64, 0, 0.4).unwrap();
        assert_eq!(gram_matrix(&[], KernelChoice::Dtk, &enc), Err(AnalysisError::EmptyCorpus));
        let with_leaf = vec![parse_tree("X").unwrap(), parse_tree("(A a)").unwrap()];
        assert!(gram_matrix(&with_leaf, KernelChoice::TkNormalized, &enc).is_err());
    }

    #[test]
    fn vectors_path_matches_tree_path() {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 128, 3, 0.4).unwrap();
        let trees = corpus();
        let a = gram_matrix(&trees, KernelChoice::Dtk, &enc).unwrap();
        let vs: Vec<_> = trees.iter().map(|t| enc.encode(t).unwrap().vector).collect();
        let b = gram_from_vectors(&vs, KernelChoice::Dtk, serde_json::Value::Null).unwrap();
        assert_eq!(a.values, b.values);
        assert!(gram_from_vectors(&vs, KernelChoice::Tk, serde_json::Value::Null).is_err());
    }

    #[test]
    fn min_eigenvalue_of_known_matrix() {
        let g = GramMatrix {
            n: 2,
            values: vec![2.0, 1.0, 1.0, 2.0],
            ids: vec!["a".into(), "b".into()],
            kernel: KernelChoice::Tk,
            config: serde_json::Value::Null,
        };
        assert!((g.min_eigenvalue() - 1.0).abs() < 1e-12);
        assert_eq!(g.trace(), 4.0);
    }
}
