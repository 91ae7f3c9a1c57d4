//! Exact tree kernels over the space of fragments that keep whole productions.
//!
//! ```text
//! Δ(n1, n2) = 0                              if the productions differ
//!           = λ · Π_j (1 + Δ(c1_j, c2_j))    otherwise
//! TK(T1, T2) = Σ_{n1, n2} Δ(n1, n2)
//! ```
//!
//! Terminals have no production, so a matched preterminal pair yields λ.
//! Each matched fragment pair contributes λ^P, P = productions in the fragment.

use std::collections::HashMap;

use crate::dtk::{check_lambda, enumerate_fragments, DtkError, FragmentWeights, WeightConvention};
use crate::tree::{IndexedTree, Production, Tree};

/// Dense Δ table, rows indexed by preorder nodes of the first tree.
#[derive(Debug, Clone)]
pub struct DeltaTable {
    pub rows: usize,
    pub cols: usize,
    values: Vec<f64>,
}

impl DeltaTable {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn node_productions(ix: &IndexedTree<'_>) -> Vec<Option<Production>> {
    ix.nodes.iter().map(|n| n.production()).collect()
}

/// Full quadratic Δ table.
pub fn delta_table(t1: &Tree, t2: &Tree, lambda: f64) -> Result<DeltaTable, DtkError> {
    check_lambda(lambda)?;
    let a = IndexedTree::new(t1);
    let b = IndexedTree::new(t2);
    let pa = node_productions(&a);
    let pb = node_productions(&b);
    let cols = b.len();
    let mut values = vec![0.0; a.len() * cols];
    for i in (0..a.len()).rev() {
        let Some(prod_i) = &pa[i] else { continue };
        for j in (0..cols).rev() {
            if pb[j].as_ref() != Some(prod_i) {
                continue;
            }
            let mut delta = lambda;
            for (&ci, &cj) in a.children[i].iter().zip(&b.children[j]) {
                delta *= 1.0 + values[ci * cols + cj];
            }
            values[i * cols + j] = delta;
        }
    }
    Ok(DeltaTable { rows: a.len(), cols, values })
}

/// Quadratic dynamic-programming tree kernel.
pub fn tk_exact(t1: &Tree, t2: &Tree, lambda: f64) -> Result<f64, DtkError> {
    Ok(delta_table(t1, t2, lambda)?.sum())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FastStats {
    /// Node pairs with equal productions.
    pub matching_pairs: usize,
    /// Δ values evaluated.
    pub delta_evaluations: usize,
}

/// Tree kernel evaluated only on the node pairs whose productions match.
pub fn tk_fast(t1: &Tree, t2: &Tree, lambda: f64) -> Result<f64, DtkError> {
    tk_fast_with_stats(t1, t2, lambda).map(|(v, _)| v)
}

pub fn tk_fast_with_stats(t1: &Tree, t2: &Tree, lambda: f64) -> Result<(f64, FastStats), DtkError> {
    check_lambda(lambda)?;
    let a = IndexedTree::new(t1);
    let b = IndexedTree::new(t2);

    let mut la: Vec<(Production, usize)> =
        node_productions(&a).into_iter().enumerate().filter_map(|(i, p)| p.map(|p| (p, i))).collect();
    let mut lb: Vec<(Production, usize)> =
        node_productions(&b).into_iter().enumerate().filter_map(|(i, p)| p.map(|p| (p, i))).collect();
    la.sort();
    lb.sort();

    // Merge the two sorted lists into matching node pairs.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let (mut x, mut y) = (0, 0);
    while x < la.len() && y < lb.len() {
        match la[x].0.cmp(&lb[y].0) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                let x_end = x + la[x..].iter().take_while(|e| e.0 == la[x].0).count();
                let y_end = y + lb[y..].iter().take_while(|e| e.0 == lb[y].0).count();
                for ex in &la[x..x_end] {
                    for ey in &lb[y..y_end] {
                        pairs.push((ex.1, ey.1));
                    }
                }
                x = x_end;
                y = y_end;
            }
        }
    }

    // Children have larger preorder indices, so descending order sees them first.
    pairs.sort_unstable_by(|p, q| q.cmp(p));
    let mut delta: HashMap<(usize, usize), f64> = HashMap::with_capacity(pairs.len());
    let mut total = 0.0;
    for &(i, j) in &pairs {
        let mut d = lambda;
        for (&ci, &cj) in a.children[i].iter().zip(&b.children[j]) {
            d *= 1.0 + delta.get(&(ci, cj)).copied().unwrap_or(0.0);
        }
        delta.insert((i, j), d);
        total += d;
    }
    let stats = FastStats { matching_pairs: pairs.len(), delta_evaluations: pairs.len() };
    Ok((total, stats))
}

/// Explicit fragment feature map: canonical fragment string -> summed weight.
pub type FeatureMap = HashMap<String, f64>;

pub fn feature_map(t: &Tree, weights: FragmentWeights, cap: usize) -> Result<FeatureMap, DtkError> {
    let mut map = FeatureMap::new();
    for frag in enumerate_fragments(t, cap)? {
        *map.entry(frag.serialize()).or_insert(0.0) += weights.weight(&frag);
    }
    Ok(map)
}

/// Sparse dot product of the two explicit feature maps.
pub fn tk_by_feature_map(
    t1: &Tree,
    t2: &Tree,
    lambda: f64,
    convention: WeightConvention,
    cap: usize,
) -> Result<f64, DtkError> {
    check_lambda(lambda)?;
    let weights = FragmentWeights::new(convention, lambda);
    let f1 = feature_map(t1, weights, cap)?;
    let f2 = feature_map(t2, weights, cap)?;
    let (small, large) = if f1.len() <= f2.len() { (&f1, &f2) } else { (&f2, &f1) };
    Ok(small.iter().filter_map(|(k, w)| large.get(k).map(|v| w * v)).sum())
}

/// Feature-map oracle on the exact kernel's scale: each matched pair
/// contributes λ^P, i.e. λ times the `Recursion` convention's λ^(P-1).
pub fn tk_oracle(t1: &Tree, t2: &Tree, lambda: f64, cap: usize) -> Result<f64, DtkError> {
    Ok(lambda * tk_by_feature_map(t1, t2, lambda, WeightConvention::Recursion, cap)?)
}

/// `tk(a,b) / sqrt(tk(a,a) tk(b,b))`.
pub fn tk_normalized(t1: &Tree, t2: &Tree, lambda: f64) -> Result<f64, DtkError> {
    let ab = tk_fast(t1, t2, lambda)?;
    let aa = tk_fast(t1, t1, lambda)?;
    let bb = tk_fast(t2, t2, lambda)?;
    if aa <= 0.0 || bb <= 0.0 {
        return Err(DtkError::ZeroSelfKernel);
    }
    Ok(ab / (aa * bb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtk::DEFAULT_FRAGMENT_CAP;
    use crate::tree::parse_tree;

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn small_tree_self_kernel() {
        let s = t("(S (A a) (B b))");
        assert_eq!(tk_exact(&s, &s, 1.0).unwrap(), 6.0);
        for lambda in [0.1, 0.4, 0.7] {
            let expected = 2.0 * lambda + lambda * (1.0 + lambda) * (1.0 + lambda);
            assert!((tk_exact(&s, &s, lambda).unwrap() - expected).abs() < 1e-14);
            assert!((tk_fast(&s, &s, lambda).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_table_entries() {
        let s = t("(S (A a) (B b))");
        let table = delta_table(&s, &s, 0.5).unwrap();
        // preorder: S A a B b
        assert_eq!(table.get(1, 1), 0.5);
        assert_eq!(table.get(3, 3), 0.5);
        assert_eq!(table.get(0, 0), 0.5 * 1.5 * 1.5);
        assert_eq!(table.get(1, 3), 0.0);
        assert_eq!(table.get(2, 2), 0.0);
    }

    #[test]
    fn disjoint_trees_score_zero() {
        let x = t("(S (A a) (B b))");
        let y = t("(T (C c) (D d))");
        assert_eq!(tk_exact(&x, &y, 0.4).unwrap(), 0.0);
        let (v, stats) = tk_fast_with_stats(&x, &y, 0.4).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(stats.delta_evaluations, 0);
        assert_eq!(tk_oracle(&x, &y, 0.4, DEFAULT_FRAGMENT_CAP).unwrap(), 0.0);
    }

    #[test]
    fn same_parent_different_children_do_not_match() {
        let x = t("(S (A a) (B b))");
        let y = t("(S (B b) (A a))");
        // only A -> a and B -> b match
        assert!((tk_exact(&x, &y, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let z = t("(S (A a))");
        assert!((tk_exact(&x, &z, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frontier_nonterminal_matches_leaf() {
        // (A B) is a fragment of both trees.
        let x = t("(A B)");
        let y = t("(A (B b))");
        assert!((tk_exact(&x, &y, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((tk_oracle(&x, &y, 0.3, 100).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn feature_map_of_preterminal() {
        let w = FragmentWeights::new(WeightConvention::Recursion, 0.4);
        let m = feature_map(&t("(A a)"), w, 10).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["(A a)"], 1.0);
    }

    #[test]
    fn oracle_chain_on_handmade_pairs() {
        let pairs = [
            ("(S (NP (D the) (N dog)) (VP (V ran)))", "(S (NP (D the) (N cat)) (VP (V ran)))"),
            ("(A (B W1) (C (D W2) (E W3)))", "(A (B W1) (C (D W2) (E W4)))"),
            ("(S (A a) (A a))", "(S (A a) (A b))"),
        ];
        for (x, y) in pairs {
            let (x, y) = (t(x), t(y));
            for lambda in [0.2, 0.6, 1.0] {
                let e = tk_exact(&x, &y, lambda).unwrap();
                let f = tk_fast(&x, &y, lambda).unwrap();
                let o = tk_oracle(&x, &y, lambda, DEFAULT_FRAGMENT_CAP).unwrap();
                assert!((e - f).abs() < 1e-12 && (e - o).abs() < 1e-12, "{e} {f} {o}");
            }
        }
    }

    #[test]
    fn normalized_kernel() {
        let x = t("(S (A a) (B b))");
        let y = t("(S (A a) (B c))");
        assert!((tk_normalized(&x, &x, 0.4).unwrap() - 1.0).abs() < 1e-15);
        let v = tk_normalized(&x, &y, 0.4).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(tk_normalized(&x, &t("X"), 0.4), Err(DtkError::ZeroSelfKernel));
    }

    #[test]
    fn invalid_lambda_is_rejected() {
        let x = t("(A a)");
        assert!(tk_exact(&x, &x, 0.0).is_err());
        assert!(tk_fast(&x, &x, 2.0).is_err());
    }
}
