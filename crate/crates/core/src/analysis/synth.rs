//! Seeded synthetic parse-tree-like corpora.
//!
//! Trees are sampled from a random grammar so that, as in real treebanks,
//! productions recur across trees: each non-terminal owns a few structural
//! rules (1 to `max_branching` non-terminal children) and a few words.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{seeded_rng, Domain};
use crate::tree::{Label, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_branching: usize,
    pub nonterminals: usize,
    pub terminals: usize,
    /// Structural rules owned by each non-terminal.
    pub rules_per_symbol: usize,
    /// Words each non-terminal can rewrite to.
    pub words_per_symbol: usize,
    /// Symbols, rules and words are drawn with probability ∝ 1/rank^s, so a
    /// few productions recur in most trees as in natural treebanks.
    /// `0.0` draws uniformly.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_nodes: 10,
            max_nodes: 15,
            max_branching: 3,
            nonterminals: 50,
            terminals: 200,
            rules_per_symbol: 3,
            words_per_symbol: 4,
            zipf_exponent: 2.5,
            seed: 42,
        }
    }
}

/// Stream ids inside the sampling domain.
const GRAMMAR_STREAM: u64 = 0x6772_616d;
const TREE_STREAM: u64 = 0x7472_6565;

#[derive(Debug, Clone)]
struct Grammar {
    rules: Vec<Vec<Vec<usize>>>,
    words: Vec<Vec<usize>>,
    symbol_dist: WeightedIndex<f64>,
    rule_dist: WeightedIndex<f64>,
    word_dist: WeightedIndex<f64>,
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-s))).expect("n >= 1 and finite weights")
}

/// Deterministic generator of random trees.
#[derive(Debug, Clone)]
pub struct TreeGenerator {
    config: SynthConfig,
    grammar: Grammar,
    nt_labels: Vec<Label>,
    t_labels: Vec<Label>,
}

impl TreeGenerator {
    pub fn new(config: SynthConfig) -> Self {
        assert!(config.min_nodes >= 1 && config.min_nodes <= config.max_nodes, "bad node range");
        assert!(config.max_branching >= 1 && config.nonterminals >= 1 && config.terminals >= 1);
        assert!(config.rules_per_symbol >= 1 && config.words_per_symbol >= 1);
        assert!(config.zipf_exponent.is_finite() && config.zipf_exponent >= 0.0, "bad zipf exponent");
        let mut rng = seeded_rng(config.seed, Domain::Sampling, GRAMMAR_STREAM);
        let nt = config.nonterminals;
        let symbol_dist = zipf(nt, config.zipf_exponent);
        let terminal_dist = zipf(config.terminals, config.zipf_exponent);
        let rules = (0..nt)
            .map(|_| {
                (0..config.rules_per_symbol)
                    .map(|_| {
                        let arity = rng.random_range(1..=config.max_branching);
                        (0..arity).map(|_| symbol_dist.sample(&mut rng)).collect()
                    })
                    .collect()
            })
            .collect();
        let words = (0..nt)
            .map(|_| (0..config.words_per_symbol).map(|_| terminal_dist.sample(&mut rng)).collect())
            .collect();
        let nt_labels = (0..nt).map(|i| Label::new(format!("N{i}")).unwrap()).collect();
        let t_labels = (0..config.terminals).map(|i| Label::new(format!("w{i}")).unwrap()).collect();
        let grammar = Grammar {
            rules,
            words,
            symbol_dist,
            rule_dist: zipf(config.rules_per_symbol, config.zipf_exponent),
            word_dist: zipf(config.words_per_symbol, config.zipf_exponent),
        };
        TreeGenerator { config, grammar, nt_labels, t_labels }
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    /// `count` trees; the i-th tree depends only on the config and i.
    pub fn generate(&self, count: usize) -> Vec<Tree> {
        (0..count).map(|i| self.tree(i as u64)).collect()
    }

    pub fn tree(&self, index: u64) -> Tree {
        self.tree_with_size(index, self.config.min_nodes, self.config.max_nodes)
    }

    /// A tree whose node count lies in `[min_nodes, max_nodes]`.
    pub fn tree_with_size(&self, index: u64, min_nodes: usize, max_nodes: usize) -> Tree {
        let mut rng = seeded_rng(self.config.seed, Domain::Sampling, TREE_STREAM.wrapping_add(index));
        let target = rng.random_range(min_nodes..=max_nodes);
        // Rejection sampling; the size-steering in `grow` makes this converge quickly.
        let mut best: Option<Tree> = None;
        for _ in 0..200 {
            let root = self.grammar.symbol_dist.sample(&mut rng);
            let t = self.grow(&mut rng, root, target);
            let n = t.node_count();
            if (min_nodes..=max_nodes).contains(&n) {
                return t;
            }
            let dist = |m: usize| m.abs_diff(target);
            if best.as_ref().is_none_or(|b| dist(n) < dist(b.node_count())) {
                best = Some(t);
            }
        }
        best.expect("at least one attempt")
    }

    fn grow(&self, rng: &mut impl Rng, root: usize, target: usize) -> Tree {
        if target <= 1 {
            return Tree::leaf(self.nt_labels[root].clone());
        }
        struct Slot {
            symbol: usize,
            word: Option<usize>,
            children: Vec<usize>,
        }
        let mut slots = vec![Slot { symbol: root, word: None, children: Vec::new() }];
        let mut frontier = vec![0usize];
        let mut count = 1usize;
        while !frontier.is_empty() {
            let id = frontier.swap_remove(rng.random_range(0..frontier.len()));
            let symbol = slots[id].symbol;
            // Every pending frontier node needs at least one more node (its word).
            let budget = target.saturating_sub(count + frontier.len());
            let rule = &self.grammar.rules[symbol][self.grammar.rule_dist.sample(rng)];
            if budget >= 2 * rule.len() && rng.random_bool(0.8) {
                for &child in rule {
                    let cid = slots.len();
                    slots.push(Slot { symbol: child, word: None, children: Vec::new() });
                    slots[id].children.push(cid);
                    frontier.push(cid);
                }
                count += rule.len();
            } else {
                let words = &self.grammar.words[symbol];
                slots[id].word = Some(words[self.grammar.word_dist.sample(rng)]);
                count += 1;
            }
        }
        // Rebuild bottom-up; children always have larger ids than parents.
        let mut built: Vec<Option<Tree>> = (0..slots.len()).map(|_| None).collect();
        for id in (0..slots.len()).rev() {
            let slot = &slots[id];
            let label = self.nt_labels[slot.symbol].clone();
            let t = match slot.word {
                Some(w) => Tree::node(label, vec![Tree::leaf(self.t_labels[w].clone())]),
                None => Tree::node(label, slot.children.iter().map(|&c| built[c].take().unwrap()).collect()),
            };
            built[id] = Some(t);
        }
        built[0].take().unwrap()
    }
}
