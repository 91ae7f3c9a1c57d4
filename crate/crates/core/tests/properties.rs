use proptest::prelude::*;
use proptest::sample::select;

use ::dtk::analysis::{gram_matrix, spearman, KernelChoice};
use ::dtk::dtk::{distributed_tree_by_enumeration, enumerate_fragments, fragment_count, DEFAULT_FRAGMENT_CAP};
use ::dtk::embedding::{gaussian_unit_vector, seeded_rng, Domain};
use ::dtk::format::format_sig;
use ::dtk::tk::tk_oracle;
use ::dtk::{
    dtk as dtk_dot, parse_tree, tk_exact, tk_fast, CompositionKind, CompositionSpec, Encoder, Label, Tree, WeightConvention,
};

const NONTERMINALS: [&str; 5] = ["S", "NP", "VP", "A", "B"];
const WORDS: [&str; 3] = ["a", "b", "c"];

fn label(s: &str) -> Label {
    Label::new(s).unwrap()
}

/// Small trees over a tiny vocabulary, so that pairs share productions.
fn tree() -> impl Strategy<Value = Tree> {
    let preterminal = (select(&NONTERMINALS[..]), select(&WORDS[..]))
        .prop_map(|(p, w)| Tree::node(label(p), vec![Tree::leaf(label(w))]));
    preterminal.prop_recursive(2, 12, 3, |inner| {
        (select(&NONTERMINALS[..]), prop::collection::vec(inner, 1..=3))
            .prop_map(|(p, children)| Tree::node(label(p), children))
    })
}

fn kind() -> impl Strategy<Value = CompositionKind> {
    prop_oneof![Just(CompositionKind::ShuffledConvolution), Just(CompositionKind::ShuffledProduct)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_round_trips(t in tree()) {
        let text = t.serialize();
        prop_assert_eq!(parse_tree(&text).unwrap(), t);
    }

    #[test]
    fn exact_kernels_agree(a in tree(), b in tree(), lambda in 0.05f64..=1.0) {
        let e = tk_exact(&a, &b, lambda).unwrap();
        let f = tk_fast(&a, &b, lambda).unwrap();
        let o = tk_oracle(&a, &b, lambda, DEFAULT_FRAGMENT_CAP).unwrap();
        let tol = 1e-9 * e.abs().max(1.0);
        prop_assert!((e - f).abs() <= tol && (e - o).abs() <= tol, "{} {} {}", e, f, o);
    }

    #[test]
    fn exact_kernel_is_symmetric_and_cauchy_schwarz(a in tree(), b in tree(), lambda in 0.05f64..=1.0) {
        let ab = tk_fast(&a, &b, lambda).unwrap();
        prop_assert_eq!(ab, tk_fast(&b, &a, lambda).unwrap());
        let aa = tk_fast(&a, &a, lambda).unwrap();
        let bb = tk_fast(&b, &b, lambda).unwrap();
        prop_assert!(ab >= 0.0 && ab * ab <= aa * bb * (1.0 + 1e-12));
    }

    #[test]
    fn fragment_count_matches_enumeration(t in tree()) {
        prop_assert_eq!(fragment_count(&t), enumerate_fragments(&t, DEFAULT_FRAGMENT_CAP).unwrap().len() as u128);
    }

    #[test]
    fn recursive_encoding_equals_fragment_sum(t in tree(), k in kind(), lambda in 0.05f64..=1.0, seed in 0u64..50) {
        let enc = Encoder::new(k, 256, seed, lambda).unwrap();
        let fast = enc.encode(&t).unwrap().vector;
        let slow = distributed_tree_by_enumeration(
            &enc.spec, &enc.lexicon, &t, lambda, WeightConvention::Recursion, DEFAULT_FRAGMENT_CAP,
        ).unwrap();
        prop_assert!(fast.sub(&slow).unwrap().norm() <= 1e-9 * slow.norm().max(1.0));
    }

    #[test]
    fn dtk_is_symmetric_and_deterministic(a in tree(), b in tree(), seed in 0u64..50) {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 128, seed, 0.4).unwrap();
        let (da, db) = (enc.encode(&a).unwrap(), enc.encode(&b).unwrap());
        prop_assert_eq!(dtk_dot(&da, &db).unwrap(), dtk_dot(&db, &da).unwrap());
        let again = Encoder::new(CompositionKind::ShuffledConvolution, 128, seed, 0.4).unwrap();
        prop_assert_eq!(again.encode(&a).unwrap(), da);
    }

    #[test]
    fn composition_is_bilinear(k in kind(), seed in 0u64..200, alpha in -4.0f64..4.0) {
        let spec = CompositionSpec::new(k, 64, 9).unwrap();
        let mut rng = seeded_rng(seed, Domain::Sampling, 77);
        let (a, b, c) = (gaussian_unit_vector(&mut rng, 64), gaussian_unit_vector(&mut rng, 64), gaussian_unit_vector(&mut rng, 64));
        let lhs = spec.compose(&a.add(&b).unwrap().scale(alpha), &c).unwrap();
        let rhs = spec.compose(&a, &c).unwrap().add(&spec.compose(&b, &c).unwrap()).unwrap().scale(alpha);
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-9 * rhs.norm().max(1e-12));
        let lhs = spec.compose(&c, &a.add(&b).unwrap()).unwrap();
        let rhs = spec.compose(&c, &a).unwrap().add(&spec.compose(&c, &b).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-9 * rhs.norm().max(1e-12));
    }

    #[test]
    fn exact_gram_is_psd(trees in prop::collection::vec(tree(), 2..12), lambda in 0.1f64..=1.0) {
        let enc = Encoder::new(CompositionKind::ShuffledConvolution, 64, 1, lambda).unwrap();
        let g = gram_matrix(&trees, KernelChoice::Tk, &enc).unwrap();
        prop_assert!(g.min_eigenvalue() >= -1e-8 * g.trace());
        prop_assert!(g.max_asymmetry() <= 1e-9);
    }

    #[test]
    fn spearman_is_bounded(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 2..50)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(rho) = spearman(&xs, &ys) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        }
    }

    #[test]
    fn formatted_numbers_keep_ten_digits(x in prop_oneof![-1e12f64..1e12, -1.0f64..1.0]) {
        let s = format_sig(x);
        prop_assert!(!s.contains('e') && !s.contains('E'), "{}", s);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-10 * x.abs() + 1e-300, "{} -> {}", x, s);
    }
}
