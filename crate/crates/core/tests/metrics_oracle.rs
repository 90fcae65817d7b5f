mod oracle;

use loopcap_core::metrics::{bleu4, cider_d, micro_average, rouge_l, EvalPair, MicroMode, Scores};
use oracle::Pair;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn to_eval(pairs: &[Pair]) -> Vec<EvalPair> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (h, r))| EvalPair::new(i as u64, h.clone(), r.clone()).unwrap())
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn bleu_matches_oracle_on_fixture() {
    let fx = oracle::bleu_fixture();
    let want = oracle::bleu4(&fx);
    assert!(want > 0.0 && want < 1.0, "fixture should be non-trivial: {want}");
    let got = bleu4(&to_eval(&fx)).unwrap();
    assert!(close(got, want), "{got} vs {want}");
}

#[test]
fn rouge_matches_lcs_oracle() {
    let fx = vec![oracle::pair("the cat sat", &["the cat", "a dog sat"])];
    let want = oracle::rouge_l(&fx);
    // LCS("the cat sat", "the cat") = 2: P = 2/3, R = 1
    let (p, r, b2) = (2.0 / 3.0, 1.0, 1.44);
    assert!(close(want, (1.0 + b2) * p * r / (r + b2 * p)));
    assert!(close(rouge_l(&to_eval(&fx)).unwrap(), want));
    let bf = oracle::bleu_fixture();
    assert!(close(rouge_l(&to_eval(&bf)).unwrap(), oracle::rouge_l(&bf)));
}

#[test]
fn cider_matches_oracle_on_fixture() {
    let fx = oracle::cider_fixture();
    let want = oracle::cider_d(&fx);
    assert!(want > 0.0 && want < 10.0, "{want}");
    let got = cider_d(&to_eval(&fx)).unwrap();
    assert!(close(got, want), "{got} vs {want}");
}

#[test]
fn micro_average_pools_clusters() {
    let a = to_eval(&oracle::cluster_a());
    let b = to_eval(&oracle::cluster_b());
    let mut pool = oracle::cluster_a();
    pool.extend(oracle::cluster_b());
    let got = micro_average(&[&a, &b], MicroMode::Pooled).unwrap();
    assert!(close(got.bleu4, oracle::bleu4(&pool)));
    assert!(close(got.rouge_l, oracle::rouge_l(&pool)));
    assert!(close(got.cider_d, oracle::cider_d(&pool)));

    let single = micro_average(&[&a], MicroMode::Pooled).unwrap();
    assert_eq!(single, Scores::compute(&a).unwrap());

    let weighted = micro_average(&[&a, &b], MicroMode::Weighted).unwrap();
    let (sa, sb) = (Scores::compute(&a).unwrap(), Scores::compute(&b).unwrap());
    assert!(close(weighted.bleu4, (sa.bleu4 + sb.bleu4) / 2.0));
}

#[test]
fn perfect_clusters_pool_to_perfect_bleu() {
    let a = to_eval(&[oracle::pair("a red cup on the table", &["a red cup on the table"])]);
    let b = to_eval(&[oracle::pair("two shoes under the bed", &["two shoes under the bed", "shoes"])]);
    let s = micro_average(&[&a, &b], MicroMode::Pooled).unwrap();
    assert!(close(s.bleu4, 1.0));
}

const WORDS: &[&str] = &["a", "the", "cup", "red", "table", "on", "box", "of", "hand", "blue", "can"];

fn random_pairs(rng: &mut impl rand::Rng, n: usize) -> Vec<Pair> {
    let sentence = |rng: &mut dyn rand::RngCore, min: usize| -> Vec<String> {
        let len = rand::Rng::random_range(rng, min..9);
        (0..len).map(|_| WORDS[rand::Rng::random_range(rng, 0..WORDS.len())].to_string()).collect()
    };
    (0..n)
        .map(|_| {
            let refs = rand::Rng::random_range(rng, 1..5);
            (sentence(rng, 0), (0..refs).map(|_| sentence(rng, 1)).collect())
        })
        .collect()
}

#[test]
fn scores_stay_in_range_on_fuzz_corpora() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n = rand::Rng::random_range(&mut rng, 1..6);
        let pairs = to_eval(&random_pairs(&mut rng, n));
        let s = Scores::compute(&pairs).unwrap();
        assert!(s.in_range(), "{s:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_equivalence_on_random_corpora(seed in any::<u64>(), n in 1usize..6) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, n);
        let ev = to_eval(&pairs);
        prop_assert!(close(bleu4(&ev).unwrap(), oracle::bleu4(&pairs)));
        prop_assert!(close(rouge_l(&ev).unwrap(), oracle::rouge_l(&pairs)));
        prop_assert!(close(cider_d(&ev).unwrap(), oracle::cider_d(&pairs)));
    }

    #[test]
    fn permutation_invariance(seed in any::<u64>(), n in 2usize..6) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ev = to_eval(&random_pairs(&mut rng, n));
        let before = Scores::compute(&ev).unwrap();
        ev.shuffle(&mut rng);
        let after = Scores::compute(&ev).unwrap();
        prop_assert!(close(before.bleu4, after.bleu4));
        prop_assert!(close(before.rouge_l, after.rouge_l));
        prop_assert!(close(before.cider_d, after.cider_d));
    }

    #[test]
    fn bleu_duplicated_corpus_is_unchanged(seed in any::<u64>(), n in 1usize..6) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ev = to_eval(&random_pairs(&mut rng, n));
        let mut twice = ev.clone();
        twice.extend(ev.iter().cloned());
        prop_assert!(close(bleu4(&ev).unwrap(), bleu4(&twice).unwrap()));
    }
}
