use astro_core::evaluation::{confusion, metrics};
use astro_core::threshold::{tune_with, QNet, SortedScores};
use astro_core::{apply_threshold, f1_reward, grid_oracle, tune, ScoreSet, TunerConfig};
use proptest::prelude::*;

fn score_set() -> impl Strategy<Value = ScoreSet> {
    prop::collection::vec((0.0f64..=1.0, 0u8..2), 2..80).prop_filter_map("both classes", |pairs| {
        let (s, l): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
        let set = ScoreSet::new(s, l).ok()?;
        set.has_both_classes().then_some(set)
    })
}

/// Best F1 over every distinct score used as a threshold, plus "predict nothing".
fn breakpoint_best(set: &ScoreSet) -> f64 {
    let mut best = 0.0f64;
    let mut cands = set.scores.clone();
    cands.push(f64::INFINITY);
    for &c in &cands {
        let pred: Vec<u8> = set.scores.iter().map(|&s| u8::from(s >= c)).collect();
        best = best.max(f1_reward(&pred, &set.labels));
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f1_is_permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..100), rot in 0usize..100) {
        let (p, t): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let k = rot % p.len();
        let mut p2 = p.clone();
        let mut t2 = t.clone();
        p2.rotate_left(k);
        t2.rotate_left(k);
        p2.reverse();
        t2.reverse();
        prop_assert_eq!(f1_reward(&p, &t), f1_reward(&p2, &t2));
        prop_assert_eq!(metrics(&confusion(&p, &t).unwrap()), metrics(&confusion(&p2, &t2).unwrap()));
    }

    #[test]
    fn grid_matches_breakpoint_scan(set in score_set()) {
        // scores on a 0.01 lattice so a 0.001 grid hits every breakpoint
        let lattice = ScoreSet::new(set.scores.iter().map(|s| (s * 100.0).round() / 100.0).collect(), set.labels.clone()).unwrap();
        let (_, f1) = grid_oracle(&lattice, 0.001).unwrap();
        prop_assert!((f1 - breakpoint_best(&lattice)).abs() < 1e-12);
    }

    #[test]
    fn sorted_lookup_matches_relabeling(set in score_set(), tau in 0.0f64..=1.0) {
        let pred = apply_threshold(&set.scores, tau).unwrap();
        prop_assert_eq!(SortedScores::new(&set).f1_at(tau), f1_reward(&pred, &set.labels));
    }

    #[test]
    fn recall_never_rises_with_tau(set in score_set()) {
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let pred = apply_threshold(&set.scores, i as f64 / 100.0).unwrap();
            let r = metrics(&confusion(&pred, &set.labels).unwrap()).recall;
            prop_assert!(r <= last);
            last = r;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tau_stays_in_unit_interval(set in score_set(), seed in any::<u64>(), tau0 in 0.0f64..=1.0) {
        let cfg = TunerConfig { tau0, episodes: 3, seed, ..TunerConfig::default() };
        let r = tune(&set, &cfg).unwrap();
        prop_assert!(r.trace.iter().all(|s| (0.0..=1.0).contains(&s.tau)));
        prop_assert!((0.0..=1.0).contains(&r.tau_star));
        let pred = apply_threshold(&set.scores, r.tau_star).unwrap();
        prop_assert_eq!(r.best_f1, f1_reward(&pred, &set.labels));
    }
}

#[test]
fn greedy_walk_keeps_best_non_decreasing() {
    let set = astro_core::synth::overlapping_scores(300, 2);
    let cfg = TunerConfig {
        episodes: 20,
        seed: 5,
        ..TunerConfig::default()
    };
    let mut q = QNet::new(cfg.hidden, cfg.lr, cfg.seed);
    tune_with(&set, &cfg, &mut q, None).unwrap();
    let greedy = TunerConfig {
        episodes: 3,
        ..cfg.clone()
    };
    let r = tune_with(&set, &greedy, &mut q, Some(0.0)).unwrap();
    assert!(r.trace.windows(2).all(|w| w[1].best_f1 >= w[0].best_f1));
}

#[test]
fn bimodal_scores_reach_perfect_f1() {
    let set = astro_core::synth::bimodal_scores(500, 0);
    let r = tune(&set, &TunerConfig::default()).unwrap();
    assert_eq!(r.best_f1, 1.0);
    assert!(r.tau_star > 0.15 && r.tau_star < 0.85, "{}", r.tau_star);
}

#[test]
fn reference_scores_tune_near_reported_threshold() {
    let set = astro_core::synth::reference_confusion_scores(0);
    let pred = apply_threshold(&set.scores, 0.51).unwrap();
    let c = confusion(&pred, &set.labels).unwrap();
    assert_eq!((c.tn, c.fp, c.fn_, c.tp), (7909, 80, 77, 7909));
    let (_, oracle) = grid_oracle(&set, 0.001).unwrap();
    let r = tune(&set, &TunerConfig::default()).unwrap();
    assert!(r.best_f1 >= oracle - 0.005, "{} vs {oracle}", r.best_f1);
}
