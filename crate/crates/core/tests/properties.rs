mod common;

use std::collections::HashMap;

use common::*;
use maxpat::num::{density_estimate, default_checkpoints, FiniteTimeSet};
use maxpat::partitions::{joint_distribution, refine, Partition, PartitionSpec, TimePattern};
use maxpat::pattern::p_star;
use maxpat::sensitivity::{separation_for_points, WitnessSource};
use maxpat::systems::{Phase, System, SystemSpec};
use proptest::prelude::*;

fn bernoulli(p: f64) -> System {
    System::new(SystemSpec::bernoulli(&[p, 1.0 - p])).unwrap()
}

fn markov(a: f64, b: f64) -> System {
    System::new(SystemSpec::markov(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]])).unwrap()
}

fn pattern_strategy(max_t: usize, max_k: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::btree_set(0..=max_t, 1..=max_k).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn p_star_is_subadditive(p in 0.1f64..0.9, q in 0.1f64..0.9, t in 4usize..9, u in 1usize..3, v in 1usize..3) {
        let sys = markov(p, q);
        let part = Partition::resolve(&sys, &PartitionSpec::letters()).unwrap();
        let ps = |k| p_star(&sys, &part, k, t).unwrap().best_value;
        prop_assert!(ps(u + v) <= ps(u) + ps(v) + 1e-9);
    }

    #[test]
    fn joint_marginals_agree(p in 0.1f64..0.9, q in 0.1f64..0.9, pat in pattern_strategy(10, 4), mask in 1u32..16) {
        let sys = markov(p, q);
        let part = Partition::resolve(&sys, &PartitionSpec::Word { length: 2 }).unwrap();
        let keep: Vec<usize> = (0..pat.len()).filter(|j| mask >> j & 1 == 1).collect();
        prop_assume!(!keep.is_empty());
        let sub: Vec<usize> = keep.iter().map(|&j| pat[j]).collect();
        let full = joint_distribution(&sys, &part, &TimePattern::new(pat).unwrap()).unwrap();
        let small = joint_distribution(&sys, &part, &TimePattern::new(sub).unwrap()).unwrap();
        let mut marg = HashMap::<Vec<u32>, f64>::new();
        for (label, m) in full.dist.iter() {
            *marg.entry(keep.iter().map(|&j| label[j]).collect()).or_default() += m;
        }
        for (label, m) in small.dist.iter() {
            prop_assert!((marg.get(label).copied().unwrap_or(0.0) - m).abs() <= 1e-12);
        }
    }

    #[test]
    fn join_entropy_matches_symbol_oracle(p in 0.1f64..0.9, pat in pattern_strategy(8, 3), l in 1usize..3) {
        let sys = bernoulli(p);
        let part = Partition::resolve(&sys, &PartitionSpec::Word { length: l }).unwrap();
        let h = joint_distribution(&sys, &part, &TimePattern::new(pat.clone()).unwrap()).unwrap().entropy();
        prop_assert!((h - word_join_entropy(&sys, l, &pat)).abs() <= 1e-12);
    }

    #[test]
    fn join_entropy_is_monotone_and_subadditive(a in 0.1f64..0.9, b in 0.1f64..0.9, pat in pattern_strategy(12, 4), extra in 0usize..13) {
        prop_assume!(!pat.contains(&extra));
        let sys = markov(a, b);
        let part = Partition::resolve(&sys, &PartitionSpec::letters()).unwrap();
        let h = |ts: &[usize]| {
            let mut ts = ts.to_vec();
            ts.sort_unstable();
            joint_distribution(&sys, &part, &TimePattern::new(ts).unwrap()).unwrap().entropy()
        };
        let mut bigger = pat.clone();
        bigger.push(extra);
        let (hp, hb, he) = (h(&pat), h(&bigger), h(&[extra]));
        prop_assert!(hb >= hp - 1e-12);
        prop_assert!(hb <= hp + he + 1e-12);
    }

    #[test]
    fn sturmian_joins_have_at_most_2k_atoms(alpha in 0.05f64..0.95, cut in 0.05f64..0.95, pat in pattern_strategy(40, 6)) {
        let spec = SystemSpec::Sturmian { alpha: Phase::from_f64(alpha), cut: Phase::from_f64(cut) };
        let sys = System::new(spec);
        prop_assume!(sys.is_ok());
        let sys = sys.unwrap();
        let part = Partition::resolve(&sys, &PartitionSpec::letters()).unwrap();
        let jd = joint_distribution(&sys, &part, &TimePattern::new(pat.clone()).unwrap()).unwrap();
        prop_assert!(jd.dist.support_size() <= 2 * pat.len());
    }

    #[test]
    fn word_frequencies_are_shift_consistent(p in 0.05f64..0.95, w in proptest::collection::vec(0u8..2, 1..6)) {
        let sys = bernoulli(p);
        let f = sys.word_frequency(&w).unwrap();
        let mut right = 0.0;
        let mut left = 0.0;
        for c in 0..2u8 {
            let mut wr = w.clone();
            wr.push(c);
            right += sys.word_frequency(&wr).unwrap();
            let mut wl = vec![c];
            wl.extend_from_slice(&w);
            left += sys.word_frequency(&wl).unwrap();
        }
        prop_assert!((right - f).abs() <= 1e-12 && (left - f).abs() <= 1e-12);
    }

    #[test]
    fn permuted_alphabet_permutes_frequencies(a in 0.1f64..0.9, b in 0.1f64..0.9, w in proptest::collection::vec(0u8..2, 1..6)) {
        let spec = SystemSpec::markov(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]);
        let sys = System::new(spec.clone()).unwrap();
        let swapped = System::new(spec.permute_alphabet(&[1, 0]).unwrap()).unwrap();
        let w2: Vec<u8> = w.iter().map(|&c| 1 - c).collect();
        prop_assert!((sys.word_frequency(&w).unwrap() - swapped.word_frequency(&w2).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn separation_sets_refine_and_ignore_labels(p in 0.1f64..0.9, s1 in any::<u64>(), s2 in any::<u64>()) {
        prop_assume!(s1 != s2);
        let sys = bernoulli(p);
        let x = sys.sample_point(s1, 64).unwrap();
        let y = sys.sample_point(s2, 64).unwrap();
        prop_assume!(sys.distinct(&x, &y).unwrap());
        let pts = [x, y];
        let src = vec![WitnessSource { seed: s1, shift: 0 }, WitnessSource { seed: s2, shift: 0 }];
        let letters = Partition::resolve(&sys, &PartitionSpec::letters()).unwrap();
        let words = Partition::resolve(&sys, &PartitionSpec::Word { length: 3 }).unwrap();
        let joined = refine(&sys, &letters, &words).unwrap();
        let swapped = Partition::resolve(&sys, &PartitionSpec::SymbolMap { map: vec![1, 0] }).unwrap();
        let f = |part: &Partition| separation_for_points(&sys, part, &pts, src.clone(), 2000).unwrap();
        let (fl, fw, fj, fs) = (f(&letters), f(&words), f(&joined), f(&swapped));
        prop_assert!(fl.separation_set.is_subset(&fw.separation_set));
        prop_assert!(fw.separation_set.is_subset(&fj.separation_set));
        prop_assert_eq!(&fs.separation_set, &fl.separation_set);
        for r in [&fl, &fw, &fj] {
            prop_assert!(r.density.lower_proxy <= r.density.upper_proxy);
        }
    }

    #[test]
    fn density_proxies_are_ordered(times in proptest::collection::btree_set(0usize..500, 0..200), window in 8usize..500) {
        let ts: Vec<usize> = times.into_iter().filter(|&t| t < window).collect();
        let f = FiniteTimeSet::from_times(&ts, window).unwrap();
        let d = density_estimate(&f, &default_checkpoints(window)).unwrap();
        prop_assert!(0.0 <= d.lower_proxy && d.lower_proxy <= d.upper_proxy && d.upper_proxy <= 1.0);
        for &(n, v) in &d.window_densities {
            prop_assert_eq!(v, f.count_below(n) as f64 / n as f64);
        }
    }

    #[test]
    fn interval_partition_masses_are_arc_lengths(c in 0.05f64..0.95) {
        let rot = System::new(SystemSpec::golden_rotation()).unwrap();
        let part = Partition::resolve(&rot, &PartitionSpec::halves(Phase::from_f64(c))).unwrap();
        let m = part.atom_masses();
        prop_assert!((m[0] - c).abs() <= 1e-12 && (m[1] - (1.0 - c)).abs() <= 1e-12);
    }
}
