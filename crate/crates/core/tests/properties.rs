//! Property-based checks of model, estimator and reconstruction invariants.

mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rarehmm::entropy::{
    exact_brackets, forward_log_likelihood, path_log_probs, posterior_middle_symbol,
};
use rarehmm::model::{check_distinguishing, kl_divergence, Channel, GeneratorMatrix, HmmModel};
use rarehmm::reconstruction::{
    block_log_likelihood, classify_block, hamming, mle_block, offset_n, smooth_path, Block,
    BlockParams, CandidateSet, EventClass, Resolution,
};
use rarehmm::sampling::{sample_path, RngStream};

fn model_from(seed: u64, s: usize, t: usize, zeros: bool) -> HmmModel {
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), s, t, zeros)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_entropy_splits(seed: u64, s in 2usize..=5, t in 1usize..=5) {
        let m = model_from(seed, s, t, true);
        let h = chain_entropy_rate(&joint_transition(&m));
        prop_assert!((h - m.entropy_markov() - m.entropy_channel_avg()).abs() < 1e-10);
        prop_assert!((m.entropy_joint() - h).abs() < 1e-10);
    }

    #[test]
    fn stationary_is_fixed_point(seed: u64, s in 2usize..=6) {
        let m = model_from(seed, s, 2, false);
        let pi = m.stationary().weights();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..s {
            let next: f64 = (0..s).map(|i| pi[i] * m.transition().get(i, j)).sum();
            prop_assert!((next - pi[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn distinguishing_iff_rows_differ(seed: u64, s in 2usize..=4, t in 2usize..=4, dup: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_channel(&mut rng, s, t, false);
        let mut rows: Vec<Vec<f64>> = (0..s).map(|i| base.row(i).to_vec()).collect();
        if dup {
            rows[s - 1] = rows[0].clone();
        }
        let channel = Channel::new(&rows).unwrap();
        let report = check_distinguishing(&channel);
        let min_kl = (0..s)
            .flat_map(|i| (0..s).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| kl_divergence(&rows[i], &rows[k]))
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(report.distinguishing, min_kl > 0.0);
        prop_assert_eq!(report.distinguishing, !dup);
    }

    #[test]
    fn forward_matches_enumeration(seed: u64, s in 2usize..=3, t in 2usize..=3, n in 1usize..=6) {
        let m = model_from(seed, s, t, true);
        let y: Vec<u8> = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            (0..n).map(|_| rng.random_range(0..t as u8)).collect()
        };
        let want = marginal_probability(&m, &y).ln();
        let got = forward_log_likelihood(&m, &y);
        prop_assert!(got == want || (got - want).abs() < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn per_path_identity(seed: u64, s in 2usize..=4, t in 2usize..=4) {
        let m = model_from(seed, s, t, false);
        let path = sample_path(&m, 2_000, RngStream::new(seed, 0));
        let lp = path_log_probs(&m, &path.x, &path.y);
        let n = path.len() as f64;
        let (marginal, conditional, joint) = (-lp.marginal / n, -lp.conditional() / n, -lp.joint / n);
        prop_assert!((marginal + conditional - joint).abs() < 1e-9);
    }

    #[test]
    fn brackets_tighten(seed: u64, s in 2usize..=3, t in 2usize..=3) {
        let m = model_from(seed, s, t, false);
        let b = exact_brackets(&m, 7, 1 << 24).unwrap();
        for w in b.windows(2) {
            prop_assert!(w[1].upper <= w[0].upper + 1e-12);
            prop_assert!(w[1].lower >= w[0].lower - 1e-12);
        }
        for x in &b {
            prop_assert!(x.lower <= x.upper + 1e-12);
        }
    }

    #[test]
    fn posterior_relabeling(seed: u64, j in 0usize..3) {
        // 4 states: the event fixes 0 and 1; swapping 2 and 3 must permute
        // the posterior accordingly
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_generator(&mut rng, 4);
        let q = random_channel(&mut rng, 4, 3, false);
        let p = g.p_max() * 0.5;
        let swap = |k: usize| match k { 2 => 3, 3 => 2, k => k };
        let g_rows: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|k| g.rates()[(swap(i), swap(k))]).collect()).collect();
        let q_rows: Vec<Vec<f64>> = (0..4).map(|i| q.row(swap(i)).to_vec()).collect();
        let a = HmmModel::new(g.clone(), p, q.clone()).unwrap();
        let b = HmmModel::new(GeneratorMatrix::new(&g_rows).unwrap(), p, Channel::new(&q_rows).unwrap()).unwrap();
        let pa = posterior_middle_symbol(&a, 0, 1, j).unwrap();
        let pb = posterior_middle_symbol(&b, 0, 1, j).unwrap();
        prop_assert!((pa.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..4 {
            prop_assert!((pa.weights()[k] - pb.weights()[swap(k)]).abs() < 1e-12);
        }
    }

    #[test]
    fn candidate_count(s in 1usize..=4, len in 2usize..=200, margin_frac in 0.0f64..1.0) {
        let margin = 1 + ((len / 2 - 1) as f64 * margin_frac) as usize;
        let params = BlockParams::new(len, margin).unwrap();
        let c = CandidateSet::new(params, s);
        let want = s + s * (s - 1) * (len - 2 * margin + 1);
        prop_assert_eq!(c.len(), want);
        prop_assert_eq!(c.iter().count(), want);
        prop_assert!(c.iter().all(|b| c.contains(&b)));
    }

    #[test]
    fn argmax_dominates(seed: u64, s in 2usize..=3, t in 2usize..=3, len in 2usize..=60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channel = random_channel(&mut rng, s, t, true);
        let margin = rng.random_range(1..=len / 2);
        let y: Vec<u8> = (0..len).map(|_| rng.random_range(0..t as u8)).collect();
        let cands = CandidateSet::new(BlockParams::new(len, margin).unwrap(), s);
        if let Ok(z) = mle_block(&y, &cands, &channel) {
            let zv = z.block.materialize(len);
            let best = block_log_likelihood(&zv, &y, &channel);
            prop_assert_eq!(best, z.log_likelihood);
            for u in cands.iter() {
                prop_assert!(best >= block_log_likelihood(&u.materialize(len), &y, &channel));
            }
        } else {
            for u in cands.iter() {
                prop_assert_eq!(block_log_likelihood(&u.materialize(len), &y, &channel), f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn hamming_is_a_metric(seed: u64, len in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<u8> { (0..len).map(|_| rng.random_range(0..3u8)).collect() };
        let (u, v, w) = (draw(), draw(), draw());
        let d = |a: &[u8], b: &[u8]| hamming(a, b).unwrap();
        prop_assert_eq!(d(&u, &u), 0);
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w));
    }

    #[test]
    fn step_distance_is_cut_difference(len in 4usize..=80, i_frac in 0.0f64..1.0, j_frac in 0.0f64..1.0) {
        let i = 1 + ((len - 2) as f64 * i_frac) as usize;
        let j = 1 + ((len - 2) as f64 * j_frac) as usize;
        let u = Block::Step { first: 0, second: 1, cut: i }.materialize(len);
        let v = Block::Step { first: 0, second: 1, cut: j }.materialize(len);
        prop_assert_eq!(hamming(&u, &v).unwrap(), i.abs_diff(j));
        prop_assert_eq!(offset_n(&u, &v).unwrap(), j as i64 - i as i64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Every Good1 block: |N| < K and, when Z is constant, exact recovery.
    #[test]
    fn good1_blocks_are_localized(seed: u64, eps in 0.02f64..0.3, log_p in -3.0f64..-1.5) {
        let p = 10f64.powf(log_p);
        let m = symmetric_binary(eps).at(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = rng.random_range(2..=8);
        let len = rng.random_range(2 * margin..=((0.5 / p) as usize).max(2 * margin));
        let params = BlockParams::new(len, margin).unwrap();
        let path = sample_path(&m, 50 * len, RngStream::new(seed, 0));
        let sm = smooth_path(&m, &path.y, params, Some(&path.x)).unwrap();
        for rec in &sm.blocks {
            let x = &path.x[rec.index * len..(rec.index + 1) * len];
            let z = rec.reconstructed.materialize(len);
            let class = classify_block(x, params, Resolution::Refined(Some(&z))).unwrap();
            prop_assert_eq!(Some(class), rec.class);
            if class == EventClass::Good1 {
                if z[0] == z[len - 1] {
                    prop_assert_eq!(x, z.as_slice());
                }
                if transitions(x) == 1 && z[0] != z[len - 1] {
                    let ix = x.windows(2).position(|w| w[0] != w[1]).unwrap() as i64;
                    let iz = z.windows(2).position(|w| w[0] != w[1]).unwrap() as i64;
                    prop_assert!((iz - ix).unsigned_abs() < margin as u64);
                    prop_assert_eq!(rec.offset, Some(iz - ix));
                }
            }
        }
    }
}
