use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logit_anchor::logits::{entropy, sample, softmax, LogitVector, ProbDist, TokenId};
use logit_anchor::metrics::{chair_i, chair_s, cover, extract_objects, recall, CaptionRecord, ObjectLexicon};
use logit_anchor::plausibility::candidate_set;
use logit_anchor::strategies::{contrastive_adjust, mask_l0, FirstLogitCache, L0Mask, TokenRoles};
use logit_anchor::weighting::{object_score, ScheduleKind, ScoreScale, WeightSchedule};

fn scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0..30.0f64, 2..max_len)
}

/// Scores with a random mask that leaves at least one entry live.
fn masked(max_len: usize) -> impl Strategy<Value = LogitVector> {
    scores(max_len)
        .prop_flat_map(|s| {
            let n = s.len();
            (Just(s), prop::collection::vec(any::<bool>(), n), 0..n)
        })
        .prop_map(|(s, mut mask, keep)| {
            mask[keep] = false;
            LogitVector::with_mask(s, mask).unwrap()
        })
}

fn dist(max_len: usize) -> impl Strategy<Value = ProbDist> {
    masked(max_len).prop_map(|l| softmax(&l, 1.0).unwrap())
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(l in masked(64), c in -100.0..100.0f64) {
        let p = softmax(&l, 1.0).unwrap();
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (i, &m) in l.mask().iter().enumerate() {
            if m {
                prop_assert_eq!(p.probs()[i], 0.0);
            }
        }
        let shifted = LogitVector::with_mask(l.scores().iter().map(|s| s + c).collect(), l.mask().to_vec()).unwrap();
        let q = softmax(&shifted, 1.0).unwrap();
        for (a, b) in p.probs().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_the_top_score_lowers_entropy(s in prop::collection::vec(-5.0..5.0f64, 3), bump in 0.01..5.0f64) {
        let top = (0..3).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        let before = entropy(&softmax(&LogitVector::new(s.clone()).unwrap(), 1.0).unwrap());
        let mut raised = s.clone();
        raised[top] += bump;
        let after = entropy(&softmax(&LogitVector::new(raised).unwrap(), 1.0).unwrap());
        prop_assert!(after < before + 1e-15);
        prop_assert!(after >= 0.0);
    }

    #[test]
    fn entropy_matches_direct_sum(d in dist(64)) {
        let direct: f64 = d.probs().iter().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum();
        prop_assert!((entropy(&d) - direct).abs() < 1e-9);
        prop_assert!(entropy(&d) <= (d.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn candidate_set_matches_threshold_scan(d in dist(64), beta in 0.0..=1.0f64) {
        let mask = candidate_set(&d, beta).unwrap();
        let max = d.probs().iter().cloned().fold(0.0, f64::max);
        for (i, &p) in d.probs().iter().enumerate() {
            prop_assert_eq!(mask.is_allowed(TokenId(i)), p > 0.0 && p >= beta * max);
        }
        prop_assert!(mask.is_allowed(d.argmax()));
    }

    #[test]
    fn candidate_set_shrinks_as_beta_grows(d in dist(64), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let wide = candidate_set(&d, lo).unwrap();
        let narrow = candidate_set(&d, hi).unwrap();
        for i in 0..d.len() {
            prop_assert!(!narrow.is_allowed(TokenId(i)) || wide.is_allowed(TokenId(i)));
        }
    }

    #[test]
    fn weight_schedules(gamma in 0.0..2.0f64, lambda in 0.001..1.0f64, t in 0usize..2000) {
        let inc = WeightSchedule::new(ScheduleKind::Increasing, gamma, lambda).unwrap();
        let dec = WeightSchedule::new(ScheduleKind::Decreasing, gamma, lambda).unwrap();
        let con = WeightSchedule::new(ScheduleKind::Constant, gamma, lambda).unwrap();
        prop_assert_eq!(inc.weight_at(0), 0.0);
        prop_assert!(inc.weight_at(t) <= inc.weight_at(t + 1));
        prop_assert!(dec.weight_at(t) >= dec.weight_at(t + 1));
        prop_assert!((0.0..=gamma).contains(&inc.weight_at(t)));
        prop_assert!((0.0..=gamma).contains(&dec.weight_at(t)));
        prop_assert!((inc.weight_at(t) + dec.weight_at(t) - gamma).abs() < 1e-12);
        prop_assert_eq!(con.weight_at(t), gamma);
    }

    #[test]
    fn object_score_is_monotone(c in 0.0..1.0f64, v in 0.0..1.0f64, d in 0.0..0.5f64) {
        let s = object_score(c, v, ScoreScale::Fraction);
        prop_assert!(object_score((c + d).min(1.0), v, ScoreScale::Fraction) <= s);
        prop_assert!(object_score(c, (v + d).min(1.0), ScoreScale::Fraction) >= s);
        let pct = object_score(100.0 * c, 100.0 * v, ScoreScale::Percent);
        prop_assert!((pct - 100.0 * s).abs() < 1e-9);
    }

    #[test]
    fn zero_alpha_contrast_is_identity(pos in scores(32), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let neg: Vec<f64> = pos.iter().map(|_| rand::Rng::gen_range(&mut rng, -10.0..10.0)).collect();
        let p = LogitVector::new(pos).unwrap();
        let out = contrastive_adjust(&p, &LogitVector::new(neg).unwrap(), 0.0).unwrap();
        prop_assert_eq!(out, p);
    }

    #[test]
    fn ablation_masks_touch_only_their_indices(s in scores(32), noun_bits in prop::collection::vec(any::<bool>(), 32), the in 0usize..32) {
        let n = s.len();
        let roles = TokenRoles { is_noun: noun_bits[..n].to_vec(), the_token: Some(TokenId(the % n)) };
        let cache = FirstLogitCache::from_logits(LogitVector::new(s.clone()).unwrap());
        let full = mask_l0(&cache, L0Mask::Full, Some(&roles)).unwrap();
        let nouns = mask_l0(&cache, L0Mask::NounsOnly, Some(&roles)).unwrap();
        let the_only = mask_l0(&cache, L0Mask::TheOnly, Some(&roles)).unwrap();
        prop_assert_eq!(full.scores(), &s[..]);
        for (i, &x) in s.iter().enumerate() {
            let want_noun = if roles.is_noun[i] { x } else { 0.0 };
            prop_assert_eq!(nouns.scores()[i], want_noun);
            let want_the = if i == the % n { x } else { 0.0 };
            prop_assert_eq!(the_only.scores()[i], want_the);
        }
    }

    #[test]
    fn set_metric_invariants(
        mentions in prop::collection::btree_set(0u8..12, 0..8),
        gt in prop::collection::btree_set(0u8..12, 1..8),
        dup in 1usize..4,
    ) {
        let name = |i: &u8| format!("o{i}");
        let m: BTreeSet<String> = mentions.iter().map(name).collect();
        let g: BTreeSet<String> = gt.iter().map(name).collect();
        if !m.is_empty() {
            let clean = m.intersection(&g).count() as f64 / m.len() as f64;
            prop_assert!((chair_i(&m, &g) + clean - 1.0).abs() < 1e-12);
        }
        let lex = ObjectLexicon::new((0u8..12).map(|i| (name(&i), vec![])).collect()).unwrap();
        let tokens: Vec<String> = mentions.iter().flat_map(|i| std::iter::repeat_n(name(i), dup)).collect();
        if !tokens.is_empty() {
            let cap = CaptionRecord::new("x", tokens).unwrap();
            let found = extract_objects(&cap, &lex);
            prop_assert_eq!(found.len(), mentions.len() * dup);
            let set: BTreeSet<String> = found.into_iter().map(|x| x.object).collect();
            prop_assert_eq!(cover(&set, &g).unwrap(), cover(&m, &g).unwrap());
            prop_assert_eq!(recall(&set, &g).unwrap(), cover(&m, &g).unwrap());
        }
    }

    #[test]
    fn chair_s_zero_iff_no_caption_hallucinates(flags in prop::collection::vec(any::<bool>(), 1..20)) {
        let s = chair_s(&flags).unwrap();
        prop_assert_eq!(s == 0.0, flags.iter().all(|f| !f));
    }

    #[test]
    fn extraction_positions_are_disjoint(words in prop::collection::vec(prop::sample::select(vec!["hot", "dog", "dogs", "a", "traffic", "light", "the"]), 1..30)) {
        let lex = ObjectLexicon::new(
            [("hot dog", vec!["hot dogs"]), ("dog", vec!["dogs"]), ("traffic light", vec![])]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
                .collect(),
        )
        .unwrap();
        let cap = CaptionRecord::new("x", words.iter().map(|w| w.to_string()).collect()).unwrap();
        let found = extract_objects(&cap, &lex);
        let mut next_free = 0;
        for m in &found {
            prop_assert!(m.position >= next_free);
            next_free = m.position + m.object.split(' ').count();
        }
    }
}

#[test]
fn sampling_never_emits_masked_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let l = LogitVector::with_mask(
        vec![5.0, -40.0, 0.0, 3.0, 50.0, -1.0, 2.0, 0.5],
        vec![false, false, true, false, true, false, true, false],
    )
    .unwrap();
    let d = softmax(&l, 1.0).unwrap();
    let mut counts = [0usize; 8];
    for _ in 0..100_000 {
        counts[sample(&d, &mut rng).0] += 1;
    }
    assert_eq!(counts[2] + counts[4] + counts[6], 0);
    assert!(counts[0] > 0 && counts[3] > 0);
}
