use proptest::prelude::*;

use sevfdr::analytic_oracle::cutoff_roots;
use sevfdr::error_rates::{posterior_mfdr_star, ErrorRateEstimate};
use sevfdr::posterior::{glfdr_scores, severity_weight_vec};
use sevfdr::procedures::stepup;
use sevfdr::{severity, AlternativeSpec, PosteriorScores, SeveritySpec, TwoGroupsModel};

fn scores_strategy() -> impl Strategy<Value = PosteriorScores> {
    // Coarse values so that ties show up regularly.
    prop::collection::vec((0u32..=40, 0.05f64..20.0), 1..60).prop_map(|v| {
        let fdr: Vec<f64> = v.iter().map(|(k, _)| *k as f64 / 40.0).collect();
        let w: Vec<f64> = v.iter().map(|(_, w)| (w * 4.0).round() / 4.0).collect();
        glfdr_scores(&fdr, &w).unwrap()
    })
}

proptest! {
    #[test]
    fn glfdr_monotone(f1 in 0.0f64..1.0, f2 in 0.0f64..1.0, w1 in 0.01f64..50.0, w2 in 0.01f64..50.0) {
        let (flo, fhi) = (f1.min(f2), f1.max(f2));
        let (wlo, whi) = (w1.min(w2), w1.max(w2));
        let s = glfdr_scores(&[flo, fhi, flo], &[wlo, wlo, whi]).unwrap();
        prop_assert!(s.glfdr[0] <= s.glfdr[1]);
        prop_assert!(s.glfdr[2] <= s.glfdr[0]);
        for t in &s.glfdr {
            prop_assert!((0.0..=1.0).contains(t));
        }
    }

    #[test]
    fn stepup_threshold_rule(s in scores_strategy(), alpha in 0.01f64..0.5) {
        let r = stepup(&s, alpha).unwrap();
        let t = &s.glfdr;
        if r.k == 0 {
            prop_assert_eq!(r.decisions.num_rejected, 0);
        } else {
            for (&rejected, &ti) in r.decisions.delta.iter().zip(t) {
                prop_assert_eq!(rejected, ti <= r.threshold);
            }
            prop_assert_eq!(r.decisions.num_rejected, r.k);
            prop_assert!(posterior_mfdr_star(&s, r.threshold) <= alpha + 1e-12);
        }
        // No larger tie-closed prefix meets the level.
        let mut distinct: Vec<f64> = t.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for &v in distinct.iter().filter(|&&v| r.k == 0 || v > r.threshold) {
            prop_assert!(posterior_mfdr_star(&s, v) > alpha);
        }
    }

    #[test]
    fn stepup_monotone_in_alpha(s in scores_strategy(), a1 in 0.01f64..0.5, a2 in 0.01f64..0.5) {
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        let r_lo = stepup(&s, lo).unwrap();
        let r_hi = stepup(&s, hi).unwrap();
        prop_assert!(r_lo.k <= r_hi.k);
        for i in 0..s.len() {
            prop_assert!(!r_lo.decisions.delta[i] || r_hi.decisions.delta[i]);
        }
    }

    #[test]
    fn stepup_permutation_invariant(s in scores_strategy(), alpha in 0.01f64..0.5, seed in any::<u64>()) {
        let n = s.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let p = PosteriorScores {
            fdr: perm.iter().map(|&i| s.fdr[i]).collect(),
            w: perm.iter().map(|&i| s.w[i]).collect(),
            glfdr: perm.iter().map(|&i| s.glfdr[i]).collect(),
            d: perm.iter().map(|&i| s.d[i]).collect(),
        };
        let a = stepup(&s, alpha).unwrap();
        let b = stepup(&p, alpha).unwrap();
        prop_assert_eq!(a.k, b.k);
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(b.decisions.delta[j], a.decisions.delta[i]);
        }
    }

    #[test]
    fn severity_is_even(mu in -50.0f64..50.0, p in 0.1f64..4.0) {
        let spec = SeveritySpec::Power(p);
        prop_assert_eq!(severity(spec, mu), severity(spec, -mu));
        prop_assert_eq!(severity(SeveritySpec::Constant, mu), 1.0);
    }

    #[test]
    fn symmetric_model_gives_even_weight(x in -8.0f64..8.0, mu in 0.5f64..5.0, tau in 0.1f64..2.0) {
        let tp = TwoGroupsModel::new(0.9, AlternativeSpec::two_point(0.5, -mu, mu).unwrap()).unwrap();
        let gm = TwoGroupsModel::new(0.9, AlternativeSpec::gaussian_mixture(0.5, -mu, mu, tau).unwrap()).unwrap();
        for model in [tp, gm] {
            let w = severity_weight_vec(&model, SeveritySpec::SQUARED, &[x, -x]).unwrap();
            prop_assert!((w[0] - w[1]).abs() <= 1e-10 * w[0].max(1.0));
        }
    }

    #[test]
    fn doubling_replicates_keeps_estimate(pairs in prop::collection::vec((0.0f64..10.0, 0.1f64..20.0), 2..40)) {
        let (num, den): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let once = ErrorRateEstimate::from_replicates(&num, &den);
        let num2: Vec<f64> = num.iter().chain(&num).copied().collect();
        let den2: Vec<f64> = den.iter().chain(&den).copied().collect();
        let twice = ErrorRateEstimate::from_replicates(&num2, &den2);
        prop_assert!((once.value - twice.value).abs() <= 1e-12 * once.value.max(1e-300));
        prop_assert!(twice.std_error <= once.std_error + 1e-15);
    }

    #[test]
    fn cutoff_intervals_nest(pi11 in 0.05f64..0.95, t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let model = TwoGroupsModel::study2(pi11).unwrap();
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let wide = cutoff_roots(lo, &model, SeveritySpec::SQUARED).unwrap();
        let narrow = cutoff_roots(hi, &model, SeveritySpec::SQUARED).unwrap();
        prop_assert!(narrow.accepts_within(&wide), "{:?} vs {:?}", narrow, wide);
    }
}
