use sevfdr::analytic_oracle::{find_tstar, reject_all_mfdr_star};
use sevfdr::experiments::verify::{cutoff_level_set, likelihood_ratio_check};
use sevfdr::experiments::{verify_suite, Budget};
use sevfdr::posterior::lfdr_vec;
use sevfdr::procedures::{oracle_cutoff_mc, simulate_scored, CutoffBoundary};
use sevfdr::{sample, Result, SeveritySpec, TwoGroupsModel};

#[test]
fn study2_sample_moments() {
    let model = TwoGroupsModel::study2(0.3).unwrap();
    let s = sample(&model, 1_000_000, 11, 0).unwrap();
    let n_alt = s.theta.iter().filter(|&&t| t).count();
    let frac = n_alt as f64 / s.len() as f64;
    assert!((frac - 0.2).abs() < 0.002, "{frac}");
    let n_minus = s
        .theta
        .iter()
        .zip(&s.mu)
        .filter(|(&t, &mu)| t && mu == -3.0)
        .count();
    let cond = n_minus as f64 / n_alt as f64;
    assert!((cond - 0.3).abs() < 0.005, "{cond}");
    assert!(s.theta.iter().zip(&s.mu).all(|(&t, &mu)| t || mu == 0.0));
}

#[test]
fn study1_sample_severity_mean() {
    let s = sample(&TwoGroupsModel::study1(), 1_000_000, 12, 0).unwrap();
    let mean = s
        .theta
        .iter()
        .zip(&s.mu)
        .map(|(&t, &mu)| if t { mu * mu } else { 0.0 })
        .sum::<f64>()
        / s.len() as f64;
    assert!((mean - 0.075).abs() < 0.001, "{mean}");
}

#[test]
fn replicates_are_independent_streams() {
    let model = TwoGroupsModel::study2(0.5).unwrap();
    let a = sample(&model, 100, 1, 0).unwrap();
    let b = sample(&model, 100, 1, 1).unwrap();
    let c = sample(&model, 100, 2, 0).unwrap();
    assert_ne!(a.x, b.x);
    assert_ne!(a.x, c.x);
    assert_eq!(a, sample(&model, 100, 1, 0).unwrap());
}

#[test]
fn mc_oracle_hits_level() {
    let model = TwoGroupsModel::study2(0.5).unwrap();
    let r = oracle_cutoff_mc(&model, SeveritySpec::SQUARED, 0.05, 200, 1000, 21).unwrap();
    assert!(r.boundary.is_none());
    assert!((r.achieved.value - 0.05).abs() <= 0.01, "{:?}", r.achieved);
}

/// Pooled unweighted mFDR of `lfdr ≤ t`, scanned over every observed score.
fn naive_lfdr_cutoff(
    model: &TwoGroupsModel,
    n_reps: usize,
    m: usize,
    seed: u64,
    alpha: f64,
) -> f64 {
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for r in 0..n_reps as u64 {
        let s = sample(model, m, seed, r).unwrap();
        let l = lfdr_vec(model, &s.x).unwrap();
        pooled.extend(l.into_iter().zip(s.theta.iter().map(|t| !t)));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut nulls, mut best) = (0.0, 0.0);
    for (j, &(v, is_null)) in pooled.iter().enumerate() {
        if is_null {
            nulls += 1.0;
        }
        if nulls / (j + 1) as f64 <= alpha {
            best = v;
        }
    }
    best
}

#[test]
fn mc_oracle_constant_severity_matches_unweighted() {
    let model = TwoGroupsModel::study2(0.5).unwrap();
    let (n_reps, m, seed) = (200, 1000, 22);
    let mc = oracle_cutoff_mc(&model, SeveritySpec::Constant, 0.05, n_reps, m, seed).unwrap();
    let (t_analytic, _) = find_tstar(&model, SeveritySpec::Constant, 0.05).unwrap();
    let naive = naive_lfdr_cutoff(&model, n_reps, m, seed, 0.05);
    assert!(
        (mc.cutoff - naive).abs() < 0.01,
        "mc {} naive {naive}",
        mc.cutoff
    );
    assert!(
        (mc.cutoff - t_analytic).abs() < 0.03,
        "mc {} analytic {t_analytic}",
        mc.cutoff
    );
}

#[test]
fn mc_oracle_reject_all_boundary() {
    let model = TwoGroupsModel::study2(0.5).unwrap();
    let all = reject_all_mfdr_star(&model, SeveritySpec::SQUARED).unwrap();
    let r = oracle_cutoff_mc(&model, SeveritySpec::SQUARED, all + 0.05, 20, 500, 23).unwrap();
    assert_eq!(r.boundary, Some(CutoffBoundary::RejectAll));
    assert_eq!(r.cutoff, 1.0);
}

#[test]
fn simulate_scored_matches_sample() {
    let model = TwoGroupsModel::study1();
    let (samples, scores) = simulate_scored(&model, SeveritySpec::SQUARED, 3, 50, 4).unwrap();
    assert_eq!(samples[2], sample(&model, 50, 4, 2).unwrap());
    assert_eq!(scores[2].len(), 50);
}

#[test]
fn checks_catch_a_wrong_scorer() {
    let tampered = |m: &TwoGroupsModel, x: &[f64]| -> Result<Vec<f64>> { lfdr_vec(m, x) };
    let model = TwoGroupsModel::study2(0.5).unwrap();
    let ratio = likelihood_ratio_check(&model, SeveritySpec::SQUARED, &tampered, 200_000, 31);
    assert!(!ratio.passed, "{ratio}");
    let level = cutoff_level_set(&tampered);
    assert!(!level.passed, "{level}");
}

#[test]
fn verify_verdicts_stable_across_seeds() {
    for seed in [1, 2, 3] {
        let report = verify_suite(Budget::Small, seed);
        assert!(report.all_passed(), "seed {seed}:\n{report}");
    }
}
