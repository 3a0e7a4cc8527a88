//! Decision procedures built on posterior scores.

use rayon::prelude::*;

use crate::analytic_oracle::psi;
use crate::error::{Error, Result};
use crate::error_rates::{ErrorRateEstimate, ThresholdRates};
use crate::model::{sample, SeveritySpec, SimulatedSample, TwoGroupsModel};
use crate::posterior::{posterior_scores, DecisionVector, PosteriorScores};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "level alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Outcome of the step-up rule.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUp {
    pub k: usize,
    pub decisions: DecisionVector,
    /// Glfdr of the k-th ranked hypothesis, 0 when nothing is rejected.
    pub threshold: f64,
}

/// Data-driven step-up rule on Glfdr scores.
///
/// Hypotheses are ranked by increasing Glfdr and the k smallest are rejected,
/// k being the largest rank at which the running d-weighted mean of the
/// ranked Glfdr values stays at or below `alpha`. Ranks inside a run of tied
/// scores are skipped, so the rejected set is always `{ i : T_i ≤ threshold }`
/// and does not depend on how ties are ordered.
pub fn stepup(scores: &PosteriorScores, alpha: f64) -> Result<StepUp> {
    check_alpha(alpha)?;
    let m = scores.len();
    let t = &scores.glfdr;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));

    let (mut num, mut den) = (0.0, 0.0);
    let mut k = 0;
    for (j, &i) in order.iter().enumerate() {
        num += t[i] * scores.d[i];
        den += scores.d[i];
        let closes_group = j + 1 == m || t[order[j + 1]] > t[i];
        if !closes_group {
            continue;
        }
        let mean = if den == 0.0 { 0.0 } else { num / den };
        if mean <= alpha {
            k = j + 1;
        }
    }

    let mut delta = vec![false; m];
    for &i in &order[..k] {
        delta[i] = true;
    }
    let threshold = if k == 0 { 0.0 } else { t[order[k - 1]] };
    Ok(StepUp {
        k,
        decisions: DecisionVector::new(delta),
        threshold,
    })
}

/// Simulate `n_reps` data sets and score them under the true model.
///
/// Replicate `r` always uses stream `(seed, r)`, so results do not depend on
/// the number of worker threads.
pub fn simulate_scored(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    n_reps: usize,
    m: usize,
    seed: u64,
) -> Result<(Vec<SimulatedSample>, Vec<PosteriorScores>)> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    let out: Result<Vec<_>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| {
            let s = sample(model, m, seed, r)?;
            let sc = posterior_scores(model, spec, &s.x)?;
            Ok((s, sc))
        })
        .collect();
    Ok(out?.into_iter().unzip())
}

/// Which end of [0, 1] a Monte Carlo oracle cutoff was pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffBoundary {
    /// Rejecting everything already meets the level.
    RejectAll,
    /// Even the single smallest score exceeds the level.
    RejectNone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCutoff {
    pub cutoff: f64,
    pub boundary: Option<CutoffBoundary>,
    /// Simulated mFDR* of the rule `Glfdr ≤ cutoff`.
    pub achieved: ErrorRateEstimate,
}

/// Bisection width on the threshold scale.
pub const MC_CUTOFF_TOL: f64 = 1e-4;

/// Largest threshold on an increasing-in-`t` error curve whose value stays
/// at or below `alpha`.
pub fn sup_threshold<F: Fn(f64) -> f64>(
    curve: F,
    alpha: f64,
    lo_start: f64,
) -> (f64, Option<CutoffBoundary>) {
    if curve(1.0) <= alpha {
        return (1.0, Some(CutoffBoundary::RejectAll));
    }
    if curve(lo_start) > alpha {
        return (0.0, Some(CutoffBoundary::RejectNone));
    }
    let (mut lo, mut hi) = (lo_start, 1.0);
    while hi - lo > MC_CUTOFF_TOL {
        let mid = 0.5 * (lo + hi);
        if curve(mid) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, None)
}

/// Monte Carlo oracle cutoff sup{ t : mFDR*(Glfdr ≤ t) ≤ α } for a known model.
pub fn oracle_cutoff_mc(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    alpha: f64,
    n_reps: usize,
    m: usize,
    seed: u64,
) -> Result<OracleCutoff> {
    check_alpha(alpha)?;
    let (samples, scores) = simulate_scored(model, spec, n_reps, m, seed)?;
    let glfdr: Vec<Vec<f64>> = scores.into_iter().map(|s| s.glfdr).collect();
    let rates = ThresholdRates::new(&glfdr, &samples, spec)?;
    let (cutoff, boundary) =
        sup_threshold(|t| rates.mfdr_star_at(t).value, alpha, rates.min_score());
    Ok(OracleCutoff {
        cutoff,
        boundary,
        achieved: rates.mfdr_star_at(cutoff),
    })
}

/// Unweighted mFDR of the symmetric rule |X| ≥ c.
pub fn pvalue_mfdr(model: &TwoGroupsModel, c: f64) -> f64 {
    let null = model.pi0() * psi(-c, c).unwrap_or(0.0);
    let alt: f64 = model
        .alt()
        .components()
        .iter()
        .map(|k| {
            let sd = (1.0 + k.tau * k.tau).sqrt();
            k.weight * psi((-c - k.center) / sd, (c - k.center) / sd).unwrap_or(0.0)
        })
        .sum();
    let den = null + model.pi1() * alt;
    if den == 0.0 {
        0.0
    } else {
        null / den
    }
}

/// Cutoff c of the p-value oracle: the symmetric rule |X| ≥ c whose
/// unweighted mFDR equals `alpha`.
pub fn pvalue_oracle_cutoff(model: &TwoGroupsModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < model.pi0()) {
        return Err(Error::Unattainable {
            alpha,
            lo: 0.0,
            hi: model.pi0(),
        });
    }
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    if pvalue_mfdr(model, hi) > alpha {
        return Err(Error::NumericalFailure(format!(
            "p-value rule mFDR stays above {alpha} on [0, 40]"
        )));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if pvalue_mfdr(model, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::glfdr_scores;

    fn scores(t: &[f64], d: &[f64]) -> PosteriorScores {
        PosteriorScores {
            fdr: t.iter().zip(d).map(|(a, b)| a * b).collect(),
            w: vec![1.0; t.len()],
            glfdr: t.to_vec(),
            d: d.to_vec(),
        }
    }

    #[test]
    fn stepup_examples() {
        let s = scores(&[0.01, 0.05, 0.20], &[1.0; 3]);
        let r = stepup(&s, 0.05).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.decisions.delta, vec![true, true, false]);
        assert_eq!(r.threshold, 0.05);

        let s = scores(&[0.02, 0.10], &[3.4, 1.0]);
        assert_eq!(stepup(&s, 0.05).unwrap().k, 2);

        let s = scores(&[0.2, 0.3, 0.06], &[1.0; 3]);
        let r = stepup(&s, 0.05).unwrap();
        assert_eq!(r.k, 0);
        assert_eq!(r.threshold, 0.0);
        assert_eq!(r.decisions.num_rejected, 0);
    }

    #[test]
    fn stepup_unsorted_input() {
        let s = scores(&[0.20, 0.01, 0.05], &[1.0; 3]);
        let r = stepup(&s, 0.05).unwrap();
        assert_eq!(r.decisions.delta, vec![false, true, true]);
    }

    #[test]
    fn stepup_rejects_bad_alpha() {
        let s = scores(&[0.1], &[1.0]);
        assert!(stepup(&s, 0.0).is_err());
        assert!(stepup(&s, 1.0).is_err());
    }

    #[test]
    fn tie_order_does_not_matter() {
        // Literal rank-by-rank scanning would give k = 2 for one ordering of
        // the tied pair and k = 1 for the other.
        let a = scores(&[0.01, 0.06, 0.06], &[1.0, 1.0, 5.0]);
        let b = scores(&[0.01, 0.06, 0.06], &[1.0, 5.0, 1.0]);
        let ra = stepup(&a, 0.04).unwrap();
        let rb = stepup(&b, 0.04).unwrap();
        assert_eq!(ra.decisions, rb.decisions);
        assert_eq!(ra.k, 1);
    }

    #[test]
    fn suncai_reduction() {
        let fdr = [0.001, 0.3, 0.02, 0.04, 0.5, 0.07, 0.01];
        let s = glfdr_scores(&fdr, &[1.0; 7]).unwrap();
        let r = stepup(&s, 0.05).unwrap();
        // Independent scan: running mean of sorted lfdr.
        let mut sorted = fdr.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut k = 0;
        let mut acc = 0.0;
        for (j, v) in sorted.iter().enumerate() {
            acc += v;
            if acc / (j + 1) as f64 <= 0.05 {
                k = j + 1;
            }
        }
        assert_eq!(r.k, k);
    }

    #[test]
    fn pvalue_rule_limits() {
        let m = TwoGroupsModel::study2(0.5).unwrap();
        assert!((pvalue_mfdr(&m, 0.0) - 0.8).abs() < 1e-15);
        assert!(pvalue_mfdr(&m, 12.0) < 1e-12);
        assert!(pvalue_oracle_cutoff(&m, 0.8).is_err());
        assert!(pvalue_oracle_cutoff(&m, 0.0).is_err());
        let c = pvalue_oracle_cutoff(&m, 0.05).unwrap();
        assert!((pvalue_mfdr(&m, c) - 0.05).abs() < 1e-8);
    }

    #[test]
    fn sup_threshold_boundaries() {
        assert_eq!(
            sup_threshold(|_| 0.01, 0.05, 0.0),
            (1.0, Some(CutoffBoundary::RejectAll))
        );
        assert_eq!(
            sup_threshold(|_| 0.5, 0.05, 0.0),
            (0.0, Some(CutoffBoundary::RejectNone))
        );
        let (c, b) = sup_threshold(|t| t * 0.5, 0.05, 0.0);
        assert!(b.is_none());
        assert!((c - 0.1).abs() <= MC_CUTOFF_TOL);
    }
}
