use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{sample, SeveritySpec, TwoGroupsModel};
use crate::posterior::posterior_scores;

/// Replicates per work unit. Fixed so that the reduction order, and hence
/// the floating-point result, is independent of the thread count.
const CHUNK: usize = 16;

/// Average weighted type II error after rejecting the `r` best-ranked
/// hypotheses, for the Glfdr and the lfdr rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct Study1Result {
    pub r: usize,
    pub beta_star_glfdr: f64,
    pub beta_star_lfdr: f64,
    pub n_reps: usize,
    /// Standard error of the paired difference glfdr − lfdr.
    pub diff_std_error: f64,
}

/// Suffix sums of `cost` taken in increasing order of `score`:
/// out[r] = Σ_{j ≥ r} cost_(j).
fn missed_after(score: &[f64], cost: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut out = vec![0.0; score.len() + 1];
    for r in (0..score.len()).rev() {
        out[r] = out[r + 1] + cost[order[r]];
    }
    out
}

struct Acc {
    glfdr: Vec<f64>,
    lfdr: Vec<f64>,
    diff_sq: Vec<f64>,
}

impl Acc {
    fn new(len: usize) -> Self {
        Self {
            glfdr: vec![0.0; len],
            lfdr: vec![0.0; len],
            diff_sq: vec![0.0; len],
        }
    }

    fn merge(&mut self, other: &Acc) {
        for r in 0..self.glfdr.len() {
            self.glfdr[r] += other.glfdr[r];
            self.lfdr[r] += other.lfdr[r];
            self.diff_sq[r] += other.diff_sq[r];
        }
    }
}

/// Ranking comparison: for every number of rejections R, the expected
/// severity of the signals left unrejected when hypotheses are ranked by
/// Glfdr versus by lfdr.
pub fn run_study1(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    m: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Study1Result>> {
    spec.validate()?;
    if m == 0 || n_reps == 0 {
        return Err(Error::InvalidParameter(
            "study 1 needs m >= 1 and at least one replicate".into(),
        ));
    }
    let chunks: Vec<(u64, u64)> = (0..n_reps)
        .step_by(CHUNK)
        .map(|start| (start as u64, (start + CHUNK).min(n_reps) as u64))
        .collect();
    let partials: Result<Vec<Acc>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Acc::new(m + 1);
            for rep in lo..hi {
                let s = sample(model, m, seed, rep)?;
                let scores = posterior_scores(model, spec, &s.x)?;
                let cost: Vec<f64> = s
                    .theta
                    .iter()
                    .zip(&s.mu)
                    .map(|(&t, &mu)| if t { spec.eval(mu) } else { 0.0 })
                    .collect();
                let g = missed_after(&scores.glfdr, &cost);
                let l = missed_after(&scores.fdr, &cost);
                for r in 0..=m {
                    acc.glfdr[r] += g[r];
                    acc.lfdr[r] += l[r];
                    let d = g[r] - l[r];
                    acc.diff_sq[r] += d * d;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = Acc::new(m + 1);
    for p in &partials? {
        total.merge(p);
    }
    let n = n_reps as f64;
    Ok((0..=m)
        .map(|r| {
            let g = total.glfdr[r] / n;
            let l = total.lfdr[r] / n;
            let mean_diff = g - l;
            let diff_std_error = if n_reps > 1 {
                let var = (total.diff_sq[r] / n - mean_diff * mean_diff).max(0.0) * n / (n - 1.0);
                (var / n).sqrt()
            } else {
                f64::NAN
            };
            Study1Result {
                r,
                beta_star_glfdr: g,
                beta_star_lfdr: l,
                n_reps,
                diff_std_error,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_sums() {
        let out = missed_after(&[0.3, 0.1, 0.2], &[1.0, 2.0, 4.0]);
        assert_eq!(out, vec![7.0, 5.0, 1.0, 0.0]);
    }

    #[test]
    fn small_run_shape() {
        let rows =
            run_study1(&TwoGroupsModel::study1(), SeveritySpec::SQUARED, 100, 10, 1).unwrap();
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[100].beta_star_glfdr, 0.0);
        assert_eq!(rows[100].beta_star_lfdr, 0.0);
        for w in rows.windows(2) {
            assert!(w[1].beta_star_glfdr <= w[0].beta_star_glfdr);
            assert!(w[1].beta_star_lfdr <= w[0].beta_star_lfdr);
        }
        // Nothing rejected: both rankings miss every signal.
        assert!((rows[0].beta_star_glfdr - rows[0].beta_star_lfdr).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_config() {
        assert!(run_study1(&TwoGroupsModel::study1(), SeveritySpec::SQUARED, 0, 10, 1).is_err());
        assert!(run_study1(&TwoGroupsModel::study1(), SeveritySpec::SQUARED, 10, 0, 1).is_err());
    }
}
