//! Severity-weighted marginal error rates.
//!
//! A true null contributes weight 1 and a false null with mean μ contributes
//! s(μ). mFDR* is the ratio of expected weighted false rejections to expected
//! weighted rejections; mFNR* is the analogous ratio over acceptances. Both are
//! ratios of expectations, so replicate sums are pooled before dividing.

use crate::error::{Error, Result};
use crate::model::{SeveritySpec, SimulatedSample};
use crate::posterior::{DecisionVector, PosteriorScores};

/// A ratio-of-means estimate aggregated over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRateEstimate {
    pub value: f64,
    pub numerator_mean: f64,
    pub denominator_mean: f64,
    pub n_replicates: usize,
    /// Set when the pooled denominator is zero; `value` is then 0.
    pub degenerate: bool,
    /// Delta-method standard error of `value`; NaN with fewer than two
    /// replicates, 0 when degenerate.
    pub std_error: f64,
}

impl ErrorRateEstimate {
    /// Pool per-replicate numerators and denominators.
    pub fn from_replicates(numerators: &[f64], denominators: &[f64]) -> Self {
        assert_eq!(numerators.len(), denominators.len());
        let n = numerators.len();
        let nf = n as f64;
        let num_mean = numerators.iter().sum::<f64>() / nf;
        let den_mean = denominators.iter().sum::<f64>() / nf;
        if den_mean == 0.0 {
            return Self {
                value: 0.0,
                numerator_mean: num_mean,
                denominator_mean: den_mean,
                n_replicates: n,
                degenerate: true,
                std_error: 0.0,
            };
        }
        let value = num_mean / den_mean;
        let std_error = if n < 2 {
            f64::NAN
        } else {
            // Linearization of N̄/D̄ around its value.
            let ss: f64 = numerators
                .iter()
                .zip(denominators)
                .map(|(a, b)| {
                    let r = a - value * b;
                    r * r
                })
                .sum();
            (ss / (nf - 1.0) / nf).sqrt() / den_mean
        };
        Self {
            value,
            numerator_mean: num_mean,
            denominator_mean: den_mean,
            n_replicates: n,
            degenerate: false,
            std_error,
        }
    }
}

#[inline]
fn truth_weight(theta: bool, mu: f64, spec: SeveritySpec) -> f64 {
    if theta {
        spec.eval(mu)
    } else {
        1.0
    }
}

/// Weighted mFDR* and mFNR* of a list of decisions against ground truth.
pub fn empirical_rates(
    decisions: &[DecisionVector],
    truth: &[SimulatedSample],
    spec: SeveritySpec,
) -> Result<(ErrorRateEstimate, ErrorRateEstimate)> {
    spec.validate()?;
    if decisions.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    if decisions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            what: "replicate list",
            expected: decisions.len(),
            got: truth.len(),
        });
    }
    let n = decisions.len();
    let (mut fdr_num, mut fdr_den) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut fnr_num, mut fnr_den) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (dv, s) in decisions.iter().zip(truth) {
        if dv.len() != s.len() {
            return Err(Error::LengthMismatch {
                what: "decision vector",
                expected: s.len(),
                got: dv.len(),
            });
        }
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for ((&rej, &theta), &mu) in dv.delta.iter().zip(&s.theta).zip(&s.mu) {
            let w = truth_weight(theta, mu, spec);
            if rej {
                if !theta {
                    a += 1.0;
                }
                b += w;
            } else {
                if theta {
                    c += w;
                }
                d += w;
            }
        }
        fdr_num.push(a);
        fdr_den.push(b);
        fnr_num.push(c);
        fnr_den.push(d);
    }
    Ok((
        ErrorRateEstimate::from_replicates(&fdr_num, &fdr_den),
        ErrorRateEstimate::from_replicates(&fnr_num, &fnr_den),
    ))
}

/// Posterior estimate of mFDR* for the rule rejecting every Glfdr ≤ `t`:
/// Σ T_i·d_i / Σ d_i over the rejected set, 0 when nothing is rejected.
pub fn posterior_mfdr_star(scores: &PosteriorScores, t: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&g, &d) in scores.glfdr.iter().zip(&scores.d) {
        if g <= t {
            num += g * d;
            den += d;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// An mFDR* curve on a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdrCurve {
    pub points: Vec<(f64, f64)>,
    /// max_j (value_j − value_{j+1})⁺; zero for a non-decreasing curve.
    pub max_violation: f64,
}

/// Evaluate an mFDR* evaluator on an increasing threshold grid.
pub fn mfdr_star_curve<F: FnMut(f64) -> f64>(mut evaluator: F, grid: &[f64]) -> Result<MfdrCurve> {
    validate_grid(grid)?;
    let points: Vec<(f64, f64)> = grid.iter().map(|&t| (t, evaluator(t))).collect();
    let max_violation = points
        .windows(2)
        .map(|w| (w[0].1 - w[1].1).max(0.0))
        .fold(0.0, f64::max);
    Ok(MfdrCurve {
        points,
        max_violation,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParameter(
            "grid values must lie in [0, 1]".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Largest decrease between neighbouring Monte Carlo estimates, in units of
/// the combined standard error of the pair.
pub fn max_standardized_violation(points: &[(f64, ErrorRateEstimate)]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let drop = w[0].1.value - w[1].1.value;
            if drop <= 0.0 {
                return 0.0;
            }
            let se = w[0].1.std_error.hypot(w[1].1.std_error);
            if se > 0.0 {
                drop / se
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Per-replicate cumulative sums for threshold rules on one set of scores.
#[derive(Debug, Clone)]
struct ReplicateCurve {
    sorted_scores: Vec<f64>,
    /// Prefix sums over the sorted order: true nulls rejected.
    cum_null: Vec<f64>,
    /// Prefix sums over the sorted order: severity of false nulls rejected.
    cum_sev: Vec<f64>,
}

impl ReplicateCurve {
    fn totals(&self) -> (f64, f64) {
        (
            *self.cum_null.last().unwrap_or(&0.0),
            *self.cum_sev.last().unwrap_or(&0.0),
        )
    }

    /// Prefix sums for the rule rejecting every score ≤ t.
    fn at(&self, t: f64) -> (f64, f64) {
        let k = self.sorted_scores.partition_point(|&s| s <= t);
        if k == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_null[k - 1], self.cum_sev[k - 1])
        }
    }
}

/// Ground-truth error rates of threshold rules `score ≤ t` across replicates,
/// evaluated for any `t` without rebuilding decision vectors.
#[derive(Debug, Clone)]
pub struct ThresholdRates {
    reps: Vec<ReplicateCurve>,
}

impl ThresholdRates {
    pub fn new(scores: &[Vec<f64>], truth: &[SimulatedSample], spec: SeveritySpec) -> Result<Self> {
        spec.validate()?;
        if scores.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one replicate".into(),
            ));
        }
        if scores.len() != truth.len() {
            return Err(Error::LengthMismatch {
                what: "replicate list",
                expected: scores.len(),
                got: truth.len(),
            });
        }
        let mut reps = Vec::with_capacity(scores.len());
        for (sc, s) in scores.iter().zip(truth) {
            if sc.len() != s.len() {
                return Err(Error::LengthMismatch {
                    what: "score vector",
                    expected: s.len(),
                    got: sc.len(),
                });
            }
            let mut order: Vec<usize> = (0..sc.len()).collect();
            order.sort_by(|&a, &b| sc[a].total_cmp(&sc[b]));
            let mut sorted_scores = Vec::with_capacity(sc.len());
            let mut cum_null = Vec::with_capacity(sc.len());
            let mut cum_sev = Vec::with_capacity(sc.len());
            let (mut n0, mut sv) = (0.0, 0.0);
            for i in order {
                if s.theta[i] {
                    sv += spec.eval(s.mu[i]);
                } else {
                    n0 += 1.0;
                }
                sorted_scores.push(sc[i]);
                cum_null.push(n0);
                cum_sev.push(sv);
            }
            reps.push(ReplicateCurve {
                sorted_scores,
                cum_null,
                cum_sev,
            });
        }
        Ok(Self { reps })
    }

    pub fn n_replicates(&self) -> usize {
        self.reps.len()
    }

    /// mFDR* and mFNR* of the rule rejecting every score ≤ `t`.
    pub fn rates_at(&self, t: f64) -> (ErrorRateEstimate, ErrorRateEstimate) {
        let n = self.reps.len();
        let (mut a, mut b, mut c, mut d) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for r in &self.reps {
            let (null_rej, sev_rej) = r.at(t);
            let (null_tot, sev_tot) = r.totals();
            a.push(null_rej);
            b.push(null_rej + sev_rej);
            c.push(sev_tot - sev_rej);
            d.push((null_tot - null_rej) + (sev_tot - sev_rej));
        }
        (
            ErrorRateEstimate::from_replicates(&a, &b),
            ErrorRateEstimate::from_replicates(&c, &d),
        )
    }

    pub fn mfdr_star_at(&self, t: f64) -> ErrorRateEstimate {
        self.rates_at(t).0
    }

    /// Smallest score across all replicates.
    pub fn min_score(&self) -> f64 {
        self.reps
            .iter()
            .filter_map(|r| r.sorted_scores.first().copied())
            .fold(f64::INFINITY, f64::min)
    }
}
