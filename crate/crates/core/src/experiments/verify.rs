//! Cross-module property checks with measured margins.
//!
//! Each check returns a [`CheckResult`] instead of failing, so a single run
//! reports every verdict. Checks that exercise a scoring rule take it as a
//! [`Scorer`] so that a deliberately broken rule can be fed through them.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analytic_oracle::{
    cutoff_roots, find_tstar, mfdr_star_closed, mfnr_closed, mfnr_star_closed, CutoffPair,
};
use crate::error::Result;
use crate::error_rates::{
    empirical_rates, max_standardized_violation, mfdr_star_curve, ThresholdRates,
};
use crate::model::{replicate_rng, sample, SeveritySpec, SimulatedSample, TwoGroupsModel};
use crate::posterior::{
    bayes_rule, glfdr_scores, lfdr_vec, posterior_scores, severity_weight_quadrature,
    severity_weight_vec, weighted_alt_density, DecisionVector,
};
use crate::procedures::simulate_scored;
use crate::quadrature::Simpson;

/// Maps observations to Glfdr scores under a model.
pub type Scorer<'a> = &'a (dyn Fn(&TwoGroupsModel, &[f64]) -> Result<Vec<f64>> + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Small,
    Full,
}

impl Budget {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "small" => Some(Budget::Small),
            "full" => Some(Budget::Full),
            _ => None,
        }
    }

    fn reps(&self) -> usize {
        match self {
            Budget::Small => 200,
            Budget::Full => 2000,
        }
    }

    fn ratio_draws(&self) -> usize {
        match self {
            Budget::Small => 200_000,
            Budget::Full => 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured statistic the verdict is based on.
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: measured <= limit,
            measured,
            limit,
            detail,
        }
    }

    fn errored(name: &str, err: crate::Error) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            measured: f64::NAN,
            limit: f64::NAN,
            detail: format!("error: {err}"),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} measured={:.3e} limit={:.3e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.limit,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Glfdr scores from the true model.
pub fn glfdr_scorer(
    spec: SeveritySpec,
) -> impl Fn(&TwoGroupsModel, &[f64]) -> Result<Vec<f64>> + Sync {
    move |model, x| Ok(posterior_scores(model, spec, x)?.glfdr)
}

fn study2_model() -> TwoGroupsModel {
    TwoGroupsModel::study2(0.5).expect("valid")
}

// ---------------------------------------------------------------------------
// Bayes rule against exhaustive enumeration
// ---------------------------------------------------------------------------

const ATOMS: [f64; 3] = [-2.0, 1.0, 3.0];
const ATOM_PROBS: [f64; 3] = [0.3, 0.5, 0.2];
const X_GRID: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

/// Per-coordinate latent state: index 0 is the null, 1..=3 the atoms.
fn state_mu(state: usize) -> Option<f64> {
    if state == 0 {
        None
    } else {
        Some(ATOMS[state - 1])
    }
}

fn lik_table() -> Vec<Vec<f64>> {
    // P(X = x_j | μ) on the grid, normalized per μ.
    (0..4)
        .map(|s| {
            let mu = state_mu(s).unwrap_or(0.0);
            let raw: Vec<f64> = X_GRID
                .iter()
                .map(|x| (-0.5 * (x - mu) * (x - mu)).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Joint prior over the m latent states. The non-null indicators are
/// positively dependent: every all-equal θ configuration gets extra mass.
fn joint_prior(states: &[usize]) -> f64 {
    let pi1 = 0.3;
    let mut p = 1.0;
    for &s in states {
        p *= if s == 0 {
            1.0 - pi1
        } else {
            pi1 * ATOM_PROBS[s - 1]
        };
    }
    let all_alt = states.iter().all(|&s| s != 0);
    let all_null = states.iter().all(|&s| s == 0);
    if all_alt || all_null {
        p * 2.0
    } else {
        p
    }
}

fn decode(mut code: usize, base: usize, m: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push(code % base);
        code /= base;
    }
    out
}

/// Worst excess posterior loss of the Bayes rule over the best of all 2^m
/// decision vectors, across every data configuration for m = 1, 2, 3.
pub fn bayes_brute_force() -> CheckResult {
    let lik = lik_table();
    let mut worst = 0.0_f64;
    let mut cases = 0usize;
    for m in 1..=3usize {
        let n_states = 4usize.pow(m as u32);
        let n_obs = X_GRID.len().pow(m as u32);
        for spec in [
            SeveritySpec::SQUARED,
            SeveritySpec::Constant,
            SeveritySpec::Power(1.0),
        ] {
            for lambda in [0.5, 1.0, 2.0, 5.0] {
                for obs in 0..n_obs {
                    let xs = decode(obs, X_GRID.len(), m);
                    let mut post: Vec<(Vec<usize>, f64)> = (0..n_states)
                        .map(|code| {
                            let st = decode(code, 4, m);
                            let mut p = joint_prior(&st);
                            for (s, x) in st.iter().zip(&xs) {
                                p *= lik[*s][*x];
                            }
                            (st, p)
                        })
                        .collect();
                    let z: f64 = post.iter().map(|(_, p)| p).sum();
                    for (_, p) in &mut post {
                        *p /= z;
                    }

                    let mut fdr = vec![0.0; m];
                    let mut sev = vec![0.0; m];
                    for (st, p) in &post {
                        for i in 0..m {
                            match state_mu(st[i]) {
                                None => fdr[i] += p,
                                Some(mu) => sev[i] += p * spec.eval(mu),
                            }
                        }
                    }
                    let w: Vec<f64> = (0..m).map(|i| sev[i] / (1.0 - fdr[i])).collect();
                    let scores = glfdr_scores(&fdr, &w).expect("valid posteriors");
                    let bayes = bayes_rule(&scores, lambda).expect("positive lambda");

                    let loss = |delta: &[bool]| -> f64 {
                        post.iter()
                            .map(|(st, p)| {
                                let l: f64 = (0..m)
                                    .map(|i| match (delta[i], state_mu(st[i])) {
                                        (true, None) => lambda,
                                        (false, Some(mu)) => spec.eval(mu),
                                        _ => 0.0,
                                    })
                                    .sum();
                                p * l / m as f64
                            })
                            .sum()
                    };
                    let best = (0..1usize << m)
                        .map(|bits| {
                            let d: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
                            loss(&d)
                        })
                        .fold(f64::INFINITY, f64::min);
                    let excess = (loss(&bayes.delta) - best) / best.max(1.0);
                    worst = worst.max(excess);
                    cases += 1;
                }
            }
        }
    }
    CheckResult::at_most(
        "bayes_brute_force",
        worst,
        1e-12,
        format!("{cases} data configurations, m = 1..3"),
    )
}

// ---------------------------------------------------------------------------
// Distribution of Glfdr under the null and the severity-tilted alternative
// ---------------------------------------------------------------------------

/// Checks that the law of T under the severity-tilted alternative has
/// density a(1−t)/(b·t) against its law under the null, with a = π0 and
/// b = π1·E[s(μ) | θ = 1]. Bin masses under the tilted alternative are
/// compared to null draws reweighted by that ratio; the statistic is the
/// largest absolute z-score over nine bins covering [0.05, 0.95].
pub fn likelihood_ratio_check(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    scorer: Scorer<'_>,
    draws: usize,
    seed: u64,
) -> CheckResult {
    const NAME: &str = "glfdr_likelihood_ratio";
    let run = || -> Result<CheckResult> {
        let beta = model.mean_severity(spec)?;
        let (a, b) = (model.pi0(), model.pi1() * beta);

        let mut rng0 = replicate_rng(seed, 0);
        let x0: Vec<f64> = (0..draws).map(|_| rng0.sample(StandardNormal)).collect();
        let mut rng1 = replicate_rng(seed, 1);
        let [minus, plus] = model.alt().components();
        let mut x1 = Vec::with_capacity(draws);
        let mut wt1 = Vec::with_capacity(draws);
        for _ in 0..draws {
            let c = if rng1.random::<f64>() < minus.weight {
                minus
            } else {
                plus
            };
            let mu = if c.tau > 0.0 {
                c.center + c.tau * rng1.sample::<f64, _>(StandardNormal)
            } else {
                c.center
            };
            x1.push(mu + rng1.sample::<f64, _>(StandardNormal));
            wt1.push(spec.eval(mu) / beta);
        }
        let t0 = scorer(model, &x0)?;
        let t1 = scorer(model, &x1)?;

        const BINS: usize = 9;
        let (lo, hi) = (0.05, 0.95);
        let width = (hi - lo) / BINS as f64;
        let bin_of = |t: f64| -> Option<usize> {
            if (lo..hi).contains(&t) {
                Some((((t - lo) / width) as usize).min(BINS - 1))
            } else {
                None
            }
        };
        let mut s1 = [0.0; BINS];
        let mut ss1 = [0.0; BINS];
        let mut s0 = [0.0; BINS];
        let mut ss0 = [0.0; BINS];
        for (&t, &w) in t1.iter().zip(&wt1) {
            if let Some(k) = bin_of(t) {
                s1[k] += w;
                ss1[k] += w * w;
            }
        }
        for &t in &t0 {
            if let Some(k) = bin_of(t) {
                let r = a * (1.0 - t) / (b * t);
                s0[k] += r;
                ss0[k] += r * r;
            }
        }
        let n = draws as f64;
        let mut worst = 0.0_f64;
        for k in 0..BINS {
            let (m1, m0) = (s1[k] / n, s0[k] / n);
            let var = (ss1[k] / n - m1 * m1) / n + (ss0[k] / n - m0 * m0) / n;
            let z = if var > 0.0 {
                (m1 - m0).abs() / var.sqrt()
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        Ok(CheckResult::at_most(
            NAME,
            worst,
            4.0,
            format!("max |z| over {BINS} bins, {draws} draws per arm"),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

// ---------------------------------------------------------------------------
// Cutoffs are level sets of the scorer
// ---------------------------------------------------------------------------

/// |T(c_l) − t| and |T(c_u) − t| on the two-point model, for several t.
pub fn cutoff_level_set(scorer: Scorer<'_>) -> CheckResult {
    const NAME: &str = "cutoff_level_set";
    let run = || -> Result<CheckResult> {
        let model = study2_model();
        let mut worst = 0.0_f64;
        for t in [0.01, 0.05, 0.2, 0.5, 0.8] {
            let cuts = cutoff_roots(t, &model, SeveritySpec::SQUARED)?;
            let scores = scorer(&model, &[cuts.c_l, cuts.c_u])?;
            for s in scores {
                worst = worst.max((s - t).abs());
            }
        }
        Ok(CheckResult::at_most(
            NAME,
            worst,
            1e-8,
            "max |T(c) - t|".into(),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

// ---------------------------------------------------------------------------
// Monotonicity of mFDR* in the threshold
// ---------------------------------------------------------------------------

/// The closed-form mFDR* of `Glfdr ≤ t` on a 200-point grid.
pub fn monotone_analytic() -> CheckResult {
    const NAME: &str = "mfdr_monotone_analytic";
    let run = || -> Result<CheckResult> {
        let mut worst = 0.0_f64;
        for pi11 in [0.1, 0.5, 0.9] {
            let model = TwoGroupsModel::study2(pi11)?;
            let grid: Vec<f64> = (1..=200).map(|k| k as f64 / 201.0).collect();
            let mut err = None;
            let curve = mfdr_star_curve(
                |t| match cutoff_roots(t, &model, SeveritySpec::SQUARED)
                    .and_then(|c| mfdr_star_closed(&c, &model, SeveritySpec::SQUARED))
                {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                },
                &grid,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            worst = worst.max(curve.max_violation);
        }
        Ok(CheckResult::at_most(
            NAME,
            worst,
            0.0,
            "largest decrease on 200-point grid, pi11 in {0.1, 0.5, 0.9}".into(),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

/// Simulated mFDR* of `Glfdr ≤ t` on a 50-point grid; decreases must stay
/// within three standard errors.
pub fn monotone_mc(n_reps: usize, m: usize, seed: u64) -> CheckResult {
    const NAME: &str = "mfdr_monotone_mc";
    let run = || -> Result<CheckResult> {
        let model = study2_model();
        let (samples, scores) = simulate_scored(&model, SeveritySpec::SQUARED, n_reps, m, seed)?;
        let glfdr: Vec<Vec<f64>> = scores.into_iter().map(|s| s.glfdr).collect();
        let rates = ThresholdRates::new(&glfdr, &samples, SeveritySpec::SQUARED)?;
        let points: Vec<_> = (1..=50)
            .map(|k| {
                let t = k as f64 / 51.0;
                (t, rates.mfdr_star_at(t))
            })
            .collect();
        let worst = max_standardized_violation(&points);
        Ok(CheckResult::at_most(
            NAME,
            worst,
            3.0,
            format!("largest decrease in SE units, {n_reps} x {m} draws"),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

// ---------------------------------------------------------------------------
// Closed forms against simulation and quadrature
// ---------------------------------------------------------------------------

/// Closed-form mFDR*, mFNR* and mFNR of the oracle's cuts against their
/// simulated values; statistic is the largest |difference| in SE units.
pub fn closed_vs_mc(n_reps: usize, m: usize, seed: u64) -> CheckResult {
    const NAME: &str = "closed_form_vs_mc";
    let run = || -> Result<CheckResult> {
        let model = study2_model();
        let spec = SeveritySpec::SQUARED;
        let (_, cuts) = find_tstar(&model, spec, 0.05)?;
        let samples: Vec<SimulatedSample> = (0..n_reps as u64)
            .into_par_iter()
            .map(|r| sample(&model, m, seed, r))
            .collect::<Result<_>>()?;
        let decisions: Vec<DecisionVector> = samples
            .iter()
            .map(|s| DecisionVector::new(s.x.iter().map(|&x| rejects(&cuts, x)).collect()))
            .collect();
        let (fdr_star, fnr_star) = empirical_rates(&decisions, &samples, spec)?;
        let (_, fnr) = empirical_rates(&decisions, &samples, SeveritySpec::Constant)?;
        let pairs = [
            (mfdr_star_closed(&cuts, &model, spec)?, fdr_star),
            (mfnr_star_closed(&cuts, &model, spec)?, fnr_star),
            (mfnr_closed(&cuts, &model)?, fnr),
        ];
        let worst = pairs
            .iter()
            .map(|(closed, est)| (closed - est.value).abs() / est.std_error)
            .fold(0.0, f64::max);
        Ok(CheckResult::at_most(
            NAME,
            worst,
            3.0,
            format!(
                "max |closed - MC| / SE over 3 rates, {} coordinates",
                n_reps * m
            ),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

fn rejects(cuts: &CutoffPair, x: f64) -> bool {
    use crate::analytic_oracle::Region;
    match cuts.region {
        Region::All => true,
        Region::None => false,
        Region::Outside => x <= cuts.c_l || x >= cuts.c_u,
    }
}

/// Direct quadrature of ∫ s(μ)·φ(x−μ)·h(μ) dμ for a normal-mixture
/// alternative over [min center − 10τ, max center + 10τ].
fn raw_weighted_density(model: &TwoGroupsModel, spec: SeveritySpec, x: f64) -> Result<f64> {
    let comps = model.alt().components();
    let tau = model.alt().tau();
    let lo = comps.iter().map(|c| c.center).fold(f64::INFINITY, f64::min) - 10.0 * tau;
    let hi = comps
        .iter()
        .map(|c| c.center)
        .fold(f64::NEG_INFINITY, f64::max)
        + 10.0 * tau;
    let h = |mu: f64| -> f64 {
        comps
            .iter()
            .map(|c| c.weight * crate::normal::pdf((mu - c.center) / tau) / tau)
            .sum()
    };
    let quad = Simpson {
        rel_tol: 1e-11,
        ..Simpson::default()
    };
    quad.integrate(
        |mu| spec.eval(mu) * crate::normal::pdf(x - mu) * h(mu),
        lo,
        hi,
    )
}

/// Closed-form w(x) and H(x) against quadrature on x ∈ [−6, 6].
pub fn closed_vs_quadrature() -> CheckResult {
    const NAME: &str = "closed_form_vs_quadrature";
    let run = || -> Result<CheckResult> {
        let model = TwoGroupsModel::study1();
        let spec = SeveritySpec::SQUARED;
        let xs: Vec<f64> = (0..=120).map(|k| -6.0 + k as f64 * 0.1).collect();
        let closed_w = severity_weight_vec(&model, spec, &xs)?;
        let quad_w = severity_weight_quadrature(&model, spec, &xs)?;
        let mut worst = 0.0_f64;
        for (i, &x) in xs.iter().enumerate() {
            worst = worst.max(((closed_w[i] - quad_w[i]) / closed_w[i]).abs());
            let h = weighted_alt_density(&model, spec, x)?;
            let raw = raw_weighted_density(&model, spec, x)?;
            worst = worst.max(((h - raw) / raw).abs());
        }
        Ok(CheckResult::at_most(
            NAME,
            worst,
            1e-6,
            "max relative error of w(x) and H(x)".into(),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

/// Constant severity must turn Glfdr into lfdr and every d-value into 1.
pub fn constant_reduction() -> CheckResult {
    const NAME: &str = "constant_severity_reduction";
    let run = || -> Result<CheckResult> {
        let xs: Vec<f64> = (0..=240).map(|k| -6.0 + k as f64 * 0.05).collect();
        let mut worst = 0.0_f64;
        for model in [TwoGroupsModel::study1(), study2_model()] {
            let s = posterior_scores(&model, SeveritySpec::Constant, &xs)?;
            let lfdr = lfdr_vec(&model, &xs)?;
            for ((t, d), l) in s.glfdr.iter().zip(&s.d).zip(&lfdr) {
                worst = worst.max((t - l).abs()).max((d - 1.0).abs());
            }
        }
        Ok(CheckResult::at_most(
            NAME,
            worst,
            1e-12,
            "max |Glfdr - lfdr|, |d - 1|".into(),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::errored(NAME, e))
}

fn suffixed(mut check: CheckResult, tag: &str) -> CheckResult {
    check.name = format!("{}/{tag}", check.name);
    check
}

/// Run every check. `Small` finishes in well under two minutes on one core.
pub fn verify_suite(budget: Budget, seed: u64) -> VerifyReport {
    let reps = budget.reps();
    let scorer = glfdr_scorer(SeveritySpec::SQUARED);
    let checks = vec![
        bayes_brute_force(),
        suffixed(
            likelihood_ratio_check(
                &study2_model(),
                SeveritySpec::SQUARED,
                &scorer,
                budget.ratio_draws(),
                seed,
            ),
            "two_point",
        ),
        suffixed(
            likelihood_ratio_check(
                &TwoGroupsModel::study1(),
                SeveritySpec::SQUARED,
                &scorer,
                budget.ratio_draws(),
                seed.wrapping_add(1),
            ),
            "mixture",
        ),
        cutoff_level_set(&scorer),
        monotone_analytic(),
        monotone_mc(reps, 1000, seed.wrapping_add(2)),
        closed_vs_mc(reps, 1000, seed.wrapping_add(3)),
        closed_vs_quadrature(),
        constant_reduction(),
    ];
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_passes() {
        let r = bayes_brute_force();
        assert!(r.passed, "{r}");
    }

    #[test]
    fn deterministic_checks_pass() {
        for r in [
            monotone_analytic(),
            closed_vs_quadrature(),
            constant_reduction(),
            cutoff_level_set(&glfdr_scorer(SeveritySpec::SQUARED)),
        ] {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn budget_parse() {
        assert_eq!(Budget::parse("small"), Some(Budget::Small));
        assert_eq!(Budget::parse("full"), Some(Budget::Full));
        assert_eq!(Budget::parse("huge"), None);
    }
}
