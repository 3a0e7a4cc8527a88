//! Per-hypothesis posterior quantities under the independence model.
//!
//! For each observation we need the posterior null probability (local fdr),
//! the posterior mean severity given that the hypothesis is non-null, and the
//! generalized local fdr that combines the two. Densities are evaluated in log
//! space throughout.

use crate::error::{Error, Result};
use crate::model::{AlternativeSpec, Component, SeveritySpec, TwoGroupsModel};
use crate::normal::{ln_1p_exp, ln_pdf, ln_pdf_scaled, log_sum_exp};
use crate::quadrature::Simpson;

/// Posterior scores for a batch of hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorScores {
    /// P(θ_i = 0 | X).
    pub fdr: Vec<f64>,
    /// E[s(μ_i) | θ_i = 1, X].
    pub w: Vec<f64>,
    /// Generalized local fdr: fdr / (fdr + w·(1 − fdr)).
    pub glfdr: Vec<f64>,
    /// fdr + w·(1 − fdr), i.e. fdr / glfdr.
    pub d: Vec<f64>,
}

impl PosteriorScores {
    pub fn len(&self) -> usize {
        self.fdr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fdr.is_empty()
    }
}

/// Binary decisions; `true` rejects the null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionVector {
    pub delta: Vec<bool>,
    pub num_rejected: usize,
}

impl DecisionVector {
    pub fn new(delta: Vec<bool>) -> Self {
        let num_rejected = delta.iter().filter(|&&d| d).count();
        Self {
            delta,
            num_rejected,
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::OutOfRange {
            index,
            msg: format!("observation must be finite, got {}", x[index]),
        }),
        None => Ok(()),
    }
}

/// Variance of an observation drawn from component `c`.
#[inline]
fn marginal_var(c: &Component) -> f64 {
    1.0 + c.tau * c.tau
}

/// log(π1k · f1k(x)) for each component.
fn component_log_evidence(model: &TwoGroupsModel, x: f64) -> [f64; 2] {
    model.alt().components().map(|c| {
        if c.weight == 0.0 {
            f64::NEG_INFINITY
        } else {
            c.weight.ln() + ln_pdf_scaled(x, c.center, marginal_var(&c))
        }
    })
}

/// log f1(x), the marginal alternative density.
pub fn ln_alt_density(model: &TwoGroupsModel, x: f64) -> f64 {
    log_sum_exp(&component_log_evidence(model, x))
}

fn lfdr_scalar(model: &TwoGroupsModel, x: f64) -> f64 {
    let log_odds_alt = model.pi1().ln() + ln_alt_density(model, x) - model.pi0().ln() - ln_pdf(x);
    (-ln_1p_exp(log_odds_alt)).exp()
}

/// Local fdr P(θ_i = 0 | x_i) for each observation.
pub fn lfdr_vec(model: &TwoGroupsModel, x: &[f64]) -> Result<Vec<f64>> {
    check_finite(x)?;
    Ok(x.iter().map(|&xi| lfdr_scalar(model, xi)).collect())
}

/// Posterior mean and variance of μ given x within a Gaussian component.
#[inline]
fn component_posterior(c: &Component, x: f64) -> (f64, f64) {
    let t2 = c.tau * c.tau;
    let denom = 1.0 + t2;
    ((t2 * x + c.center) / denom, t2 / denom)
}

/// E[s(μ) | x, component] when the component posterior is available in
/// closed form.
fn component_severity_closed(c: &Component, spec: SeveritySpec, x: f64) -> Option<f64> {
    match spec {
        SeveritySpec::Constant => Some(1.0),
        _ if c.tau == 0.0 => Some(spec.eval(c.center)),
        s if s.is_squared() => {
            let (m, v) = component_posterior(c, x);
            Some(v + m * m)
        }
        _ => None,
    }
}

/// Integrals of s(μ)·φ(x−μ)·N(μ; c, τ²) and φ(x−μ)·N(μ; c, τ²), both divided
/// by the component evidence N(x; c, 1+τ²) so they stay O(1) for any x.
fn component_integrals(c: &Component, spec: SeveritySpec, x: f64) -> Result<(f64, f64)> {
    let ln_evidence = ln_pdf_scaled(x, c.center, marginal_var(c));
    let tau2 = c.tau * c.tau;
    let kernel =
        move |mu: f64| (ln_pdf(x - mu) + ln_pdf_scaled(mu, c.center, tau2) - ln_evidence).exp();
    let (m, v) = component_posterior(c, x);
    let half = 12.0 * v.sqrt();
    let (lo, hi) = (m - half, m + half);
    let quad = Simpson::default();
    let split = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        if lo < 0.0 && 0.0 < hi {
            Ok(quad.integrate(f, lo, 0.0)? + quad.integrate(f, 0.0, hi)?)
        } else {
            quad.integrate(f, lo, hi)
        }
    };
    let weighted = split(&|mu| spec.eval(mu) * kernel(mu))?;
    let mass = split(&kernel)?;
    Ok((weighted, mass))
}

fn component_weights(model: &TwoGroupsModel, x: f64) -> [f64; 2] {
    let le = component_log_evidence(model, x);
    let total = log_sum_exp(&le);
    le.map(|l| (l - total).exp())
}

fn severity_weight_scalar(model: &TwoGroupsModel, spec: SeveritySpec, x: f64) -> Result<f64> {
    if spec == SeveritySpec::Constant {
        return Ok(1.0);
    }
    let comps = model.alt().components();
    let probs = component_weights(model, x);
    let mut w = 0.0;
    for (c, p) in comps.iter().zip(probs) {
        if p == 0.0 {
            continue;
        }
        let e = match component_severity_closed(c, spec, x) {
            Some(e) => e,
            None => {
                let (num, den) = component_integrals(c, spec, x)?;
                num / den
            }
        };
        w += p * e;
    }
    Ok(w)
}

/// Severity weights w_i = E[s(μ_i) | θ_i = 1, x_i].
///
/// Atoms and the squared severity under a normal mixture use closed forms;
/// any other severity on a normal mixture is integrated numerically.
pub fn severity_weight_vec(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    x: &[f64],
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_finite(x)?;
    x.iter()
        .map(|&xi| severity_weight_scalar(model, spec, xi))
        .collect()
}

/// Severity weights computed by numerical integration for every component
/// with a spread, ignoring available closed forms. Atoms are still exact.
pub fn severity_weight_quadrature(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    x: &[f64],
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_finite(x)?;
    let comps = model.alt().components();
    x.iter()
        .map(|&xi| {
            let probs = component_weights(model, xi);
            let mut w = 0.0;
            for (c, p) in comps.iter().zip(probs) {
                if p == 0.0 {
                    continue;
                }
                let e = if c.tau == 0.0 {
                    spec.eval(c.center)
                } else {
                    let (num, den) = component_integrals(c, spec, xi)?;
                    num / den
                };
                w += p * e;
            }
            Ok(w)
        })
        .collect()
}

/// H(x) = E_h[s(μ)·φ(x − μ)], the severity-tilted alternative density.
pub fn weighted_alt_density(model: &TwoGroupsModel, spec: SeveritySpec, x: f64) -> Result<f64> {
    spec.validate()?;
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "x must be finite, got {x}"
        )));
    }
    let comps = model.alt().components();
    let le = component_log_evidence(model, x);
    let mut h = 0.0;
    for (c, l) in comps.iter().zip(le) {
        if l == f64::NEG_INFINITY {
            continue;
        }
        let e = match component_severity_closed(c, spec, x) {
            Some(e) => e,
            None => {
                let (num, den) = component_integrals(c, spec, x)?;
                num / den
            }
        };
        h += l.exp() * e;
    }
    Ok(h)
}

/// Marginal alternative density f1(x).
pub fn alt_density(model: &TwoGroupsModel, x: f64) -> f64 {
    ln_alt_density(model, x).exp()
}

#[inline]
fn glfdr_pair(fdr: f64, w: f64) -> (f64, f64) {
    let d = fdr + w * (1.0 - fdr);
    let t = if fdr == 0.0 {
        0.0
    } else if fdr == 1.0 || w == 0.0 {
        1.0
    } else {
        fdr / d
    };
    (t, d)
}

/// Combine local fdr and severity weights into Glfdr and d-values.
pub fn glfdr_scores(fdr: &[f64], w: &[f64]) -> Result<PosteriorScores> {
    if fdr.len() != w.len() {
        return Err(Error::LengthMismatch {
            what: "severity weights",
            expected: fdr.len(),
            got: w.len(),
        });
    }
    if let Some(index) = fdr.iter().position(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::OutOfRange {
            index,
            msg: format!("fdr must lie in [0, 1], got {}", fdr[index]),
        });
    }
    if let Some(index) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::OutOfRange {
            index,
            msg: format!(
                "severity weight must be finite and nonnegative, got {}",
                w[index]
            ),
        });
    }
    let (glfdr, d) = fdr.iter().zip(w).map(|(&f, &wi)| glfdr_pair(f, wi)).unzip();
    Ok(PosteriorScores {
        fdr: fdr.to_vec(),
        w: w.to_vec(),
        glfdr,
        d,
    })
}

/// Full scoring pipeline for observations under a known model.
pub fn posterior_scores(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    x: &[f64],
) -> Result<PosteriorScores> {
    let fdr = lfdr_vec(model, x)?;
    let w = severity_weight_vec(model, spec, x)?;
    glfdr_scores(&fdr, &w)
}

/// The Bayes rule for the severity-weighted loss with type I penalty `lambda`:
/// reject when fdr_i < (w_i/λ)·(1 − fdr_i). Exact ties accept.
pub fn bayes_rule(scores: &PosteriorScores, lambda: f64) -> Result<DecisionVector> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let delta = scores
        .fdr
        .iter()
        .zip(&scores.w)
        .map(|(&f, &w)| f < (w / lambda) * (1.0 - f))
        .collect();
    Ok(DecisionVector::new(delta))
}

/// Whether the alternative has closed-form posterior severity for `spec`.
pub fn has_closed_form(alt: &AlternativeSpec, spec: SeveritySpec) -> bool {
    match alt {
        AlternativeSpec::TwoPoint { .. } => true,
        AlternativeSpec::GaussianMixture { .. } => {
            spec == SeveritySpec::Constant || spec.is_squared()
        }
    }
}
