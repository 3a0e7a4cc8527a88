//! Two-groups model, severity functions and the independence sampler.
//!
//! Each coordinate is null with probability `pi0` (true mean 0) and otherwise
//! draws its mean from a two-component alternative: either two atoms or a
//! mixture of two normals with a common spread. Observations are the mean
//! plus unit-variance Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Cost attached to missing a signal of size `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeveritySpec {
    /// s(μ) ≡ 1: every missed signal costs the same.
    Constant,
    /// s(μ) = |μ|^p with p > 0.
    Power(f64),
}

impl SeveritySpec {
    /// The default squared-magnitude severity.
    pub const SQUARED: SeveritySpec = SeveritySpec::Power(2.0);

    pub fn validate(&self) -> Result<()> {
        match *self {
            SeveritySpec::Constant => Ok(()),
            SeveritySpec::Power(p) if p.is_finite() && p > 0.0 => Ok(()),
            SeveritySpec::Power(p) => Err(Error::InvalidParameter(format!(
                "severity power must be positive and finite, got {p}"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, mu: f64) -> f64 {
        match *self {
            SeveritySpec::Constant => 1.0,
            SeveritySpec::Power(2.0) => mu * mu,
            SeveritySpec::Power(p) => mu.abs().powf(p),
        }
    }

    pub(crate) fn is_squared(&self) -> bool {
        matches!(*self, SeveritySpec::Power(p) if p == 2.0)
    }
}

/// s(μ) for the given severity function.
pub fn severity(spec: SeveritySpec, mu: f64) -> f64 {
    spec.eval(mu)
}

/// Distribution of the non-null means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeSpec {
    /// Atoms at `mu_minus` (weight `pi11`) and `mu_plus` (weight `pi12`).
    TwoPoint {
        pi11: f64,
        pi12: f64,
        mu_minus: f64,
        mu_plus: f64,
    },
    /// `pi11·N(mu_minus, tau²) + pi12·N(mu_plus, tau²)`.
    GaussianMixture {
        pi11: f64,
        pi12: f64,
        mu_minus: f64,
        mu_plus: f64,
        tau: f64,
    },
}

/// One component of the alternative: mixing weight, center and spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub center: f64,
    pub tau: f64,
}

impl AlternativeSpec {
    pub fn two_point(pi11: f64, mu_minus: f64, mu_plus: f64) -> Result<Self> {
        let alt = AlternativeSpec::TwoPoint {
            pi11,
            pi12: 1.0 - pi11,
            mu_minus,
            mu_plus,
        };
        alt.validate()?;
        Ok(alt)
    }

    pub fn gaussian_mixture(pi11: f64, mu_minus: f64, mu_plus: f64, tau: f64) -> Result<Self> {
        let alt = AlternativeSpec::GaussianMixture {
            pi11,
            pi12: 1.0 - pi11,
            mu_minus,
            mu_plus,
            tau,
        };
        alt.validate()?;
        Ok(alt)
    }

    pub fn validate(&self) -> Result<()> {
        let (pi11, pi12, lo, hi) = match *self {
            AlternativeSpec::TwoPoint {
                pi11,
                pi12,
                mu_minus,
                mu_plus,
            } => (pi11, pi12, mu_minus, mu_plus),
            AlternativeSpec::GaussianMixture {
                pi11,
                pi12,
                mu_minus,
                mu_plus,
                tau,
            } => {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "mixture spread tau must be positive, got {tau}"
                    )));
                }
                (pi11, pi12, mu_minus, mu_plus)
            }
        };
        if !(pi11 >= 0.0 && pi12 >= 0.0 && ((pi11 + pi12) - 1.0).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "mixing weights must be nonnegative and sum to 1, got ({pi11}, {pi12})"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi) {
            return Err(Error::InvalidParameter(format!(
                "need mu_minus < 0 < mu_plus, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    pub fn components(&self) -> [Component; 2] {
        match *self {
            AlternativeSpec::TwoPoint {
                pi11,
                pi12,
                mu_minus,
                mu_plus,
            } => [
                Component {
                    weight: pi11,
                    center: mu_minus,
                    tau: 0.0,
                },
                Component {
                    weight: pi12,
                    center: mu_plus,
                    tau: 0.0,
                },
            ],
            AlternativeSpec::GaussianMixture {
                pi11,
                pi12,
                mu_minus,
                mu_plus,
                tau,
            } => [
                Component {
                    weight: pi11,
                    center: mu_minus,
                    tau,
                },
                Component {
                    weight: pi12,
                    center: mu_plus,
                    tau,
                },
            ],
        }
    }

    /// Component spread; zero for atoms.
    pub fn tau(&self) -> f64 {
        match *self {
            AlternativeSpec::TwoPoint { .. } => 0.0,
            AlternativeSpec::GaussianMixture { tau, .. } => tau,
        }
    }

    pub fn pi11(&self) -> f64 {
        match *self {
            AlternativeSpec::TwoPoint { pi11, .. }
            | AlternativeSpec::GaussianMixture { pi11, .. } => pi11,
        }
    }
}

/// Null proportion plus the alternative mean distribution. Null means are 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoGroupsModel {
    pi0: f64,
    alt: AlternativeSpec,
}

impl TwoGroupsModel {
    pub fn new(pi0: f64, alt: AlternativeSpec) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "null proportion must lie in (0, 1), got {pi0}"
            )));
        }
        alt.validate()?;
        Ok(Self { pi0, alt })
    }

    /// First simulation setting: π0 = 0.95 and a two-normal alternative
    /// 0.2·N(−1.5, 0.25) + 0.8·N(1, 0.25).
    pub fn study1() -> Self {
        Self::new(
            0.95,
            AlternativeSpec::gaussian_mixture(0.2, -1.5, 1.0, 0.5).expect("valid"),
        )
        .expect("valid")
    }

    /// Second simulation setting: π0 = 0.8 with atoms at −3 and 4.
    pub fn study2(pi11: f64) -> Result<Self> {
        Self::new(0.8, AlternativeSpec::two_point(pi11, -3.0, 4.0)?)
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        1.0 - self.pi0
    }

    pub fn alt(&self) -> &AlternativeSpec {
        &self.alt
    }

    /// E[s(μ) | θ = 1], the prior mean severity of a non-null.
    pub fn mean_severity(&self, spec: SeveritySpec) -> Result<f64> {
        spec.validate()?;
        let comps = self.alt.components();
        match (self.alt, spec) {
            (_, SeveritySpec::Constant) => Ok(1.0),
            (AlternativeSpec::TwoPoint { .. }, s) => {
                Ok(comps.iter().map(|c| c.weight * s.eval(c.center)).sum())
            }
            (AlternativeSpec::GaussianMixture { tau, .. }, s) if s.is_squared() => Ok(comps
                .iter()
                .map(|c| c.weight * (c.center * c.center + tau * tau))
                .sum()),
            (AlternativeSpec::GaussianMixture { .. }, s) => {
                let mut total = 0.0;
                for c in comps {
                    let half = 12.0 * c.tau;
                    let v = crate::quadrature::Simpson::default().integrate(
                        |mu| s.eval(mu) * crate::normal::pdf((mu - c.center) / c.tau) / c.tau,
                        c.center - half,
                        c.center + half,
                    )?;
                    total += c.weight * v;
                }
                Ok(total)
            }
        }
    }
}

/// One simulated data set from the independence model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<bool>,
    pub seed: u64,
    pub rep_index: u64,
}

impl SimulatedSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Random stream for replicate `rep_index` under master seed `seed`.
///
/// ChaCha's 64-bit stream id keeps replicates independent of one another and
/// of how they are assigned to workers.
pub fn replicate_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Draw `m` independent coordinates from `model`.
pub fn sample(
    model: &TwoGroupsModel,
    m: usize,
    seed: u64,
    rep_index: u64,
) -> Result<SimulatedSample> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be at least 1".into(),
        ));
    }
    let mut rng = replicate_rng(seed, rep_index);
    let pi1 = model.pi1();
    let [minus, plus] = model.alt.components();

    let mut x = Vec::with_capacity(m);
    let mut mu = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    for _ in 0..m {
        let is_alt = rng.random::<f64>() < pi1;
        let mean = if is_alt {
            let comp = if rng.random::<f64>() < minus.weight {
                minus
            } else {
                plus
            };
            if comp.tau > 0.0 {
                comp.center + comp.tau * rng.sample::<f64, _>(StandardNormal)
            } else {
                comp.center
            }
        } else {
            0.0
        };
        let noise: f64 = rng.sample(StandardNormal);
        theta.push(is_alt);
        mu.push(mean);
        x.push(mean + noise);
    }
    Ok(SimulatedSample {
        x,
        mu,
        theta,
        seed,
        rep_index,
    })
}
