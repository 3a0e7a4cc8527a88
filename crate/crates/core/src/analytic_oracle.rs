//! Closed-form oracle for two-point alternatives.
//!
//! With atoms at μ− < 0 < μ+ the Glfdr level set {x : T(x) = t} is the zero
//! set of
//!
//! ```text
//! g(z) = t·π1·Σ_k π1k·s(μ_k)·exp(μ_k·z − μ_k²/2) − π0·(1 − t),
//! ```
//!
//! a convex function diverging at both ends. The rule `T ≤ t` therefore
//! rejects outside an interval (c_l, c_u), and every error rate of that rule
//! is a ratio of normal tail masses.

use crate::error::{Error, Result};
use crate::model::{AlternativeSpec, SeveritySpec, TwoGroupsModel};
use crate::normal::{cdf, sf};

const Z_RANGE: f64 = 60.0;
const ROOT_TOL: f64 = 1e-12;
/// Target accuracy on mFDR* when solving for t*.
pub const TSTAR_TOL: f64 = 1e-8;

/// Two-sided tail mass Ψ(a, b) = 1 − Φ(b) + Φ(a).
pub fn psi(a: f64, b: f64) -> Result<f64> {
    if a > b || a.is_nan() || b.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "psi needs a <= b, got ({a}, {b})"
        )));
    }
    Ok((cdf(a) + sf(b)).min(1.0))
}

/// Mass of N(0,1) inside (a, b), i.e. 1 − Ψ(a, b).
fn inside(a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        cdf(b) - cdf(a)
    } else if a >= 0.0 {
        sf(a) - sf(b)
    } else {
        1.0 - cdf(a) - sf(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Reject X ≤ c_l or X ≥ c_u.
    Outside,
    /// Reject every hypothesis.
    All,
    /// Reject nothing.
    None,
}

/// Acceptance interval (c_l, c_u) of a threshold rule on the observation
/// scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPair {
    pub c_l: f64,
    pub c_u: f64,
    pub region: Region,
}

impl CutoffPair {
    pub fn outside(c_l: f64, c_u: f64) -> Result<Self> {
        if c_l.partial_cmp(&c_u) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidParameter(format!(
                "need c_l < c_u, got ({c_l}, {c_u})"
            )));
        }
        Ok(Self {
            c_l,
            c_u,
            region: Region::Outside,
        })
    }

    pub fn none() -> Self {
        Self {
            c_l: f64::NEG_INFINITY,
            c_u: f64::INFINITY,
            region: Region::None,
        }
    }

    /// Reject-all cuts; the degenerate interval sits at `at`.
    pub fn all(at: f64) -> Self {
        Self {
            c_l: at,
            c_u: at,
            region: Region::All,
        }
    }

    /// Rejection probability for X ~ N(shift, 1).
    fn reject_prob(&self, shift: f64) -> f64 {
        match self.region {
            Region::All => 1.0,
            Region::None => 0.0,
            Region::Outside => cdf(self.c_l - shift) + sf(self.c_u - shift),
        }
    }

    /// Acceptance probability for X ~ N(shift, 1).
    fn accept_prob(&self, shift: f64) -> f64 {
        match self.region {
            Region::All => 0.0,
            Region::None => 1.0,
            Region::Outside => inside(self.c_l - shift, self.c_u - shift),
        }
    }

    /// Whether (c_l, c_u) ⊆ (other.c_l, other.c_u) as acceptance intervals.
    pub fn accepts_within(&self, other: &CutoffPair) -> bool {
        match (self.region, other.region) {
            (Region::All, _) => true,
            (_, Region::None) => true,
            (Region::None, _) | (_, Region::All) => false,
            (Region::Outside, Region::Outside) => self.c_l >= other.c_l && self.c_u <= other.c_u,
        }
    }
}

/// Atoms of a two-point alternative as (weight, center, severity) triples.
fn atoms(model: &TwoGroupsModel, spec: SeveritySpec) -> Result<[(f64, f64, f64); 2]> {
    spec.validate()?;
    match model.alt() {
        AlternativeSpec::TwoPoint { .. } => Ok(model
            .alt()
            .components()
            .map(|c| (c.weight, c.center, spec.eval(c.center)))),
        AlternativeSpec::GaussianMixture { .. } => Err(Error::InvalidParameter(
            "closed-form oracle needs a two-point alternative".into(),
        )),
    }
}

/// Level-set function g(z) whose sign is that of t − Glfdr(z).
pub fn level_function(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    t: f64,
) -> Result<impl Fn(f64) -> f64> {
    let atoms = atoms(model, spec)?;
    let (pi0, pi1) = (model.pi0(), model.pi1());
    Ok(move |z: f64| {
        let tilt: f64 = atoms
            .iter()
            .map(|&(w, mu, s)| w * s * (mu * z - 0.5 * mu * mu).exp())
            .sum();
        t * pi1 * tilt - pi0 * (1.0 - t)
    })
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisect for a sign change of `f` on [lo, hi] with f(lo), f(hi) of
/// opposite signs.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let lo_positive = f(lo) > 0.0;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cutoffs (c_l, c_u) of the rule Glfdr ≤ t.
pub fn cutoff_roots(t: f64, model: &TwoGroupsModel, spec: SeveritySpec) -> Result<CutoffPair> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold t must lie in (0, 1), got {t}"
        )));
    }
    let g = level_function(model, spec, t)?;
    let z_min = golden_min(&g, -Z_RANGE, Z_RANGE);
    if g(z_min) > 0.0 {
        return Ok(CutoffPair::all(z_min));
    }
    let [(w_lo, _, s_lo), (w_hi, _, s_hi)] = atoms(model, spec)?;
    let c_l = if g(-Z_RANGE) > 0.0 {
        bisect(&g, -Z_RANGE, z_min)
    } else if w_lo * s_lo == 0.0 {
        f64::NEG_INFINITY
    } else {
        return Err(Error::NumericalFailure(format!(
            "no lower cutoff in [-{Z_RANGE}, {z_min}] at t = {t}"
        )));
    };
    let c_u = if g(Z_RANGE) > 0.0 {
        bisect(&g, z_min, Z_RANGE)
    } else if w_hi * s_hi == 0.0 {
        f64::INFINITY
    } else {
        return Err(Error::NumericalFailure(format!(
            "no upper cutoff in [{z_min}, {Z_RANGE}] at t = {t}"
        )));
    };
    if c_l == f64::NEG_INFINITY && c_u == f64::INFINITY {
        return Ok(CutoffPair::none());
    }
    CutoffPair::outside(c_l, c_u)
}

/// mFDR* of the rule rejecting outside `cuts`, weights s(μ_k) from `spec`.
pub fn mfdr_star_closed(
    cuts: &CutoffPair,
    model: &TwoGroupsModel,
    spec: SeveritySpec,
) -> Result<f64> {
    let atoms = atoms(model, spec)?;
    let null = model.pi0() * cuts.reject_prob(0.0);
    let alt: f64 = atoms
        .iter()
        .map(|&(w, mu, s)| w * s * cuts.reject_prob(mu))
        .sum();
    let den = null + model.pi1() * alt;
    Ok(if den == 0.0 { 0.0 } else { null / den })
}

/// mFNR* of the rule rejecting outside `cuts`, weights s(μ_k) from `spec`.
pub fn mfnr_star_closed(
    cuts: &CutoffPair,
    model: &TwoGroupsModel,
    spec: SeveritySpec,
) -> Result<f64> {
    let atoms = atoms(model, spec)?;
    let missed = model.pi1()
        * atoms
            .iter()
            .map(|&(w, mu, s)| w * s * cuts.accept_prob(mu))
            .sum::<f64>();
    let den = model.pi0() * cuts.accept_prob(0.0) + missed;
    Ok(if den == 0.0 { 0.0 } else { missed / den })
}

/// Unweighted mFNR of the rule rejecting outside `cuts`.
pub fn mfnr_closed(cuts: &CutoffPair, model: &TwoGroupsModel) -> Result<f64> {
    mfnr_star_closed(cuts, model, SeveritySpec::Constant)
}

/// Unweighted mFDR of the rule rejecting outside `cuts`.
pub fn mfdr_closed(cuts: &CutoffPair, model: &TwoGroupsModel) -> Result<f64> {
    mfdr_star_closed(cuts, model, SeveritySpec::Constant)
}

/// mFDR* of the reject-everything rule, the largest attainable level.
pub fn reject_all_mfdr_star(model: &TwoGroupsModel, spec: SeveritySpec) -> Result<f64> {
    mfdr_star_closed(&CutoffPair::all(0.0), model, spec)
}

/// Glfdr threshold t* at which the oracle's mFDR* equals `alpha`, with its
/// cutoffs.
pub fn find_tstar(
    model: &TwoGroupsModel,
    spec: SeveritySpec,
    alpha: f64,
) -> Result<(f64, CutoffPair)> {
    let top = reject_all_mfdr_star(model, spec)?;
    if !(alpha > 0.0 && alpha < top) {
        return Err(Error::Unattainable {
            alpha,
            lo: 0.0,
            hi: top,
        });
    }
    let rate_at = |t: f64| -> Result<(f64, CutoffPair)> {
        let cuts = cutoff_roots(t, model, spec)?;
        Ok((mfdr_star_closed(&cuts, model, spec)?, cuts))
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best: Option<(f64, f64, CutoffPair)> = None;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (rate, cuts) = rate_at(mid)?;
        let err = (rate - alpha).abs();
        if best.is_none_or(|(_, e, _)| err < e) {
            best = Some((mid, err, cuts));
        }
        if err <= 1e-13 {
            break;
        }
        if rate > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    match best {
        Some((t, err, cuts)) if err <= TSTAR_TOL => Ok((t, cuts)),
        Some((t, err, _)) => Err(Error::NumericalFailure(format!(
            "t* search stalled at t = {t} with |mFDR* - alpha| = {err}"
        ))),
        None => Err(Error::NumericalFailure("t* search made no progress".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::posterior_scores;

    fn study2() -> TwoGroupsModel {
        TwoGroupsModel::study2(0.5).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert!(psi(-40.0, 40.0).unwrap() < 1e-300);
        assert_eq!(psi(0.0, 0.0).unwrap(), 1.0);
        assert!((psi(-1.959964, 1.959964).unwrap() - 0.05).abs() < 1e-6);
        assert!(psi(1.0, 0.0).is_err());
    }

    #[test]
    fn roots_solve_level_set() {
        let m = study2();
        let spec = SeveritySpec::SQUARED;
        let cuts = cutoff_roots(0.5, &m, spec).unwrap();
        assert_eq!(cuts.region, Region::Outside);
        assert!(cuts.c_l < cuts.c_u);
        let g = level_function(&m, spec, 0.5).unwrap();
        assert!(g(cuts.c_l).abs() < 1e-9);
        assert!(g(cuts.c_u).abs() < 1e-9);
        let s = posterior_scores(&m, spec, &[cuts.c_l, cuts.c_u]).unwrap();
        assert!((s.glfdr[0] - 0.5).abs() < 1e-8);
        assert!((s.glfdr[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn near_one_rejects_all() {
        let cuts = cutoff_roots(1.0 - 1e-9, &study2(), SeveritySpec::SQUARED).unwrap();
        assert_eq!(cuts.region, Region::All);
    }

    #[test]
    fn symmetric_model_gives_symmetric_cuts() {
        let m =
            TwoGroupsModel::new(0.8, AlternativeSpec::two_point(0.5, -3.0, 3.0).unwrap()).unwrap();
        for t in [0.05, 0.3, 0.7] {
            let cuts = cutoff_roots(t, &m, SeveritySpec::SQUARED).unwrap();
            assert!((cuts.c_l + cuts.c_u).abs() < 1e-9, "{cuts:?}");
        }
    }

    #[test]
    fn bad_threshold_and_model() {
        assert!(cutoff_roots(0.0, &study2(), SeveritySpec::SQUARED).is_err());
        assert!(cutoff_roots(1.0, &study2(), SeveritySpec::SQUARED).is_err());
        let mix = TwoGroupsModel::study1();
        assert!(cutoff_roots(0.5, &mix, SeveritySpec::SQUARED).is_err());
    }

    #[test]
    fn closed_rates_at_extremes() {
        let m = study2();
        let spec = SeveritySpec::SQUARED;
        let all = CutoffPair::all(0.0);
        let none = CutoffPair::none();
        assert!((mfdr_star_closed(&all, &m, spec).unwrap() - 0.8 / 3.3).abs() < 1e-15);
        assert_eq!(mfdr_star_closed(&none, &m, spec).unwrap(), 0.0);
        assert!((mfdr_star_closed(&all, &m, SeveritySpec::Constant).unwrap() - 0.8).abs() < 1e-15);

        assert!((mfnr_star_closed(&none, &m, spec).unwrap() - 2.5 / 3.3).abs() < 1e-15);
        assert_eq!(mfnr_star_closed(&all, &m, spec).unwrap(), 0.0);
        let wide = CutoffPair::outside(-40.0, 40.0).unwrap();
        assert!((mfnr_star_closed(&wide, &m, spec).unwrap() - 2.5 / 3.3).abs() < 1e-12);

        assert!((mfnr_closed(&none, &m).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(mfnr_closed(&all, &m).unwrap(), 0.0);
    }

    #[test]
    fn tstar_hits_level() {
        let m = study2();
        let (t, cuts) = find_tstar(&m, SeveritySpec::SQUARED, 0.05).unwrap();
        assert!(t > 0.0 && t < 1.0);
        let rate = mfdr_star_closed(&cuts, &m, SeveritySpec::SQUARED).unwrap();
        assert!((rate - 0.05).abs() <= TSTAR_TOL);
    }

    #[test]
    fn tstar_near_reject_all() {
        let m = study2();
        let top = reject_all_mfdr_star(&m, SeveritySpec::SQUARED).unwrap();
        let (t, cuts) = find_tstar(&m, SeveritySpec::SQUARED, top - 1e-12).unwrap();
        assert!(t > 0.5);
        assert!(
            cuts.region == Region::All || cuts.c_u - cuts.c_l < 1e-3,
            "{cuts:?}"
        );
    }

    #[test]
    fn tstar_unattainable() {
        let m = study2();
        let top = reject_all_mfdr_star(&m, SeveritySpec::SQUARED).unwrap();
        match find_tstar(&m, SeveritySpec::SQUARED, top + 0.01) {
            Err(Error::Unattainable { hi, .. }) => assert!((hi - top).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(find_tstar(&m, SeveritySpec::SQUARED, 0.0).is_err());
    }

    #[test]
    fn nesting() {
        let m = TwoGroupsModel::study2(0.3).unwrap();
        let a = cutoff_roots(0.2, &m, SeveritySpec::SQUARED).unwrap();
        let b = cutoff_roots(0.4, &m, SeveritySpec::SQUARED).unwrap();
        assert!(b.accepts_within(&a));
        assert!(!a.accepts_within(&b));
    }
}
