use rayon::prelude::*;

use crate::analytic_oracle::{
    find_tstar, mfdr_star_closed, mfnr_closed, mfnr_star_closed, CutoffPair,
};
use crate::error::{Error, Result};
use crate::model::{AlternativeSpec, SeveritySpec, TwoGroupsModel};
use crate::procedures::pvalue_oracle_cutoff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Procedure {
    /// Glfdr threshold controlling mFDR*.
    GlfdrOracle,
    /// lfdr threshold controlling unweighted mFDR.
    SunCaiOracle,
    /// Symmetric |X| ≥ c rule controlling unweighted mFDR.
    PvalueOracle,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [
        Procedure::GlfdrOracle,
        Procedure::SunCaiOracle,
        Procedure::PvalueOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Procedure::GlfdrOracle => "glfdr_oracle",
            Procedure::SunCaiOracle => "suncai_oracle",
            Procedure::PvalueOracle => "pvalue_oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// One procedure evaluated at one mixing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Study2Row {
    pub pi11: f64,
    pub procedure: Procedure,
    pub c_l: f64,
    pub c_u: f64,
    pub mfdr_star: f64,
    pub mfnr: f64,
    pub mfnr_star: f64,
}

/// Two-point model family indexed by π11.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Study2Template {
    pub pi0: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
}

impl Default for Study2Template {
    fn default() -> Self {
        Self {
            pi0: 0.8,
            mu_minus: -3.0,
            mu_plus: 4.0,
        }
    }
}

impl Study2Template {
    pub fn model(&self, pi11: f64) -> Result<TwoGroupsModel> {
        TwoGroupsModel::new(
            self.pi0,
            AlternativeSpec::two_point(pi11, self.mu_minus, self.mu_plus)?,
        )
    }
}

/// π11 ∈ {0.05, 0.10, …, 0.95}.
pub fn default_pi11_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

fn row(
    pi11: f64,
    procedure: Procedure,
    cuts: &CutoffPair,
    model: &TwoGroupsModel,
    spec: SeveritySpec,
) -> Result<Study2Row> {
    Ok(Study2Row {
        pi11,
        procedure,
        c_l: cuts.c_l,
        c_u: cuts.c_u,
        mfdr_star: mfdr_star_closed(cuts, model, spec)?,
        mfnr: mfnr_closed(cuts, model)?,
        mfnr_star: mfnr_star_closed(cuts, model, spec)?,
    })
}

/// Compare the three oracle procedures across `pi11_grid`. All weighted
/// rates use `spec`, including for the two unweighted procedures.
pub fn run_study2(
    alpha: f64,
    pi11_grid: &[f64],
    template: Study2Template,
    spec: SeveritySpec,
) -> Result<Vec<Study2Row>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if let Some(bad) = pi11_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "grid values must lie in (0, 1), got {bad}"
        )));
    }
    let per_point: Result<Vec<[Study2Row; 3]>> = pi11_grid
        .par_iter()
        .map(|&pi11| {
            let model = template.model(pi11)?;
            let (_, ours) = find_tstar(&model, spec, alpha)?;
            let (_, suncai) = find_tstar(&model, SeveritySpec::Constant, alpha)?;
            let c = pvalue_oracle_cutoff(&model, alpha)?;
            let pvalue = CutoffPair::outside(-c, c)?;
            Ok([
                row(pi11, Procedure::GlfdrOracle, &ours, &model, spec)?,
                row(pi11, Procedure::SunCaiOracle, &suncai, &model, spec)?,
                row(pi11, Procedure::PvalueOracle, &pvalue, &model, spec)?,
            ])
        })
        .collect();
    Ok(per_point?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_oracle::mfdr_closed;

    #[test]
    fn grid_has_nineteen_points() {
        let g = default_pi11_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[18], 0.95);
    }

    #[test]
    fn procedure_names_round_trip() {
        for p in Procedure::ALL {
            assert_eq!(Procedure::parse(p.as_str()), Some(p));
        }
        assert_eq!(Procedure::parse("bh"), None);
    }

    #[test]
    fn rows_control_their_own_targets() {
        let t = Study2Template::default();
        let rows = run_study2(0.05, &[0.2, 0.7], t, SeveritySpec::SQUARED).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            let model = t.model(r.pi11).unwrap();
            let cuts = CutoffPair::outside(r.c_l, r.c_u).unwrap();
            match r.procedure {
                Procedure::GlfdrOracle => assert!((r.mfdr_star - 0.05).abs() < 1e-8),
                _ => assert!((mfdr_closed(&cuts, &model).unwrap() - 0.05).abs() < 1e-8),
            }
            assert!((0.0..=1.0).contains(&r.mfnr));
            assert!((0.0..=1.0).contains(&r.mfnr_star));
        }
    }

    #[test]
    fn invalid_inputs() {
        let t = Study2Template::default();
        assert!(run_study2(0.0, &[0.5], t, SeveritySpec::SQUARED).is_err());
        assert!(run_study2(0.05, &[1.0], t, SeveritySpec::SQUARED).is_err());
    }
}
