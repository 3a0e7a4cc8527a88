//! Adaptive Simpson quadrature.
//!
//! The interval is first cut into a fixed number of panels so that narrow
//! peaks are not missed by the initial coarse estimate; each panel is then
//! refined independently until the Richardson error estimate falls below its
//! share of the global tolerance.

use crate::error::{Error, Result};

const INITIAL_PANELS: usize = 64;
const MAX_EVALS: usize = 20_000_000;

#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-300,
            max_depth: 60,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
}

impl Simpson {
    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quadrature bounds must be finite, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        if a > b {
            return self.integrate(f, b, a).map(|v| -v);
        }

        let h = (b - a) / INITIAL_PANELS as f64;
        let mut stack = Vec::with_capacity(INITIAL_PANELS);
        let mut coarse = 0.0;
        let mut f_left = f(a);
        for k in 0..INITIAL_PANELS {
            let lo = a + h * k as f64;
            let hi = if k + 1 == INITIAL_PANELS { b } else { lo + h };
            let mid = 0.5 * (lo + hi);
            let (fm, fb) = (f(mid), f(hi));
            let whole = (hi - lo) / 6.0 * (f_left + 4.0 * fm + fb);
            coarse += whole;
            stack.push(Segment {
                a: lo,
                b: hi,
                fa: f_left,
                fm,
                fb,
                whole,
                eps: 0.0,
                depth: 0,
            });
            f_left = fb;
        }
        let tol = (self.rel_tol * coarse.abs()).max(self.abs_tol);
        for seg in &mut stack {
            seg.eps = tol / INITIAL_PANELS as f64;
        }

        let mut evals = 2 * INITIAL_PANELS + 1;
        let mut total = 0.0;
        while let Some(seg) = stack.pop() {
            let m = 0.5 * (seg.a + seg.b);
            let lm = 0.5 * (seg.a + m);
            let rm = 0.5 * (m + seg.b);
            let (flm, frm) = (f(lm), f(rm));
            evals += 2;
            let left = (m - seg.a) / 6.0 * (seg.fa + 4.0 * flm + seg.fm);
            let right = (seg.b - m) / 6.0 * (seg.fm + 4.0 * frm + seg.fb);
            let delta = left + right - seg.whole;
            if !delta.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite integrand on [{}, {}]",
                    seg.a, seg.b
                )));
            }
            if delta.abs() <= 15.0 * seg.eps {
                total += left + right + delta / 15.0;
                continue;
            }
            if seg.depth >= self.max_depth || evals > MAX_EVALS {
                return Err(Error::NumericalFailure(format!(
                    "adaptive Simpson did not converge on [{}, {}] (depth {}, {} evaluations)",
                    seg.a, seg.b, seg.depth, evals
                )));
            }
            stack.push(Segment {
                a: seg.a,
                b: m,
                fa: seg.fa,
                fm: flm,
                fb: seg.fm,
                whole: left,
                eps: 0.5 * seg.eps,
                depth: seg.depth + 1,
            });
            stack.push(Segment {
                a: m,
                b: seg.b,
                fa: seg.fm,
                fm: frm,
                fb: seg.fb,
                whole: right,
                eps: 0.5 * seg.eps,
                depth: seg.depth + 1,
            });
        }
        Ok(total)
    }
}
