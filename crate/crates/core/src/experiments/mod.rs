//! End-to-end simulation studies and the cross-module verification suite.

mod study1;
mod study2;
pub mod verify;

pub use study1::{run_study1, Study1Result};
pub use study2::{default_pi11_grid, run_study2, Procedure, Study2Row, Study2Template};
pub use verify::{verify_suite, Budget, CheckResult, VerifyReport};
