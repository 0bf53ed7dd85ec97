//! `check`: load an equation file, report its shape, and say whether the
//! system is quasi-linear.

use super::Ctx;
use crate::error::CliError;
use crate::files;
use std::fmt::Write as _;
use vessiot_core::quasilinear::is_quasilinear;

pub fn run_check(ctx: &Ctx) -> Result<String, CliError> {
    let sys = files::load_equation(&ctx.equation_path())?;
    let spec = sys.spec();
    let ql = is_quasilinear(&sys)?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "equations: {}, ambient dimension: {}",
        sys.k(),
        spec.ambient_dim()
    );
    for i in 0..sys.k() {
        let top = sys.equations()[i].max_order().unwrap_or(0);
        match sys.label(i) {
            Some(name) => {
                let _ = writeln!(report, "eq {i}: top order {top} ({name})");
            }
            None => {
                let _ = writeln!(report, "eq {i}: top order {top}");
            }
        }
    }
    let _ = writeln!(report, "quasi-linear: {}, q={}, m={}", ql, spec.q, spec.m);
    Ok(report)
}
