pub mod demo;
pub mod eval;
pub mod map;
pub mod sim;
pub mod vo;

use depthvo_core::losses::{gradcheck, GradcheckReport};

use crate::error::{CliError, Result};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Runs the finite-difference check; fails when any loss reaches the tolerance.
pub fn losses_gradcheck(seed: u64, probes: usize) -> Result<(Vec<GradcheckReport>, String)> {
    let reports = gradcheck(seed, probes).map_err(|e| CliError::Check(e.to_string()))?;
    let mut table = format!("{:<8} {:>7} {:>14}\n", "loss", "probes", "max_rel_error");
    for r in &reports {
        table.push_str(&format!("{:<8} {:>7} {:>14.3e}\n", r.loss, r.probes, r.max_rel_error));
    }
    if let Some(bad) = reports.iter().find(|r| !(r.max_rel_error < GRADCHECK_TOLERANCE)) {
        return Err(CliError::Check(format!(
            "{table}gradient check failed: {} relative error {:.3e} >= {GRADCHECK_TOLERANCE:e}",
            bad.loss, bad.max_rel_error
        )));
    }
    Ok((reports, table))
}
