use wmnet_core::gradcheck::run_audit;
use wmnet_core::OpKind;

use super::Tsv;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Finite-difference audit of every op and every parameter of the audit-size
/// model. Writes `report.tsv`; any failure is a numerical error.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<()> {
    let fault = match cfg.fault.as_deref() {
        None | Some("") => None,
        Some(name) => Some(OpKind::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = OpKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Config(format!("unknown op {name:?}; one of {}", known.join(", ")))
        })?),
    };
    cfg.write_resolved()?;
    let report = run_audit(cfg.seed, fault)?;
    let mut t = Tsv::new(&["kind", "name", "max_rel_error", "refined", "passed"]);
    for (kind, entries) in [("op", &report.ops), ("param", &report.params)] {
        for e in entries {
            t.row(&[&kind, &e.name, &e.max_rel_error, &e.refined, &e.passed]);
        }
    }
    t.write(&cfg.out.join("report.tsv"))?;
    let failures = report.failures();
    println!(
        "gradient audit: {} ops, {} parameters, tolerance {}, {} failures",
        report.ops.len(),
        report.params.len(),
        report.tolerance,
        failures.len()
    );
    if failures.is_empty() {
        return Ok(());
    }
    let names: Vec<String> = failures.iter().map(|e| format!("{} ({:.3e})", e.name, e.max_rel_error)).collect();
    Err(CliError::Audit(names.join(", ")))
}
