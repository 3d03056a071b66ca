use std::io::Write;

use super::{BifurcationReport, ContinuationBranch};
use crate::error::Result;

/// One row per sample: label, beta, coordinates, stability, then the real
/// parts of the eigenvalues in increasing order.
pub fn write_branches_csv<W: Write>(out: W, branches: &[ContinuationBranch]) -> Result<()> {
    let dim = branches.first().map_or(2, |b| b.states[0].position.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string(), "beta".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("stability".into());
    header.extend((1..=dim).map(|i| format!("re_lambda{i}")));
    w.write_record(&header)?;
    for b in branches {
        for (beta, e) in b.betas.iter().zip(&b.states) {
            let mut row = vec![b.label.clone(), format!("{beta:.10}")];
            row.extend(e.position.iter().map(|v| format!("{v:.10}")));
            row.push(e.stability.name().to_string());
            row.extend(e.eigenvalues.iter().map(|l| format!("{:.10}", l.re)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_bifurcations_csv<W: Write>(out: W, report: &BifurcationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "beta", "participant1", "participant2"])?;
    for p in &report.points {
        w.write_record([
            p.kind.name(),
            &format!("{:.10}", p.beta),
            &p.participants.0,
            &p.participants.1,
        ])?;
    }
    w.flush()?;
    Ok(())
}
