use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::events::{final_order, EscapeRecord, SignedNode};
use crate::error::{Error, Result};

/// Ensemble statistics over completed realisations. Means whose condition
/// set is empty are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n_realisations: usize,
    pub n_completed: usize,
    pub n_incomplete: usize,
    /// Mean time of the very first escape.
    pub first_star: Option<f64>,
    /// Mean time of the last departure from the all-below state.
    pub first: Option<f64>,
    /// Mean time from the last departure from all-below to completion.
    pub second_star: Option<f64>,
    /// Mean time from the very first escape to completion.
    pub second: Option<f64>,
    /// Percentage of completed realisations with at least one return.
    pub return_percentage: f64,
    pub return_percentage_ci: f64,
    /// Per node, probability that the first event involves that node.
    pub first_direction: Vec<f64>,
    pub first_direction_ci: Vec<f64>,
    /// Per node, probability that the last departure from all-below was that node's escape.
    pub final_direction: Vec<f64>,
    pub final_direction_ci: Vec<f64>,
    /// Probability of each signed event sequence, keyed like `"[1 -1 2]"`.
    pub sequence_histogram: BTreeMap<String, f64>,
    pub sequence_counts: BTreeMap<String, usize>,
    /// Probability of each order of escape after cancelling returns.
    pub final_order_histogram: BTreeMap<String, f64>,
}

impl StatsSummary {
    /// Most frequent signed sequence; ties go to the first key.
    pub fn modal_sequence(&self) -> Option<&str> {
        self.sequence_counts
            .iter()
            .fold(None, |best: Option<(&String, usize)>, (k, &c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((k, c)),
            })
            .map(|(k, _)| k.as_str())
    }
}

pub fn sequence_key(seq: &[SignedNode]) -> String {
    let parts: Vec<String> = seq.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(" "))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.96 * (p * (1.0 - p) / n as f64).sqrt()
    }
}

pub fn summarize(records: &[EscapeRecord]) -> Result<StatsSummary> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to summarise".into()));
    }
    let n_nodes = records[0].first_escape_times.len();
    let done: Vec<&EscapeRecord> = records.iter().filter(|r| r.completed).collect();
    let n = done.len();

    let mut first_star = Vec::new();
    let mut first = Vec::new();
    let mut second_star = Vec::new();
    let mut second = Vec::new();
    let mut returns = 0usize;
    let mut first_dir = vec![0usize; n_nodes];
    let mut final_dir = vec![0usize; n_nodes];
    let mut n_final = 0usize;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut orders: BTreeMap<String, usize> = BTreeMap::new();

    for r in &done {
        let end = r
            .completion_time
            .expect("completed records have a completion time");
        let escape = r.events.iter().find(|e| e.1 > 0).map(|e| e.0);
        if let Some(t) = escape {
            first_star.push(t);
            second.push(end - t);
        }
        if let Some((t, node)) = r.last_departure {
            first.push(t);
            second_star.push(end - t);
            final_dir[node as usize - 1] += 1;
            n_final += 1;
        }
        if let Some(&(_, id)) = r.events.first() {
            first_dir[id.unsigned_abs() as usize - 1] += 1;
        }
        if r.has_return() {
            returns += 1;
        }
        let seq = r.sequence();
        *counts.entry(sequence_key(&seq)).or_default() += 1;
        *orders.entry(sequence_key(&final_order(&seq))).or_default() += 1;
    }

    let frac = |c: usize, tot: usize| if tot == 0 { 0.0 } else { c as f64 / tot as f64 };
    let p_ret = frac(returns, n);
    let first_direction: Vec<f64> = first_dir.iter().map(|&c| frac(c, n)).collect();
    let final_direction: Vec<f64> = final_dir.iter().map(|&c| frac(c, n_final)).collect();
    Ok(StatsSummary {
        n_realisations: records.len(),
        n_completed: n,
        n_incomplete: records.len() - n,
        first_star: mean(&first_star),
        first: mean(&first),
        second_star: mean(&second_star),
        second: mean(&second),
        return_percentage: 100.0 * p_ret,
        return_percentage_ci: 100.0 * half_width(p_ret, n),
        first_direction_ci: first_direction.iter().map(|&p| half_width(p, n)).collect(),
        first_direction,
        final_direction_ci: final_direction
            .iter()
            .map(|&p| half_width(p, n_final))
            .collect(),
        final_direction,
        sequence_histogram: counts
            .iter()
            .map(|(k, &c)| (k.clone(), frac(c, n)))
            .collect(),
        sequence_counts: counts,
        final_order_histogram: orders.into_iter().map(|(k, c)| (k, frac(c, n))).collect(),
    })
}

/// Rows of `(realisation, event, time, node, completed)`. Realisations
/// without events get a single row with empty event fields.
pub fn write_records_csv<W: Write>(out: W, records: &[EscapeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["realisation", "event", "time", "node", "completed"])?;
    for r in records {
        let done = r.completed.to_string();
        if r.events.is_empty() {
            w.write_record([
                r.realisation.to_string(),
                String::new(),
                String::new(),
                String::new(),
                done,
            ])?;
            continue;
        }
        for (k, (t, id)) in r.events.iter().enumerate() {
            w.write_record([
                r.realisation.to_string(),
                k.to_string(),
                format!("{t:.3}"),
                id.to_string(),
                done.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(out: W, summary: &StatsSummary) -> Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}
