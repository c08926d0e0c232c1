//! Loss-curve CSV files and the N/B/P results table.

use std::fmt::Write as _;
use std::path::Path;

use super::evaluate::{Condition, MetricsReport};
use super::train::EpochLoss;
use crate::error::{Error, Result};
use crate::metrics::MetricName;

pub fn curve_csv(curve: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,valid_loss\n");
    for e in curve {
        writeln!(out, "{},{},{}", e.epoch, e.train, e.valid).expect("string write");
    }
    out
}

pub fn write_curve(path: impl AsRef<Path>, curve: &[EpochLoss]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, curve_csv(curve)).map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: impl AsRef<Path>) -> Result<Vec<EpochLoss>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::format(path, "missing column"));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::format(path, e)) };
        let epoch = field(0)?.parse().map_err(|e| Error::format(path, e))?;
        out.push(EpochLoss { epoch, train: num(1)?, valid: num(2)? });
    }
    Ok(out)
}

/// Per-utterance results as CSV with one column per metric.
pub fn utterance_csv(report: &MetricsReport) -> String {
    let mut out = String::from("id,architecture,condition");
    for m in &report.metrics {
        write!(out, ",{m}").expect("string write");
    }
    out.push_str(",loss\n");
    for u in &report.utterances {
        write!(out, "{},{},{}", u.id, u.architecture, u.condition.label()).expect("string write");
        for m in &report.metrics {
            write!(out, ",{}", u.scores.get(m).copied().unwrap_or(f64::NAN)).expect("string write");
        }
        let loss = u.loss.map(|l| l.to_string()).unwrap_or_default();
        writeln!(out, ",{loss}").expect("string write");
    }
    out
}

fn header(metrics: &[MetricName]) -> String {
    let mut h = format!("{:<24} {:<4}", "architecture", "cond");
    for m in metrics {
        let title = match m {
            MetricName::Sdr => "SDR [dB]",
            MetricName::Stoi => "STOI [%]",
        };
        write!(h, " {title:>10}").expect("string write");
    }
    h.push_str(&format!(" {:>12} {:>6}", "mask loss", "count"));
    h
}

/// Fixed-width table with N, B and P rows for every architecture. The N row
/// is model-free and repeated under each architecture.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let metrics = reports.first().map(|r| r.metrics.clone()).unwrap_or_else(|| MetricName::ALL.to_vec());
    let head = header(&metrics);
    let mut out = format!("{head}\n{}\n", "-".repeat(head.len()));
    for report in reports {
        let mut architectures: Vec<&str> =
            report.rows.iter().filter(|r| r.condition != Condition::N).map(|r| r.architecture.as_str()).collect();
        architectures.dedup();
        if architectures.is_empty() {
            architectures.push("-");
        }
        for arch in architectures {
            for cond in [Condition::N, Condition::B, Condition::P] {
                let Some(row) = report.row(arch, cond) else { continue };
                write!(out, "{arch:<24} {:<4}", cond.label()).expect("string write");
                for m in &metrics {
                    let v = row.scores.get(m).copied().unwrap_or(f64::NAN);
                    let shown = if *m == MetricName::Stoi { 100.0 * v } else { v };
                    write!(out, " {shown:>10.2}").expect("string write");
                }
                let loss = row.loss.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into());
                writeln!(out, " {loss:>12} {:>6}", row.utterances).expect("string write");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::trainer::evaluate::{summarize, UtteranceResult};

    fn utt(arch: &str, cond: Condition, sdr: f64) -> UtteranceResult {
        let scores = BTreeMap::from([(MetricName::Sdr, sdr), (MetricName::Stoi, 0.5)]);
        UtteranceResult { id: "u".into(), architecture: arch.into(), condition: cond, scores, loss: (cond != Condition::N).then_some(0.1) }
    }

    #[test]
    fn empty_results_give_header_only() {
        let t = render_table(&[]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.starts_with("architecture"));
    }

    #[test]
    fn rows_follow_n_b_p_and_n_repeats() {
        let report = summarize(
            &MetricName::ALL,
            vec![
                utt("", Condition::N, 3.0),
                utt("lstm-1-8", Condition::P, 5.0),
                utt("gru-1-8", Condition::P, 6.0),
                utt("gru-1-8", Condition::B, 4.0),
                utt("lstm-1-8", Condition::B, 4.5),
            ],
        );
        let t = render_table(std::slice::from_ref(&report));
        let conds: Vec<&str> = t.lines().skip(2).map(|l| l.split_whitespace().nth(1).unwrap()).collect();
        assert_eq!(conds, ["N", "B", "P", "N", "B", "P"]);
        let n_rows: Vec<&str> = t.lines().filter(|l| l.split_whitespace().nth(1) == Some("N")).map(|l| &l[24..]).collect();
        assert_eq!(n_rows[0], n_rows[1]);
        assert_eq!(t, render_table(&[report]));
    }

    #[test]
    fn curve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let curve = vec![EpochLoss { epoch: 1, train: 0.25, valid: 0.125 }, EpochLoss { epoch: 2, train: 0.2, valid: 1.0 / 3.0 }];
        let p = dir.path().join("c.csv");
        write_curve(&p, &curve).unwrap();
        assert_eq!(read_curve(&p).unwrap(), curve);
    }
}
