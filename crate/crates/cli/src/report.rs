//! Long-format result rows and their per-seed aggregation.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sgt_core::stats::mean_half_range;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    pub fn new(experiment: &str, method: &str, seed: u64, metric: &str, value: f64) -> Self {
        ResultRow { experiment: experiment.into(), method: method.into(), seed, metric: metric.into(), value }
    }
}

/// Appends to `path`, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let fresh = file.metadata()?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub half_range: f64,
    pub seeds: usize,
}

/// Mean and half-range over seeds per `(experiment, method, metric)`, in
/// sorted key order. `only` keeps one experiment.
pub fn summarize(rows: &[ResultRow], only: Option<&str>) -> Result<Vec<SummaryRow>, CliError> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| only.is_none_or(|e| r.experiment == e)) {
        groups.entry((&r.experiment, &r.method, &r.metric)).or_default().push(r.value);
    }
    if groups.is_empty() {
        return Err(CliError::EmptyResults);
    }
    Ok(groups
        .into_iter()
        .map(|((e, m, k), vs)| {
            let (mean, half_range) = mean_half_range(&vs).expect("groups are nonempty");
            SummaryRow { experiment: e.into(), method: m.into(), metric: k.into(), mean, half_range, seeds: vs.len() }
        })
        .collect())
}

/// Up to four decimals, trailing zeros dropped.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn fmt_cell(r: &SummaryRow) -> String {
    format!("{} ± {}", fmt_num(r.mean), fmt_num(r.half_range))
}

/// One table per experiment: methods as rows, metrics as columns.
pub fn markdown(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut by_exp: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary {
        by_exp.entry(&r.experiment).or_default().push(r);
    }
    for (exp, rows) in by_exp {
        let mut metrics: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        metrics.sort();
        metrics.dedup();
        let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        methods.sort();
        methods.dedup();
        out.push_str(&format!("### {exp}\n\n| method | {} |\n|---|{}\n", metrics.join(" | "), "---|".repeat(metrics.len())));
        for m in methods {
            let cells: Vec<String> = metrics
                .iter()
                .map(|k| rows.iter().find(|r| r.method == m && r.metric == *k).map_or("".into(), |r| fmt_cell(r)))
                .collect();
            out.push_str(&format!("| {m} | {} |\n", cells.join(" | ")));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(values: &[(u64, &str, &str, f64)]) -> Vec<ResultRow> {
        values.iter().map(|&(seed, method, metric, v)| ResultRow::new("bc", method, seed, metric, v)).collect()
    }

    #[test]
    fn identical_seeds_have_zero_range() {
        let s = summarize(&rows(&[(1, "sgt", "success", 0.5), (2, "sgt", "success", 0.5), (3, "sgt", "success", 0.5)]), None).unwrap();
        assert_eq!(fmt_cell(&s[0]), "0.5 ± 0");
    }

    #[test]
    fn mean_and_half_range() {
        let s = summarize(&rows(&[(1, "sgt", "success", 0.9), (2, "sgt", "success", 0.95), (3, "sgt", "success", 1.0)]), None).unwrap();
        assert_eq!(fmt_cell(&s[0]), "0.95 ± 0.05");
        assert_eq!(s[0].seeds, 3);
    }

    #[test]
    fn grouping_by_method_and_metric() {
        let r = rows(&[
            (1, "sgt", "success", 1.0),
            (1, "seq", "success", 0.0),
            (1, "sgt", "calls", 15.0),
            (2, "sgt", "success", 0.5),
            (2, "seq", "calls", 30.0),
        ]);
        let s = summarize(&r, None).unwrap();
        let keys: Vec<(&str, &str, usize)> = s.iter().map(|r| (r.method.as_str(), r.metric.as_str(), r.seeds)).collect();
        assert_eq!(keys, vec![("seq", "calls", 1), ("seq", "success", 1), ("sgt", "calls", 1), ("sgt", "success", 2)]);
        assert_eq!(s[3].mean, 0.75);
        let md = markdown(&s);
        assert!(md.contains("| method | calls | success |"), "{md}");
        assert!(md.contains("| sgt | 15 ± 0 | 0.75 ± 0.25 |"), "{md}");
    }

    #[test]
    fn empty_results() {
        assert!(matches!(summarize(&[], None), Err(CliError::EmptyResults)));
        assert!(matches!(summarize(&rows(&[(1, "sgt", "x", 1.0)]), Some("pg")), Err(CliError::EmptyResults)));
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.12345), "0.1235");
        assert_eq!(fmt_num(-0.00001), "0");
    }
}
