//! Aggregation of experiment summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use super::experiment::SUMMARY_HEADER;
use super::metrics::{fit_convergence_slope, SlopeFit};
use crate::error::{Error, Result};

/// One parsed `summary.csv` line.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub sampler: String,
    pub epsilon: f64,
    pub replications: usize,
    pub failures: usize,
    pub allocations: String,
    pub trial_cost: u64,
    pub mean_n_s: f64,
    pub rmse: Option<f64>,
    pub mean_coupling_bias: Option<f64>,
}

impl SummaryRow {
    /// Study group: the name up to its last `-`.
    pub fn group(&self) -> &str {
        self.name.rsplit_once('-').map_or(&self.name, |(g, _)| g)
    }
}

fn find_summaries(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_summaries(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "summary.csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every `summary.csv` below `dir`.
pub fn collect_summaries(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut files = Vec::new();
    find_summaries(dir, &mut files)?;
    let mut rows = Vec::new();
    for f in files {
        let mut r = csv::Reader::from_reader(File::open(&f)?);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != SUMMARY_HEADER {
            return Err(Error::Parse(format!("{}: unexpected header", f.display())));
        }
        for rec in r.records() {
            let rec = rec?;
            let bad = |s: &str| Error::Parse(format!("{}: bad field `{s}`", f.display()));
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(s))
                }
            };
            rows.push(SummaryRow {
                name: rec[0].to_string(),
                sampler: rec[1].to_string(),
                epsilon: rec[2].parse().map_err(|_| bad(&rec[2]))?,
                replications: rec[3].parse().map_err(|_| bad(&rec[3]))?,
                failures: rec[4].parse().map_err(|_| bad(&rec[4]))?,
                allocations: rec[5].to_string(),
                trial_cost: rec[6].parse().map_err(|_| bad(&rec[6]))?,
                mean_n_s: rec[7].parse().map_err(|_| bad(&rec[7]))?,
                rmse: opt(&rec[8])?,
                mean_coupling_bias: opt(&rec[9])?,
            });
        }
    }
    Ok(rows)
}

/// Convergence slope per group with RMSE points at two or more distinct
/// final thresholds.
pub fn group_slopes(rows: &[SummaryRow]) -> BTreeMap<String, SlopeFit> {
    let mut groups: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(e) = r.rmse {
            groups.entry(r.group().to_string()).or_default().push((r.epsilon, r.mean_n_s, e));
        }
    }
    groups
        .into_iter()
        .filter(|(_, pts)| pts.iter().any(|p| p.0 != pts[0].0))
        .filter_map(|(g, pts)| {
            let pts: Vec<(f64, f64)> = pts.iter().map(|p| (p.1, p.2)).collect();
            fit_convergence_slope(&pts).ok().map(|f| (g, f))
        })
        .collect()
}

/// Plain-text table of all runs followed by the fitted slopes.
pub fn render(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<28} {:>10} {:>12} {:>14} {:>10} {:>10}\n",
        "name", "epsilon", "trial N_s", "mean N_s", "rmse", "bias"
    );
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        s += &format!(
            "{:<28} {:>10.4} {:>12} {:>14.0} {:>10} {:>10}{}\n",
            r.name,
            r.epsilon,
            r.trial_cost,
            r.mean_n_s,
            opt(r.rmse),
            opt(r.mean_coupling_bias),
            if r.failures > 0 { format!("  ({} failed)", r.failures) } else { String::new() }
        );
    }
    for (g, f) in group_slopes(rows) {
        match f.ci {
            Some((lo, hi)) => s += &format!("slope {g}: {:.3} [{lo:.3}, {hi:.3}]\n", f.slope),
            None => s += &format!("slope {g}: {:.3} (two points, no interval)\n", f.slope),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, epsilon: f64, cost: f64, rmse: f64) -> SummaryRow {
        SummaryRow {
            name: name.into(),
            sampler: "mlmc".into(),
            epsilon,
            replications: 1,
            failures: 0,
            allocations: String::new(),
            trial_cost: 0,
            mean_n_s: cost,
            rmse: Some(rmse),
            mean_coupling_bias: None,
        }
    }

    #[test]
    fn slopes_only_for_varying_thresholds() {
        let rows = vec![
            row("a-L1", 2.0, 100.0, 0.1),
            row("a-L2", 1.0, 1600.0, 0.05),
            row("b-m4", 1.0, 100.0, 0.1),
            row("b-m2", 1.0, 200.0, 0.2),
        ];
        let s = group_slopes(&rows);
        assert_eq!(s.keys().collect::<Vec<_>>(), ["a"]);
        assert!((s["a"].slope + 0.25).abs() < 1e-12);
    }
}
