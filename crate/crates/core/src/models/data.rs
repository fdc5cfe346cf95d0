//! Observed and simulated datasets, and their plain-text file formats.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Susceptible counts observed at strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesData {
    times: Vec<f64>,
    values: Vec<u32>,
}

impl TimeSeriesData {
    pub fn new(times: Vec<f64>, values: Vec<u32>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "observation times must be finite and strictly increasing".into(),
            ));
        }
        Ok(TimeSeriesData { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks every value against a population size.
    pub fn check_population(&self, n_pop: u32) -> Result<()> {
        match self.values.iter().find(|&&v| v > n_pop) {
            Some(v) => Err(Error::InvalidArgument(format!(
                "count {v} exceeds population {n_pop}"
            ))),
            None => Ok(()),
        }
    }

    /// Reads `time,count` rows. A header line is optional.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in two_column_rows(reader)? {
            let (a, b) = row;
            times.push(parse_f64(&a)?);
            values.push(b.trim().parse().map_err(|_| Error::Parse(format!("bad count `{b}`")))?);
        }
        Self::new(times, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "count"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([crate::bench::csvio::fmt_f64(*t), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Genotype cluster sizes of a sampled set of cases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterData {
    /// Sorted in decreasing order.
    cluster_sizes: Vec<u64>,
    n: u64,
}

impl ClusterData {
    pub fn new(mut cluster_sizes: Vec<u64>) -> Result<Self> {
        if cluster_sizes.is_empty() {
            return Err(Error::InvalidArgument("no clusters".into()));
        }
        if cluster_sizes.contains(&0) {
            return Err(Error::InvalidArgument("cluster sizes must be positive".into()));
        }
        cluster_sizes.sort_unstable_by(|a, b| b.cmp(a));
        let n = cluster_sizes.iter().sum();
        Ok(ClusterData { cluster_sizes, n })
    }

    /// Builds from `(size, multiplicity)` pairs.
    pub fn from_summary(summary: &[(u64, u64)]) -> Result<Self> {
        let sizes = summary
            .iter()
            .flat_map(|&(size, mult)| std::iter::repeat_n(size, mult as usize))
            .collect();
        Self::new(sizes)
    }

    /// The IS6110 fingerprint dataset: 473 cases in 326 genotype clusters.
    pub fn tuberculosis_observed() -> Self {
        Self::read_csv(TB_FIXTURE.as_bytes()).expect("bundled fixture is valid")
    }

    pub fn cluster_sizes(&self) -> &[u64] {
        &self.cluster_sizes
    }

    /// Total number of cases.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of distinct genotypes.
    pub fn g(&self) -> u64 {
        self.cluster_sizes.len() as u64
    }

    /// `(size, multiplicity)` pairs, largest size first.
    pub fn summary(&self) -> Vec<(u64, u64)> {
        let mut m: BTreeMap<u64, u64> = BTreeMap::new();
        for &s in &self.cluster_sizes {
            *m.entry(s).or_default() += 1;
        }
        m.into_iter().rev().collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut summary = Vec::new();
        for (a, b) in two_column_rows(reader)? {
            let size = a.trim().parse().map_err(|_| Error::Parse(format!("bad size `{a}`")))?;
            let mult = b.trim().parse().map_err(|_| Error::Parse(format!("bad multiplicity `{b}`")))?;
            summary.push((size, mult));
        }
        Self::from_summary(&summary)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cluster_size", "multiplicity"])?;
        for (s, m) in self.summary() {
            w.write_record([s.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

pub(crate) const TB_FIXTURE: &str = include_str!("../../data/tb_clusters.csv");

fn two_column_rows<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("expected 2 columns, found {}", rec.len())));
        }
        let first = rec[0].to_string();
        if i == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        rows.push((first, rec[1].to_string()));
    }
    Ok(rows)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tb_data_matches_published_summary() {
        let d = ClusterData::tuberculosis_observed();
        assert_eq!(d.n(), 473);
        assert_eq!(d.g(), 326);
        assert_eq!(d.cluster_sizes()[0], 30);
        let singletons = d.cluster_sizes().iter().filter(|&&s| s == 1).count();
        assert_eq!(singletons, 282);
    }

    #[test]
    fn time_series_rejects_bad_input() {
        assert!(TimeSeriesData::new(vec![1.0, 1.0], vec![3, 4]).is_err());
        assert!(TimeSeriesData::new(vec![1.0], vec![3, 4]).is_err());
        let d = TimeSeriesData::new(vec![1.0, 2.0], vec![3, 40]).unwrap();
        assert!(d.check_population(30).is_err());
        assert!(d.check_population(40).is_ok());
    }

    #[test]
    fn csv_round_trips() {
        let d = TimeSeriesData::new(vec![4.0, 8.0, 12.5], vec![99, 90, 71]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(TimeSeriesData::read_csv(buf.as_slice()).unwrap(), d);

        let c = ClusterData::tuberculosis_observed();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(ClusterData::read_csv(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn clusters_reject_zero_sizes() {
        assert!(ClusterData::new(vec![2, 0]).is_err());
        assert!(ClusterData::new(vec![]).is_err());
    }
}
