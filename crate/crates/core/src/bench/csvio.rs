//! CSV helpers shared by the artifact writers.

use std::io::{Read, Write};

use crate::abc::ParameterVector;
use crate::error::{Error, Result};

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Sample table: optional `level` and `weight` columns, then one column per
/// parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub names: Vec<String>,
    pub samples: Vec<ParameterVector>,
    pub levels: Option<Vec<usize>>,
    pub weights: Option<Vec<f64>>,
}

impl SampleTable {
    pub fn new(names: Vec<String>, samples: Vec<ParameterVector>) -> Self {
        SampleTable {
            names,
            samples,
            levels: None,
            weights: None,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::new();
        if self.levels.is_some() {
            header.push("level".into());
        }
        if self.weights.is_some() {
            header.push("weight".into());
        }
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, s) in self.samples.iter().enumerate() {
            if s.len() != self.names.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.names.len(),
                    got: s.len(),
                });
            }
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            if let Some(l) = &self.levels {
                row.push(l[i].to_string());
            }
            if let Some(wt) = &self.weights {
                row.push(fmt_f64(wt[i]));
            }
            row.extend(s.iter().map(|&x| fmt_f64(x)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let has_level = header.first().is_some_and(|h| h == "level");
        let has_weight = header.iter().take(2).any(|h| h == "weight");
        let skip = has_level as usize + has_weight as usize;
        let names = header[skip..].to_vec();
        let mut table = SampleTable::new(names, Vec::new());
        if has_level {
            table.levels = Some(Vec::new());
        }
        if has_weight {
            table.weights = Some(Vec::new());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse("ragged sample csv".into()));
            }
            if let Some(l) = &mut table.levels {
                l.push(rec[0].trim().parse().map_err(|_| Error::Parse(format!("bad level `{}`", &rec[0])))?);
            }
            if let Some(w) = &mut table.weights {
                w.push(num(&rec[has_level as usize])?);
            }
            let theta = rec.iter().skip(skip).map(num).collect::<Result<Vec<f64>>>()?;
            table.samples.push(ParameterVector::new(theta)?);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn special_values() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn sample_tables_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20),
            tagged in any::<bool>(),
        ) {
            let n = rows.len();
            let mut t = SampleTable::new(
                vec!["a".into(), "b".into(), "c".into()],
                rows.into_iter().map(|r| ParameterVector::new(r).unwrap()).collect(),
            );
            if tagged {
                t.levels = Some((0..n).map(|i| i % 3 + 1).collect());
                t.weights = Some((0..n).map(|i| 1.0 / (i + 1) as f64).collect());
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            prop_assert_eq!(SampleTable::read_csv(&buf[..]).unwrap(), t);
        }

        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
