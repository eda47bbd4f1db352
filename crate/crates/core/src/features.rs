//! Derived feature series: cluster combinations and denoised/detrended
//! transforms. Unlike raw panels these are real-valued and unbounded, but
//! they share the weekly grid and the columnar serialization.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::SeriesPanel;

/// Named weekly feature series for one location.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub location: String,
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// `values[j][t]` is feature `j` at week `t`.
    pub values: Vec<Vec<f64>>,
    pub download_date: NaiveDate,
}

impl FeatureMatrix {
    pub fn new(
        location: impl Into<String>,
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        values: Vec<Vec<f64>>,
        download_date: NaiveDate,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::input("feature matrix has no weeks"));
        }
        for pair in dates.windows(2) {
            if (pair[1] - pair[0]).num_days() != 7 {
                return Err(Error::input("non-uniform spacing in feature dates"));
            }
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::input("duplicate feature names"));
        }
        if values.len() != names.len() {
            return Err(Error::input("feature matrix shape mismatch"));
        }
        for (name, col) in names.iter().zip(&values) {
            if col.len() != dates.len() {
                return Err(Error::input(format!(
                    "feature `{name}` has {} values for {} weeks",
                    col.len(),
                    dates.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("feature `{name}` has non-finite value")));
            }
        }
        Ok(FeatureMatrix {
            location: location.into(),
            dates,
            names,
            values,
            download_date,
        })
    }

    pub fn from_panel(panel: &SeriesPanel) -> Self {
        FeatureMatrix {
            location: panel.location.clone(),
            dates: panel.dates.clone(),
            names: panel.keywords.clone(),
            values: panel.values.clone(),
            download_date: panel.download_date,
        }
    }

    pub fn n_weeks(&self) -> usize {
        self.dates.len()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i].as_slice())
    }

    /// Restriction to the named features, in the given order.
    pub fn subset(&self, names: &[String]) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(names.len());
        for n in names {
            match self.series(n) {
                Some(s) => values.push(s.to_vec()),
                None => return Err(Error::input(format!("feature `{n}` not found"))),
            }
        }
        FeatureMatrix::new(
            self.location.clone(),
            self.dates.clone(),
            names.to_vec(),
            values,
            self.download_date,
        )
    }

    /// Same columnar layout as the panel serialization.
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "keyword", "value", "location", "download_date"])?;
        for (name, col) in self.names.iter().zip(&self.values) {
            for (d, v) in self.dates.iter().zip(col) {
                w.write_record([
                    d.to_string(),
                    name.clone(),
                    format!("{v}"),
                    self.location.clone(),
                    self.download_date.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<FeatureMatrix> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut location: Option<String> = None;
        let mut download_date: Option<NaiveDate> = None;
        let mut names: Vec<String> = Vec::new();
        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::input("feature csv: expected 5 columns"));
            }
            let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
                .map_err(|_| Error::input(format!("malformed date `{}`", &rec[0])))?;
            let name = rec[1].to_string();
            let value: f64 = rec[2]
                .parse()
                .map_err(|_| Error::input(format!("feature csv: bad value `{}`", &rec[2])))?;
            let dl = NaiveDate::parse_from_str(rec[4].trim(), "%Y-%m-%d")
                .map_err(|_| Error::input(format!("malformed date `{}`", &rec[4])))?;
            if location.is_none() {
                location = Some(rec[3].to_string());
                download_date = Some(dl);
            }
            if names.last().map(String::as_str) != Some(name.as_str()) {
                names.push(name);
                values.push(Vec::new());
            }
            if values.len() == 1 {
                dates.push(date);
            }
            values.last_mut().unwrap().push(value);
        }
        FeatureMatrix::new(
            location.ok_or_else(|| Error::input("feature csv: empty file"))?,
            dates,
            names,
            values,
            download_date.unwrap(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_negative_and_fractional_values() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 5).unwrap();
        let fm = FeatureMatrix::new(
            "US-AL",
            (0..3).map(|i| start + chrono::Days::new(7 * i as u64)).collect(),
            vec!["a+b".into(), "c".into()],
            vec![vec![-1.5, 0.25, 103.0], vec![0.1, 0.2, 0.3]],
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        fm.to_csv(&mut buf).unwrap();
        let back = FeatureMatrix::from_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(fm, back);
    }

    #[test]
    fn rejects_bad_shapes() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 5).unwrap();
        let dates: Vec<NaiveDate> = (0..2).map(|i| start + chrono::Days::new(7 * i)).collect();
        let dl = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        assert!(FeatureMatrix::new("x", dates.clone(), vec!["a".into()], vec![vec![1.0]], dl).is_err());
        assert!(FeatureMatrix::new(
            "x",
            dates,
            vec!["a".into(), "a".into()],
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            dl
        )
        .is_err());
    }
}
