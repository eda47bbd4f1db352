//! Weekly search-volume panels: parsing exported CSVs, replicate alignment
//! and the internal columnar serialization.

use std::collections::BTreeSet;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A keyword-by-week matrix of search volumes for one location.
///
/// Values are the 0-100 relative index reported per keyword and week.
/// Dates are week-start dates with uniform 7-day spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    pub location: String,
    pub dates: Vec<NaiveDate>,
    pub keywords: Vec<String>,
    /// `values[k][w]` is keyword `k` at week `w`.
    pub values: Vec<Vec<f64>>,
    pub download_date: NaiveDate,
}

impl SeriesPanel {
    /// Builds a panel, validating every structural invariant.
    pub fn new(
        location: impl Into<String>,
        dates: Vec<NaiveDate>,
        keywords: Vec<String>,
        values: Vec<Vec<f64>>,
        download_date: NaiveDate,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::input("panel has no weeks"));
        }
        for pair in dates.windows(2) {
            let gap = (pair[1] - pair[0]).num_days();
            if gap <= 0 {
                return Err(Error::input(format!(
                    "duplicate or out-of-order week {}",
                    pair[1]
                )));
            }
            if gap != 7 {
                return Err(Error::input(format!(
                    "non-uniform spacing: {} to {} is {} days",
                    pair[0], pair[1], gap
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for k in &keywords {
            if !seen.insert(k.as_str()) {
                return Err(Error::input(format!("duplicate keyword `{k}`")));
            }
        }
        if values.len() != keywords.len() {
            return Err(Error::input("value matrix row count != keyword count"));
        }
        for (k, row) in keywords.iter().zip(&values) {
            if row.len() != dates.len() {
                return Err(Error::input(format!(
                    "series `{k}` has {} values for {} weeks",
                    row.len(),
                    dates.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 100.0) {
                return Err(Error::input(format!(
                    "series `{k}` has out-of-range volume {v}"
                )));
            }
        }
        Ok(SeriesPanel {
            location: location.into(),
            dates,
            keywords,
            values,
            download_date,
        })
    }

    pub fn n_weeks(&self) -> usize {
        self.dates.len()
    }

    pub fn n_keywords(&self) -> usize {
        self.keywords.len()
    }

    pub fn series(&self, keyword: &str) -> Option<&[f64]> {
        self.keywords
            .iter()
            .position(|k| k == keyword)
            .map(|i| self.values[i].as_slice())
    }

    /// Panel restricted to the given keywords, in the given order.
    pub fn subset(&self, keywords: &[String]) -> Result<SeriesPanel> {
        let mut values = Vec::with_capacity(keywords.len());
        for k in keywords {
            match self.series(k) {
                Some(s) => values.push(s.to_vec()),
                None => return Err(Error::input(format!("keyword `{k}` not in panel"))),
            }
        }
        SeriesPanel::new(
            self.location.clone(),
            self.dates.clone(),
            keywords.to_vec(),
            values,
            self.download_date,
        )
    }

    /// Writes the internal columnar serialization:
    /// `date,keyword,value,location,download_date`, keyword-major.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "keyword", "value", "location", "download_date"])?;
        for (k, row) in self.keywords.iter().zip(&self.values) {
            for (d, v) in self.dates.iter().zip(row) {
                w.write_record([
                    d.to_string(),
                    k.clone(),
                    format!("{v}"),
                    self.location.clone(),
                    self.download_date.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the internal columnar serialization written by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<SeriesPanel> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut location: Option<String> = None;
        let mut download_date: Option<NaiveDate> = None;
        let mut keywords: Vec<String> = Vec::new();
        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::input("panel csv: expected 5 columns"));
            }
            let date = parse_date(&rec[0])?;
            let keyword = rec[1].to_string();
            let value: f64 = rec[2]
                .parse()
                .map_err(|_| Error::input(format!("panel csv: bad value `{}`", &rec[2])))?;
            let loc = rec[3].to_string();
            let dl = parse_date(&rec[4])?;
            match &location {
                None => {
                    location = Some(loc);
                    download_date = Some(dl);
                }
                Some(l) => {
                    if *l != loc || download_date != Some(dl) {
                        return Err(Error::input("panel csv: mixed location or download date"));
                    }
                }
            }
            if keywords.last().map(String::as_str) != Some(keyword.as_str()) {
                keywords.push(keyword);
                values.push(Vec::new());
            }
            if values.len() == 1 {
                dates.push(date);
            } else {
                let idx = values.last().unwrap().len();
                if dates.get(idx) != Some(&date) {
                    return Err(Error::input("panel csv: keywords disagree on week grid"));
                }
            }
            values.last_mut().unwrap().push(value);
        }
        SeriesPanel::new(
            location.ok_or_else(|| Error::input("panel csv: empty file"))?,
            dates,
            keywords,
            values,
            download_date.unwrap(),
        )
    }
}

/// Replicate downloads of the same query set: identical keywords and dates,
/// typically distinct download dates.
#[derive(Debug, Clone)]
pub struct ReplicateStore {
    pub panels: Vec<SeriesPanel>,
}

impl ReplicateStore {
    pub fn new(panels: Vec<SeriesPanel>) -> Result<Self> {
        let first = panels
            .first()
            .ok_or_else(|| Error::input("replicate store needs at least one panel"))?;
        for p in &panels[1..] {
            if p.keywords != first.keywords {
                return Err(Error::input("replicate panels have differing keyword sets"));
            }
            if p.dates != first.dates {
                return Err(Error::input("replicate panels have differing week grids"));
            }
        }
        Ok(ReplicateStore { panels })
    }

    pub fn n_replicates(&self) -> usize {
        self.panels.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.panels[0].dates
    }

    pub fn keywords(&self) -> &[String] {
        &self.panels[0].keywords
    }

    /// Replicate-by-week matrix for one keyword.
    pub fn replicate_rows(&self, keyword: &str) -> Result<Vec<&[f64]>> {
        self.panels
            .iter()
            .map(|p| {
                p.series(keyword)
                    .ok_or_else(|| Error::input(format!("keyword `{keyword}` not in store")))
            })
            .collect()
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::input(format!("malformed date `{s}`")))
}

/// Parses a "interest over time" CSV export into a panel.
///
/// Accepts both the two-line `Category:` preamble and preamble-free files.
/// `<1` cells are stored as 0; any other non-numeric cell is an error.
pub fn parse_trends_csv(
    raw_text: &str,
    location: &str,
    download_date: NaiveDate,
) -> Result<SeriesPanel> {
    let text = raw_text.strip_prefix('\u{feff}').unwrap_or(raw_text);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();

    let mut header = loop {
        match records.next() {
            Some(rec) => {
                let rec = rec?;
                let first = rec.get(0).unwrap_or("").trim();
                if first.is_empty() {
                    continue;
                }
                if first.starts_with("Category") {
                    continue;
                }
                break rec;
            }
            None => return Err(Error::input("empty export file")),
        }
    };
    if header.get(0).map(str::trim) != Some("Week") {
        // A valueless file may also lead with the date column name variants.
        return Err(Error::input(format!(
            "expected `Week` header, found `{}`",
            header.get(0).unwrap_or("")
        )));
    }
    header.trim();
    let keywords: Vec<String> = header
        .iter()
        .skip(1)
        .map(|col| {
            // Columns read `<term>: (<region>)`; strip the region suffix.
            match col.rfind(": (") {
                Some(idx) => col[..idx].to_string(),
                None => col.trim().to_string(),
            }
        })
        .collect();
    if keywords.is_empty() {
        return Err(Error::input("export has no keyword columns"));
    }

    let mut dates = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); keywords.len()];
    let mut seen_weeks = BTreeSet::new();
    for rec in records {
        let rec = rec?;
        if rec.len() == 1 && rec.get(0).map(str::trim) == Some("") {
            continue;
        }
        let date = parse_date(rec.get(0).unwrap_or(""))?;
        if !seen_weeks.insert(date) {
            return Err(Error::input(format!("duplicate week row {date}")));
        }
        if rec.len() != keywords.len() + 1 {
            return Err(Error::input(format!(
                "week {date}: expected {} cells, found {}",
                keywords.len(),
                rec.len() - 1
            )));
        }
        dates.push(date);
        for (k, cell) in values.iter_mut().zip(rec.iter().skip(1)) {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::input(format!("week {date}: missing cell")));
            }
            let v = if cell == "<1" {
                // Sub-threshold volumes are reported as zero.
                0.0
            } else {
                let parsed: u32 = cell.parse().map_err(|_| {
                    Error::input(format!("week {date}: non-numeric cell `{cell}`"))
                })?;
                if parsed > 100 {
                    return Err(Error::input(format!(
                        "week {date}: volume {parsed} exceeds 100"
                    )));
                }
                f64::from(parsed)
            };
            k.push(v);
        }
    }
    SeriesPanel::new(location, dates, keywords, values, download_date)
}

/// Aligns replicate downloads on the intersection of their date ranges and
/// keyword sets, in canonical (sorted) order.
pub fn align_panels(panels: &[SeriesPanel]) -> Result<ReplicateStore> {
    if panels.len() < 2 {
        return Err(Error::input("alignment needs at least two panels"));
    }
    let mut common_dates: BTreeSet<NaiveDate> = panels[0].dates.iter().copied().collect();
    let mut common_keywords: BTreeSet<String> = panels[0].keywords.iter().cloned().collect();
    for p in &panels[1..] {
        let dates: BTreeSet<NaiveDate> = p.dates.iter().copied().collect();
        common_dates = common_dates.intersection(&dates).copied().collect();
        let kws: BTreeSet<String> = p.keywords.iter().cloned().collect();
        common_keywords = common_keywords.intersection(&kws).cloned().collect();
    }
    if common_dates.is_empty() {
        return Err(Error::input("panels share no weeks"));
    }
    if common_keywords.is_empty() {
        return Err(Error::input("panels share no keywords"));
    }
    let dates: Vec<NaiveDate> = common_dates.into_iter().collect();
    let keywords: Vec<String> = common_keywords.into_iter().collect();

    let mut aligned = Vec::with_capacity(panels.len());
    for p in panels {
        let idx: Vec<usize> = dates
            .iter()
            .map(|d| p.dates.iter().position(|x| x == d).unwrap())
            .collect();
        let mut values = Vec::with_capacity(keywords.len());
        for k in &keywords {
            let full = p.series(k).unwrap();
            values.push(idx.iter().map(|&i| full[i]).collect());
        }
        aligned.push(SeriesPanel::new(
            p.location.clone(),
            dates.clone(),
            keywords.clone(),
            values,
            p.download_date,
        )?);
    }
    ReplicateStore::new(aligned)
}

/// Fraction of weeks reported as zero.
pub fn zero_fraction(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::input("zero_fraction of empty series"));
    }
    let zeros = series.iter().filter(|v| **v == 0.0).count();
    Ok(zeros as f64 / series.len() as f64)
}
