//! Price ingestion and return panels.
//!
//! CSV layout: a header row whose first column is the date (ISO-8601,
//! `YYYY-MM-DD`) followed by one adjusted-close column per asset. Any row
//! with a missing price is dropped (listwise deletion) and counted.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which columns to read from a price file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSchema {
    pub date_column: String,
    /// Asset columns to keep, in order; `None` keeps every non-date column.
    pub columns: Option<Vec<String>>,
}

impl Default for PriceSchema {
    fn default() -> Self {
        Self { date_column: "date".into(), columns: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// `T × N`, row per date.
    pub prices: Vec<Vec<f64>>,
    /// Rows removed because at least one price was missing.
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    /// Date at the end of each return period.
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// `(T-1) × N` simple returns.
    pub returns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatedPanel {
    /// `M × N` prefix sums of returns.
    pub accum: Vec<Vec<f64>>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("null")
}

pub fn load_prices(path: impl AsRef<Path>, schema: &PriceSchema) -> Result<PricePanel> {
    let file = std::fs::File::open(path.as_ref())?;
    read_prices(file, schema)
}

pub fn read_prices<R: Read>(reader: R, schema: &PriceSchema) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let date_idx = header
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| Error::Parse(format!("missing date column `{}`", schema.date_column)))?;
    let selected: Vec<(usize, String)> = match &schema.columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .map(|i| (i, c.clone()))
                    .ok_or_else(|| Error::Parse(format!("missing price column `{c}`")))
            })
            .collect::<Result<_>>()?,
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::Parse("no price columns".into()));
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    let mut dropped = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let raw_date = rec.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| Error::Parse(format!("bad date `{raw_date}`: {e}")))?;
        let mut vals = Vec::with_capacity(selected.len());
        let mut missing = false;
        for (idx, name) in &selected {
            let cell = rec.get(*idx).unwrap_or("");
            if is_missing(cell) {
                missing = true;
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("bad price `{cell}` for {name} on {date}")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositivePrice { asset: name.clone(), date: date.to_string(), value: v });
            }
            vals.push(v);
        }
        if missing {
            dropped += 1;
        } else {
            rows.push((date, vals));
        }
    }
    // stable sort keeps the relative order of surviving rows
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse(format!("duplicate date {}", w[0].0)));
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!("{} usable price rows, need at least 2", rows.len())));
    }
    let (dates, prices) = rows.into_iter().unzip();
    Ok(PricePanel { dates, assets: selected.into_iter().map(|(_, n)| n).collect(), prices, dropped_rows: dropped })
}

impl PricePanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, asset: &str) -> Option<Vec<f64>> {
        let j = self.assets.iter().position(|a| a == asset)?;
        Some(self.prices.iter().map(|r| r[j]).collect())
    }

    /// Removes `asset` from the panel and returns its price column.
    pub fn take_column(&mut self, asset: &str) -> Option<Vec<f64>> {
        let j = self.assets.iter().position(|a| a == asset)?;
        self.assets.remove(j);
        Some(self.prices.iter_mut().map(|r| r.remove(j)).collect())
    }
}

/// Simple returns `P_t / P_{t-1} - 1`.
pub fn to_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.prices.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 prices to form a return".into()));
    }
    let returns = panel
        .prices
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(p1, p0)| p1 / p0 - 1.0).collect())
        .collect();
    Ok(ReturnPanel { dates: panel.dates[1..].to_vec(), assets: panel.assets.clone(), returns })
}

pub fn series_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 prices to form a return".into()));
    }
    Ok(prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// Uncompounded accumulation: prefix sums along time.
pub fn accumulate_uncompounded(returns: &[Vec<f64>]) -> AccumulatedPanel {
    let mut acc: Vec<Vec<f64>> = Vec::with_capacity(returns.len());
    for row in returns {
        let next = match acc.last() {
            Some(prev) => prev.iter().zip(row).map(|(a, r)| a + r).collect(),
            None => row.clone(),
        };
        acc.push(next);
    }
    AccumulatedPanel { accum: acc }
}

/// Prefix sums of a single series.
pub fn accumulate_series(returns: &[f64]) -> Vec<f64> {
    returns
        .iter()
        .scan(0.0, |s, r| {
            *s += r;
            Some(*s)
        })
        .collect()
}

impl ReturnPanel {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.returns.iter().map(|r| r[j]).collect()
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns[start..end].to_vec(),
        }
    }

    /// Writes `date,asset1,...` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        wtr.write_record(&header)?;
        for (d, row) in self.dates.iter().zip(&self.returns) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
