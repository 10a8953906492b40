//! Price series input, log-loss transformation, and descriptive statistics.
//!
//! Price files are CSV with header `date,<label>,...`. Dates are ISO
//! (`YYYY-MM-DD`) and must be strictly ascending; every price column must
//! parse as a finite number. Losses are negative log returns
//! `L_t = -ln(P_t / P_{t-1})`, so the loss series is one row shorter than
//! the price series.

use crate::error::{Error, Result};
use std::path::Path;

/// A parsed price table: one shared date column plus one price column per
/// asset. `rows[t][i]` is the price of asset `i` on `dates[t]`.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    pub labels: Vec<String>,
    pub dates: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Per-asset loss observations. `rows[t][i]` is the loss of asset `i`
/// realised on `dates[t]` (the later date of each consecutive price pair).
#[derive(Debug, Clone)]
pub struct LossSeries {
    pub labels: Vec<String>,
    pub dates: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LossSeries {
    /// The loss observations of one asset as a contiguous vector.
    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.rows.iter().map(|row| row[asset]).collect()
    }
}

/// Summary statistics of one sample. Skewness and kurtosis are the
/// moment-ratio forms m3/m2^{3/2} and m4/m2^2 (kurtosis not excess) with
/// central moments normalised by n; the standard deviation uses the n-1
/// denominator. The ratio statistics are `None` when the sample variance
/// is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std_dev: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Reads a price CSV (header `date,<label>,...`, ISO dates strictly
/// ascending, one finite price per asset per row).
pub fn read_prices_csv(path: &Path) -> Result<PriceSeries> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot read price file {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || headers.get(0) != Some("date") {
        return Err(Error::Parse(format!(
            "{}: header must be `date,<label>,...` with at least one asset column",
            path.display()
        )));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut dates: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based file line; line 1 is the header
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(Error::Parse(format!(
                "{}: line {line} has {} fields, expected {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        let date = record.get(0).unwrap_or_default();
        check_iso_date(date)
            .map_err(|msg| Error::Parse(format!("{}: line {line}: {msg}", path.display())))?;
        if let Some(prev) = dates.last() {
            if date <= prev.as_str() {
                return Err(Error::Parse(format!(
                    "{}: line {line}: date {date} does not follow {prev}; \
                     dates must be strictly ascending",
                    path.display()
                )));
            }
        }
        let mut row = Vec::with_capacity(labels.len());
        for (label, field) in labels.iter().zip(record.iter().skip(1)) {
            let value: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {line}: column {label}: cannot parse {field:?} as a number",
                    path.display()
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Parse(format!(
                    "{}: line {line}: column {label}: price {value} is not finite",
                    path.display()
                )));
            }
            row.push(value);
        }
        dates.push(date.to_string());
        rows.push(row);
    }
    Ok(PriceSeries { labels, dates, rows })
}

fn check_iso_date(date: &str) -> std::result::Result<(), String> {
    let bytes = date.as_bytes();
    let ok = bytes.len() == 10
        && bytes[4] == b'-'
        && bytes[7] == b'-'
        && bytes
            .iter()
            .enumerate()
            .all(|(i, b)| matches!(i, 4 | 7) || b.is_ascii_digit());
    if ok {
        Ok(())
    } else {
        Err(format!("date {date:?} is not in YYYY-MM-DD form"))
    }
}

/// Transforms prices into losses `L_t = -ln(P_t / P_{t-1})` per asset.
///
/// Requires at least two price rows and strictly positive prices; the row
/// in [`Error::NonPositivePrice`] is the 1-based file line of the offending
/// price (header counted as line 1).
pub fn log_losses(prices: &PriceSeries) -> Result<LossSeries> {
    if prices.rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 price rows to form losses, got {}",
            prices.rows.len()
        )));
    }
    for (t, row) in prices.rows.iter().enumerate() {
        for (i, &value) in row.iter().enumerate() {
            if value <= 0.0 {
                return Err(Error::NonPositivePrice {
                    label: prices.labels[i].clone(),
                    row: t + 2,
                    value,
                });
            }
        }
    }
    let rows: Vec<Vec<f64>> = prices
        .rows
        .windows(2)
        .map(|pair| {
            pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(&prev, &next)| -(next / prev).ln())
                .collect()
        })
        .collect();
    Ok(LossSeries {
        labels: prices.labels.clone(),
        dates: prices.dates[1..].to_vec(),
        rows,
    })
}

/// Computes descriptive statistics of one sample (at least two values).
pub fn descriptive_stats(values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations for descriptive statistics, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std_dev = (m2 / (nf - 1.0)).sqrt();
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(DescriptiveStats {
        count: n,
        mean,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        std_dev,
        skewness,
        kurtosis,
    })
}
