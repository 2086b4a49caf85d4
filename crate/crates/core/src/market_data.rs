//! Daily OHLCV ingestion and the enriched feature table.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::indicators::{self, IndicatorError, RSI_PERIOD};
use crate::variants::Value;

/// Length of a window terminal, in rows.
pub const WINDOW_LEN: usize = 21;
/// Rows of context a window needs before its last row.
pub const LOOKBACK: usize = WINDOW_LEN - 1;
/// Raw rows consumed before the first retained row. The last [`LOOKBACK`] of
/// them stay attached to the table as window context.
pub const WARM_UP: usize = 220;

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: unexpected header `{found}` (expected `{expected}`)")]
    Header {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: date {date} does not follow the previous row")]
    DateOrder {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
    },
    #[error("{path}: line {line}: duplicate date {date}")]
    DuplicateDate {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
    },
    #[error("series has {len} rows, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("window of length {length} ending at row {end_row} is out of bounds")]
    Window { end_row: usize, length: usize },
    #[error("window length must be 1 or {WINDOW_LEN}, got {0}")]
    WindowLength(usize),
    #[error("{0} has no stored column")]
    Dynamic(Feature),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

impl DataError {
    fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn row(path: &Path, line: u64, message: impl Into<String>) -> Self {
        DataError::Row {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candle {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    fn validate(&self) -> Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close, self.volume];
        if prices.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if !(self.low <= self.open && self.open <= self.high) {
            return Err(format!(
                "open {} outside [low {}, high {}]",
                self.open, self.low, self.high
            ));
        }
        if !(self.low <= self.close && self.close <= self.high) {
            return Err(format!(
                "close {} outside [low {}, high {}]",
                self.close, self.low, self.high
            ));
        }
        if self.volume < 0.0 {
            return Err(format!("negative volume {}", self.volume));
        }
        Ok(())
    }
}

/// The thirteen inputs an agent can observe. All but `ProfitPercentage` are
/// stored in a [`FeatureTable`]; that one is supplied by the backtester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Open,
    Close,
    High,
    Low,
    Volume,
    Ema5,
    Ema13,
    Ema50,
    Ema200,
    Rsi14,
    SmallEmaDiff,
    BigEmaDiff,
    ProfitPercentage,
}

impl Feature {
    /// Features with a stored column, in column order.
    pub const STATIC: [Feature; 12] = [
        Feature::Open,
        Feature::Close,
        Feature::High,
        Feature::Low,
        Feature::Volume,
        Feature::Ema5,
        Feature::Ema13,
        Feature::Ema50,
        Feature::Ema200,
        Feature::Rsi14,
        Feature::SmallEmaDiff,
        Feature::BigEmaDiff,
    ];

    pub const ALL: [Feature; 13] = [
        Feature::Open,
        Feature::Close,
        Feature::High,
        Feature::Low,
        Feature::Volume,
        Feature::Ema5,
        Feature::Ema13,
        Feature::Ema50,
        Feature::Ema200,
        Feature::Rsi14,
        Feature::SmallEmaDiff,
        Feature::BigEmaDiff,
        Feature::ProfitPercentage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Open => "open",
            Feature::Close => "close",
            Feature::High => "high",
            Feature::Low => "low",
            Feature::Volume => "volume",
            Feature::Ema5 => "ema5",
            Feature::Ema13 => "ema13",
            Feature::Ema50 => "ema50",
            Feature::Ema200 => "ema200",
            Feature::Rsi14 => "rsi14",
            Feature::SmallEmaDiff => "smallEmaDiff",
            Feature::BigEmaDiff => "bigEmaDiff",
            Feature::ProfitPercentage => "profitPercentage",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Column index in a [`FeatureTable`], `None` for the runtime feature.
    pub fn column(self) -> Option<usize> {
        match self {
            Feature::ProfitPercentage => None,
            f => Some(f as usize),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One enriched row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub values: [f64; 12],
}

impl FeatureRow {
    /// Value of a stored feature. Panics for `ProfitPercentage`.
    pub fn get(&self, feature: Feature) -> f64 {
        self.values[feature.column().expect("profitPercentage is not stored")]
    }
}

/// A request for one feature at `end_row`: a scalar (`length == 1`) or the
/// 21 values ending at `end_row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowView {
    pub feature: Feature,
    pub end_row: usize,
    pub length: usize,
}

/// Enriched rows stored column-major.
///
/// A table may carry up to [`LOOKBACK`] leading context rows. They are not
/// part of `len()` and cannot be addressed as rows, but 21-row windows
/// ending near the start of the table read into them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dates: Vec<NaiveDate>,
    columns: Vec<Vec<f64>>,
    lookback: usize,
}

impl FeatureTable {
    /// Builds a table from rows; the first `lookback` rows become context.
    pub fn from_rows(rows: &[FeatureRow], lookback: usize) -> Self {
        assert!(lookback <= rows.len(), "lookback exceeds row count");
        let mut columns = vec![Vec::with_capacity(rows.len()); Feature::STATIC.len()];
        for row in rows {
            for (c, v) in columns.iter_mut().zip(row.values) {
                c.push(v);
            }
        }
        FeatureTable {
            dates: rows.iter().map(|r| r.date).collect(),
            columns,
            lookback,
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len() - self.lookback
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of attached context rows.
    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn date(&self, row: usize) -> NaiveDate {
        self.dates[row + self.lookback]
    }

    pub fn value(&self, feature: Feature, row: usize) -> f64 {
        let col = feature.column().expect("profitPercentage is not stored");
        self.columns[col][row + self.lookback]
    }

    pub fn open(&self, row: usize) -> f64 {
        self.value(Feature::Open, row)
    }

    pub fn close(&self, row: usize) -> f64 {
        self.value(Feature::Close, row)
    }

    pub fn row(&self, row: usize) -> FeatureRow {
        let at = row + self.lookback;
        let mut values = [0.0; 12];
        for (v, c) in values.iter_mut().zip(&self.columns) {
            *v = c[at];
        }
        FeatureRow {
            date: self.dates[at],
            values,
        }
    }

    /// Column values of a stored feature for the retained rows.
    pub fn column(&self, feature: Feature) -> &[f64] {
        let col = feature.column().expect("profitPercentage is not stored");
        &self.columns[col][self.lookback..]
    }

    /// First row at which a 21-row window is defined.
    pub fn first_window_row(&self) -> usize {
        LOOKBACK.saturating_sub(self.lookback)
    }

    /// The 21 values of `feature` ending at `end_row`, oldest first.
    pub fn window_slice(&self, feature: Feature, end_row: usize) -> Option<&[f64]> {
        let col = feature.column()?;
        let end = end_row + self.lookback;
        if end < LOOKBACK || end >= self.dates.len() {
            return None;
        }
        Some(&self.columns[col][end - LOOKBACK..=end])
    }

    pub fn window(&self, view: WindowView) -> Result<Value, DataError> {
        if view.feature.column().is_none() {
            return Err(DataError::Dynamic(view.feature));
        }
        let out_of_bounds = DataError::Window {
            end_row: view.end_row,
            length: view.length,
        };
        match view.length {
            1 if view.end_row < self.len() => {
                Ok(Value::Real(self.value(view.feature, view.end_row)))
            }
            1 => Err(out_of_bounds),
            WINDOW_LEN => self
                .window_slice(view.feature, view.end_row)
                .filter(|_| view.end_row < self.len())
                .map(|s| Value::RealVec(s.to_vec()))
                .ok_or(out_of_bounds),
            other => Err(DataError::WindowLength(other)),
        }
    }

    /// Sub-table of `rows`, keeping up to [`LOOKBACK`] preceding rows
    /// (context or retained) as the new table's context.
    pub fn slice(&self, rows: Range<usize>) -> FeatureTable {
        assert!(rows.start <= rows.end && rows.end <= self.len());
        let start = rows.start + self.lookback;
        let context = start.min(LOOKBACK);
        let span = start - context..rows.end + self.lookback;
        FeatureTable {
            dates: self.dates[span.clone()].to_vec(),
            columns: self.columns.iter().map(|c| c[span.clone()].to_vec()).collect(),
            lookback: context,
        }
    }

    /// Sequential 80/20 split: the first `floor(0.8 n)` rows train.
    pub fn split_train_test(&self) -> Result<(FeatureTable, FeatureTable), DataError> {
        let n = self.len();
        if n < 2 {
            return Err(DataError::TooShort { len: n, needed: 2 });
        }
        let cut = n * 4 / 5;
        Ok((self.slice(0..cut), self.slice(cut..n)))
    }

    /// Writes the retained rows (no context) with full precision.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let file = File::create(path).map_err(|e| DataError::io(path, e))?;
        self.write_to(io::BufWriter::new(file))
            .map_err(|e| DataError::io(path, e))
    }

    pub fn write_to<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = std::iter::once("date")
            .chain(Feature::STATIC.iter().map(|f| f.name()))
            .collect();
        w.write_record(&header)?;
        for r in 0..self.len() {
            let row = self.row(r);
            let mut record = Vec::with_capacity(13);
            record.push(row.date.to_string());
            record.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()
    }

    /// Reads a file produced by [`FeatureTable::write_csv`]. The result has
    /// no context rows.
    pub fn read_csv(path: &Path) -> Result<FeatureTable, DataError> {
        let mut reader = open_reader(path)?;
        let expected: Vec<&str> = std::iter::once("date")
            .chain(Feature::STATIC.iter().map(|f| f.name()))
            .collect();
        check_header(path, &mut reader, &expected)?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| DataError::row(path, line, e.to_string()))?;
            if record.len() != expected.len() {
                return Err(DataError::row(
                    path,
                    line,
                    format!("expected {} fields, found {}", expected.len(), record.len()),
                ));
            }
            let date = parse_date(path, line, &record[0])?;
            let mut values = [0.0; 12];
            for (k, v) in values.iter_mut().enumerate() {
                *v = parse_number(path, line, expected[k + 1], &record[k + 1])?;
            }
            rows.push(FeatureRow { date, values });
        }
        Ok(FeatureTable::from_rows(&rows, 0))
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<File>,
    expected: &[&str],
) -> Result<(), DataError> {
    let header = reader
        .headers()
        .map_err(|e| DataError::row(path, 1, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(DataError::Header {
            path: path.to_path_buf(),
            found: header.iter().collect::<Vec<_>>().join(","),
            expected: expected.join(","),
        });
    }
    Ok(())
}

fn parse_date(path: &Path, line: u64, field: &str) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .map_err(|e| DataError::row(path, line, format!("bad date `{field}`: {e}")))
}

fn parse_number(path: &Path, line: u64, name: &str, field: &str) -> Result<f64, DataError> {
    field
        .parse::<f64>()
        .map_err(|_| DataError::row(path, line, format!("bad {name} `{field}`")))
}

/// Reads a `date,open,high,low,close,volume` file.
pub fn load_ohlcv(path: &Path) -> Result<Vec<Candle>, DataError> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &OHLCV_HEADER)?;
    let mut candles: Vec<Candle> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| DataError::row(path, line, e.to_string()))?;
        if record.len() != OHLCV_HEADER.len() {
            return Err(DataError::row(
                path,
                line,
                format!("expected 6 fields, found {}", record.len()),
            ));
        }
        let mut nums = [0.0; 5];
        for (k, v) in nums.iter_mut().enumerate() {
            *v = parse_number(path, line, OHLCV_HEADER[k + 1], &record[k + 1])?;
        }
        let candle = Candle {
            date: parse_date(path, line, &record[0])?,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        };
        candle
            .validate()
            .map_err(|m| DataError::row(path, line, m))?;
        if let Some(prev) = candles.last() {
            if candle.date == prev.date {
                return Err(DataError::DuplicateDate {
                    path: path.to_path_buf(),
                    line,
                    date: candle.date,
                });
            }
            if candle.date < prev.date {
                return Err(DataError::DateOrder {
                    path: path.to_path_buf(),
                    line,
                    date: candle.date,
                });
            }
        }
        candles.push(candle);
    }
    Ok(candles)
}

pub fn write_ohlcv(path: &Path, candles: &[Candle]) -> Result<(), DataError> {
    let write = || -> io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(OHLCV_HEADER)?;
        for c in candles {
            w.write_record([
                c.date.to_string(),
                c.open.to_string(),
                c.high.to_string(),
                c.low.to_string(),
                c.close.to_string(),
                c.volume.to_string(),
            ])?;
        }
        w.flush()
    };
    write().map_err(|e| DataError::io(path, e))
}

/// Computes the indicator columns from close prices and drops the warm-up.
///
/// The returned table holds `candles.len() - WARM_UP` rows plus
/// [`LOOKBACK`] context rows taken from the end of the warm-up.
pub fn enrich(candles: &[Candle]) -> Result<FeatureTable, DataError> {
    let needed = WARM_UP + 1;
    if candles.len() < needed {
        return Err(DataError::TooShort {
            len: candles.len(),
            needed,
        });
    }
    let close: Vec<f64> = candles.iter().map(|c| c.close).collect();
    let ema5 = indicators::ema(&close, 5)?;
    let ema13 = indicators::ema(&close, 13)?;
    let ema50 = indicators::ema(&close, 50)?;
    let ema200 = indicators::ema(&close, 200)?;
    let rsi = indicators::rsi(&close, RSI_PERIOD)?;

    let first = WARM_UP - LOOKBACK;
    let rows: Vec<FeatureRow> = (first..candles.len())
        .map(|t| {
            let c = &candles[t];
            let defined = |s: &[Option<f64>]| s[t].expect("indicator defined after warm-up");
            let (e5, e13, e50, e200) = (
                defined(&ema5),
                defined(&ema13),
                defined(&ema50),
                defined(&ema200),
            );
            FeatureRow {
                date: c.date,
                values: [
                    c.open,
                    c.close,
                    c.high,
                    c.low,
                    c.volume,
                    e5,
                    e13,
                    e50,
                    e200,
                    defined(&rsi),
                    e5 - e13,
                    e50 - e200,
                ],
            }
        })
        .collect();
    Ok(FeatureTable::from_rows(&rows, LOOKBACK))
}
