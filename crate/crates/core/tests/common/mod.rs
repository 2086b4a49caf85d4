#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use gptrade::market_data::{enrich, write_ohlcv, Candle, FeatureRow, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn day(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).unwrap() + Days::new(i as u64)
}

/// Candles whose open is the previous close and whose range brackets both
/// by half a point.
pub fn candles_from_closes(closes: &[f64]) -> Vec<Candle> {
    closes
        .iter()
        .enumerate()
        .map(|(i, &close)| {
            let open = if i == 0 { close } else { closes[i - 1] };
            Candle {
                date: day(i),
                open,
                high: open.max(close) + 0.5,
                low: open.min(close) - 0.5,
                close,
                volume: 1_000_000.0 + 1000.0 * (i % 7) as f64,
            }
        })
        .collect()
}

pub fn random_walk_closes(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut price: f64 = 100.0;
    (0..n)
        .map(|_| {
            price = (price + rng.random_range(-2.0..2.0)).max(5.0);
            price
        })
        .collect()
}

pub fn random_walk(n: usize, seed: u64) -> Vec<Candle> {
    candles_from_closes(&random_walk_closes(n, seed))
}

/// Close price following a deterministic 20-day sinusoid.
pub fn sinusoid(n: usize) -> Vec<Candle> {
    let closes: Vec<f64> = (0..n)
        .map(|t| 100.0 + 10.0 * (2.0 * PI * t as f64 / 20.0).sin())
        .collect();
    candles_from_closes(&closes)
}

pub fn write_candles(dir: &Path, name: &str, candles: &[Candle]) -> PathBuf {
    let path = dir.join(format!("{name}.csv"));
    write_ohlcv(&path, candles).unwrap();
    path
}

pub fn enriched(candles: &[Candle]) -> FeatureTable {
    enrich(candles).unwrap()
}

/// A table without indicator content, for backtests that only need open
/// and close prices.
pub fn quote_table(quotes: &[(f64, f64)]) -> FeatureTable {
    let rows: Vec<FeatureRow> = quotes
        .iter()
        .enumerate()
        .map(|(i, &(open, close))| {
            let mut values = [0.0; 12];
            values[0] = open;
            values[1] = close;
            values[2] = open.max(close);
            values[3] = open.min(close);
            FeatureRow { date: day(i), values }
        })
        .collect();
    FeatureTable::from_rows(&rows, 0)
}
