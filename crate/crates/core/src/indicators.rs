//! Moving averages and the relative strength index.
//!
//! Every function returns a series aligned with its input. Leading positions
//! for which the indicator is not yet defined are `None`.

use thiserror::Error;

/// Default look-back for [`rsi`].
pub const RSI_PERIOD: usize = 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndicatorError {
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("series of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },
}

fn check(prices: &[f64], period: usize, needed: usize) -> Result<(), IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    if prices.len() < needed {
        return Err(IndicatorError::TooShort {
            len: prices.len(),
            needed,
        });
    }
    Ok(())
}

/// Simple moving average: the mean of the trailing `period` prices.
pub fn sma(prices: &[f64], period: usize) -> Result<Vec<Option<f64>>, IndicatorError> {
    check(prices, period, period)?;
    let mut out = vec![None; prices.len()];
    for (t, w) in prices.windows(period).enumerate() {
        out[t + period - 1] = Some(w.iter().sum::<f64>() / period as f64);
    }
    Ok(out)
}

/// Exponential moving average with weight `2 / (period + 1)`, seeded with the
/// simple average of the first `period` prices.
pub fn ema(prices: &[f64], period: usize) -> Result<Vec<Option<f64>>, IndicatorError> {
    check(prices, period, period)?;
    if period == 1 {
        // weight 1: the recursion reproduces the input
        return Ok(prices.iter().copied().map(Some).collect());
    }
    let weight = 2.0 / (period as f64 + 1.0);
    let mut out = vec![None; prices.len()];
    let seed = prices[..period].iter().sum::<f64>() / period as f64;
    out[period - 1] = Some(seed);
    let mut prev = seed;
    for t in period..prices.len() {
        prev += weight * (prices[t] - prev);
        out[t] = Some(prev);
    }
    Ok(out)
}

/// Relative strength index over the trailing `period` day-over-day changes,
/// using plain (not Wilder-smoothed) averages of gains and losses.
///
/// A window without losses scores 100; a completely flat window scores 50.
pub fn rsi(prices: &[f64], period: usize) -> Result<Vec<Option<f64>>, IndicatorError> {
    check(prices, period, period + 1)?;
    let mut out = vec![None; prices.len()];
    for t in period..prices.len() {
        let (mut gain, mut loss) = (0.0, 0.0);
        for i in t + 1 - period..=t {
            let change = prices[i] - prices[i - 1];
            if change > 0.0 {
                gain += change;
            } else {
                loss -= change;
            }
        }
        let avg_gain = gain / period as f64;
        let avg_loss = loss / period as f64;
        out[t] = Some(rsi_from_averages(avg_gain, avg_loss));
    }
    Ok(out)
}

fn rsi_from_averages(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}
