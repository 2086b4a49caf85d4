//! Trade simulation, ROI, win rate and fitness.
//!
//! Position rules:
//! - Buy (Sell) while flat opens a long (short) position at the row's open.
//! - The opposite signal while positioned closes at the row's close; the
//!   opposite position opens at the next row's open.
//! - Hold, or a signal matching the open position, does nothing.
//! - Whatever is still open after the last row is closed at its close.
//!
//! Every position is sized at a fixed stake: `shares = stake / open`.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};
use std::ops::Range;

use chrono::NaiveDate;
use thiserror::Error;

use crate::market_data::FeatureTable;
use crate::variants::{EvalError, ExprTree, RowContext, Signal, Variant};

/// Money committed to every position.
pub const STAKE: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("backtest needs at least 2 rows, got {0}")]
    TooShort(usize),
    #[error("rows {start}..{end} exceed table of {len} rows")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("{given} signals for {rows} rows")]
    SignalCount { given: usize, rows: usize },
    #[error("row {row}: {source}")]
    Eval {
        row: usize,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    fn opposite(self) -> Direction {
        match self {
            Direction::Long => Direction::Short,
            Direction::Short => Direction::Long,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Long => "long",
            Direction::Short => "short",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Flat,
    Open {
        direction: Direction,
        shares: f64,
        entry: f64,
    },
}

impl Position {
    pub fn direction(&self) -> Option<Direction> {
        match self {
            Position::Flat => None,
            Position::Open { direction, .. } => Some(*direction),
        }
    }
}

/// Opening and closing prices of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub open: f64,
    pub close: f64,
}

/// What happened on one processed row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    pub opened: Option<Direction>,
    pub closed: Option<Direction>,
    pub realized: Option<f64>,
}

/// Ledger state carried across rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeState {
    stake: f64,
    position: Position,
    pending: Option<Direction>,
    profits: Vec<f64>,
    profit_percentage: f64,
}

impl Default for TradeState {
    fn default() -> Self {
        TradeState::new(STAKE)
    }
}

impl TradeState {
    pub fn new(stake: f64) -> Self {
        TradeState {
            stake,
            position: Position::Flat,
            pending: None,
            profits: Vec::new(),
            profit_percentage: 0.0,
        }
    }

    pub fn position(&self) -> Position {
        self.position
    }

    /// Direction that will open at the next row's open, after a reversal.
    pub fn pending(&self) -> Option<Direction> {
        self.pending
    }

    pub fn profits(&self) -> &[f64] {
        &self.profits
    }

    /// Profit percentage as of the last processed close; what the agent
    /// observes on the following row.
    pub fn profit_percentage(&self) -> f64 {
        self.profit_percentage
    }

    fn open(&mut self, direction: Direction, price: f64) {
        self.position = Position::Open {
            direction,
            shares: self.stake / price,
            entry: price,
        };
    }

    /// Unrealized profit of the open position valued at `close`.
    pub fn profit_at(&self, close: f64) -> f64 {
        match self.position {
            Position::Flat => 0.0,
            Position::Open {
                direction: Direction::Long,
                shares,
                ..
            } => shares * close - self.stake,
            Position::Open {
                direction: Direction::Short,
                shares,
                ..
            } => self.stake - shares * close,
        }
    }

    pub fn profit_percentage_at(&self, close: f64) -> f64 {
        100.0 * self.profit_at(close) / self.stake
    }

    fn close(&mut self, price: f64) -> (Direction, f64) {
        let direction = self.position.direction().expect("closing an open position");
        let profit = self.profit_at(price);
        self.profits.push(profit);
        self.position = Position::Flat;
        (direction, profit)
    }

    pub fn step(&mut self, signal: Signal, quote: Quote) -> StepOutcome {
        let mut outcome = StepOutcome::default();
        if let Some(direction) = self.pending.take() {
            self.open(direction, quote.open);
            outcome.opened = Some(direction);
        }
        let wanted = match signal {
            Signal::Buy => Some(Direction::Long),
            Signal::Sell => Some(Direction::Short),
            Signal::Hold => None,
        };
        match (self.position.direction(), wanted) {
            (None, Some(direction)) => {
                self.open(direction, quote.open);
                outcome.opened = Some(direction);
            }
            (Some(held), Some(direction)) if held != direction => {
                let (closed, profit) = self.close(quote.close);
                outcome.closed = Some(closed);
                outcome.realized = Some(profit);
                self.pending = Some(closed.opposite());
            }
            _ => {}
        }
        self.profit_percentage = self.profit_percentage_at(quote.close);
        outcome
    }

    /// Closes any open position at `close` and drops a pending reversal.
    pub fn finish(&mut self, close: f64) -> StepOutcome {
        self.pending = None;
        let mut outcome = StepOutcome::default();
        if self.position != Position::Flat {
            let (closed, profit) = self.close(close);
            outcome.closed = Some(closed);
            outcome.realized = Some(profit);
        }
        self.profit_percentage = 0.0;
        outcome
    }
}

/// Selection score of an agent. `Inactive` ranks below every numeric score.
#[derive(Debug, Clone, Copy)]
pub enum Fitness {
    Inactive,
    Score(f64),
}

impl Fitness {
    pub fn score(self) -> Option<f64> {
        match self {
            Fitness::Inactive => None,
            Fitness::Score(s) => Some(s),
        }
    }

    /// Numeric view for statistics: `Inactive` maps to negative infinity.
    pub fn as_f64(self) -> f64 {
        self.score().unwrap_or(f64::NEG_INFINITY)
    }
}

impl Ord for Fitness {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Fitness::Inactive, Fitness::Inactive) => Ordering::Equal,
            (Fitness::Inactive, _) => Ordering::Less,
            (_, Fitness::Inactive) => Ordering::Greater,
            (Fitness::Score(a), Fitness::Score(b)) => a.total_cmp(b),
        }
    }
}

impl PartialOrd for Fitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Fitness {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fitness {}

impl fmt::Display for Fitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fitness::Inactive => f.write_str("inactive"),
            Fitness::Score(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Fitness {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inactive" => Ok(Fitness::Inactive),
            other => other.parse().map(Fitness::Score),
        }
    }
}

/// ROI, multiplied by the win rate only when the ROI is positive. Agents
/// that never trade get [`Fitness::Inactive`].
pub fn fitness_of(roi: f64, win_rate: f64, n_trades: usize) -> Fitness {
    if n_trades == 0 {
        Fitness::Inactive
    } else if roi > 0.0 {
        Fitness::Score(roi * win_rate)
    } else {
        Fitness::Score(roi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub row: usize,
    pub date: NaiveDate,
    pub signal: Signal,
    pub outcome: StepOutcome,
    /// True when the close was forced at the end of the range.
    pub forced: bool,
    pub position: Option<Direction>,
    pub profit_percentage: f64,
    pub cumulative_roi: f64,
}

impl LedgerEntry {
    pub fn action(&self) -> String {
        let mut parts = Vec::new();
        if let Some(d) = self.outcome.opened {
            parts.push(format!("open_{d}"));
        }
        if let Some(d) = self.outcome.closed {
            let prefix = if self.forced { "force_close" } else { "close" };
            parts.push(format!("{prefix}_{d}"));
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub roi: f64,
    pub win_rate: f64,
    pub n_trades: usize,
    pub fitness: Fitness,
    pub profits: Vec<f64>,
    pub ledger: Option<Vec<LedgerEntry>>,
}

impl BacktestResult {
    fn from_profits(profits: Vec<f64>, stake: f64, ledger: Option<Vec<LedgerEntry>>) -> Self {
        let n_trades = profits.len();
        let roi = 100.0 * profits.iter().sum::<f64>() / stake;
        let win_rate = if n_trades == 0 {
            0.0
        } else {
            profits.iter().filter(|&&p| p > 0.0).count() as f64 / n_trades as f64
        };
        BacktestResult {
            roi,
            win_rate,
            n_trades,
            fitness: fitness_of(roi, win_rate, n_trades),
            profits,
            ledger,
        }
    }

    pub fn write_ledger<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "date",
            "signal",
            "action",
            "position",
            "realized_profit",
            "cumulative_roi",
            "profit_percentage",
        ])?;
        for e in self.ledger.iter().flatten() {
            w.write_record([
                e.date.to_string(),
                e.signal.to_string(),
                e.action(),
                e.position.map_or("flat".to_string(), |d| d.to_string()),
                e.outcome.realized.map_or(String::new(), |p| p.to_string()),
                e.cumulative_roi.to_string(),
                e.profit_percentage.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Runs the position ledger over `rows`, asking `decide(row, profit_pct)`
/// for each row's signal.
pub fn simulate<F>(
    table: &FeatureTable,
    rows: Range<usize>,
    stake: f64,
    record: bool,
    mut decide: F,
) -> Result<BacktestResult, BacktestError>
where
    F: FnMut(usize, f64) -> Result<Signal, EvalError>,
{
    if rows.end > table.len() || rows.start > rows.end {
        return Err(BacktestError::OutOfBounds {
            start: rows.start,
            end: rows.end,
            len: table.len(),
        });
    }
    if rows.len() < 2 {
        return Err(BacktestError::TooShort(rows.len()));
    }
    let mut state = TradeState::new(stake);
    let mut ledger = record.then(|| Vec::with_capacity(rows.len()));
    let mut realized_total = 0.0;
    let last = rows.end - 1;
    for row in rows {
        let signal = decide(row, state.profit_percentage())
            .map_err(|source| BacktestError::Eval { row, source })?;
        let quote = Quote {
            open: table.open(row),
            close: table.close(row),
        };
        let mut outcome = state.step(signal, quote);
        let mut forced = false;
        if row == last {
            let end = state.finish(quote.close);
            if end.closed.is_some() {
                forced = true;
                outcome.closed = end.closed;
                outcome.realized = end.realized;
            }
        }
        if let Some(entries) = ledger.as_mut() {
            realized_total += outcome.realized.unwrap_or(0.0);
            entries.push(LedgerEntry {
                row,
                date: table.date(row),
                signal,
                outcome,
                forced,
                position: state.position().direction(),
                profit_percentage: state.profit_percentage(),
                cumulative_roi: 100.0 * realized_total / stake,
            });
        }
    }
    Ok(BacktestResult::from_profits(
        state.profits.clone(),
        stake,
        ledger,
    ))
}

/// Backtests `agent` over `rows` of `table` with the default stake.
pub fn run_backtest(
    agent: &ExprTree,
    variant: Variant,
    table: &FeatureTable,
    rows: Range<usize>,
) -> Result<BacktestResult, BacktestError> {
    Backtester::default().run(agent, variant, table, rows, false)
}

/// Replays a fixed signal sequence, one per row, recording the ledger.
pub fn replay_signals(
    signals: &[Signal],
    table: &FeatureTable,
    rows: Range<usize>,
) -> Result<BacktestResult, BacktestError> {
    if signals.len() != rows.len() {
        return Err(BacktestError::SignalCount {
            given: signals.len(),
            rows: rows.len(),
        });
    }
    let start = rows.start;
    simulate(table, rows, STAKE, true, |row, _| Ok(signals[row - start]))
}

/// Evaluates agents against market data.
#[derive(Debug, Clone, Copy)]
pub struct Backtester {
    pub stake: f64,
}

impl Default for Backtester {
    fn default() -> Self {
        Backtester { stake: STAKE }
    }
}

impl Backtester {
    pub fn run(
        &self,
        agent: &ExprTree,
        variant: Variant,
        table: &FeatureTable,
        rows: Range<usize>,
        record: bool,
    ) -> Result<BacktestResult, BacktestError> {
        simulate(table, rows, self.stake, record, |row, profit_percentage| {
            let ctx = RowContext {
                table,
                row,
                profit_percentage,
            };
            agent.signal(variant, &ctx)
        })
    }

    pub fn fitness(
        &self,
        agent: &ExprTree,
        variant: Variant,
        table: &FeatureTable,
        rows: Range<usize>,
    ) -> Result<Fitness, BacktestError> {
        self.run(agent, variant, table, rows, false).map(|r| r.fitness)
    }
}
