//! Genetic-programming search for daily-bar trading strategies.
//!
//! Four tree representations are supported: standard scalar GP, vectorial
//! GP over 21-day windows, its complex-valued extension, and a strongly-typed
//! vectorial flavour whose trees produce boolean buy/sell decisions.

pub mod backtest;
pub mod engine;
pub mod experiment;
pub mod indicators;
pub mod market_data;
pub mod stats;
pub mod variants;
