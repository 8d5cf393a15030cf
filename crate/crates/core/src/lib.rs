//! Backtesting engine for battery energy-storage arbitrage in day-ahead and
//! balancing electricity markets.

pub mod battery;
pub mod market_data;
pub mod strategies;
pub mod evaluation;
pub mod forecast_baseline;
pub mod economics;
