//! Physics-informed epidemic forecasting: preprocessing, a nine-compartment
//! ODE model, PINN training, rolling backtests, quantiles and scoring.

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod compartment;
pub mod config;
pub mod data;
pub mod export;
pub mod forecast;
pub mod neural;
pub mod manifest;
pub mod pinn;
pub mod quantile;
pub mod registry;
pub mod scoring;
pub mod synthetic;
