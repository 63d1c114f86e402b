//! Order-book dynamics for equity call auctions.
//!
//! During the accumulation period of a call auction, limit orders are
//! submitted, cancelled, and re-priced but no trade occurs; an indicative
//! price clears supply against demand at every instant. This crate models
//! the revealed order density as partial revelation of a latent liquidity
//! book and provides the full pipeline around that model:
//!
//! - [`model`] — parameter records and closed-form solutions (latent book,
//!   submission/cancellation rates with deadline acceleration, stationary
//!   and dynamic revealed densities, diffusion schedule);
//! - [`solver`] — finite-difference integration of the coupled
//!   revealed/latent reaction–diffusion system on a log-price grid;
//! - [`auction`] — synthetic zero-intelligence order flow, order-book
//!   state, and the max-volume/min-surplus clearing rule;
//! - [`estimators`] — tick-level estimators for cancellation, submission,
//!   and price-update rates plus deadline-law change-point fits;
//! - [`scaling`] — Hurst/Joseph/Noah/Moses exponents of the indicative
//!   price per auction regime, with bootstrap significance;
//! - [`calibration`] — multi-start least-squares fits of the stationary
//!   ansatz and the full dynamic model;
//! - [`io`] — plain-text file formats (parameter files, tick streams,
//!   snapshot and grid tables) shared with the CLI.
//!
//! All closed-form evaluations are pure functions of immutable parameter
//! records and safe to call from any number of threads.

pub mod auction;
pub mod calibration;
pub mod error;
pub mod estimators;
pub mod io;
pub mod model;
pub mod scaling;
pub mod solver;

pub use error::{Error, Result};

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
