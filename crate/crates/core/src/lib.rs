//! Optimal liquidation of a cash position under geometric Brownian motion.
//!
//! The trader holds `theta` dollars of a stock with `dS = sigma S dW`, trades at
//! a dollar rate `u`, pays a temporary cost `(lambda/2) u^2`, and is penalised by
//! the quadratic variation `(kappa sigma^2 / 2) theta^2` of the position. The
//! optimal feedback `u = Gamma(t) theta + nu(t)` is available in closed form and
//! is evaluated by [`closed_form`]. The remaining modules simulate it
//! ([`path`]), extend it to correlated portfolios ([`multi_asset`]) and check it
//! against discrete dynamic programming that never touches the closed form
//! ([`oracle`]).

pub mod closed_form;
pub mod drift;
pub mod error;
pub mod expm;
pub mod multi_asset;
pub mod oracle;
pub mod path;

pub use closed_form::{characteristic_roots, CoefBundle, ModelParams, TerminalPenalty};
pub use drift::{DriftPath, DriftSpec};
pub use error::{Error, Result};
pub use path::TimeGrid;
