//! Generalized degrees of freedom and prediction error of sparse linear
//! regression.
//!
//! Three independent routes to the same quantities:
//!
//! * [`rs`]: replica-symmetric saddle-point equations in the limit
//!   `N, M -> infinity` at fixed `alpha = M / N`,
//! * [`amp`]: belief propagation on a finite instance,
//! * [`oracle`]: exact best-subset search and coordinate descent.
//!
//! ```
//! use sparse_gdf::{rs::DeltaPath, selection::observables, ModelParams, Penalty};
//!
//! let params = ModelParams::new(0.5, 0.0, 1.0)?;
//! let path = DeltaPath::new(&Penalty::L1 { eta: 1.0 }, &params)?;
//! let (penalty, sol) = path.solve_for_delta(0.3)?;
//! let obs = observables(&penalty, &params, &sol)?;
//! assert!((obs.df - 0.3).abs() < 1e-8);
//! # Ok::<(), sparse_gdf::Error>(())
//! ```

pub mod amp;
pub mod datagen;
pub mod error;
pub mod oracle;
pub mod rs;
pub mod scalar;
pub mod selection;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use types::{Branch, ModelParams, Observables, Penalty, RSSolution, RSState};
