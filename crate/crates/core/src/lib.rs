//! Fair robust log-loss classification.
//!
//! A logistic model whose predictive distribution is clamped per protected
//! group so that demographic parity, equalized opportunity or equalized odds
//! hold exactly on the training sample. Training minimizes a convex
//! objective in which the fairness multipliers are solved in closed form for
//! every parameter vector.
//!
//! ```
//! use fair_logloss::{train, CriterionKind, Dataset, TrainConfig};
//!
//! let data = Dataset::from_rows(
//!     &[vec![0.5], vec![-1.0], vec![2.0], vec![0.0], vec![1.5], vec![-0.5]],
//!     vec![1, 1, 1, 0, 0, 0],
//!     vec![1, 0, 1, 0, 1, 0],
//! )?;
//! let model = train(&data, CriterionKind::DemographicParity, &TrainConfig::default())?;
//! assert!(model.diagnostics.train_gaps[0] <= 1e-8);
//! # Ok::<(), fair_logloss::Error>(())
//! ```

pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fairness;
pub mod inference;
pub mod lambda_solver;
pub mod model_core;
pub mod model_file;
pub mod optim;
pub mod report;
pub mod training;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use fairness::{CriterionKind, FairnessSpec};
pub use inference::{predict, Prediction};
pub use model_core::{ConstraintSide, GroupRates, Theta};
pub use training::{train, Model, TrainConfig};
