//! Kernel optimal scoring for two-class problems, with optional sparse
//! feature weighting inside a Gaussian kernel.
//!
//! ```
//! use sparse_kos::{simdata, train, FitConfig, KernelSpec};
//!
//! let data = simdata::gen_model1(7).unwrap();
//! let spec = KernelSpec::gaussian(0.5).unwrap();
//! let config = FitConfig::new(0.01, 0.05).unwrap();
//! let model = train(&data, &config, &spec, true).unwrap();
//! assert_eq!(model.p(), 4);
//! ```

pub mod benchmark;
pub mod dataio;
pub mod error;
pub mod kernels;
mod linalg;
pub mod model;
pub mod simdata;
pub mod solver;
pub mod tuning;

pub use error::{KosError, Result};
pub use kernels::{KernelFamily, KernelSpec, WeightVector};
pub use model::{error_rate, make_scores, train, DataSet, Model, ScoreVector};
pub use solver::{FitConfig, LinearizedSubproblem, SolverTrace};
pub use tuning::{tune, TuningPlan, TuningReport};
