//! Sparse signal reconstruction through QUBO-compiled l0-regularized
//! regression.
//!
//! Signal entries are quantized into `K` bits, the l0 count becomes a
//! quadratic form over those bits plus auxiliary chain variables, and the
//! resulting QUBO is minimized exhaustively or by simulated annealing.
//! Greedy and convex baselines (OMP, LASSO, group LASSO, l1-SVD) and a
//! direction-of-arrival experiment harness sit alongside.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which the harness uses.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod qubo;
pub mod scalar;
pub mod scenarios;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Real;

pub use model::{ComplexMatrix, MultiShotInstance, Quantizer, RealMatrix, SparseInstance, SparseSignal};
pub use qubo::{BuildParams, DecodedSignal, IsingModel, QuboModel, VariableRegistry};
pub use solvers::{AnnealSchedule, SolveResult};
pub use harness::{run_experiment, Experiment, ExperimentConfig, ExperimentResult};

pub type ComplexMatrix64 = ComplexMatrix<f64>;
pub type RealMatrix64 = RealMatrix<f64>;
pub type Quantizer64 = Quantizer<f64>;
pub type SparseSignal64 = SparseSignal<f64>;
pub type SparseInstance64 = SparseInstance<f64>;
pub type MultiShotInstance64 = MultiShotInstance<f64>;
pub type QuboModel64 = QuboModel<f64>;
pub type IsingModel64 = IsingModel<f64>;
pub type VariableRegistry64 = VariableRegistry<f64>;
pub type DecodedSignal64 = DecodedSignal<f64>;
pub type BuildParams64 = BuildParams<f64>;
pub type SolveResult64 = SolveResult<f64>;

pub type QuboModel32 = QuboModel<f32>;
pub type Quantizer32 = Quantizer<f32>;
