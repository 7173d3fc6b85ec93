//! Digital memcomputing for 3-SAT.
//!
//! Two interchangeable integrators of the same memory-augmented dynamics:
//! [`dynamics`] in `f64` and [`fixedpoint`] in Q14 integers with shift-only
//! scaling. [`barthel`] generates planted instances and [`harness`] runs
//! ensembles, fits scaling exponents and projects FPGA resource use.

pub mod barthel;
pub mod dynamics;
pub mod fixedpoint;
pub mod formula;
pub mod harness;
pub mod rng;
pub mod run;

pub use barthel::{generate, GeneratorConfig, PlantedInstance, Ratio};
pub use dynamics::{FloatEngine, FloatState, Params};
pub use fixedpoint::{FixedEngine, FixedParams, FixedState};
pub use formula::{Assignment, Clause, Evaluation, Formula, FormulaError, Literal};
pub use harness::{EnsembleConfig, ScalingReport};
pub use run::{EngineKind, RunResult};
