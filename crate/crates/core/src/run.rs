//! Run outcomes and the solve loop shared by both engines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::formula::{Assignment, Formula};

/// Which integrator produced a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Float,
    Fixed,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Float => "float",
            EngineKind::Fixed => "fixed",
        })
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "float" => Ok(EngineKind::Float),
            "fixed" => Ok(EngineKind::Fixed),
            other => Err(format!("unknown engine `{other}` (expected float or fixed)")),
        }
    }
}

/// Outcome of one solve.
///
/// `steps` counts Euler steps taken before the sign projection first
/// satisfied the formula (0 if the initial state already did), or equals the
/// budget when `solved` is false. A solved run's `assignment` has been checked
/// against the formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub engine: EngineKind,
    pub num_vars: usize,
    pub num_clauses: usize,
    /// Seed of the generated instance, when the run came from the harness.
    pub instance_seed: Option<u64>,
    /// Seed of the initial condition.
    pub seed: u64,
    pub solved: bool,
    pub steps: u64,
    pub wall_time_s: f64,
    pub assignment: Assignment,
}

/// A fully parallel integrator over a fixed formula.
pub(crate) trait Integrator {
    fn formula(&self) -> &Formula;
    /// Advances every state variable by one Euler step.
    fn advance(&mut self);
    /// Writes the sign projection of the continuous variables into `out`.
    fn project_into(&self, out: &mut [bool]);
}

pub(crate) struct Outcome {
    pub solved: bool,
    pub steps: u64,
    pub assignment: Assignment,
    pub wall_time_s: f64,
}

/// Steps `engine` until its projection satisfies the formula or `max_steps`
/// steps have been taken. `observe` sees the state after every step
/// (and once before the first).
pub(crate) fn drive<I: Integrator>(
    engine: &mut I,
    max_steps: u64,
    mut observe: impl FnMut(&I, u64),
) -> Outcome {
    let start = Instant::now();
    let mut values = vec![false; engine.formula().num_vars()];
    let mut steps = 0;
    observe(engine, steps);
    engine.project_into(&mut values);
    let mut solved = engine.formula().is_satisfied_by(&values);
    while !solved && steps < max_steps {
        engine.advance();
        steps += 1;
        observe(engine, steps);
        engine.project_into(&mut values);
        solved = engine.formula().is_satisfied_by(&values);
    }
    let assignment = Assignment::new(values);
    if solved {
        let ev = engine
            .formula()
            .evaluate(&assignment)
            .expect("projection has one value per variable");
        assert!(ev.satisfied, "solve loop accepted an unsatisfying assignment");
    }
    Outcome {
        solved,
        steps,
        assignment,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}
