//! Floating-point reference engine.
//!
//! Continuous variables `v` in [-1, 1], short memories `xs` in [0, 1] and
//! long memories `xl` in [1, cap * M] evolve as
//!
//! ```text
//! dv_n  = sum_{m ∋ n} xl_m xs_m G_nm + (1 + ζ xl_m)(1 - xs_m) R_nm
//! dxs_m = β (xs_m + ε)(C_m - γ)
//! dxl_m = α (C_m - δ)
//! ```
//!
//! with `C_m = ½ min_i (1 - q_i v_i)`, `G_nm = ½ q_n min_{j,k≠n}(1 - q v)` and
//! `R_nm = ½ (q_n - v_n)` for every variable attaining the minimum in `C_m`
//! (0 otherwise). Integration is forward Euler followed by a clamp to the
//! ranges above; all derivatives of a step are computed from the same state.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, Formula};
use crate::rng;
use crate::run::{self, EngineKind, Integrator, RunResult};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DynamicsError {
    #[error("variable {var} does not occur in clause {clause}")]
    NotInClause { clause: usize, var: usize },
}

/// Model constants and run budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub dt: f64,
    pub max_steps: u64,
    /// Long memories are capped at `xl_cap_factor * M`.
    pub xl_cap_factor: f64,
}

pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 4.0,
            beta: 16.0,
            gamma: 0.25,
            delta: 819.0 / 16384.0,
            epsilon: 1.0 / 1024.0,
            zeta: 1.0 / 1024.0,
            dt: 0.0625,
            max_steps: DEFAULT_MAX_STEPS,
            xl_cap_factor: 1e4,
        }
    }
}

impl Params {
    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn xl_cap(&self, num_clauses: usize) -> f64 {
        self.xl_cap_factor * num_clauses as f64
    }
}

/// Dynamical state of the float engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatState {
    pub v: Vec<f64>,
    pub xs: Vec<f64>,
    pub xl: Vec<f64>,
    pub step: u64,
}

impl FloatState {
    /// `v` uniform on [-1, 1] from `seed`, `xs = 1/2`, `xl = 1`.
    pub fn initial(f: &Formula, seed: u64) -> Self {
        let mut rng = rng::stream(seed);
        let v = (0..f.num_vars())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        FloatState {
            v,
            xs: vec![0.5; f.num_clauses()],
            xl: vec![1.0; f.num_clauses()],
            step: 0,
        }
    }

    pub fn in_bounds(&self, p: &Params) -> bool {
        let cap = p.xl_cap(self.xl.len());
        self.v.iter().all(|v| (-1.0..=1.0).contains(v))
            && self.xs.iter().all(|x| (0.0..=1.0).contains(x))
            && self.xl.iter().all(|x| (1.0..=cap).contains(x))
    }
}

/// Time derivatives of every state component.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Derivatives {
    pub dv: Vec<f64>,
    pub dxs: Vec<f64>,
    pub dxl: Vec<f64>,
}

/// Per-clause quantities for literal polarities `q` and variable values `v`.
struct ClauseTerms {
    c: f64,
    g: [f64; 3],
    r: [f64; 3],
}

#[inline(always)]
fn clause_terms(q: [f64; 3], v: [f64; 3]) -> ClauseTerms {
    let t = [1.0 - q[0] * v[0], 1.0 - q[1] * v[1], 1.0 - q[2] * v[2]];
    let min = t[0].min(t[1]).min(t[2]);
    let g = [
        0.5 * q[0] * t[1].min(t[2]),
        0.5 * q[1] * t[0].min(t[2]),
        0.5 * q[2] * t[0].min(t[1]),
    ];
    let r = std::array::from_fn(|i| {
        if t[i] == min {
            0.5 * (q[i] - v[i])
        } else {
            0.0
        }
    });
    ClauseTerms {
        c: 0.5 * min,
        g,
        r,
    }
}

fn gather(f: &Formula, m: usize, v: &[f64]) -> ([f64; 3], [f64; 3]) {
    let lits = f.clause(m).lits();
    (
        lits.map(|l| l.sign() as f64),
        lits.map(|l| v[l.var()]),
    )
}

fn position_of(f: &Formula, m: usize, n: usize) -> Result<usize, DynamicsError> {
    f.clause(m)
        .lits()
        .iter()
        .position(|l| l.var() == n)
        .ok_or(DynamicsError::NotInClause { clause: m, var: n })
}

/// Clause function `C_m`, in [0, 1].
pub fn clause_value(f: &Formula, m: usize, v: &[f64]) -> f64 {
    let (q, vv) = gather(f, m, v);
    clause_terms(q, vv).c
}

/// Gradient-like term `G_nm`.
pub fn gradient_term(f: &Formula, m: usize, n: usize, v: &[f64]) -> Result<f64, DynamicsError> {
    let pos = position_of(f, m, n)?;
    let (q, vv) = gather(f, m, v);
    Ok(clause_terms(q, vv).g[pos])
}

/// Rigidity term `R_nm`; nonzero only for variables attaining the clause minimum.
pub fn rigidity_term(f: &Formula, m: usize, n: usize, v: &[f64]) -> Result<f64, DynamicsError> {
    let pos = position_of(f, m, n)?;
    let (q, vv) = gather(f, m, v);
    Ok(clause_terms(q, vv).r[pos])
}

pub fn derivatives(f: &Formula, p: &Params, s: &FloatState) -> Derivatives {
    let mut d = Derivatives::default();
    let mut contrib = Vec::new();
    derivatives_into(f, p, s, &mut d, &mut contrib);
    d
}

fn derivatives_into(
    f: &Formula,
    p: &Params,
    s: &FloatState,
    d: &mut Derivatives,
    contrib: &mut Vec<f64>,
) {
    let m_count = f.num_clauses();
    d.dxs.resize(m_count, 0.0);
    d.dxl.resize(m_count, 0.0);
    d.dv.resize(f.num_vars(), 0.0);
    contrib.resize(3 * m_count, 0.0);

    for (m, clause) in f.clauses().iter().enumerate() {
        let lits = clause.lits();
        let q = lits.map(|l| l.sign() as f64);
        let vv = lits.map(|l| s.v[l.var()]);
        let terms = clause_terms(q, vv);
        let (xs, xl) = (s.xs[m], s.xl[m]);
        let gw = xl * xs;
        let rw = (1.0 + p.zeta * xl) * (1.0 - xs);
        for i in 0..3 {
            contrib[3 * m + i] = gw * terms.g[i] + rw * terms.r[i];
        }
        d.dxs[m] = p.beta * (xs + p.epsilon) * (terms.c - p.gamma);
        d.dxl[m] = p.alpha * (terms.c - p.delta);
    }

    for (n, dv) in d.dv.iter_mut().enumerate() {
        *dv = f
            .occurrences(n)
            .iter()
            .map(|o| contrib[3 * o.clause as usize + o.pos as usize])
            .sum();
    }
}

fn apply_step(p: &Params, s: &mut FloatState, d: &Derivatives) {
    let cap = p.xl_cap(s.xl.len());
    for (v, dv) in s.v.iter_mut().zip(&d.dv) {
        *v = (*v + p.dt * dv).clamp(-1.0, 1.0);
    }
    for (x, dx) in s.xs.iter_mut().zip(&d.dxs) {
        *x = (*x + p.dt * dx).clamp(0.0, 1.0);
    }
    for (x, dx) in s.xl.iter_mut().zip(&d.dxl) {
        *x = (*x + p.dt * dx).clamp(1.0, cap);
    }
    s.step += 1;
}

/// One projected forward-Euler step.
pub fn euler_step(f: &Formula, p: &Params, s: &FloatState) -> FloatState {
    let d = derivatives(f, p, s);
    let mut next = s.clone();
    apply_step(p, &mut next, &d);
    next
}

/// Sign projection: `v >= 0` is true.
pub fn boolean_projection(v: &[f64]) -> Assignment {
    Assignment::new(v.iter().map(|&x| x >= 0.0).collect())
}

/// Float engine with preallocated scratch buffers.
pub struct FloatEngine<'f> {
    formula: &'f Formula,
    params: Params,
    state: FloatState,
    deriv: Derivatives,
    contrib: Vec<f64>,
}

impl<'f> FloatEngine<'f> {
    pub fn new(formula: &'f Formula, params: Params, seed: u64) -> Self {
        let state = FloatState::initial(formula, seed);
        Self::from_state(formula, params, state)
    }

    pub fn from_state(formula: &'f Formula, params: Params, state: FloatState) -> Self {
        FloatEngine {
            formula,
            params,
            state,
            deriv: Derivatives::default(),
            contrib: Vec::new(),
        }
    }

    pub fn state(&self) -> &FloatState {
        &self.state
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn step(&mut self) {
        derivatives_into(
            self.formula,
            &self.params,
            &self.state,
            &mut self.deriv,
            &mut self.contrib,
        );
        apply_step(&self.params, &mut self.state, &self.deriv);
    }
}

impl Integrator for FloatEngine<'_> {
    fn formula(&self) -> &Formula {
        self.formula
    }

    fn advance(&mut self) {
        self.step();
    }

    fn project_into(&self, out: &mut [bool]) {
        for (o, &v) in out.iter_mut().zip(&self.state.v) {
            *o = v >= 0.0;
        }
    }
}

/// Integrates from the seeded initial condition until the sign projection
/// satisfies `f` or `p.max_steps` is reached.
pub fn solve(f: &Formula, p: &Params, seed: u64) -> RunResult {
    let mut engine = FloatEngine::new(f, p.clone(), seed);
    let out = run::drive(&mut engine, p.max_steps, |_, _| {});
    RunResult {
        engine: EngineKind::Float,
        num_vars: f.num_vars(),
        num_clauses: f.num_clauses(),
        instance_seed: None,
        seed,
        solved: out.solved,
        steps: out.steps,
        wall_time_s: out.wall_time_s,
        assignment: out.assignment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Clause, Literal};

    fn all_positive() -> Formula {
        Formula::new(
            3,
            vec![Clause::new([
                Literal::positive(0),
                Literal::positive(1),
                Literal::positive(2),
            ])],
        )
        .unwrap()
    }

    fn with_signs(q: [i32; 3]) -> Formula {
        Formula::new(
            3,
            vec![Clause::new(std::array::from_fn(|i| {
                Literal::with_sign(i, q[i]).unwrap()
            }))],
        )
        .unwrap()
    }

    fn state(v: Vec<f64>, xs: f64, xl: f64) -> FloatState {
        FloatState {
            v,
            xs: vec![xs],
            xl: vec![xl],
            step: 0,
        }
    }

    #[test]
    fn defaults_match_model_constants() {
        let p = Params::default();
        assert_eq!(p.alpha, 4.0);
        assert_eq!(p.beta, 16.0);
        assert_eq!(p.gamma, 2f64.powi(-2));
        assert_eq!(p.delta, 819.0 * 2f64.powi(-14));
        assert_eq!(p.epsilon, 2f64.powi(-10));
        assert_eq!(p.zeta, 2f64.powi(-10));
        assert_eq!(p.dt, 2f64.powi(-4));
        assert_eq!(p.max_steps, 100_000_000);
    }

    #[test]
    fn clause_value_examples() {
        let f = all_positive();
        assert_eq!(clause_value(&f, 0, &[-1.0, -1.0, -1.0]), 1.0);
        assert_eq!(clause_value(&f, 0, &[1.0, -1.0, -1.0]), 0.0);
        // ½ min(0.5, 1.5, 1.0)
        assert_eq!(clause_value(&f, 0, &[0.5, -0.5, 0.0]), 0.25);
    }

    #[test]
    fn gradient_examples() {
        // other two terms (2, 2)
        let f = all_positive();
        assert_eq!(gradient_term(&f, 0, 0, &[0.3, -1.0, -1.0]).unwrap(), 1.0);
        let f = with_signs([-1, 1, 1]);
        assert_eq!(gradient_term(&f, 0, 0, &[0.3, -1.0, -1.0]).unwrap(), -1.0);
        // other terms (0.5, 1.5): v1 = 0.5, v2 = -0.5
        let f = all_positive();
        assert_eq!(gradient_term(&f, 0, 0, &[0.0, 0.5, -0.5]).unwrap(), 0.25);
    }

    #[test]
    fn rigidity_examples() {
        let f = all_positive();
        for n in 0..3 {
            assert_eq!(rigidity_term(&f, 0, n, &[-1.0, -1.0, -1.0]).unwrap(), 1.0);
        }
        let v = [0.5, -0.5, 0.0];
        assert_eq!(rigidity_term(&f, 0, 0, &v).unwrap(), 0.25);
        assert_eq!(rigidity_term(&f, 0, 1, &v).unwrap(), 0.0);
        assert_eq!(rigidity_term(&f, 0, 2, &v).unwrap(), 0.0);
        assert_eq!(rigidity_term(&f, 0, 0, &[1.0, 0.2, -0.4]).unwrap(), 0.0);
    }

    #[test]
    fn terms_reject_foreign_variable() {
        let f = Formula::from_dimacs_str("p cnf 4 1\n1 2 3 0\n").unwrap();
        let v = [0.0; 4];
        assert_eq!(
            gradient_term(&f, 0, 3, &v),
            Err(DynamicsError::NotInClause { clause: 0, var: 3 })
        );
        assert!(rigidity_term(&f, 0, 3, &v).is_err());
    }

    #[test]
    fn derivatives_of_violated_clause() {
        let f = all_positive();
        let p = Params::default();
        let d = derivatives(&f, &p, &state(vec![-1.0; 3], 1.0, 1.0));
        assert_eq!(d.dv, vec![1.0, 1.0, 1.0]);
        assert_eq!(d.dxs, vec![p.beta * (1.0 + p.epsilon) * (1.0 - p.gamma)]);
        assert_eq!(d.dxl, vec![p.alpha * (1.0 - p.delta)]);
    }

    #[test]
    fn satisfied_clause_relaxes_long_memory() {
        let f = all_positive();
        let p = Params::default();
        let d = derivatives(&f, &p, &state(vec![1.0, -1.0, -1.0], 0.3, 5.0));
        assert_eq!(d.dxl, vec![-p.alpha * p.delta]);
    }

    #[test]
    fn isolated_variable_has_zero_velocity() {
        let f = Formula::from_dimacs_str("p cnf 4 1\n1 -2 3 0\n").unwrap();
        let s = FloatState {
            v: vec![-0.2, 0.4, 0.1, 0.7],
            xs: vec![0.5],
            xl: vec![3.0],
            step: 0,
        };
        assert_eq!(derivatives(&f, &Params::default(), &s).dv[3], 0.0);
    }

    #[test]
    fn euler_step_examples() {
        let f = all_positive();
        let p = Params::default();
        let next = euler_step(&f, &p, &state(vec![-1.0; 3], 0.5, 1.0));
        // xl' = 1 + (1/16)·4·(1 - 0.05)
        assert_eq!(next.xl[0], 1.0 + 0.0625 * 4.0 * (1.0 - 819.0 / 16384.0));
        assert!((next.xl[0] - 1.2375).abs() < 1e-4);
        assert_eq!(next.step, 1);

        // v at +1 pushed further up stays at +1
        let s = state(vec![1.0, -1.0, -1.0], 1.0, 1.0);
        let d = derivatives(&f, &p, &s);
        assert!(d.dv[0] > 0.0);
        assert_eq!(euler_step(&f, &p, &s).v[0], 1.0);
    }

    #[test]
    fn zero_derivatives_fix_the_state() {
        // v at the satisfying corner with α = 0: G, R and dxl vanish and the
        // negative dxs is clamped away at xs = 0.
        let f = all_positive();
        let p = Params {
            alpha: 0.0,
            ..Params::default()
        };
        let s = FloatState {
            v: vec![1.0; 3],
            xs: vec![0.0],
            xl: vec![1.0],
            step: 4,
        };
        let next = euler_step(&f, &p, &s);
        assert_eq!(next.v, s.v);
        assert_eq!(next.xl, s.xl);
        assert_eq!(next.xs, s.xs);
        assert_eq!(next.step, 5);
    }

    #[test]
    fn projection_rules() {
        assert_eq!(boolean_projection(&[-0.3, 0.7]).values(), &[false, true]);
        assert_eq!(boolean_projection(&[0.0, -0.0]).values(), &[true, true]);
        let v = [-0.3, 0.7, 0.01, -1.0];
        let scaled: Vec<f64> = v.iter().map(|x| x * 3.5).collect();
        assert_eq!(boolean_projection(&v), boolean_projection(&scaled));
    }

    #[test]
    fn initial_state_is_in_range() {
        let f = Formula::from_dimacs_str("p cnf 5 2\n1 2 3 0\n-3 4 5 0\n").unwrap();
        let s = FloatState::initial(&f, 11);
        assert!(s.in_bounds(&Params::default()));
        assert_eq!(s.xs, vec![0.5, 0.5]);
        assert_eq!(s.xl, vec![1.0, 1.0]);
        assert_eq!(s, FloatState::initial(&f, 11));
    }

    #[test]
    fn single_clause_solves_quickly() {
        let f = all_positive();
        for seed in 0..20 {
            let r = solve(&f, &Params::default().with_max_steps(1000), seed);
            assert!(r.solved);
            assert!(r.steps < 100, "seed {seed}: {} steps", r.steps);
            assert!(f.evaluate(&r.assignment).unwrap().satisfied);
        }
    }

    #[test]
    fn zero_budget_reports_initial_projection() {
        let f = all_positive();
        for seed in 0..20 {
            let s = FloatState::initial(&f, seed);
            let initially = f.evaluate(&boolean_projection(&s.v)).unwrap().satisfied;
            let r = solve(&f, &Params::default().with_max_steps(0), seed);
            assert_eq!(r.solved, initially);
            assert_eq!(r.steps, 0);
        }
    }
}
