//! Bit-exact Q14 integer engine.
//!
//! Every state variable is an `i64` holding its real value scaled by 2^14.
//! Constants are powers of two where possible, so every multiplication or
//! division by one of them is an arithmetic shift (floor toward −∞). Per
//! clause `m` and literal `i` with polarity `q_i`:
//!
//! ```text
//! T_i   = 2^14 − q_i·V_i                       (= 2^14·(1 − q v), in [0, 2^15])
//! C'_m  = min_i T_i >> 1
//! P_m   = (Xl_m · Xs_m) >> 14
//! F_m   = ((2^14 + (Xl_m >> 10)) · (2^14 − Xs_m)) >> 14
//! g_i   = (P_m · q_i · min_{j≠i} T_j) >> 15
//! r_i   = (F_m · (q_i·2^14 − V_i)) >> 15       if T_i == min_j T_j, else 0
//! dV_n  = Σ_{m ∋ n} g + r
//! dXs_m = (16 · (Xs_m + 16) · (C'_m − 4096)) >> 14
//! dXl_m = 4 · (C'_m − 819)
//! ```
//!
//! and each variable advances by `d >> dt_shift` before being clamped to its
//! range. The factor ½ in `G` and `R` is folded into the final `>> 15` so the
//! rounding error of a term does not grow with `Xl`.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, FloatState, Params};
use crate::formula::Formula;
use crate::rng;
use crate::run::{self, EngineKind, Integrator, RunResult};

pub const SCALE_SHIFT: u32 = 14;
pub const ONE: i64 = 1 << SCALE_SHIFT;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixedError {
    #[error(
        "formula too large for 64-bit accumulators: {clauses} clauses, max degree {degree}"
    )]
    WidthExceeded { clauses: usize, degree: usize },
    #[error("dt_shift {0} out of range (0..=30)")]
    BadDtShift(u32),
}

/// Q14 encodings of the model constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedParams {
    pub alpha_int: i64,
    pub beta_int: i64,
    pub gamma_q14: i64,
    pub delta_q14: i64,
    pub epsilon_q14: i64,
    /// ζ = 2^-zeta_shift
    pub zeta_shift: u32,
    /// Δt = 2^-dt_shift
    pub dt_shift: u32,
    pub scale_shift: u32,
    pub max_steps: u64,
    pub xl_cap_factor: i64,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            alpha_int: 4,
            beta_int: 16,
            gamma_q14: 4096,
            delta_q14: 819,
            epsilon_q14: 16,
            zeta_shift: 10,
            dt_shift: 4,
            scale_shift: SCALE_SHIFT,
            max_steps: dynamics::DEFAULT_MAX_STEPS,
            xl_cap_factor: 10_000,
        }
    }
}

impl FixedParams {
    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_dt_shift(mut self, dt_shift: u32) -> Self {
        self.dt_shift = dt_shift;
        self
    }

    /// Upper bound of `Xl` in Q14.
    pub fn xl_cap(&self, num_clauses: usize) -> i64 {
        self.xl_cap_factor * num_clauses as i64 * ONE
    }

    /// The real-valued parameters these encodings represent.
    pub fn to_float(&self) -> Params {
        let q = |x: i64| x as f64 / ONE as f64;
        Params {
            alpha: self.alpha_int as f64,
            beta: self.beta_int as f64,
            gamma: q(self.gamma_q14),
            delta: q(self.delta_q14),
            epsilon: q(self.epsilon_q14),
            zeta: 2f64.powi(-(self.zeta_shift as i32)),
            dt: 2f64.powi(-(self.dt_shift as i32)),
            max_steps: self.max_steps,
            xl_cap_factor: self.xl_cap_factor as f64,
        }
    }

    /// Checks that no intermediate product or per-variable sum can leave
    /// `i64` for this formula, given the `Xl` cap.
    pub fn check_width(&self, f: &Formula) -> Result<(), FixedError> {
        if self.dt_shift > 30 {
            return Err(FixedError::BadDtShift(self.dt_shift));
        }
        let one = ONE as i128;
        let cap = self.xl_cap(f.num_clauses()) as i128;
        let gw = cap; // (Xl·Xs) >> 14 with Xs <= 2^14
        let rw = one + (cap >> self.zeta_shift);
        let widest = [
            cap * one,
            gw * 2 * one,
            rw * one,
            rw * 2 * one,
            self.beta_int as i128 * (one + self.epsilon_q14 as i128) * one,
            (((gw + rw) * 2 * one) >> 15) * f.max_degree().max(1) as i128,
        ];
        if widest.iter().any(|&x| x >= i64::MAX as i128) {
            return Err(FixedError::WidthExceeded {
                clauses: f.num_clauses(),
                degree: f.max_degree(),
            });
        }
        Ok(())
    }
}

/// Q14 state of the integer engine.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedState {
    pub v: Vec<i64>,
    pub xs: Vec<i64>,
    pub xl: Vec<i64>,
    pub step: u64,
}

impl FixedState {
    /// `V` uniform on [−2^14, 2^14] from `seed`, `Xs = 2^13`, `Xl = 2^14`.
    pub fn initial(f: &Formula, seed: u64) -> Self {
        let mut rng = rng::stream(seed);
        let v = (0..f.num_vars())
            .map(|_| rng.random_range(-ONE..=ONE))
            .collect();
        FixedState {
            v,
            xs: vec![ONE / 2; f.num_clauses()],
            xl: vec![ONE; f.num_clauses()],
            step: 0,
        }
    }

    pub fn in_bounds(&self, p: &FixedParams) -> bool {
        let cap = p.xl_cap(self.xl.len());
        self.v.iter().all(|v| (-ONE..=ONE).contains(v))
            && self.xs.iter().all(|x| (0..=ONE).contains(x))
            && self.xl.iter().all(|x| (ONE..=cap).contains(x))
    }

    /// Rounds a float state onto the Q14 grid (toward −∞).
    pub fn quantize(s: &FloatState) -> Self {
        FixedState {
            v: s.v.iter().map(|&x| to_q14(x)).collect(),
            xs: s.xs.iter().map(|&x| to_q14(x)).collect(),
            xl: s.xl.iter().map(|&x| to_q14(x)).collect(),
            step: s.step,
        }
    }

    pub fn dequantize(&self) -> FloatState {
        FloatState {
            v: self.v.iter().map(|&x| from_q14(x)).collect(),
            xs: self.xs.iter().map(|&x| from_q14(x)).collect(),
            xl: self.xl.iter().map(|&x| from_q14(x)).collect(),
            step: self.step,
        }
    }

    /// Appends this snapshot to a binary trace: `step` as `u64`, then `V`,
    /// `Xs` and `Xl` as `i64`, all little-endian.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.step.to_le_bytes())?;
        for x in self.v.iter().chain(&self.xs).chain(&self.xl) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
}

/// `floor(x · 2^14)`.
pub fn to_q14(x: f64) -> i64 {
    (x * ONE as f64).floor() as i64
}

pub fn from_q14(x: i64) -> f64 {
    x as f64 / ONE as f64
}

/// Scaled clause function `C'_m = (min_i (2^14 − q_i V_i)) >> 1`.
pub fn clause_value_q14(f: &Formula, m: usize, v: &[i64]) -> i64 {
    let lits = f.clause(m).lits();
    lits.iter()
        .map(|l| ONE - l.sign() as i64 * v[l.var()])
        .min()
        .expect("three literals")
        >> 1
}

/// Q14 time derivatives, before the `dt` shift.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FixedDerivatives {
    pub dv: Vec<i64>,
    pub dxs: Vec<i64>,
    pub dxl: Vec<i64>,
}

fn derivatives_into(
    f: &Formula,
    p: &FixedParams,
    s: &FixedState,
    d: &mut FixedDerivatives,
    contrib: &mut Vec<i64>,
) {
    let m_count = f.num_clauses();
    d.dxs.resize(m_count, 0);
    d.dxl.resize(m_count, 0);
    d.dv.resize(f.num_vars(), 0);
    contrib.resize(3 * m_count, 0);
    let sh = p.scale_shift;

    for (m, clause) in f.clauses().iter().enumerate() {
        let lits = clause.lits();
        let q = lits.map(|l| l.sign() as i64);
        let vv = lits.map(|l| s.v[l.var()]);
        let t = [ONE - q[0] * vv[0], ONE - q[1] * vv[1], ONE - q[2] * vv[2]];
        let min = t[0].min(t[1]).min(t[2]);
        let others = [t[1].min(t[2]), t[0].min(t[2]), t[0].min(t[1])];
        let c = min >> 1;

        let (xs, xl) = (s.xs[m], s.xl[m]);
        let gw = (xl * xs) >> sh;
        let rw = ((ONE + (xl >> p.zeta_shift)) * (ONE - xs)) >> sh;
        for i in 0..3 {
            let g = (gw * q[i] * others[i]) >> (sh + 1);
            let r = if t[i] == min {
                (rw * (q[i] * ONE - vv[i])) >> (sh + 1)
            } else {
                0
            };
            contrib[3 * m + i] = g + r;
        }
        d.dxs[m] = (p.beta_int * (xs + p.epsilon_q14) * (c - p.gamma_q14)) >> sh;
        d.dxl[m] = p.alpha_int * (c - p.delta_q14);
    }

    for (n, dv) in d.dv.iter_mut().enumerate() {
        *dv = f
            .occurrences(n)
            .iter()
            .map(|o| contrib[3 * o.clause as usize + o.pos as usize])
            .sum();
    }
}

/// Derivatives of every component, computed from `s` alone.
pub fn derivatives_q14(f: &Formula, p: &FixedParams, s: &FixedState) -> FixedDerivatives {
    let mut d = FixedDerivatives::default();
    derivatives_into(f, p, s, &mut d, &mut Vec::new());
    d
}

fn apply_step(p: &FixedParams, s: &mut FixedState, d: &FixedDerivatives) {
    let cap = p.xl_cap(s.xl.len());
    let dt = p.dt_shift;
    for (v, dv) in s.v.iter_mut().zip(&d.dv) {
        *v = (*v + (dv >> dt)).clamp(-ONE, ONE);
    }
    for (x, dx) in s.xs.iter_mut().zip(&d.dxs) {
        *x = (*x + (dx >> dt)).clamp(0, ONE);
    }
    for (x, dx) in s.xl.iter_mut().zip(&d.dxl) {
        *x = (*x + (dx >> dt)).clamp(ONE, cap);
    }
    s.step += 1;
}

/// One fully parallel integer Euler step.
pub fn step_q14(f: &Formula, p: &FixedParams, s: &FixedState) -> FixedState {
    let d = derivatives_q14(f, p, s);
    let mut next = s.clone();
    apply_step(p, &mut next, &d);
    next
}

/// Integer engine with preallocated scratch buffers.
pub struct FixedEngine<'f> {
    formula: &'f Formula,
    params: FixedParams,
    state: FixedState,
    deriv: FixedDerivatives,
    contrib: Vec<i64>,
}

impl<'f> FixedEngine<'f> {
    pub fn new(formula: &'f Formula, params: FixedParams, seed: u64) -> Result<Self, FixedError> {
        let state = FixedState::initial(formula, seed);
        Self::from_state(formula, params, state)
    }

    pub fn from_state(
        formula: &'f Formula,
        params: FixedParams,
        state: FixedState,
    ) -> Result<Self, FixedError> {
        params.check_width(formula)?;
        Ok(FixedEngine {
            formula,
            params,
            state,
            deriv: FixedDerivatives::default(),
            contrib: Vec::new(),
        })
    }

    pub fn state(&self) -> &FixedState {
        &self.state
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

impl Integrator for FixedEngine<'_> {
    fn formula(&self) -> &Formula {
        self.formula
    }

    fn advance(&mut self) {
        self.step();
    }

    fn project_into(&self, out: &mut [bool]) {
        for (o, &v) in out.iter_mut().zip(&self.state.v) {
            *o = v >= 0;
        }
    }
}

/// Integer counterpart of [`dynamics::solve`].
pub fn solve_q14(f: &Formula, p: &FixedParams, seed: u64) -> Result<RunResult, FixedError> {
    solve_q14_observed(f, p, seed, |_| Ok(())).map_err(|e| match e {
        ObservedError::Fixed(e) => e,
        ObservedError::Observer(e) => unreachable!("observer cannot fail: {e}"),
    })
}

#[derive(Debug, Error)]
pub enum ObservedError {
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error("trace output failed: {0}")]
    Observer(#[from] io::Error),
}

/// Like [`solve_q14`], calling `observe` with the initial state and the state
/// after every step.
pub fn solve_q14_observed(
    f: &Formula,
    p: &FixedParams,
    seed: u64,
    mut observe: impl FnMut(&FixedState) -> io::Result<()>,
) -> Result<RunResult, ObservedError> {
    let mut engine = FixedEngine::new(f, p.clone(), seed)?;
    let mut failure = None;
    let out = run::drive(&mut engine, p.max_steps, |e, _| {
        if failure.is_none() {
            if let Err(err) = observe(e.state()) {
                failure = Some(err);
            }
        }
    });
    if let Some(err) = failure {
        return Err(err.into());
    }
    Ok(RunResult {
        engine: EngineKind::Fixed,
        num_vars: f.num_vars(),
        num_clauses: f.num_clauses(),
        instance_seed: None,
        seed,
        solved: out.solved,
        steps: out.steps,
        wall_time_s: out.wall_time_s,
        assignment: out.assignment,
    })
}

/// Solves while writing every snapshot to `w` (see [`FixedState::write_snapshot`]).
pub fn solve_q14_traced<W: Write>(
    f: &Formula,
    p: &FixedParams,
    seed: u64,
    w: &mut W,
) -> Result<RunResult, ObservedError> {
    solve_q14_observed(f, p, seed, |s| s.write_snapshot(w))
}

/// Componentwise comparison of one derivative evaluation in both engines.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Deviation {
    pub dv: f64,
    pub dxs: f64,
    pub dxl: f64,
}

impl Deviation {
    pub fn max(&self) -> f64 {
        self.dv.max(self.dxs).max(self.dxl)
    }
}

/// Quantizes `s` onto the Q14 grid, evaluates the derivatives there in both
/// engines and returns the largest `|float − fixed / 2^14|` per component.
pub fn quantization_check(f: &Formula, p: &FixedParams, s: &FloatState) -> Deviation {
    let fixed_state = FixedState::quantize(s);
    let grid_state = fixed_state.dequantize();
    let fd = dynamics::derivatives(f, &p.to_float(), &grid_state);
    let qd = derivatives_q14(f, p, &fixed_state);
    let dev = |a: &[f64], b: &[i64]| {
        a.iter()
            .zip(b)
            .map(|(x, &y)| (x - from_q14(y)).abs())
            .fold(0.0, f64::max)
    };
    Deviation {
        dv: dev(&fd.dv, &qd.dv),
        dxs: dev(&fd.dxs, &qd.dxs),
        dxl: dev(&fd.dxl, &qd.dxl),
    }
}
