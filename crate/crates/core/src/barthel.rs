//! Planted-solution random 3-SAT in the style of Barthel et al.
//!
//! Each clause draws three distinct variables, then a sign pattern whose
//! number `t` of literals satisfied by the planted assignment follows
//! `P(t) = C(3,t) * p_t`. With `p_0 = 0` the planted assignment satisfies every
//! clause; the default `(0, 1/6, 1/6, 0)` additionally makes the average number
//! of satisfied literals per clause exactly 3/2, so single-variable literal
//! statistics carry no information about the planted assignment.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, Clause, Formula, FormulaError, Literal};
use crate::rng;

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("instances need at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("clause ratio {0} yields no clauses")]
    EmptyInstance(Ratio),
    #[error("invalid type probabilities {0:?}: {1}")]
    InvalidProbabilities([f64; 4], &'static str),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Exact clause-to-variable ratio `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const DEFAULT: Ratio = Ratio { num: 43, den: 10 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den != 0).then_some(Ratio { num, den })
    }

    /// `round(ratio * n)` with ties rounded up, in exact integer arithmetic.
    pub fn clauses_for(self, n: usize) -> usize {
        let twice = 2 * self.num as u128 * n as u128 + self.den as u128;
        (twice / (2 * self.den as u128)) as usize
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::DEFAULT
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid ratio `{0}`: expected a decimal like 4.3 or a fraction like 43/10")]
pub struct ParseRatioError(String);

impl FromStr for Ratio {
    type Err = ParseRatioError;

    /// Accepts `43/10`, `4.3` or `7`; decimals are converted exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatioError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num = n.trim().parse().map_err(|_| err())?;
            let den = d.trim().parse().map_err(|_| err())?;
            return Ratio::new(num, den).ok_or_else(err);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if (int.is_empty() && frac.is_empty())
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(err());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Probabilities `(p0, p1, p2, p3)` of a single sign pattern with `t`
/// literals satisfied by the planted assignment.
pub type TypeProbs = [f64; 4];

/// The zero-bias choice with `p0 = p3 = 0`: `(0, 1/6, 1/6, 0)`.
pub fn default_type_probs() -> TypeProbs {
    [0.0, 1.0 / 6.0, 1.0 / 6.0, 0.0]
}

const PATTERN_COUNTS: [f64; 4] = [1.0, 3.0, 3.0, 1.0];

fn validate_probs(p: &TypeProbs) -> Result<(), GeneratorError> {
    let bad = |why| Err(GeneratorError::InvalidProbabilities(*p, why));
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return bad("probabilities must be finite and nonnegative");
    }
    if p[0] != 0.0 {
        return bad("p0 must be 0 so the planted assignment satisfies every clause");
    }
    let total: f64 = p.iter().zip(PATTERN_COUNTS).map(|(p, c)| p * c).sum();
    if (total - 1.0).abs() > PROB_TOL {
        return bad("3*p1 + 3*p2 + p3 must equal 1");
    }
    let mean: f64 = (0..4).map(|t| t as f64 * PATTERN_COUNTS[t] * p[t]).sum();
    if (mean - 1.5).abs() > PROB_TOL {
        return bad("3*p1 + 6*p2 + 3*p3 must equal 3/2");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_vars: usize,
    pub ratio: Ratio,
    pub seed: u64,
    pub type_probs: TypeProbs,
}

impl GeneratorConfig {
    pub fn new(num_vars: usize, seed: u64) -> Self {
        GeneratorConfig {
            num_vars,
            ratio: Ratio::DEFAULT,
            seed,
            type_probs: default_type_probs(),
        }
    }

    pub fn with_ratio(mut self, ratio: Ratio) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn num_clauses(&self) -> usize {
        self.ratio.clauses_for(self.num_vars)
    }
}

/// A formula together with the assignment it was built around.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub formula: Formula,
    pub planted: Assignment,
    pub seed: u64,
}

/// Sidecar metadata written next to a generated DIMACS file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedSidecar {
    pub seed: u64,
    #[serde(rename = "N")]
    pub num_vars: usize,
    #[serde(rename = "M")]
    pub num_clauses: usize,
    pub ratio: String,
    pub planted: Vec<i8>,
}

impl PlantedInstance {
    pub fn sidecar(&self, ratio: Ratio) -> PlantedSidecar {
        PlantedSidecar {
            seed: self.seed,
            num_vars: self.formula.num_vars(),
            num_clauses: self.formula.num_clauses(),
            ratio: format!("{}", ratio.as_f64()),
            planted: self.planted.to_signs(),
        }
    }
}

/// Generates one planted instance; the output is a pure function of `cfg`.
pub fn generate(cfg: &GeneratorConfig) -> Result<PlantedInstance, GeneratorError> {
    let n = cfg.num_vars;
    if n < 3 {
        return Err(GeneratorError::TooFewVariables(n));
    }
    validate_probs(&cfg.type_probs)?;
    let m = cfg.num_clauses();
    if m == 0 {
        return Err(GeneratorError::EmptyInstance(cfg.ratio));
    }

    let mut rng = rng::stream(cfg.seed);
    let planted: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();

    // cumulative class weights C(3,t) * p_t
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for t in 0..4 {
        acc += PATTERN_COUNTS[t] * cfg.type_probs[t];
        cumulative[t] = acc;
    }

    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let vars = distinct_triple(&mut rng, n);
        let u: f64 = rng.random();
        let t = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| (1..4).rev().find(|&t| cfg.type_probs[t] > 0.0).unwrap());
        let satisfied = pattern(&mut rng, t);
        let lits = std::array::from_fn(|i| {
            let var = vars[i];
            // a literal is satisfied iff its polarity agrees with the planted value
            let positive = planted[var] == satisfied[i];
            if positive {
                Literal::positive(var)
            } else {
                Literal::negative(var)
            }
        });
        clauses.push(Clause::new(lits));
    }

    Ok(PlantedInstance {
        formula: Formula::new(n, clauses)?,
        planted: Assignment::new(planted),
        seed: cfg.seed,
    })
}

fn distinct_triple<R: Rng>(rng: &mut R, n: usize) -> [usize; 3] {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut c = rng.random_range(0..n - 2);
    if c >= lo {
        c += 1;
    }
    if c >= hi {
        c += 1;
    }
    [a, b, c]
}

/// Uniformly picks which of the three positions are satisfied, given `t`.
fn pattern<R: Rng>(rng: &mut R, t: usize) -> [bool; 3] {
    match t {
        0 => [false; 3],
        3 => [true; 3],
        1 => {
            let k = rng.random_range(0..3);
            std::array::from_fn(|i| i == k)
        }
        _ => {
            let k = rng.random_range(0..3);
            std::array::from_fn(|i| i != k)
        }
    }
}

/// Number of literals of `clause` satisfied by `a`.
pub fn satisfied_literals(clause: &Clause, a: &Assignment) -> usize {
    clause
        .lits()
        .iter()
        .filter(|l| l.satisfied_by(a.get(l.var())))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_probs_solve_both_constraints() {
        // With p0 = p3 = 0 the constraints read 3a + 3b = 1 and 3a + 6b = 3/2.
        // Subtracting gives 3b = 1/2, so b = 1/6 and a = 1/6.
        let b = (1.5 - 1.0) / 3.0;
        let a = (1.0 - 3.0 * b) / 3.0;
        let p = default_type_probs();
        assert_eq!(p, [0.0, a, b, 0.0]);
        assert!((3.0 * p[1] + 3.0 * p[2] + p[3] - 1.0).abs() < 1e-15);
        assert!((3.0 * p[1] + 6.0 * p[2] + 3.0 * p[3] - 1.5).abs() < 1e-15);
        assert!(validate_probs(&p).is_ok());
    }

    #[test]
    fn rejects_invalid_probs() {
        for p in [
            [0.1, 0.15, 0.15, 0.0],
            [0.0, 0.2, 0.2, 0.0],
            [0.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0],
            [0.0, -1.0, 0.5, 0.5],
        ] {
            let mut cfg = GeneratorConfig::new(10, 0);
            cfg.type_probs = p;
            assert!(matches!(
                generate(&cfg),
                Err(GeneratorError::InvalidProbabilities(..))
            ));
        }
    }

    #[test]
    fn other_zero_bias_probs_accepted() {
        // Both constraints with p3 > 0: subtracting them gives 3p2 + 2p3 = 1/2.
        let mut cfg = GeneratorConfig::new(10, 0);
        let p3 = 0.1;
        let p2 = 1.0 / 6.0 - 2.0 * p3 / 3.0;
        let p1 = (1.0 - 3.0 * p2 - p3) / 3.0;
        cfg.type_probs = [0.0, p1, p2, p3];
        let inst = generate(&cfg).unwrap();
        assert!(inst.formula.evaluate(&inst.planted).unwrap().satisfied);
    }

    #[test]
    fn clause_count_rounds_half_up() {
        assert_eq!(Ratio::DEFAULT.clauses_for(20), 86);
        assert_eq!(Ratio::DEFAULT.clauses_for(100), 430);
        assert_eq!(Ratio::DEFAULT.clauses_for(15), 65); // 64.5
        assert_eq!(Ratio::DEFAULT.clauses_for(5), 22); // 21.5
        assert_eq!(Ratio::new(7, 1).unwrap().clauses_for(10), 70);
    }

    #[test]
    fn parses_ratios() {
        assert_eq!("4.3".parse::<Ratio>().unwrap(), Ratio::DEFAULT);
        assert_eq!("43/10".parse::<Ratio>().unwrap(), Ratio::DEFAULT);
        assert_eq!("4.30".parse::<Ratio>().unwrap(), Ratio::DEFAULT);
        assert_eq!("7".parse::<Ratio>().unwrap(), Ratio { num: 7, den: 1 });
        assert_eq!(".5".parse::<Ratio>().unwrap(), Ratio { num: 1, den: 2 });
        for bad in ["", "-1", "4.3.1", "1/0", "abc", "."] {
            assert!(bad.parse::<Ratio>().is_err(), "{bad}");
        }
    }

    #[test]
    fn generates_n20_with_86_clauses_satisfied_by_plant() {
        let inst = generate(&GeneratorConfig::new(20, 7)).unwrap();
        assert_eq!(inst.formula.num_clauses(), 86);
        let ev = inst.formula.evaluate(&inst.planted).unwrap();
        assert!(ev.satisfied);
        assert_eq!(ev.unsat_count, 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate(&GeneratorConfig::new(30, 99)).unwrap();
        let b = generate(&GeneratorConfig::new(30, 99)).unwrap();
        let c = generate(&GeneratorConfig::new(30, 100)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.formula, c.formula);
    }

    #[test]
    fn too_small() {
        assert_eq!(
            generate(&GeneratorConfig::new(2, 0)),
            Err(GeneratorError::TooFewVariables(2))
        );
    }

    #[test]
    fn smallest_instance_draws_all_three_vars() {
        let inst = generate(&GeneratorConfig::new(3, 1)).unwrap();
        for c in inst.formula.clauses() {
            let mut vars: Vec<_> = c.lits().iter().map(|l| l.var()).collect();
            vars.sort();
            assert_eq!(vars, vec![0, 1, 2]);
        }
    }
}
