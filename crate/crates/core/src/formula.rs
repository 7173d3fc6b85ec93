//! 3-CNF formulas, DIMACS interchange and assignment checking.
//!
//! Variables are 0-based internally and 1-based in DIMACS. Every clause holds
//! exactly three literals over pairwise distinct variables; the per-variable
//! occurrence lists are built once at construction because the dynamics sum
//! over them on every integration step.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building, parsing or evaluating a formula.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("formula needs at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("formula needs at least one clause")]
    NoClauses,
    #[error("clause {clause}: variable {var} out of range for {num_vars} variables")]
    VariableOutOfRange {
        clause: usize,
        var: usize,
        num_vars: usize,
    },
    #[error("clause {clause}: variable {var} appears more than once")]
    RepeatedVariable { clause: usize, var: usize },
    #[error("clause {clause}: expected 3 literals, found {found}")]
    ClauseArity { clause: usize, found: usize },
    #[error("line {line}: malformed problem header `{text}`")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: clause data before the problem header")]
    MissingHeader { line: usize },
    #[error("line {line}: duplicate problem header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: invalid literal `{token}`")]
    InvalidLiteral { line: usize, token: String },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("no problem header found")]
    NoHeader,
    #[error("assignment has {got} values, formula has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A signed reference to a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    var: u32,
    negated: bool,
}

impl Literal {
    pub fn positive(var: usize) -> Self {
        Literal {
            var: var as u32,
            negated: false,
        }
    }

    pub fn negative(var: usize) -> Self {
        Literal {
            var: var as u32,
            negated: true,
        }
    }

    /// Builds a literal from a polarity `sign` in {+1, -1}.
    pub fn with_sign(var: usize, sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Self::positive(var)),
            -1 => Some(Self::negative(var)),
            _ => None,
        }
    }

    /// Parses a nonzero DIMACS literal (`-k` is variable `k-1` negated).
    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 || lit.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        let var = (lit.unsigned_abs() - 1) as usize;
        Some(if lit > 0 {
            Self::positive(var)
        } else {
            Self::negative(var)
        })
    }

    pub fn to_dimacs(self) -> i64 {
        let k = self.var as i64 + 1;
        if self.negated {
            -k
        } else {
            k
        }
    }

    #[inline]
    pub fn var(self) -> usize {
        self.var as usize
    }

    /// Polarity `q` in {+1, -1}.
    #[inline]
    pub fn sign(self) -> i32 {
        if self.negated {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.negated
    }

    /// True if this literal is satisfied when its variable takes `value`.
    #[inline]
    pub fn satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of three literals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    lits: [Literal; 3],
}

impl Clause {
    /// Creates a clause; the distinctness of variables is checked when the
    /// clause is added to a [`Formula`].
    pub fn new(lits: [Literal; 3]) -> Self {
        Clause { lits }
    }

    #[inline]
    pub fn lits(&self) -> &[Literal; 3] {
        &self.lits
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        self.lits.iter().any(|l| l.satisfied_by(values[l.var()]))
    }

    fn has_repeat(&self) -> Option<usize> {
        let [a, b, c] = self.lits.map(Literal::var);
        if a == b || a == c {
            Some(a)
        } else if b == c {
            Some(b)
        } else {
            None
        }
    }
}

/// One occurrence of a variable: clause index and position within the clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub clause: u32,
    pub pos: u8,
}

/// An immutable 3-CNF instance with precomputed variable incidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    num_vars: usize,
    clauses: Vec<Clause>,
    // CSR layout: occurrences of variable n are occ[offsets[n]..offsets[n + 1]]
    offsets: Vec<u32>,
    occ: Vec<Occurrence>,
}

impl Formula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if num_vars < 3 {
            return Err(FormulaError::TooFewVariables(num_vars));
        }
        if clauses.is_empty() {
            return Err(FormulaError::NoClauses);
        }
        for (m, c) in clauses.iter().enumerate() {
            for l in c.lits() {
                if l.var() >= num_vars {
                    return Err(FormulaError::VariableOutOfRange {
                        clause: m,
                        var: l.var(),
                        num_vars,
                    });
                }
            }
            if let Some(var) = c.has_repeat() {
                return Err(FormulaError::RepeatedVariable { clause: m, var });
            }
        }
        let (offsets, occ) = build_incidence(num_vars, &clauses);
        Ok(Formula {
            num_vars,
            clauses,
            offsets,
            occ,
        })
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    #[inline]
    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    #[inline]
    pub fn clause(&self, m: usize) -> &Clause {
        &self.clauses[m]
    }

    /// Clauses containing variable `n`, in ascending clause order.
    #[inline]
    pub fn occurrences(&self, n: usize) -> &[Occurrence] {
        &self.occ[self.offsets[n] as usize..self.offsets[n + 1] as usize]
    }

    /// Largest number of clauses any single variable appears in.
    pub fn max_degree(&self) -> usize {
        self.offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Returns `(satisfied, unsat_count)`.
    pub fn evaluate(&self, a: &Assignment) -> Result<Evaluation, FormulaError> {
        if a.len() != self.num_vars {
            return Err(FormulaError::AssignmentLength {
                expected: self.num_vars,
                got: a.len(),
            });
        }
        let unsat_count = self
            .clauses
            .iter()
            .filter(|c| !c.is_satisfied(a.values()))
            .count();
        Ok(Evaluation {
            satisfied: unsat_count == 0,
            unsat_count,
        })
    }

    /// Early-exit satisfaction test for hot loops; `values.len()` must equal
    /// `num_vars`.
    #[inline]
    pub fn is_satisfied_by(&self, values: &[bool]) -> bool {
        debug_assert_eq!(values.len(), self.num_vars);
        self.clauses.iter().all(|c| c.is_satisfied(values))
    }

    pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Self, FormulaError> {
        parse_dimacs(reader)
    }

    pub fn from_dimacs_str(text: &str) -> Result<Self, FormulaError> {
        parse_dimacs(text.as_bytes())
    }

    pub fn write_dimacs<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            let [a, b, d] = c.lits;
            writeln!(w, "{a} {b} {d} 0")?;
        }
        Ok(())
    }

    pub fn to_dimacs_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dimacs(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("DIMACS output is ASCII")
    }
}

fn build_incidence(num_vars: usize, clauses: &[Clause]) -> (Vec<u32>, Vec<Occurrence>) {
    let mut counts = vec![0u32; num_vars + 1];
    for c in clauses {
        for l in c.lits() {
            counts[l.var() + 1] += 1;
        }
    }
    for n in 0..num_vars {
        counts[n + 1] += counts[n];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut occ = vec![Occurrence { clause: 0, pos: 0 }; 3 * clauses.len()];
    for (m, c) in clauses.iter().enumerate() {
        for (pos, l) in c.lits().iter().enumerate() {
            let slot = &mut fill[l.var()];
            occ[*slot as usize] = Occurrence {
                clause: m as u32,
                pos: pos as u8,
            };
            *slot += 1;
        }
    }
    (offsets, occ)
}

/// Outcome of checking an assignment against a formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub satisfied: bool,
    pub unsat_count: usize,
}

/// A total truth assignment, indexed by 0-based variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, n: usize) -> bool {
        self.0[n]
    }

    /// `+1` for true, `-1` for false, as written in the generator sidecar.
    pub fn to_signs(&self) -> Vec<i8> {
        self.0.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for Assignment {
    fn from(values: Vec<bool>) -> Self {
        Assignment(values)
    }
}

/// Parses DIMACS CNF restricted to 3-literal clauses.
pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Formula, FormulaError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::with_capacity(3);

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| FormulaError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::DuplicateHeader { line: lineno });
            }
            header = Some(parse_header(trimmed).ok_or_else(|| FormulaError::MalformedHeader {
                line: lineno,
                text: trimmed.to_string(),
            })?);
            continue;
        }
        // Some generators end files with `%` followed by a lone 0.
        if trimmed.starts_with('%') {
            break;
        }
        let Some((num_vars, _)) = header else {
            return Err(FormulaError::MissingHeader { line: lineno });
        };
        for token in trimmed.split_whitespace() {
            let lit: i64 = token.parse().map_err(|_| FormulaError::InvalidLiteral {
                line: lineno,
                token: token.to_string(),
            })?;
            if lit != 0 {
                current.push(lit);
                continue;
            }
            let m = clauses.len();
            if current.len() != 3 {
                return Err(FormulaError::ClauseArity {
                    clause: m,
                    found: current.len(),
                });
            }
            let mut lits = [Literal::positive(0); 3];
            for (slot, &raw) in lits.iter_mut().zip(&current) {
                let var = raw.unsigned_abs() as usize;
                if var > num_vars {
                    return Err(FormulaError::VariableOutOfRange {
                        clause: m,
                        var: var - 1,
                        num_vars,
                    });
                }
                *slot = Literal::from_dimacs(raw).expect("nonzero literal in range");
            }
            clauses.push(Clause::new(lits));
            current.clear();
        }
    }

    let (num_vars, declared) = header.ok_or(FormulaError::NoHeader)?;
    if !current.is_empty() {
        return Err(FormulaError::UnterminatedClause);
    }
    if clauses.len() != declared {
        return Err(FormulaError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Formula::new(num_vars, clauses)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    if it.next()? != "p" || it.next()? != "cnf" {
        return None;
    }
    let n = it.next()?.parse().ok()?;
    let m = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((n, m))
}
