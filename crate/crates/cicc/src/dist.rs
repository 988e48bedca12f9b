//! Dense joint distributions over named finite variables.
//!
//! Probabilities are stored row-major (first variable most significant) with
//! natural-log internals; entropy and information queries convert to the
//! caller's base only at the boundary. `0 log 0 = 0` throughout.

use rand::Rng;

use crate::{Error, Result};

/// Construction refuses tables above this many cells unless raised explicitly.
pub const DEFAULT_CELL_LIMIT: usize = 10_000_000;

/// Sum tolerance accepted on input blocks before exact renormalization.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// One named finite variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub size: usize,
}

impl Var {
    pub fn new(name: &str, size: usize) -> Self {
        Self { name: name.to_string(), size }
    }
}

/// A dense joint probability table over an ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    vars: Vec<Var>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(vars: Vec<Var>, probs: Vec<f64>) -> Result<Self> {
        Self::with_cell_limit(vars, probs, DEFAULT_CELL_LIMIT)
    }

    pub fn with_cell_limit(vars: Vec<Var>, probs: Vec<f64>, limit: usize) -> Result<Self> {
        let mut cells = 1usize;
        for v in &vars {
            if v.size == 0 {
                return Err(Error::Structure(format!("variable {} has size 0", v.name)));
            }
            cells = cells
                .checked_mul(v.size)
                .ok_or_else(|| Error::TooLarge("joint table size overflows".into()))?;
        }
        if cells > limit {
            return Err(Error::TooLarge(format!(
                "joint table needs {cells} cells, limit is {limit}"
            )));
        }
        for i in 0..vars.len() {
            for j in i + 1..vars.len() {
                if vars[i].name == vars[j].name {
                    return Err(Error::Structure(format!(
                        "duplicate variable name {}",
                        vars[i].name
                    )));
                }
            }
        }
        if probs.len() != cells {
            return Err(Error::Structure(format!(
                "probability table has {} entries, variables imply {cells}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < -1e-15 {
                return Err(Error::Structure(format!("invalid probability {p}")));
            }
            sum += p.max(0.0);
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Normalization(format!(
                "joint table sums to {sum}, expected 1"
            )));
        }
        let probs = probs.into_iter().map(|p| p.max(0.0) / sum).collect();
        Ok(Self { vars, probs })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Structure(format!("unknown variable {name}")))
    }

    pub fn var_size(&self, name: &str) -> Result<usize> {
        Ok(self.vars[self.var_index(name)?].size)
    }

    /// Mixed-radix cell index for one full assignment.
    pub fn cell(&self, assignment: &[usize]) -> usize {
        debug_assert_eq!(assignment.len(), self.vars.len());
        let mut idx = 0usize;
        for (v, &a) in self.vars.iter().zip(assignment) {
            debug_assert!(a < v.size);
            idx = idx * v.size + a;
        }
        idx
    }

    /// Decodes a cell index into per-variable values.
    pub fn assignment(&self, mut cell: usize, out: &mut [usize]) {
        for (v, o) in self.vars.iter().zip(out.iter_mut()).rev() {
            *o = cell % v.size;
            cell /= v.size;
        }
    }

    /// Marginal over `keep` (order follows `keep`, not the parent order).
    pub fn marginal(&self, keep: &[&str]) -> Result<JointDist> {
        let idxs: Vec<usize> = keep
            .iter()
            .map(|n| self.var_index(n))
            .collect::<Result<_>>()?;
        let kept_vars: Vec<Var> = idxs.iter().map(|&i| self.vars[i].clone()).collect();
        let cells: usize = kept_vars.iter().map(|v| v.size).product();
        let mut probs = vec![0.0; cells.max(1)];
        let mut full = vec![0usize; self.vars.len()];
        for (c, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.assignment(c, &mut full);
            let mut idx = 0usize;
            for (&vi, v) in idxs.iter().zip(&kept_vars) {
                idx = idx * v.size + full[vi];
            }
            probs[idx] += p;
        }
        Ok(JointDist { vars: kept_vars, probs })
    }

    fn entropy_nats_of(&self, names: &[&str]) -> Result<f64> {
        if names.is_empty() {
            return Ok(0.0);
        }
        let m = self.marginal(names)?;
        Ok(m.probs.iter().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum())
    }

    /// Conditional entropy `H(targets | given)` in the requested base.
    pub fn entropy(&self, targets: &[&str], given: &[&str], base: f64) -> Result<f64> {
        if base <= 1.0 {
            return Err(Error::Structure(format!("entropy base {base} must exceed 1")));
        }
        for t in targets {
            if given.contains(t) {
                return Err(Error::Structure(format!(
                    "variable {t} appears as both target and condition"
                )));
            }
        }
        let mut all: Vec<&str> = targets.to_vec();
        all.extend_from_slice(given);
        let h = self.entropy_nats_of(&all)? - self.entropy_nats_of(given)?;
        Ok((h / base.ln()).max(0.0))
    }

    /// Conditional mutual information `I(a; b | given)` in the requested base.
    pub fn mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
        base: f64,
    ) -> Result<f64> {
        let mut bg: Vec<&str> = b.to_vec();
        bg.extend_from_slice(given);
        let mi = self.entropy(a, given, base)? - self.entropy(a, &bg, base)?;
        Ok(mi.max(0.0))
    }

    /// Tests the chain `a <-> b <-> c`; returns the verdict and the violation
    /// `I(a; c | b)` in bits.
    pub fn check_markov(&self, a: &[&str], b: &[&str], c: &[&str], tol: f64) -> Result<(bool, f64)> {
        let v = self.mutual_information(a, c, b, 2.0)?;
        Ok((v <= tol, v))
    }

    /// Total variation distance `(1/2) sum |p - q|` between two tables with
    /// identical shape.
    pub fn total_variation(&self, other: &JointDist) -> Result<f64> {
        if self.vars != other.vars {
            return Err(Error::Structure(
                "total variation requires identical variable lists".into(),
            ));
        }
        Ok(total_variation_slices(&self.probs, &other.probs))
    }

    /// Draws one full assignment by CDF inversion over the dense table.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let mut t: f64 = rng.gen();
        let mut out = vec![0usize; self.vars.len()];
        let mut last_nonzero = 0usize;
        for (c, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_nonzero = c;
                if t < p {
                    self.assignment(c, &mut out);
                    return out;
                }
                t -= p;
            }
        }
        // Float round-off tail: land on the last supported cell.
        self.assignment(last_nonzero, &mut out);
        out
    }

    /// Conditional table `P(target | given...)` with one target variable.
    pub fn conditional(&self, target: &str, given: &[&str]) -> Result<CondTable> {
        let mut names: Vec<&str> = given.to_vec();
        names.push(target);
        let m = self.marginal(&names)?;
        let tsize = m.vars.last().unwrap().size;
        let rows = m.probs.len() / tsize;
        let mut table = vec![0.0; m.probs.len()];
        for r in 0..rows {
            let row = &m.probs[r * tsize..(r + 1) * tsize];
            let s: f64 = row.iter().sum();
            let out = &mut table[r * tsize..(r + 1) * tsize];
            if s > 0.0 {
                for (o, &p) in out.iter_mut().zip(row) {
                    *o = p / s;
                }
            } else {
                // Unreachable context: uniform keeps downstream math finite.
                for o in out.iter_mut() {
                    *o = 1.0 / tsize as f64;
                }
            }
        }
        Ok(CondTable {
            given_sizes: m.vars[..m.vars.len() - 1].iter().map(|v| v.size).collect(),
            target_size: tsize,
            table,
        })
    }
}

/// `(1/2) sum |p - q|` over two same-length slices.
pub fn total_variation_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<f64>()
}

/// Shannon entropy of one distribution slice, in the requested base.
pub fn entropy_slice(p: &[f64], base: f64) -> f64 {
    let nats: f64 = p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum();
    nats / base.ln()
}

/// Draws an index from a probability row by CDF inversion.
pub fn sample_index<R: Rng>(row: &[f64], rng: &mut R) -> usize {
    let mut t: f64 = rng.gen();
    let mut last = 0usize;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last = i;
            if t < p {
                return i;
            }
            t -= p;
        }
    }
    last
}

/// `P(target | given...)`: one row of `target_size` probabilities per
/// mixed-radix context.
#[derive(Debug, Clone)]
pub struct CondTable {
    pub given_sizes: Vec<usize>,
    pub target_size: usize,
    table: Vec<f64>,
}

impl CondTable {
    pub fn row(&self, given: &[usize]) -> &[f64] {
        debug_assert_eq!(given.len(), self.given_sizes.len());
        let mut idx = 0usize;
        for (&g, &s) in given.iter().zip(&self.given_sizes) {
            debug_assert!(g < s);
            idx = idx * s + g;
        }
        &self.table[idx * self.target_size..(idx + 1) * self.target_size]
    }
}
