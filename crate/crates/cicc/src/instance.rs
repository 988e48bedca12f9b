//! One simulation instance: the interference channel plus the input design.
//!
//! The channel is a memoryless map `P(Y1, Y2 | X1, X2)`. The design is a joint
//! distribution over the auxiliary and input variables `(U, V, X1, X2)` and
//! must satisfy the chain `(U, X1) <-> V <-> X2`: transmitter 2 synthesizes
//! `X2` from `V` alone, so any dependence bypassing `V` is unrealizable.

use sha2::{Digest, Sha256};

use crate::alphabet::{is_prime, next_prime_above, PrimeAlphabet};
use crate::dist::{JointDist, Var};
use crate::{Error, Result};

/// Tolerance for the design's Markov-chain check.
pub const MARKOV_TOLERANCE: f64 = 1e-9;

/// Canonical design variable order.
pub const DESIGN_VARS: [&str; 4] = ["U", "V", "X1", "X2"];

/// A memoryless two-input two-output channel `P(Y1, Y2 | X1, X2)`, stored
/// row-major over `(x1, x2, y1, y2)` and normalized per input pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    x1_size: usize,
    x2_size: usize,
    y1_size: usize,
    y2_size: usize,
    probs: Vec<f64>,
}

impl ChannelModel {
    pub fn new(
        x1_size: usize,
        x2_size: usize,
        y1_size: usize,
        y2_size: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let cells = x1_size * x2_size * y1_size * y2_size;
        if probs.len() != cells {
            return Err(Error::Structure(format!(
                "channel table has {} entries, expected {cells}",
                probs.len()
            )));
        }
        let row = y1_size * y2_size;
        let mut probs = probs;
        for x1 in 0..x1_size {
            for x2 in 0..x2_size {
                let base = (x1 * x2_size + x2) * row;
                let chunk = &mut probs[base..base + row];
                let mut sum = 0.0;
                for &p in chunk.iter() {
                    if !p.is_finite() || p < -1e-15 {
                        return Err(Error::Structure(format!(
                            "invalid channel probability {p} at input ({x1},{x2})"
                        )));
                    }
                    sum += p.max(0.0);
                }
                if (sum - 1.0).abs() > crate::dist::SUM_TOLERANCE {
                    return Err(Error::Normalization(format!(
                        "channel row for input ({x1},{x2}) sums to {sum}, expected 1"
                    )));
                }
                for p in chunk.iter_mut() {
                    *p = p.max(0.0) / sum;
                }
            }
        }
        Ok(Self { x1_size, x2_size, y1_size, y2_size, probs })
    }

    pub fn x1_size(&self) -> usize {
        self.x1_size
    }
    pub fn x2_size(&self) -> usize {
        self.x2_size
    }
    pub fn y1_size(&self) -> usize {
        self.y1_size
    }
    pub fn y2_size(&self) -> usize {
        self.y2_size
    }

    /// The output row `P(. , . | x1, x2)` over `(y1, y2)` row-major.
    pub fn row(&self, x1: usize, x2: usize) -> &[f64] {
        let row = self.y1_size * self.y2_size;
        let base = (x1 * self.x2_size + x2) * row;
        &self.probs[base..base + row]
    }
}

/// A validated (channel, design) pair, the unit every construction and
/// simulation starts from.
#[derive(Debug, Clone)]
pub struct CiccInstance {
    design: JointDist,
    channel: ChannelModel,
    warnings: Vec<String>,
}

impl CiccInstance {
    /// Validates alphabet consistency, primality of the coded alphabets, and
    /// the design's Markov chain. Cardinality shortfalls against the
    /// sufficient auxiliary-size rule produce warnings, not errors.
    pub fn new(design: JointDist, channel: ChannelModel) -> Result<Self> {
        let names: Vec<&str> = design.vars().iter().map(|v| v.name.as_str()).collect();
        if names != DESIGN_VARS {
            return Err(Error::Structure(format!(
                "design variables must be exactly {DESIGN_VARS:?} in order, got {names:?}"
            )));
        }
        for v in design.vars() {
            if v.size > u16::MAX as usize || !is_prime(v.size as u16) {
                return Err(Error::Structure(format!(
                    "alphabet size {} of {} is not prime",
                    v.size, v.name
                )));
            }
        }
        if design.var_size("X1")? != channel.x1_size || design.var_size("X2")? != channel.x2_size {
            return Err(Error::Structure(
                "design and channel disagree on input alphabet sizes".into(),
            ));
        }
        let (ok, violation) = design.check_markov(&["U", "X1"], &["V"], &["X2"], MARKOV_TOLERANCE)?;
        if !ok {
            return Err(Error::Markov(format!(
                "design violates (U,X1) <-> V <-> X2: I(U,X1; X2 | V) = {violation:.3e} bits"
            )));
        }
        let mut warnings = Vec::new();
        let x1 = channel.x1_size;
        let x2 = channel.x2_size;
        let qu_needed = next_prime_above(x1 * x2 + 3) as usize;
        let qv_needed = next_prime_above(x1 * x1 * x2 * x2 + 4 * x1 * x2 + 3) as usize;
        if design.var_size("U")? < qu_needed {
            warnings.push(format!(
                "|U| = {} is below the sufficient auxiliary size {qu_needed}; \
                 the region evaluation may be pessimistic",
                design.var_size("U")?
            ));
        }
        if design.var_size("V")? < qv_needed {
            warnings.push(format!(
                "|V| = {} is below the sufficient auxiliary size {qv_needed}; \
                 the region evaluation may be pessimistic",
                design.var_size("V")?
            ));
        }
        Ok(Self { design, channel, warnings })
    }

    pub fn design(&self) -> &JointDist {
        &self.design
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn alphabet(&self, var: &str) -> Result<PrimeAlphabet> {
        PrimeAlphabet::new(self.design.var_size(var)? as u16)
    }

    /// The full joint `P(U, V, X1, X2, Y1, Y2)` = design composed with the
    /// channel.
    pub fn full_joint(&self) -> Result<JointDist> {
        let d = &self.design;
        let ch = &self.channel;
        let sizes: Vec<usize> = DESIGN_VARS
            .iter()
            .map(|n| d.var_size(n).expect("validated"))
            .collect();
        let mut vars: Vec<Var> = DESIGN_VARS
            .iter()
            .zip(&sizes)
            .map(|(n, &s)| Var::new(n, s))
            .collect();
        vars.push(Var::new("Y1", ch.y1_size));
        vars.push(Var::new("Y2", ch.y2_size));
        let mut probs = vec![0.0; d.probs().len() * ch.y1_size * ch.y2_size];
        let mut assign = vec![0usize; 4];
        for (c, &p) in d.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            d.assignment(c, &mut assign);
            let (x1, x2) = (assign[2], assign[3]);
            let row = ch.row(x1, x2);
            let base = c * ch.y1_size * ch.y2_size;
            for (k, &pc) in row.iter().enumerate() {
                probs[base + k] = p * pc;
            }
        }
        JointDist::new(vars, probs)
    }

    /// Stable content hash of the instance (first 16 hex digits of SHA-256
    /// over the canonical text dump).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_text().as_bytes());
        let digest = hasher.finalize();
        let mut s = String::new();
        for b in &digest[..8] {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    /// Canonical plain-text dump used for hashing and cache keys.
    pub fn canonical_text(&self) -> String {
        let mut out = String::from("cicc-instance-canonical v1\n");
        for v in self.design.vars() {
            out.push_str(&format!("var {} {}\n", v.name, v.size));
        }
        out.push_str(&format!(
            "out Y1 {}\nout Y2 {}\n",
            self.channel.y1_size, self.channel.y2_size
        ));
        out.push_str("design\n");
        for &p in self.design.probs() {
            out.push_str(&format!("{p}\n"));
        }
        out.push_str("channel\n");
        for &p in &self.channel.probs {
            out.push_str(&format!("{p}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_design(sizes: [usize; 4]) -> JointDist {
        let cells: usize = sizes.iter().product();
        JointDist::new(
            DESIGN_VARS
                .iter()
                .zip(&sizes)
                .map(|(n, &s)| Var::new(n, s))
                .collect(),
            vec![1.0 / cells as f64; cells],
        )
        .unwrap()
    }

    fn noiseless_channel(x1: usize, x2: usize) -> ChannelModel {
        // y1 = y2 = (x1, x2) encoded as one symbol.
        let y = x1 * x2;
        let mut probs = vec![0.0; x1 * x2 * y * y];
        for a in 0..x1 {
            for b in 0..x2 {
                let s = a * x2 + b;
                probs[((a * x2 + b) * y + s) * y + s] = 1.0;
            }
        }
        ChannelModel::new(x1, x2, y, y, probs).unwrap()
    }

    #[test]
    fn accepts_independent_design() {
        let inst = CiccInstance::new(uniform_design([2, 2, 2, 2]), noiseless_channel(2, 2)).unwrap();
        // Small auxiliaries trigger cardinality warnings but no error.
        assert_eq!(inst.warnings().len(), 2);
        let j = inst.full_joint().unwrap();
        assert_eq!(j.vars().len(), 6);
        assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_markov_violation() {
        // X2 = U directly: information bypasses V.
        let mut probs = vec![0.0; 16];
        for u in 0..2 {
            for v in 0..2 {
                for x1 in 0..2 {
                    probs[((u * 2 + v) * 2 + x1) * 2 + u] = 0.125;
                }
            }
        }
        let design = JointDist::new(
            DESIGN_VARS.iter().map(|n| Var::new(n, 2)).collect(),
            probs,
        )
        .unwrap();
        let r = CiccInstance::new(design, noiseless_channel(2, 2));
        match r {
            Err(Error::Markov(msg)) => {
                assert!(msg.contains("(U,X1) <-> V <-> X2"), "{msg}");
            }
            other => panic!("expected Markov error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_variable_order() {
        let design = JointDist::new(
            vec![
                Var::new("V", 2),
                Var::new("U", 2),
                Var::new("X1", 2),
                Var::new("X2", 2),
            ],
            vec![1.0 / 16.0; 16],
        )
        .unwrap();
        assert!(CiccInstance::new(design, noiseless_channel(2, 2)).is_err());
    }

    #[test]
    fn rejects_composite_alphabet() {
        let design = JointDist::new(
            vec![
                Var::new("U", 4),
                Var::new("V", 2),
                Var::new("X1", 2),
                Var::new("X2", 2),
            ],
            vec![1.0 / 32.0; 32],
        )
        .unwrap();
        let r = CiccInstance::new(design, noiseless_channel(2, 2));
        assert!(matches!(r, Err(Error::Structure(_))));
    }

    #[test]
    fn channel_row_normalization_gate() {
        let mut probs = vec![0.0; 16];
        probs[0] = 0.9; // row (0,0) sums to 0.9
        for i in 1..4 {
            probs[i * 4 + i % 4] = 1.0;
        }
        let r = ChannelModel::new(2, 2, 2, 2, probs);
        match r {
            Err(Error::Normalization(msg)) => assert!(msg.contains("(0,0)"), "{msg}"),
            other => panic!("expected normalization error, got {other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = CiccInstance::new(uniform_design([2, 2, 2, 2]), noiseless_channel(2, 2)).unwrap();
        let b = CiccInstance::new(uniform_design([2, 2, 2, 2]), noiseless_channel(2, 2)).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = CiccInstance::new(uniform_design([3, 2, 2, 2]), noiseless_channel(2, 2)).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
