//! A complete code construction for one instance at one block length: the
//! eleven entropy profiles, the per-layer index partitions derived from them,
//! the chaining case, and the block-to-block wiring plan.
//!
//! The wiring resolves every free subset choice deterministically: chained
//! positions are picked by lowest conditional entropy toward the receiver
//! that must decode them, ties broken by ascending index, so a construction
//! is a pure function of (instance, N, delta, estimator, seed).

use std::fmt;

use crate::case::{classify_case, CaseLabel, CaseReport};
use crate::instance::CiccInstance;
use crate::profile::{
    exact_entropy_profile, monte_carlo_entropy_profile, EntropyProfile, ProfileOptions,
};
use crate::rng::splitmix64;
use crate::sets::{
    partition_common, partition_confidential, prefix_sets, threshold_sets, CommonPartition,
    ConfidentialPartition, IndexSet, PrefixSets,
};
use crate::{Error, Result};

/// How the profiles behind a construction were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Exact,
    MonteCarlo { samples: usize },
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorMode::Exact => write!(f, "exact"),
            EstimatorMode::MonteCarlo { samples } => write!(f, "mc {samples}"),
        }
    }
}

/// The eleven profiles the scheme is built from. Layer order is the encoding
/// order: first transmitted layer, second layer, confidential layer, prefix.
#[derive(Debug, Clone)]
pub struct ProfileBank {
    /// X1 with no side information (encoder view).
    pub x1_enc: EntropyProfile,
    /// X1 given Y1.
    pub x1_y1: EntropyProfile,
    /// X1 given Y2.
    pub x1_y2: EntropyProfile,
    /// U given X1 (encoder view).
    pub u_enc: EntropyProfile,
    /// U given (Y1, X1).
    pub u_y1: EntropyProfile,
    /// U given (Y2, X1).
    pub u_y2: EntropyProfile,
    /// V given (X1, U) (encoder view).
    pub v_enc: EntropyProfile,
    /// V given (Y1, X1, U): the eavesdropper-facing profile.
    pub v_y1: EntropyProfile,
    /// V given (Y2, X1, U).
    pub v_y2: EntropyProfile,
    /// X2 given (X1, U, V) (encoder view).
    pub x2_enc: EntropyProfile,
    /// X2 given (Y1, X1, U, V).
    pub x2_y1: EntropyProfile,
}

/// The eleven (target, side) pairs in bank order.
pub const PROFILE_SPECS: [(&str, &str, &[&str]); 11] = [
    ("x1_enc", "X1", &[]),
    ("x1_y1", "X1", &["Y1"]),
    ("x1_y2", "X1", &["Y2"]),
    ("u_enc", "U", &["X1"]),
    ("u_y1", "U", &["Y1", "X1"]),
    ("u_y2", "U", &["Y2", "X1"]),
    ("v_enc", "V", &["X1", "U"]),
    ("v_y1", "V", &["Y1", "X1", "U"]),
    ("v_y2", "V", &["Y2", "X1", "U"]),
    ("x2_enc", "X2", &["X1", "U", "V"]),
    ("x2_y1", "X2", &["Y1", "X1", "U", "V"]),
];

impl ProfileBank {
    /// Profiles in `PROFILE_SPECS` order.
    pub fn all(&self) -> [(&'static str, &EntropyProfile); 11] {
        [
            ("x1_enc", &self.x1_enc),
            ("x1_y1", &self.x1_y1),
            ("x1_y2", &self.x1_y2),
            ("u_enc", &self.u_enc),
            ("u_y1", &self.u_y1),
            ("u_y2", &self.u_y2),
            ("v_enc", &self.v_enc),
            ("v_y1", &self.v_y1),
            ("v_y2", &self.v_y2),
            ("x2_enc", &self.x2_enc),
            ("x2_y1", &self.x2_y1),
        ]
    }
}

/// Threshold sets and partition for one common layer.
#[derive(Debug, Clone)]
pub struct LayerSets {
    /// High entropy at the encoder.
    pub high: IndexSet,
    /// Low entropy given receiver 1's view.
    pub low1: IndexSet,
    /// Low entropy given receiver 2's view.
    pub low2: IndexSet,
    pub part: CommonPartition,
}

/// Threshold sets and partition for the confidential layer.
#[derive(Debug, Clone)]
pub struct VSets {
    pub high: IndexSet,
    /// Low given receiver 2's view (reliability).
    pub low2: IndexSet,
    /// High given receiver 1's view (secrecy).
    pub high1: IndexSet,
    pub part: ConfidentialPartition,
}

/// Everything needed to encode and decode at one (instance, N, delta).
#[derive(Debug, Clone)]
pub struct Construction {
    pub instance_hash: String,
    pub n: usize,
    pub delta: f64,
    pub mode: EstimatorMode,
    pub seed: u64,
    pub case: CaseReport,
    /// I(V;Y1|U,X1) and I(V;Y2|U,X1): the two halves of the secrecy bound.
    pub v_mi: (f64, f64),
    pub profiles: ProfileBank,
    /// First common layer (X1).
    pub layer1: LayerSets,
    /// Second common layer (U).
    pub layer2: LayerSets,
    /// Confidential layer (V).
    pub v: VSets,
    /// Prefix layer (X2).
    pub prefix: PrefixSets,
}

/// Computes the profile bank and derives every set family.
pub fn build_construction(
    instance: &CiccInstance,
    n: usize,
    delta: f64,
    mode: EstimatorMode,
    seed: u64,
) -> Result<Construction> {
    let joint = instance.full_joint()?;
    let case = classify_case(instance)?;
    let v_mi = (
        joint.mutual_information(&["V"], &["Y1"], &["U", "X1"], 2.0)?,
        joint.mutual_information(&["V"], &["Y2"], &["U", "X1"], 2.0)?,
    );
    let mut profiles = Vec::with_capacity(11);
    for (slot, (_, target, side)) in PROFILE_SPECS.iter().enumerate() {
        let p = match mode {
            EstimatorMode::Exact => {
                exact_entropy_profile(&joint, target, side, n, &ProfileOptions::default())?
            }
            EstimatorMode::MonteCarlo { samples } => monte_carlo_entropy_profile(
                &joint,
                target,
                side,
                n,
                samples,
                splitmix64(seed ^ splitmix64(0xC0DE_0000 + slot as u64)),
            )?,
        };
        profiles.push(p);
    }
    let mut it = profiles.into_iter();
    let bank = ProfileBank {
        x1_enc: it.next().unwrap(),
        x1_y1: it.next().unwrap(),
        x1_y2: it.next().unwrap(),
        u_enc: it.next().unwrap(),
        u_y1: it.next().unwrap(),
        u_y2: it.next().unwrap(),
        v_enc: it.next().unwrap(),
        v_y1: it.next().unwrap(),
        v_y2: it.next().unwrap(),
        x2_enc: it.next().unwrap(),
        x2_y1: it.next().unwrap(),
    };
    assemble(instance.hash(), n, delta, mode, seed, case, v_mi, bank)
}

/// Derives all partitions from an existing profile bank.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    instance_hash: String,
    n: usize,
    delta: f64,
    mode: EstimatorMode,
    seed: u64,
    case: CaseReport,
    v_mi: (f64, f64),
    profiles: ProfileBank,
) -> Result<Construction> {
    let (x1_high, _) = threshold_sets(&profiles.x1_enc, delta, delta)?;
    let (_, x1_low1) = threshold_sets(&profiles.x1_y1, delta, delta)?;
    let (_, x1_low2) = threshold_sets(&profiles.x1_y2, delta, delta)?;
    let layer1 = LayerSets {
        part: partition_common(&x1_high, &x1_low1, &x1_low2),
        high: x1_high,
        low1: x1_low1,
        low2: x1_low2,
    };
    let (u_high, _) = threshold_sets(&profiles.u_enc, delta, delta)?;
    let (_, u_low1) = threshold_sets(&profiles.u_y1, delta, delta)?;
    let (_, u_low2) = threshold_sets(&profiles.u_y2, delta, delta)?;
    let layer2 = LayerSets {
        part: partition_common(&u_high, &u_low1, &u_low2),
        high: u_high,
        low1: u_low1,
        low2: u_low2,
    };
    let (v_high, _) = threshold_sets(&profiles.v_enc, delta, delta)?;
    let (_, v_low2) = threshold_sets(&profiles.v_y2, delta, delta)?;
    let (v_high1, _) = threshold_sets(&profiles.v_y1, delta, delta)?;
    let v = VSets {
        part: partition_confidential(&v_high, &v_low2, &v_high1),
        high: v_high,
        low2: v_low2,
        high1: v_high1,
    };
    let (x2_high, _) = threshold_sets(&profiles.x2_enc, delta, delta)?;
    let (x2_high1, x2_low1) = threshold_sets(&profiles.x2_y1, delta, delta)?;
    let prefix = prefix_sets(&x2_high, &x2_high1, &x2_low1);
    Ok(Construction {
        instance_hash,
        n,
        delta,
        mode,
        seed,
        case,
        v_mi,
        profiles,
        layer1,
        layer2,
        v,
        prefix,
    })
}

impl Construction {
    /// Whether the instance has positive secrecy capacity on the confidential
    /// layer; ties count as none. This picks the V-layer wiring: chaining with
    /// a seed when positive, frozen chained positions otherwise.
    pub fn secrecy_positive(&self) -> bool {
        self.v_mi.1 - self.v_mi.0 > 1e-9
    }

    /// Builds the block-to-block wiring for `m` blocks at the given rate
    /// back-off.
    pub fn plan(&self, m: usize, backoff: f64) -> Result<ChainingPlan> {
        let l1 = LayerPlanInput {
            part: &self.layer1.part,
            score_rx1: &self.profiles.x1_y1.h,
            score_rx2: &self.profiles.x1_y2.h,
        };
        let l2 = LayerPlanInput {
            part: &self.layer2.part,
            score_rx1: &self.profiles.u_y1.h,
            score_rx2: &self.profiles.u_y2.h,
        };
        let v = VPlanInput {
            part: &self.v.part,
            score_rx2: &self.profiles.v_y2.h,
            secrecy_positive: self.secrecy_positive(),
        };
        let mut plan =
            ChainingPlan::build(self.case.label, m, backoff, self.n, l1, l2, v, self.prefix.clone())?;
        plan.side1_layer1 = self.layer1.part.sampled.minus(&self.layer1.low1);
        plan.side1_layer2 = self.layer2.part.sampled.minus(&self.layer2.low1);
        plan.side2_layer1 = self.layer1.part.sampled.minus(&self.layer1.low2);
        plan.side2_layer2 = self.layer2.part.sampled.minus(&self.layer2.low2);
        plan.side2_v = self.v.part.d2.minus(&self.v.low2);
        Ok(plan)
    }

    /// Total entropy deficit, in bits, of all positions the encoder fills
    /// with pinned or uniform content rather than the conditional sampling
    /// rule. This drives the induced-vs-design distance bound.
    pub fn deficit_bits(&self, q_x1: usize, q_u: usize, q_v: usize, q_x2: usize) -> f64 {
        let layer = |sampled: &IndexSet, h: &[f64], q: usize| -> f64 {
            (0..h.len())
                .filter(|&j| !sampled.contains(j))
                .map(|j| (1.0 - h[j]).max(0.0) * (q as f64).log2())
                .sum::<f64>()
        };
        layer(&self.layer1.part.sampled, &self.profiles.x1_enc.h, q_x1)
            + layer(&self.layer2.part.sampled, &self.profiles.u_enc.h, q_u)
            + layer(&self.v.part.d2, &self.profiles.v_enc.h, q_v)
            + layer(&self.prefix.sampled, &self.profiles.x2_enc.h, q_x2)
    }

    /// Versioned text form: header plus the eleven profiles. Partitions are
    /// recomputed on load, so the document stays small and auditable.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("cicc-construction v1\n");
        out.push_str(&format!("instance {}\n", self.instance_hash));
        out.push_str(&format!("n {}\n", self.n));
        out.push_str(&format!("delta {}\n", self.delta));
        out.push_str(&format!("mode {}\n", self.mode));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("case {}\n", self.case.label));
        out.push_str(&format!(
            "mi {} {} {} {} {} {}\n",
            self.case.layer1.0,
            self.case.layer1.1,
            self.case.layer2.0,
            self.case.layer2.1,
            self.case.joint.0,
            self.case.joint.1
        ));
        out.push_str(&format!("vmi {} {}\n", self.v_mi.0, self.v_mi.1));
        for (name, p) in self.profiles.all() {
            out.push_str(&format!("profile {name} q {} samples {}\n", p.q, p.samples));
            out.push('h');
            for v in &p.h {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
            if let Some(se) = &p.std_err {
                out.push_str("se");
                for v in se {
                    out.push_str(&format!(" {v}"));
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    /// Parses `to_text` output and rebuilds the partitions.
    pub fn from_text(text: &str) -> Result<Construction> {
        let mut lines = text.lines().enumerate();
        let mut next =
            |expect: &str| -> Result<(usize, String)> {
                for (i, raw) in lines.by_ref() {
                    let line = raw.trim();
                    if line.is_empty() {
                        continue;
                    }
                    if !line.starts_with(expect) {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!("expected '{expect}', found '{line}'"),
                        });
                    }
                    return Ok((i + 1, line.to_string()));
                }
                Err(Error::Parse { line: 0, msg: format!("missing '{expect}' line") })
            };
        let (ln, header) = next("cicc-construction")?;
        if header != "cicc-construction v1" {
            return Err(Error::Parse { line: ln, msg: format!("unsupported version: {header}") });
        }
        let field = |line: (usize, String), key: &str| -> Result<String> {
            line.1
                .strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or(Error::Parse { line: line.0, msg: format!("expected {key}") })
        };
        let instance_hash = field(next("instance")?, "instance")?;
        let n: usize = parse_num(field(next("n")?, "n")?, "n")?;
        let delta: f64 = parse_num(field(next("delta")?, "delta")?, "delta")?;
        let mode_s = field(next("mode")?, "mode")?;
        let mode = if mode_s == "exact" {
            EstimatorMode::Exact
        } else if let Some(s) = mode_s.strip_prefix("mc ") {
            EstimatorMode::MonteCarlo { samples: parse_num(s.trim().to_string(), "samples")? }
        } else {
            return Err(Error::Parse { line: 0, msg: format!("unknown mode '{mode_s}'") });
        };
        let seed: u64 = parse_num(field(next("seed")?, "seed")?, "seed")?;
        let case_s = field(next("case")?, "case")?;
        let label = CaseLabel::parse(&case_s)
            .ok_or(Error::Parse { line: 0, msg: format!("unknown case '{case_s}'") })?;
        let mi_s = field(next("mi")?, "mi")?;
        let mi: Vec<f64> = mi_s
            .split_whitespace()
            .map(|t| parse_num(t.to_string(), "mi"))
            .collect::<Result<_>>()?;
        if mi.len() != 6 {
            return Err(Error::Parse { line: 0, msg: format!("mi needs 6 values, got {}", mi.len()) });
        }
        let case = CaseReport {
            label,
            layer1: (mi[0], mi[1]),
            layer2: (mi[2], mi[3]),
            joint: (mi[4], mi[5]),
        };
        let vmi_s = field(next("vmi")?, "vmi")?;
        let vmi: Vec<f64> = vmi_s
            .split_whitespace()
            .map(|t| parse_num(t.to_string(), "vmi"))
            .collect::<Result<_>>()?;
        if vmi.len() != 2 {
            return Err(Error::Parse {
                line: 0,
                msg: format!("vmi needs 2 values, got {}", vmi.len()),
            });
        }
        let mut parsed: Vec<EntropyProfile> = Vec::with_capacity(11);
        for (name, _, _) in PROFILE_SPECS {
            let (ln, head) = next("profile")?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            if toks.len() != 6 || toks[1] != name || toks[2] != "q" || toks[4] != "samples" {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected 'profile {name} q <q> samples <k>', found '{head}'"),
                });
            }
            let q: u16 = parse_num(toks[3].to_string(), "q")?;
            let samples: usize = parse_num(toks[5].to_string(), "samples")?;
            let (ln, h_line) = next("h")?;
            let h: Vec<f64> = h_line[1..]
                .split_whitespace()
                .map(|t| parse_num(t.to_string(), "h"))
                .collect::<Result<_>>()?;
            if h.len() != n {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("profile {name} has {} entries, expected {n}", h.len()),
                });
            }
            let std_err = if samples > 0 {
                let (ln, se_line) = next("se")?;
                let se: Vec<f64> = se_line[2..]
                    .split_whitespace()
                    .map(|t| parse_num(t.to_string(), "se"))
                    .collect::<Result<_>>()?;
                if se.len() != n {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("profile {name} has {} errors, expected {n}", se.len()),
                    });
                }
                Some(se)
            } else {
                None
            };
            parsed.push(EntropyProfile { n, q, h, std_err, samples });
        }
        next("end")?;
        let mut it = parsed.into_iter();
        let bank = ProfileBank {
            x1_enc: it.next().unwrap(),
            x1_y1: it.next().unwrap(),
            x1_y2: it.next().unwrap(),
            u_enc: it.next().unwrap(),
            u_y1: it.next().unwrap(),
            u_y2: it.next().unwrap(),
            v_enc: it.next().unwrap(),
            v_y1: it.next().unwrap(),
            v_y2: it.next().unwrap(),
            x2_enc: it.next().unwrap(),
            x2_y1: it.next().unwrap(),
        };
        assemble(instance_hash, n, delta, mode, seed, case, (vmi[0], vmi[1]), bank)
    }
}

fn parse_num<T: std::str::FromStr>(s: String, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad {what} value '{s}'") })
}

/// Which way message content flows across blocks: forward means sources sit
/// in earlier blocks and repeats in later ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainDirection {
    Forward,
    Backward,
}

/// One common layer's resolved position roles.
#[derive(Debug, Clone)]
pub struct LayerChain {
    /// Decodable by both receivers: fresh message every block.
    pub core: IndexSet,
    /// Fresh message in non-terminal blocks, repeated in this layer.
    pub own_source: IndexSet,
    /// Fresh message repeated in the other layer (mixed cases only).
    pub cross_source: IndexSet,
    /// Repeats the adjacent block's `own_source`; frozen in the terminal block.
    pub target: IndexSet,
    /// Repeats the adjacent block's other-layer `cross_source`.
    pub cross_target: IndexSet,
    /// Frozen in every block (public randomness, reused across blocks).
    pub frozen: IndexSet,
    /// Filled by the conditional sampling rule every block.
    pub sampled: IndexSet,
}

impl LayerChain {
    /// Fresh message symbols this layer carries across a whole frame.
    pub fn fresh_per_frame(&self, m: usize) -> usize {
        m * self.core.len() + (m - 1) * (self.own_source.len() + self.cross_source.len())
    }

    pub(crate) fn check_cover(&self, n: usize) -> Result<()> {
        let mut total = self.core.len()
            + self.own_source.len()
            + self.cross_source.len()
            + self.target.len()
            + self.cross_target.len()
            + self.frozen.len()
            + self.sampled.len();
        let union = self
            .core
            .union(&self.own_source)
            .union(&self.cross_source)
            .union(&self.target)
            .union(&self.cross_target)
            .union(&self.frozen)
            .union(&self.sampled);
        if union.len() != n || total != n {
            total = union.len();
            return Err(Error::Structure(format!(
                "layer roles must partition [{n}], covered {total}"
            )));
        }
        Ok(())
    }
}

/// The confidential layer's resolved position roles (orientation is fixed:
/// repeats reveal the previous block's chained values).
#[derive(Debug, Clone)]
pub struct VChain {
    /// Confidential message every block.
    pub secret_fresh: IndexSet,
    /// Private message in block 1, copy of the previous block's `chained`
    /// values afterwards. Drawn from the secrecy-capable pool first, then
    /// from the reliable private pool when that runs short.
    pub repeat: IndexSet,
    /// Private message every block.
    pub private: IndexSet,
    /// Private message in blocks 1..m-1, secret seed in block m.
    pub chained: IndexSet,
    /// Frozen every block.
    pub frozen: IndexSet,
    /// Filled by the conditional sampling rule every block.
    pub sampled: IndexSet,
}

/// The complete wiring for an m-block frame.
#[derive(Debug, Clone)]
pub struct ChainingPlan {
    pub case: CaseLabel,
    pub direction: ChainDirection,
    pub m: usize,
    pub n: usize,
    pub backoff: f64,
    /// First common layer (X1).
    pub layer1: LayerChain,
    /// Second common layer (U).
    pub layer2: LayerChain,
    pub v: VChain,
    /// Prefix-layer roles (same every block; the reused randomness is drawn
    /// once per frame).
    pub prefix: PrefixSets,
    /// Sampled positions receiver 1 cannot recompute: sent out of band.
    pub side1_layer1: IndexSet,
    pub side1_layer2: IndexSet,
    /// Same for receiver 2.
    pub side2_layer1: IndexSet,
    pub side2_layer2: IndexSet,
    /// Confidential-layer positions receiver 2 cannot recompute: sent out of
    /// band over the secret link.
    pub side2_v: IndexSet,
    /// How many second-layer core positions (lowest indices first) carry
    /// transmitter 2's public message instead of the shared message.
    pub u_m2c_core: usize,
}

struct LayerPlanInput<'a> {
    part: &'a CommonPartition,
    score_rx1: &'a [f64],
    score_rx2: &'a [f64],
}

struct VPlanInput<'a> {
    part: &'a ConfidentialPartition,
    score_rx2: &'a [f64],
    secrecy_positive: bool,
}

impl ChainingPlan {
    #[allow(clippy::too_many_arguments)]
    fn build(
        case: CaseLabel,
        m: usize,
        backoff: f64,
        n: usize,
        l1: LayerPlanInput,
        l2: LayerPlanInput,
        v: VPlanInput,
        prefix: PrefixSets,
    ) -> Result<ChainingPlan> {
        if m == 0 {
            return Err(Error::Structure("a frame needs at least one block".into()));
        }
        if !(backoff > 0.0 && backoff <= 1.0) {
            return Err(Error::Structure(format!("back-off {backoff} outside (0, 1]")));
        }
        let direction =
            if case.forward() { ChainDirection::Forward } else { ChainDirection::Backward };
        // Which layer's sources exceed its own repeat capacity in the mixed
        // cases; the other layer absorbs the overflow.
        let overflow_first = match case {
            CaseLabel::Case32 | CaseLabel::Case41 => true,
            CaseLabel::Case31 | CaseLabel::Case42 => false,
            CaseLabel::Case1 | CaseLabel::Case2 => false,
        };
        let scaled = |len: usize| (backoff * len as f64).floor() as usize;

        // Resolve both layers: first pass computes sizes, second picks sets.
        let resolve = |inp: &LayerPlanInput,
                       overflow_here: bool,
                       absorb: usize|
         -> Result<(LayerChain, usize)> {
            let (src, tgt, src_score, tgt_score) = match direction {
                ChainDirection::Forward => {
                    (&inp.part.i1, &inp.part.i2, inp.score_rx1, inp.score_rx2)
                }
                ChainDirection::Backward => {
                    (&inp.part.i2, &inp.part.i1, inp.score_rx2, inp.score_rx1)
                }
            };
            let avail = src.minus(tgt);
            let cap = tgt.minus(src);
            let core_raw = src.intersect(tgt);
            let own_n = scaled(avail.len().min(cap.len()));
            let cross_n = if case.cross_chained() && overflow_here {
                scaled(avail.len().saturating_sub(cap.len()))
            } else {
                0
            };
            if cap.len() < own_n + absorb {
                return Err(Error::RateInfeasible(format!(
                    "repeat capacity {} cannot hold {} own plus {} crossed positions \
                     (|target reliable \\ source reliable| >= |own sources| + |overflow| fails)",
                    cap.len(),
                    own_n,
                    absorb
                )));
            }
            // Scores: sources are decoded directly by the source-side
            // receiver, repeats by the other one.
            let own_source = avail.take_lowest(own_n, src_score)?;
            let cross_source = avail.minus(&own_source).take_lowest(cross_n, src_score)?;
            let target = cap.take_lowest(own_n, tgt_score)?;
            let cross_target = cap.minus(&target).take_lowest(absorb, tgt_score)?;
            let core = core_raw.take_lowest(scaled(core_raw.len()), &max_score(src_score, tgt_score))?;
            let used = core
                .union(&own_source)
                .union(&cross_source)
                .union(&target)
                .union(&cross_target);
            let frozen = src.union(tgt).minus(&used).union(&inp.part.frozen);
            let chain = LayerChain {
                core,
                own_source,
                cross_source,
                target,
                cross_target,
                frozen,
                sampled: inp.part.sampled.clone(),
            };
            chain.check_cover(n)?;
            Ok((chain, cross_n))
        };

        // The overflow size must be known before the absorbing layer resolves.
        let (layer1, layer2);
        if overflow_first {
            let (c1, overflow) = resolve(&l1, true, 0)?;
            let (c2, _) = resolve(&l2, false, overflow)?;
            layer1 = c1;
            layer2 = c2;
        } else if case.cross_chained() {
            let (c2, overflow) = resolve(&l2, true, 0)?;
            let (c1, _) = resolve(&l1, false, overflow)?;
            layer1 = c1;
            layer2 = c2;
        } else {
            let (c1, _) = resolve(&l1, false, 0)?;
            let (c2, _) = resolve(&l2, false, 0)?;
            layer1 = c1;
            layer2 = c2;
        }

        // Confidential layer. With no secrecy capacity there is nothing to
        // chain for: park the positions receiver 2 cannot decode on frozen
        // symbols and carry private message only. With positive secrecy the
        // chained values must be re-sent; repeats prefer the secrecy-capable
        // pool and spill into the reliable private pool when polarization has
        // not opened one up at this length. The spill is secrecy-neutral:
        // chained values are exposed toward receiver 1 in their own block
        // already.
        let part = v.part;
        let vchain = if !v.secrecy_positive {
            let private = part.i2p.take_lowest(scaled(part.i2p.len()), v.score_rx2)?;
            let frozen = part
                .f2
                .union(&part.i2s)
                .union(&part.r2)
                .union(&part.i2p.minus(&private));
            VChain {
                secret_fresh: IndexSet::empty(n),
                repeat: IndexSet::empty(n),
                private,
                chained: IndexSet::empty(n),
                frozen,
                sampled: part.d2.clone(),
            }
        } else {
            if part.i2s.len() + part.i2p.len() < part.r2.len() {
                return Err(Error::RateInfeasible(format!(
                    "repeat capacity |I_2s| + |I_2p| >= |R_2| fails: {} + {} < {}; \
                     no room to re-send the chained values",
                    part.i2s.len(),
                    part.i2p.len(),
                    part.r2.len()
                )));
            }
            let from_secret = part.r2.len().min(part.i2s.len());
            let repeat_secret = part.i2s.take_lowest(from_secret, v.score_rx2)?;
            let repeat_private = part.i2p.take_lowest(part.r2.len() - from_secret, v.score_rx2)?;
            let secret_avail = part.i2s.minus(&repeat_secret);
            let secret_fresh = secret_avail.take_lowest(scaled(secret_avail.len()), v.score_rx2)?;
            let private_avail = part.i2p.minus(&repeat_private);
            let private = private_avail.take_lowest(scaled(private_avail.len()), v.score_rx2)?;
            let v_frozen = part
                .f2
                .union(&secret_avail.minus(&secret_fresh))
                .union(&private_avail.minus(&private));
            VChain {
                secret_fresh,
                repeat: repeat_secret.union(&repeat_private),
                private,
                chained: part.r2.clone(),
                frozen: v_frozen,
                sampled: part.d2.clone(),
            }
        };

        Ok(ChainingPlan {
            case,
            direction,
            m,
            n,
            backoff,
            layer1,
            layer2,
            v: vchain,
            prefix,
            side1_layer1: IndexSet::empty(n),
            side1_layer2: IndexSet::empty(n),
            side2_layer1: IndexSet::empty(n),
            side2_layer2: IndexSet::empty(n),
            side2_v: IndexSet::empty(n),
            u_m2c_core: 0,
        })
    }

    /// Reassigns `k` second-layer core positions to transmitter 2's public
    /// message stream.
    pub fn set_u_m2c_core(&mut self, k: usize) -> Result<()> {
        if k > self.layer2.core.len() {
            return Err(Error::Structure(format!(
                "cannot assign {k} core positions to the public stream; only {} exist",
                self.layer2.core.len()
            )));
        }
        self.u_m2c_core = k;
        Ok(())
    }

    /// Blocks whose sources carry fresh content (0-based). Forward chains
    /// freeze the last block's sources, backward chains the first's.
    pub fn source_is_fresh(&self, block: usize) -> bool {
        if self.m == 1 {
            return false;
        }
        match self.direction {
            ChainDirection::Forward => block + 1 < self.m,
            ChainDirection::Backward => block > 0,
        }
    }

    /// Whether a block's targets repeat an adjacent block (otherwise frozen).
    pub fn target_repeats(&self, block: usize) -> bool {
        if self.m == 1 {
            return false;
        }
        match self.direction {
            ChainDirection::Forward => block > 0,
            ChainDirection::Backward => block + 1 < self.m,
        }
    }

    /// The block whose sources a repeating block's targets carry.
    pub fn repeat_origin(&self, block: usize) -> usize {
        match self.direction {
            ChainDirection::Forward => block - 1,
            ChainDirection::Backward => block + 1,
        }
    }

    /// Fresh confidential symbols per frame.
    pub fn confidential_per_frame(&self) -> usize {
        self.m * self.v.secret_fresh.len()
    }

    /// Fresh private symbols per frame (block-1 repeat slot included).
    pub fn private_per_frame(&self) -> usize {
        self.m * self.v.private.len()
            + self.v.repeat.len()
            + (self.m - 1) * self.v.chained.len()
    }

    /// Secret-seed symbols per frame.
    pub fn seed_symbols(&self) -> usize {
        self.v.chained.len()
    }

    /// Order-sensitive structural digest, used to tag serialized frame
    /// records so a replay against the wrong plan fails loudly.
    pub fn digest(&self) -> u64 {
        fn mix(acc: u64, v: u64) -> u64 {
            splitmix64(acc.rotate_left(7) ^ v)
        }
        fn mix_set(mut acc: u64, set: &IndexSet) -> u64 {
            acc = mix(acc, set.len() as u64);
            for i in set.iter() {
                acc = mix(acc, i as u64);
            }
            acc
        }
        let mut acc = mix(0x6369_6363_706c_616e, self.m as u64);
        acc = mix(acc, self.n as u64);
        acc = mix(acc, self.case.to_string().len() as u64);
        for b in self.case.to_string().bytes() {
            acc = mix(acc, b as u64);
        }
        acc = mix(acc, matches!(self.direction, ChainDirection::Backward) as u64);
        acc = mix(acc, self.backoff.to_bits());
        acc = mix(acc, self.u_m2c_core as u64);
        for chain in [&self.layer1, &self.layer2] {
            for set in [
                &chain.core,
                &chain.own_source,
                &chain.cross_source,
                &chain.target,
                &chain.cross_target,
                &chain.frozen,
                &chain.sampled,
            ] {
                acc = mix_set(acc, set);
            }
        }
        for set in [
            &self.v.secret_fresh,
            &self.v.repeat,
            &self.v.private,
            &self.v.chained,
            &self.v.frozen,
            &self.v.sampled,
            &self.prefix.w_reuse,
            &self.prefix.fresh,
            &self.prefix.sampled,
            &self.side1_layer1,
            &self.side1_layer2,
            &self.side2_layer1,
            &self.side2_layer2,
            &self.side2_v,
        ] {
            acc = mix_set(acc, set);
        }
        acc
    }
}

fn max_score(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x.max(*y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::partition_common as pc;
    use crate::sets::partition_confidential as pconf;

    fn set(n: usize, idx: &[usize]) -> IndexSet {
        IndexSet::new(n, idx.to_vec()).unwrap()
    }

    /// Synthetic common partition with the given reliable sets; everything
    /// else frozen (high everywhere, no sampling).
    fn common(n: usize, i1: &[usize], i2: &[usize]) -> CommonPartition {
        pc(&IndexSet::full(n), &set(n, i1), &set(n, i2))
    }

    fn flat(n: usize) -> Vec<f64> {
        vec![0.5; n]
    }

    /// Scores that prefer low indices (ascending ramp).
    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    fn vinput(n: usize) -> ConfidentialPartition {
        // i2s = {0,1,2,3}, i2p = {4}, f2 = {5}, r2 = {6}, d2 = {7}
        pconf(
            &set(n, &[0, 1, 2, 3, 4, 5, 6]),
            &set(n, &[0, 1, 2, 3, 4]),
            &set(n, &[0, 1, 2, 3, 5]),
        )
    }

    fn build_with(
        secrecy: bool,
        case: CaseLabel,
        m: usize,
        backoff: f64,
        n: usize,
        p1: &CommonPartition,
        p2: &CommonPartition,
        vp: &ConfidentialPartition,
        score: &[f64],
    ) -> Result<ChainingPlan> {
        ChainingPlan::build(
            case,
            m,
            backoff,
            n,
            LayerPlanInput { part: p1, score_rx1: score, score_rx2: score },
            LayerPlanInput { part: p2, score_rx1: score, score_rx2: score },
            VPlanInput { part: vp, score_rx2: score, secrecy_positive: secrecy },
            PrefixSets {
                w_reuse: IndexSet::empty(n),
                fresh: IndexSet::empty(n),
                sampled: IndexSet::full(n),
                low_y1: IndexSet::empty(n),
            },
        )
    }

    fn build(
        case: CaseLabel,
        m: usize,
        backoff: f64,
        n: usize,
        p1: &CommonPartition,
        p2: &CommonPartition,
        vp: &ConfidentialPartition,
        score: &[f64],
    ) -> Result<ChainingPlan> {
        build_with(true, case, m, backoff, n, p1, p2, vp, score)
    }

    #[test]
    fn case1_chains_size_match() {
        let n = 8;
        let p1 = common(n, &[0, 1, 2], &[1, 2, 3, 4]);
        let p2 = common(n, &[0, 5], &[0, 5, 6]);
        let vp = vinput(n);
        let plan = build(CaseLabel::Case1, 3, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert_eq!(plan.direction, ChainDirection::Forward);
        for chain in [&plan.layer1, &plan.layer2] {
            assert_eq!(chain.target.len(), chain.own_source.len());
            assert!(chain.cross_source.is_empty());
            assert!(chain.cross_target.is_empty());
        }
        // layer1: i1\i2 = {0}, i2\i1 = {3,4} -> one source, one target.
        assert_eq!(plan.layer1.own_source, set(n, &[0]));
        assert_eq!(plan.layer1.target.len(), 1);
        assert_eq!(plan.layer1.core, set(n, &[1, 2]));
    }

    #[test]
    fn case31_cross_sizes_follow_the_arithmetic() {
        // Second layer: |i1\i2| = 5 sources, |i2\i1| = 2 own capacity ->
        // overflow 3. First layer: |i1\i2| = 1, |i2\i1| = 5: absorbs 3.
        let n = 16;
        let p2 = common(n, &[0, 1, 2, 3, 4, 5, 6], &[5, 6, 7, 8]);
        let p1 = common(n, &[0, 1], &[1, 2, 3, 4, 5, 6]);
        let vp = vinput(n);
        let plan = build(CaseLabel::Case31, 2, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert_eq!(plan.layer2.own_source.len(), 2);
        assert_eq!(plan.layer2.cross_source.len(), 3, "overflow = 5 - 2");
        assert_eq!(plan.layer2.target.len(), 2);
        assert!(plan.layer2.cross_target.is_empty());
        assert_eq!(plan.layer1.own_source.len(), 1);
        assert_eq!(plan.layer1.target.len(), 1);
        assert_eq!(
            plan.layer1.cross_target.len(),
            3,
            "first layer must absorb the second layer's overflow"
        );
        // Spec arithmetic: total repeats in the absorbing layer = own + overflow.
        assert_eq!(plan.layer1.target.len() + plan.layer1.cross_target.len(), 4);
    }

    #[test]
    fn case42_mirrors_the_overflow_to_the_first_layer() {
        // Backward: sources come from i2 \ i1. Second layer overflows.
        let n = 16;
        let p2 = common(n, &[5, 6, 7, 8], &[0, 1, 2, 3, 4, 5, 6]);
        let p1 = common(n, &[1, 2, 3, 4, 5, 6], &[0, 1]);
        let vp = vinput(n);
        let plan = build(CaseLabel::Case42, 2, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert_eq!(plan.direction, ChainDirection::Backward);
        assert_eq!(plan.layer2.own_source.len(), 2);
        assert_eq!(plan.layer2.cross_source.len(), 3);
        assert_eq!(plan.layer1.cross_target.len(), 3);
    }

    #[test]
    fn infeasible_absorption_names_the_inequality() {
        // Absorbing layer has capacity 1 but must hold 1 own + 3 crossed.
        let n = 16;
        let p2 = common(n, &[0, 1, 2, 3, 4, 5, 6], &[5, 6, 7, 8]);
        let p1 = common(n, &[0, 1], &[1, 2]);
        let vp = vinput(n);
        let err = build(CaseLabel::Case31, 2, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("repeat capacity"), "unexpected message: {msg}");
    }

    #[test]
    fn v_chain_needs_room_for_repeats() {
        let n = 8;
        let p1 = common(n, &[0], &[1]);
        let p2 = common(n, &[2], &[3]);
        // i2s = {0}, i2p = {4}, r2 = {1,2,3,7}: four chained values, two
        // repeat slots even after spilling into the private pool.
        let vp = pconf(&IndexSet::full(n), &set(n, &[0, 4]), &set(n, &[0, 5, 6]));
        let err = build(CaseLabel::Case1, 2, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap_err();
        assert!(matches!(err, Error::RateInfeasible(_)), "got {err}");
        assert!(err.to_string().contains("I_2s"), "message should name the inequality: {err}");
    }

    #[test]
    fn repeats_spill_into_the_private_pool_when_the_secret_pool_is_short() {
        let n = 8;
        let p1 = common(n, &[0], &[1]);
        let p2 = common(n, &[2], &[3]);
        // i2s = {0}, i2p = {4,5}, r2 = {1,2}: one repeat rides the secret
        // pool, the other spills into the private pool.
        let vp = pconf(&IndexSet::full(n), &set(n, &[0, 4, 5]), &set(n, &[0, 6]));
        let plan = build(CaseLabel::Case1, 2, 1.0, n, &p1, &p2, &vp, &ramp(n)).unwrap();
        assert_eq!(plan.v.chained, set(n, &[1, 2]));
        assert_eq!(
            plan.v.repeat,
            set(n, &[0, 4]),
            "repeat should take the secret slot then the best private slot"
        );
        assert!(plan.v.secret_fresh.is_empty(), "the secret pool is fully spent on repeats");
        assert_eq!(plan.v.private, set(n, &[5]), "private keeps what the spill left over");
    }

    #[test]
    fn zero_secrecy_freezes_the_chained_set() {
        let n = 8;
        let p1 = common(n, &[0], &[1]);
        let p2 = common(n, &[2], &[3]);
        // Same starved sets as the infeasibility test: with no secrecy
        // capacity the plan parks them on frozen symbols instead of failing.
        let vp = pconf(&IndexSet::full(n), &set(n, &[0, 4]), &set(n, &[0, 5, 6]));
        let plan =
            build_with(false, CaseLabel::Case1, 2, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert!(plan.v.chained.is_empty(), "nothing is chained without secrecy");
        assert!(plan.v.repeat.is_empty());
        assert!(plan.v.secret_fresh.is_empty());
        assert_eq!(plan.v.private, set(n, &[4]), "private capacity survives the freeze");
        // r2 = {1,2,3,7} and i2s = {0} both land on frozen alongside f2 = {5,6}.
        assert_eq!(plan.v.frozen, set(n, &[0, 1, 2, 3, 5, 6, 7]));
    }

    #[test]
    fn backoff_shrinks_sources_and_targets_together() {
        let n = 32;
        let i1: Vec<usize> = (0..10).collect();
        let i2: Vec<usize> = (6..16).collect();
        let p1 = common(n, &i1, &i2);
        let p2 = common(n, &[16, 17], &[16, 18]);
        let vp = vinput(n);
        let full = build(CaseLabel::Case1, 2, 1.0, n, &p1, &p2, &vp, &ramp(n)).unwrap();
        let half = build(CaseLabel::Case1, 2, 0.5, n, &p1, &p2, &vp, &ramp(n)).unwrap();
        assert_eq!(full.layer1.own_source.len(), 6);
        assert_eq!(half.layer1.own_source.len(), 3);
        assert_eq!(half.layer1.target.len(), 3, "targets track the backed-off source size");
        assert_eq!(half.layer1.core.len(), full.layer1.core.len() / 2);
        // Chained repair sets never shrink.
        assert_eq!(half.v.repeat.len(), full.v.repeat.len());
        assert_eq!(half.v.chained.len(), full.v.chained.len());
        // Dropped positions land in the frozen set, cover is preserved.
        assert!(half.layer1.frozen.len() > full.layer1.frozen.len());
    }

    #[test]
    fn subset_choices_prefer_low_scores_then_low_indices() {
        let n = 8;
        // avail = {0,1,2}, capacity = {3,4}: pick two sources by ramp score.
        let p1 = common(n, &[0, 1, 2], &[3, 4]);
        let p2 = common(n, &[5], &[5]);
        let vp = vinput(n);
        let plan = build(CaseLabel::Case1, 2, 1.0, n, &p1, &p2, &vp, &ramp(n)).unwrap();
        assert_eq!(plan.layer1.own_source, set(n, &[0, 1]));
        assert_eq!(plan.layer1.target, set(n, &[3, 4]));
        assert_eq!(plan.layer1.frozen, set(n, &[2, 5, 6, 7]), "unused source 2 freezes");
    }

    #[test]
    fn v_chain_wiring_and_frame_accounting() {
        let n = 8;
        let p1 = common(n, &[0], &[0]);
        let p2 = common(n, &[1], &[1]);
        let vp = vinput(n); // i2s = 4, i2p = 1, r2 = 1, f2 = 1, d2 = 1
        let plan = build(CaseLabel::Case1, 4, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert_eq!(plan.v.repeat.len(), 1);
        assert_eq!(plan.v.secret_fresh.len(), 3);
        assert_eq!(plan.confidential_per_frame(), 12);
        assert_eq!(plan.private_per_frame(), 4 + 1 + 3);
        assert_eq!(plan.seed_symbols(), 1);
        // m = 1 degenerates: no fresh sources, seed still fills the chain.
        let single = build(CaseLabel::Case1, 1, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert!(!single.source_is_fresh(0));
        assert!(!single.target_repeats(0));
        assert_eq!(single.private_per_frame(), 1 + 1);
        assert_eq!(single.seed_symbols(), 1);
    }

    #[test]
    fn schedule_flags_follow_the_direction() {
        let n = 8;
        let p1 = common(n, &[0, 1], &[1, 2]);
        let p2 = common(n, &[3], &[3]);
        let vp = vinput(n);
        let fwd = build(CaseLabel::Case1, 3, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert!(fwd.source_is_fresh(0) && fwd.source_is_fresh(1) && !fwd.source_is_fresh(2));
        assert!(!fwd.target_repeats(0) && fwd.target_repeats(1) && fwd.target_repeats(2));
        assert_eq!(fwd.repeat_origin(2), 1);
        let bwd = build(CaseLabel::Case2, 3, 1.0, n, &p1, &p2, &vp, &flat(n)).unwrap();
        assert!(!bwd.source_is_fresh(0) && bwd.source_is_fresh(1) && bwd.source_is_fresh(2));
        assert!(bwd.target_repeats(0) && bwd.target_repeats(1) && !bwd.target_repeats(2));
        assert_eq!(bwd.repeat_origin(0), 1);
    }

    #[test]
    fn text_round_trip_is_exact() {
        use crate::dist::{JointDist, Var};
        use crate::instance::ChannelModel;
        // Tiny instance, exact profiles at N = 4.
        let mut probs = vec![0.0; 16];
        for u in 0..2usize {
            for x1 in 0..2usize {
                probs[((u * 2 + u) * 2 + x1) * 2 + u] = 0.25;
            }
        }
        let design = JointDist::new(
            vec![Var::new("U", 2), Var::new("V", 2), Var::new("X1", 2), Var::new("X2", 2)],
            probs,
        )
        .unwrap();
        let mut ch = vec![0.0; 2 * 2 * 4 * 4];
        let flip = |p: f64, a: usize, b: usize| if a == b { 1.0 - p } else { p };
        for x1 in 0..2 {
            for x2 in 0..2 {
                for y1 in 0..4 {
                    for y2 in 0..4 {
                        ch[((x1 * 2 + x2) * 4 + y1) * 4 + y2] = flip(0.1, x1, y1 >> 1)
                            * flip(0.12, x2, y1 & 1)
                            * flip(0.03, x1, y2 >> 1)
                            * flip(0.04, x2, y2 & 1);
                    }
                }
            }
        }
        let inst =
            CiccInstance::new(design, ChannelModel::new(2, 2, 4, 4, ch).unwrap()).unwrap();
        let c = build_construction(&inst, 4, 0.2, EstimatorMode::Exact, 7).unwrap();
        let text = c.to_text();
        let back = Construction::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text, "serialization must be a fixed point");
        assert_eq!(back.layer1.part.i1, c.layer1.part.i1);
        assert_eq!(back.v.part.i2s, c.v.part.i2s);
        for ((_, a), (_, b)) in c.profiles.all().iter().zip(back.profiles.all().iter()) {
            assert_eq!(a.h, b.h, "profile values must survive the round trip exactly");
        }
    }
}
