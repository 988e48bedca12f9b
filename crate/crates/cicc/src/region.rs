//! Achievable-rate region for the two-transmitter scheme: the six bounds
//! evaluated at a design distribution, membership testing for rate tuples,
//! and the projection that drops the randomness coordinate.

use rayon::prelude::*;

use crate::dist::{JointDist, Var};
use crate::instance::{ChannelModel, CiccInstance};
use crate::{Error, Result};

/// A rate quadruple in bits per channel use: prefix randomness, common
/// message, private message, confidential message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTuple {
    pub rr: f64,
    pub r1: f64,
    pub r2p: f64,
    pub r2s: f64,
}

impl RateTuple {
    pub fn new(rr: f64, r1: f64, r2p: f64, r2s: f64) -> Result<Self> {
        for (name, v) in [("Rr", rr), ("R1", r1), ("R2p", r2p), ("R2s", r2s)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Structure(format!("rate {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(RateTuple { rr, r1, r2p, r2s })
    }
}

/// The six right-hand sides, in bits per channel use.
#[derive(Debug, Clone, Copy)]
pub struct RegionBounds {
    /// Common-message cap: min of the joint first/second-layer rate at each receiver.
    pub b1: f64,
    /// Cap on the private-plus-confidential sum.
    pub b2: f64,
    /// Cap on the total message sum.
    pub b3: f64,
    /// Confidential-message cap; negative means no positive secrecy rate.
    pub b4: f64,
    /// Floor on private message plus prefix randomness.
    pub b5: f64,
    /// Floor on prefix randomness alone.
    pub b6: f64,
}

/// Evaluates all six bounds at the instance's design distribution.
pub fn evaluate_region(instance: &CiccInstance) -> Result<RegionBounds> {
    let joint = instance.full_joint()?;
    let i_ux1_y1 = joint.mutual_information(&["U", "X1"], &["Y1"], &[], 2.0)?;
    let i_ux1_y2 = joint.mutual_information(&["U", "X1"], &["Y2"], &[], 2.0)?;
    let i_uv_y2 = joint.mutual_information(&["U", "V"], &["Y2"], &["X1"], 2.0)?;
    let i_v_y2 = joint.mutual_information(&["V"], &["Y2"], &["U", "X1"], 2.0)?;
    let i_v_y1 = joint.mutual_information(&["V"], &["Y1"], &["U", "X1"], 2.0)?;
    let i_x2_y1 = joint.mutual_information(&["X2"], &["Y1"], &["U", "X1"], 2.0)?;
    let i_x2_y1_v = joint.mutual_information(&["X2"], &["Y1"], &["U", "V", "X1"], 2.0)?;
    let b1 = i_ux1_y1.min(i_ux1_y2);
    let bounds = RegionBounds {
        b1,
        b2: i_uv_y2,
        b3: i_v_y2 + b1,
        b4: i_v_y2 - i_v_y1,
        b5: i_x2_y1,
        b6: i_x2_y1_v,
    };
    debug_assert!(
        bounds.b6 <= bounds.b5 + 1e-9,
        "extra conditioning cannot raise the randomness floor: b5={} b6={}",
        bounds.b5,
        bounds.b6
    );
    Ok(bounds)
}

/// One failed inequality: which bound, the achieved value, the limit.
#[derive(Debug, Clone)]
pub struct Violation {
    pub inequality: String,
    pub value: f64,
    pub limit: f64,
}

/// Checks a tuple against the bounds; empty result means member. The
/// confidential comparison clamps a negative cap to zero.
pub fn membership(t: &RateTuple, b: &RegionBounds) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check_upper = |name: &str, value: f64, limit: f64| {
        if value > limit + 1e-12 {
            out.push(Violation { inequality: name.to_string(), value, limit });
        }
    };
    check_upper("R1 <= b1", t.r1, b.b1);
    check_upper("R2p + R2s <= b2", t.r2p + t.r2s, b.b2);
    check_upper("R1 + R2p + R2s <= b3", t.r1 + t.r2p + t.r2s, b.b3);
    check_upper("R2s <= max(b4, 0)", t.r2s, b.b4.max(0.0));
    if t.r2p + t.rr < b.b5 - 1e-12 {
        out.push(Violation {
            inequality: "R2p + Rr >= b5".to_string(),
            value: t.r2p + t.rr,
            limit: b.b5,
        });
    }
    if t.rr < b.b6 - 1e-12 {
        out.push(Violation { inequality: "Rr >= b6".to_string(), value: t.rr, limit: b.b6 });
    }
    out
}

/// The message-only region in `(R1, R2, R2s)` with `R2 = R2p + R2s`: the same
/// inequalities with the randomness coordinate dropped.
#[derive(Debug, Clone, Copy)]
pub struct MessageRegion {
    /// R1 cap.
    pub r1_max: f64,
    /// R2 cap.
    pub r2_max: f64,
    /// R1 + R2 cap.
    pub sum_max: f64,
    /// R2s cap, clamped at zero.
    pub r2s_max: f64,
}

/// Drops the randomness coordinates from the bounds.
pub fn theorem1_projection(b: &RegionBounds) -> MessageRegion {
    MessageRegion { r1_max: b.b1, r2_max: b.b2, sum_max: b.b3, r2s_max: b.b4.max(0.0) }
}

impl MessageRegion {
    pub fn contains(&self, r1: f64, r2: f64, r2s: f64) -> bool {
        r1 <= self.r1_max + 1e-12
            && r2 <= self.r2_max + 1e-12
            && r1 + r2 <= self.sum_max + 1e-12
            && r2s <= self.r2s_max + 1e-12
            && r2s <= r2 + 1e-12
    }
}

/// One sweep point: a design distribution with its bounds.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Parameters (p_uv, p_x2) of the scanned design family.
    pub params: (f64, f64),
    pub bounds: RegionBounds,
}

/// Heuristic helper, binary designs only: scans a grid over a two-parameter
/// design family (V = U + noise(p_uv), X2 = V + noise(p_x2), U and X1 uniform)
/// and reports the bounds at each point. This is a coarse exploration aid,
/// not an optimizer; the region over all designs is not computed.
pub fn sweep_binary_designs(
    channel: &ChannelModel,
    grid: usize,
) -> Result<Vec<SweepPoint>> {
    if channel.x1_size() != 2 || channel.x2_size() != 2 {
        return Err(Error::Structure(
            "design sweep only covers binary input alphabets".into(),
        ));
    }
    if grid < 2 {
        return Err(Error::Structure("grid needs at least 2 points per axis".into()));
    }
    let steps: Vec<f64> = (0..grid).map(|i| 0.5 * i as f64 / (grid - 1) as f64).collect();
    let pairs: Vec<(f64, f64)> = steps
        .iter()
        .flat_map(|&a| steps.iter().map(move |&b| (a, b)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(p_uv, p_x2)| {
            let design = binary_chain_design(p_uv, p_x2)?;
            let inst = CiccInstance::new(design, channel.clone())?;
            Ok(SweepPoint { params: (p_uv, p_x2), bounds: evaluate_region(&inst)? })
        })
        .collect()
}

/// U, X1 uniform independent; V = U xor Ber(p_uv); X2 = V xor Ber(p_x2).
pub fn binary_chain_design(p_uv: f64, p_x2: f64) -> Result<JointDist> {
    let mut probs = vec![0.0f64; 16];
    for u in 0..2usize {
        for v in 0..2usize {
            for x1 in 0..2usize {
                for x2 in 0..2usize {
                    let pv = if v == u { 1.0 - p_uv } else { p_uv };
                    let px2 = if x2 == v { 1.0 - p_x2 } else { p_x2 };
                    probs[((u * 2 + v) * 2 + x1) * 2 + x2] = 0.25 * pv * px2;
                }
            }
        }
    }
    JointDist::new(
        vec![Var::new("U", 2), Var::new("V", 2), Var::new("X1", 2), Var::new("X2", 2)],
        probs,
    )
}
