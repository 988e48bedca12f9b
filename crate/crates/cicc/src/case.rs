//! Chaining-case classification: which receiver is stronger on which common
//! layer decides how message content flows between blocks of a frame.

use std::fmt;

use crate::instance::CiccInstance;
use crate::Result;

/// Mutual-information ties below this are treated as equalities.
pub const CASE_TIE_TOLERANCE: f64 = 1e-9;

/// The six wiring patterns. Mixed-layer cases carry a sub-label picking which
/// receiver bounds the common rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    /// Receiver 2 at least as strong on both common layers.
    Case1,
    /// Receiver 1 at least as strong on both common layers.
    Case2,
    /// Receiver 2 stronger on the first layer, receiver 1 on the second;
    /// joint rate bounded at receiver 1.
    Case31,
    /// As 3-1 but the joint rate is bounded at receiver 2.
    Case32,
    /// Receiver 1 stronger on the first layer, receiver 2 on the second;
    /// joint rate bounded at receiver 1.
    Case41,
    /// As 4-1 but the joint rate is bounded at receiver 2.
    Case42,
}

impl CaseLabel {
    /// True when message content flows from earlier to later blocks
    /// (receiver 1 decodes each block directly, receiver 2 in reverse gets
    /// repeats); false for the mirrored direction.
    pub fn forward(self) -> bool {
        matches!(self, CaseLabel::Case1 | CaseLabel::Case31 | CaseLabel::Case41)
    }

    /// True for the mixed cases that need one layer's overflow carried by the
    /// other transmitter's layer.
    pub fn cross_chained(self) -> bool {
        !matches!(self, CaseLabel::Case1 | CaseLabel::Case2)
    }

    pub fn parse(s: &str) -> Option<CaseLabel> {
        match s {
            "1" => Some(CaseLabel::Case1),
            "2" => Some(CaseLabel::Case2),
            "3-1" => Some(CaseLabel::Case31),
            "3-2" => Some(CaseLabel::Case32),
            "4-1" => Some(CaseLabel::Case41),
            "4-2" => Some(CaseLabel::Case42),
            _ => None,
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::Case1 => "1",
            CaseLabel::Case2 => "2",
            CaseLabel::Case31 => "3-1",
            CaseLabel::Case32 => "3-2",
            CaseLabel::Case41 => "4-1",
            CaseLabel::Case42 => "4-2",
        };
        f.write_str(s)
    }
}

/// The classification together with the mutual informations (bits) it was
/// decided from.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub label: CaseLabel,
    /// I(X1; Y1), I(X1; Y2).
    pub layer1: (f64, f64),
    /// I(U; Y1 | X1), I(U; Y2 | X1).
    pub layer2: (f64, f64),
    /// I(U, X1; Y1), I(U, X1; Y2).
    pub joint: (f64, f64),
}

/// Compares the per-layer mutual informations toward each receiver and picks
/// the chaining case. Ties resolve toward the plain (non-crossed) cases.
pub fn classify_case(instance: &CiccInstance) -> Result<CaseReport> {
    let joint = instance.full_joint()?;
    let l1_y1 = joint.mutual_information(&["X1"], &["Y1"], &[], 2.0)?;
    let l1_y2 = joint.mutual_information(&["X1"], &["Y2"], &[], 2.0)?;
    let l2_y1 = joint.mutual_information(&["U"], &["Y1"], &["X1"], 2.0)?;
    let l2_y2 = joint.mutual_information(&["U"], &["Y2"], &["X1"], 2.0)?;
    let j_y1 = joint.mutual_information(&["U", "X1"], &["Y1"], &[], 2.0)?;
    let j_y2 = joint.mutual_information(&["U", "X1"], &["Y2"], &[], 2.0)?;

    let d1 = l1_y1 - l1_y2;
    let d2 = l2_y1 - l2_y2;
    let tol = CASE_TIE_TOLERANCE;
    let label = if d1 <= tol && d2 <= tol {
        CaseLabel::Case1
    } else if d1 >= -tol && d2 >= -tol {
        CaseLabel::Case2
    } else if d1 < 0.0 {
        // receiver 2 stronger on layer 1, receiver 1 stronger on layer 2
        if j_y1 <= j_y2 {
            CaseLabel::Case31
        } else {
            CaseLabel::Case32
        }
    } else if j_y1 <= j_y2 {
        CaseLabel::Case41
    } else {
        CaseLabel::Case42
    };
    Ok(CaseReport {
        label,
        layer1: (l1_y1, l1_y2),
        layer2: (l2_y1, l2_y2),
        joint: (j_y1, j_y2),
    })
}
