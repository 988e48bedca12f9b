//! Bundled instances, written in the plain-text grammar of [`crate::parse`].
//!
//! Every fixture is generated, parsed, and validated through the same
//! pipeline user files go through, so the texts here are the single source
//! of truth for the test tiers and for the files the command-line tool
//! ships.
//!
//! The two-component family sends each receiver an independent noisy look at
//! `X1` and at `X2` (four flip rates), with `V = U + noise` so the second
//! common layer carries real content; picking which receiver gets the
//! cleaner look at which component drives the classifier into every chaining
//! case. The secret-only family pins `U` and `X1` to constants and sends a
//! confidential `V` through unequal binary symmetric looks.

use crate::instance::CiccInstance;
use crate::parse::parse_instance;
use crate::{Error, Result};

/// Names of all bundled fixtures, in a stable order.
pub const NAMES: [&str; 14] = [
    "bsc-pair",
    "bsc-clean",
    "case2",
    "case3-1",
    "case3-2",
    "case4-1",
    "case4-2",
    "identity",
    "near-degraded",
    "skewed-secret",
    "wiretap",
    "y1-equals-y2",
    "constant-y1",
    "prefix-noise",
];

/// The grammar text of one bundled fixture.
pub fn text(name: &str) -> Option<String> {
    let two = |title: &str, a: f64, b: f64, c: f64, d: f64| {
        Some(two_component(title, 0.11, 0.0, a, b, c, d))
    };
    match name {
        // Receiver 2 gets the cleaner look at both components.
        "bsc-pair" => two("receiver 2 cleaner on both components", 0.12, 0.12, 0.04, 0.04),
        // Mild noise everywhere, so moderate blocklengths already sit close
        // to the information limits.
        "bsc-clean" => two("mild noise, receiver 1 ahead on both components", 0.01, 0.01, 0.05, 0.05),
        // Receiver 1 gets the cleaner look at both components.
        "case2" => two("receiver 1 cleaner on both components", 0.04, 0.01, 0.12, 0.05),
        // Split strengths; the joint rate binds at receiver 1.
        "case3-1" => two("split strengths, joint bound at receiver 1", 0.25, 0.01, 0.03, 0.05),
        // Split strengths the same way; the joint rate binds at receiver 2.
        "case3-2" => two("split strengths, joint bound at receiver 2", 0.06, 0.01, 0.05, 0.05),
        // Split the other way; joint bound at receiver 1.
        "case4-1" => two("mirrored split, joint bound at receiver 1", 0.03, 0.25, 0.08, 0.02),
        // Split the other way; joint bound at receiver 2.
        "case4-2" => two("mirrored split, joint bound at receiver 2", 0.02, 0.10, 0.28, 0.02),
        "identity" => Some(identity()),
        "near-degraded" => Some(secret_only(
            "confidential payload behind a much noisier eavesdropper look",
            0.5,
            0.4,
            0.05,
        )),
        "skewed-secret" => Some(secret_only(
            "biased confidential source, so pinned positions carry real entropy deficits",
            0.65,
            0.4,
            0.05,
        )),
        "wiretap" => Some(wiretap()),
        "y1-equals-y2" => Some(y1_equals_y2()),
        "constant-y1" => Some(constant_y1()),
        "prefix-noise" => Some(two_component(
            "channel-prefix randomness: X2 adds its own noise on top of V",
            0.11,
            0.06,
            0.12,
            0.12,
            0.04,
            0.04,
        )),
        _ => None,
    }
}

/// Parses one bundled fixture by name.
pub fn instance(name: &str) -> Result<CiccInstance> {
    let t = text(name).ok_or_else(|| {
        Error::Structure(format!("no bundled fixture named '{name}'; known fixtures: {NAMES:?}"))
    })?;
    parse_instance(&t)
}

fn bsc(x: usize, y: usize, flip: f64) -> f64 {
    if x == y {
        1.0 - flip
    } else {
        flip
    }
}

fn channel_block(
    x1s: usize,
    x2s: usize,
    y1s: usize,
    y2s: usize,
    p: impl Fn(usize, usize, usize, usize) -> f64,
) -> String {
    let mut out = String::from("table Y1 Y2 | X1 X2\n");
    for x1 in 0..x1s {
        for x2 in 0..x2s {
            let row: Vec<String> = (0..y1s)
                .flat_map(|y1| (0..y2s).map(move |y2| (y1, y2)))
                .map(|(y1, y2)| format!("{}", p(x1, x2, y1, y2)))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Uniform binary U and X1, `V = U` flipped with probability `rho`,
/// `X2 = V` flipped with probability `gamma`; receiver k observes
/// `(X1, X2)` through independent binary symmetric components.
fn two_component(title: &str, rho: f64, gamma: f64, a: f64, b: f64, c: f64, d: f64) -> String {
    let mut out = format!(
        "# {title}\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 4\nalphabet Y2 4\n\n\
         table U\n0.5 0.5\n\n\
         table X1 | U\n0.5 0.5\n0.5 0.5\n\n\
         table V | U\n{} {}\n{} {}\n\n\
         table X2 | V\n{} {}\n{} {}\n\n",
        1.0 - rho,
        rho,
        rho,
        1.0 - rho,
        1.0 - gamma,
        gamma,
        gamma,
        1.0 - gamma,
    );
    out.push_str(&channel_block(2, 2, 4, 4, |x1, x2, y1, y2| {
        bsc(x1, y1 / 2, a) * bsc(x2, y1 % 2, b) * bsc(x1, y2 / 2, c) * bsc(x2, y2 % 2, d)
    }));
    out
}

/// Constant U and X1; `V` is an independent biased bit, `X2 = V`; receiver k
/// sees `X2` through a binary symmetric channel with flip rate `e_k`.
fn secret_only(title: &str, v0: f64, e1: f64, e2: f64) -> String {
    let mut out = format!(
        "# {title}\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 2\nalphabet Y2 2\n\n\
         table U\n1 0\n\n\
         table X1 | U\n1 0\n1 0\n\n\
         table V\n{} {}\n\n\
         table X2 | V\n1 0\n0 1\n\n",
        v0,
        1.0 - v0,
    );
    out.push_str(&channel_block(2, 2, 2, 2, |_x1, x2, y1, y2| {
        bsc(x2, y1, e1) * bsc(x2, y2, e2)
    }));
    out
}

/// Both receivers see `(X1, X2)` losslessly; `V = U` so every carried stream
/// decodes without error.
fn identity() -> String {
    let mut out = String::from(
        "# lossless pair: both receivers read the inputs directly\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 4\nalphabet Y2 4\n\n\
         table U\n0.5 0.5\n\n\
         table X1 | U\n0.5 0.5\n0.5 0.5\n\n\
         table V | U\n1 0\n0 1\n\n\
         table X2 | V\n1 0\n0 1\n\n",
    );
    out.push_str(&channel_block(2, 2, 4, 4, |x1, x2, y1, y2| {
        if y1 == x1 * 2 + x2 && y2 == y1 {
            1.0
        } else {
            0.0
        }
    }));
    out
}

/// Receiver 1 sees only `X1`; receiver 2 sees both inputs losslessly.
fn wiretap() -> String {
    let mut out = String::from(
        "# receiver 1 never observes the confidential carrier\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 2\nalphabet Y2 4\n\n\
         table U\n1 0\n\n\
         table X1 | U\n0.5 0.5\n0.5 0.5\n\n\
         table V\n0.5 0.5\n\n\
         table X2 | V\n1 0\n0 1\n\n",
    );
    out.push_str(&channel_block(2, 2, 2, 4, |x1, x2, y1, y2| {
        if y1 == x1 && y2 == x1 * 2 + x2 {
            1.0
        } else {
            0.0
        }
    }));
    out
}

/// Both receivers share one observation symbol, noisy but identical.
fn y1_equals_y2() -> String {
    let mut out = String::from(
        "# the two receivers read the very same noisy symbol\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 4\nalphabet Y2 4\n\n\
         table U\n0.5 0.5\n\n\
         table X1 | U\n0.5 0.5\n0.5 0.5\n\n\
         table V | U\n0.89 0.11\n0.11 0.89\n\n\
         table X2 | V\n1 0\n0 1\n\n",
    );
    out.push_str(&channel_block(2, 2, 4, 4, |x1, x2, y1, y2| {
        if y2 == y1 {
            bsc(x1, y1 / 2, 0.08) * bsc(x2, y1 % 2, 0.08)
        } else {
            0.0
        }
    }));
    out
}

/// Receiver 1 learns nothing at all: its alphabet has a single symbol.
fn constant_y1() -> String {
    let mut out = String::from(
        "# receiver 1 is blind; every bound through Y1 collapses\n\
         alphabet U 2\nalphabet V 2\nalphabet X1 2\nalphabet X2 2\n\
         alphabet Y1 1\nalphabet Y2 4\n\n\
         table U\n0.5 0.5\n\n\
         table X1 | U\n0.5 0.5\n0.5 0.5\n\n\
         table V | U\n0.89 0.11\n0.11 0.89\n\n\
         table X2 | V\n1 0\n0 1\n\n",
    );
    out.push_str(&channel_block(2, 2, 1, 4, |x1, x2, _y1, y2| {
        bsc(x1, y2 / 2, 0.04) * bsc(x2, y2 % 2, 0.04)
    }));
    out
}
