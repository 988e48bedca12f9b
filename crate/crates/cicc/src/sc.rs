//! The successive-cancellation recursion over the prime-alphabet kernel.
//!
//! Let `u = polar_transform(x)` where the positions of `x` are independent
//! given per-position side information, each with a known posterior over Z_q.
//! One pass walks `u` in natural order and hands the caller the exact
//! conditional distribution `P(u_j | side, u_0..u_{j-1})` at every index; the
//! caller commits a symbol (a pinned value, an argmax decision, or a sample)
//! and the recursion conditions everything downstream on it.
//!
//! The same pass therefore serves encoding, decoding, and entropy estimation.
//! For tiny `N` there is also an exact enumeration of the full induced
//! distribution over `u` under per-position filling rules, used by the
//! leakage oracle and the induced-distribution tests.
//!
//! Recursion shape: with pairs `(x_{2k}, x_{2k+1})`, the first half of `u` is
//! the transform of the pairwise sums and the second half the transform of the
//! odd members, so the "minus" branch convolves pair posteriors and the
//! "plus" branch conditions on the committed sums.

use crate::alphabet::Symbol;
use crate::{Error, Result};

/// Below this mass the plus-branch posterior is treated as contradictory and
/// replaced by uniform (a lost decoder keeps deterministic behavior).
const MIN_NORM: f64 = 1e-300;

/// Runs one SC pass. `leaves` holds `n` posteriors of `q` entries each,
/// flattened; `visit(j, dist)` sees natural-order index `j` with the exact
/// conditional distribution and returns the symbol to commit. Returns the
/// committed `u` and the matching `x = polar_inverse(u)`.
pub fn sc_pass<F>(q: usize, leaves: &[f64], visit: &mut F) -> Result<(Vec<Symbol>, Vec<Symbol>)>
where
    F: FnMut(usize, &[f64]) -> Symbol,
{
    if q < 2 || leaves.is_empty() || leaves.len() % q != 0 {
        return Err(Error::Structure("leaf buffer shape mismatch".into()));
    }
    let n = leaves.len() / q;
    if !n.is_power_of_two() {
        return Err(Error::Structure(format!("{n} positions is not a power of two")));
    }
    let mut u = vec![0 as Symbol; n];
    let mut x = vec![0 as Symbol; n];
    rec(q, leaves, 0, visit, &mut u, &mut x);
    Ok((u, x))
}

fn rec<F>(q: usize, leaves: &[f64], base: usize, visit: &mut F, u: &mut [Symbol], x: &mut [Symbol])
where
    F: FnMut(usize, &[f64]) -> Symbol,
{
    let n = leaves.len() / q;
    if n == 1 {
        let s = visit(base, &leaves[..q]);
        debug_assert!((s as usize) < q);
        u[0] = s;
        x[0] = s;
        return;
    }
    let h = n / 2;
    let mut child = vec![0.0f64; h * q];

    // Minus branch: posterior of each pairwise sum a_k = x_{2k} + x_{2k+1}.
    for k in 0..h {
        let p0 = &leaves[2 * k * q..(2 * k + 1) * q];
        let p1 = &leaves[(2 * k + 1) * q..(2 * k + 2) * q];
        let out = &mut child[k * q..(k + 1) * q];
        for (a, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (b, &pb) in p1.iter().enumerate() {
                s += p0[(a + q - b) % q] * pb;
            }
            *o = s;
        }
    }
    {
        let (u_l, _) = u.split_at_mut(h);
        let (x_l, _) = x.split_at_mut(h);
        rec(q, &child, base, visit, u_l, x_l);
    }

    // Plus branch: condition each pair on its committed sum w_k = x[k].
    for k in 0..h {
        let w = x[k] as usize;
        let p0 = &leaves[2 * k * q..(2 * k + 1) * q];
        let p1 = &leaves[(2 * k + 1) * q..(2 * k + 2) * q];
        let out = &mut child[k * q..(k + 1) * q];
        let mut norm = 0.0;
        for (b, o) in out.iter_mut().enumerate() {
            *o = p0[(w + q - b) % q] * p1[b];
            norm += *o;
        }
        if norm > MIN_NORM {
            for o in out.iter_mut() {
                *o /= norm;
            }
        } else {
            for o in out.iter_mut() {
                *o = 1.0 / q as f64;
            }
        }
    }
    {
        let (_, u_r) = u.split_at_mut(h);
        let (_, x_r) = x.split_at_mut(h);
        rec(q, &child, base + h, visit, u_r, x_r);
    }

    // Stitch committed halves back into leaf order:
    // x_{2k} = w_k - v_k, x_{2k+1} = v_k.
    let mut tmp = vec![0 as Symbol; n];
    for k in 0..h {
        let w = x[k] as usize;
        let v = x[h + k] as usize;
        tmp[2 * k] = ((w + q - v) % q) as Symbol;
        tmp[2 * k + 1] = v as Symbol;
    }
    x.copy_from_slice(&tmp);
}

/// Argmax with ties broken toward the smaller symbol.
pub fn argmax_symbol(dist: &[f64]) -> Symbol {
    let mut best = 0usize;
    for (i, &p) in dist.iter().enumerate().skip(1) {
        if p > dist[best] {
            best = i;
        }
    }
    best as Symbol
}

/// How a position is filled when enumerating the induced distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosRule {
    /// Pinned to a fixed symbol (message, frozen, repeat, seed...).
    Pinned(Symbol),
    /// Uniform over Z_q, marginalized (fresh uniform content).
    Uniform,
    /// Sampled from the true SC conditional (a random-map position).
    Sampled,
}

/// Exactly enumerates the induced distribution over `u` when each position is
/// filled per `rules`, given the per-position leaf posteriors. Returns a dense
/// table of `q^n` entries indexed by `sum_j u_j q^{n-1-j}`. Exponential in
/// `n`: guarded to tables of at most 2^22 entries.
pub fn induced_u_dist(q: usize, leaves: &[f64], rules: &[PosRule]) -> Result<Vec<f64>> {
    let n = leaves.len() / q;
    if rules.len() != n {
        return Err(Error::Structure("one filling rule required per position".into()));
    }
    if !n.is_power_of_two() {
        return Err(Error::Structure(format!("{n} positions is not a power of two")));
    }
    let cells = (q as f64).powi(n as i32);
    if cells > (1u64 << 22) as f64 {
        return Err(Error::TooLarge(format!(
            "induced table would need {cells:.0} cells"
        )));
    }
    let mut table = vec![0.0f64; cells as usize];
    for path in enum_rec(q, leaves, rules) {
        table[path.key] += path.p;
    }
    Ok(table)
}

struct Path {
    key: usize,       // local u prefix as a base-q integer
    x: Vec<Symbol>,   // committed x for this subtree
    p: f64,
}

fn enum_rec(q: usize, leaves: &[f64], rules: &[PosRule]) -> Vec<Path> {
    let n = leaves.len() / q;
    if n == 1 {
        let d = &leaves[..q];
        let mut out = Vec::with_capacity(q);
        for s in 0..q {
            let p = match rules[0] {
                PosRule::Pinned(v) => {
                    if v as usize == s {
                        1.0
                    } else {
                        0.0
                    }
                }
                PosRule::Uniform => 1.0 / q as f64,
                PosRule::Sampled => d[s],
            };
            if p > 0.0 {
                out.push(Path { key: s, x: vec![s as Symbol], p });
            }
        }
        return out;
    }
    let h = n / 2;
    let mut minus = vec![0.0f64; h * q];
    for k in 0..h {
        let p0 = &leaves[2 * k * q..(2 * k + 1) * q];
        let p1 = &leaves[(2 * k + 1) * q..(2 * k + 2) * q];
        for a in 0..q {
            let mut s = 0.0;
            for (b, &pb) in p1.iter().enumerate() {
                s += p0[(a + q - b) % q] * pb;
            }
            minus[k * q + a] = s;
        }
    }
    let lefts = enum_rec(q, &minus, &rules[..h]);
    let scale = (q as f64).powi(h as i32) as usize;
    let mut out = Vec::new();
    let mut plus = vec![0.0f64; h * q];
    for left in &lefts {
        for k in 0..h {
            let w = left.x[k] as usize;
            let p0 = &leaves[2 * k * q..(2 * k + 1) * q];
            let p1 = &leaves[(2 * k + 1) * q..(2 * k + 2) * q];
            let mut norm = 0.0;
            for b in 0..q {
                let v = p0[(w + q - b) % q] * p1[b];
                plus[k * q + b] = v;
                norm += v;
            }
            if norm > MIN_NORM {
                for b in 0..q {
                    plus[k * q + b] /= norm;
                }
            } else {
                for b in 0..q {
                    plus[k * q + b] = 1.0 / q as f64;
                }
            }
        }
        for right in enum_rec(q, &plus, &rules[h..]) {
            let mut x = Vec::with_capacity(n);
            for k in 0..h {
                let w = left.x[k] as usize;
                let v = right.x[k] as usize;
                x.push(((w + q - v) % q) as Symbol);
                x.push(v as Symbol);
            }
            out.push(Path {
                key: left.key * scale + right.key,
                x,
                p: left.p * right.p,
            });
        }
    }
    out
}
