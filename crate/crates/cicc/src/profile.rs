//! Entropy profiles: per-position conditional entropies of the transformed
//! vector, the quantities every index-set construction is read off from.
//!
//! For a source position distributed as `T` with side information `S`
//! (i.i.d. across the block), position `j` of `u = polar_transform(x)` has
//! conditional entropy `h_j = H(U_j | U^{j-1}, S^N)` in base-q units. Two
//! estimators are provided: an exact one that evolves the ensemble of
//! decoder posteriors level by level (exponential in the worst case, fine
//! for short blocks and small alphabets), and a Monte Carlo one that runs
//! one SC pass per sampled frame and averages the visited entropies.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::alphabet::{PrimeAlphabet, SymbolVec};
use crate::dist::{entropy_slice, JointDist};
use crate::rng::{derive_rng, purpose};
use crate::sc::sc_pass;
use crate::transform::polar_transform;
use crate::{Error, Result};

/// Per-position conditional entropies, in base-q units in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EntropyProfile {
    /// Block length.
    pub n: usize,
    /// Alphabet size of the profiled variable.
    pub q: u16,
    /// `h[j] = H(U_j | U^{j-1}, side)` normalized by `log q`.
    pub h: Vec<f64>,
    /// Monte Carlo standard error per position; `None` for exact profiles.
    pub std_err: Option<Vec<f64>>,
    /// Sample count behind a Monte Carlo profile; 0 for exact profiles.
    pub samples: usize,
}

impl EntropyProfile {
    /// Standard error at `j`, treating exact profiles as error-free.
    pub fn se(&self, j: usize) -> f64 {
        self.std_err.as_ref().map_or(0.0, |s| s[j])
    }
}

/// Default block-length ceiling for the exact evolution.
pub const EXACT_N_LIMIT: usize = 16;

/// Controls for the exact posterior-ensemble evolution.
#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Posterior coordinates within this distance merge into one element.
    pub merge_quantum: f64,
    /// Refuse rather than evolve an ensemble projected past this size.
    pub max_support: usize,
    /// Refuse block lengths beyond this.
    pub max_n: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { merge_quantum: 1e-12, max_support: 4_000_000, max_n: EXACT_N_LIMIT }
    }
}

type Ensemble = Vec<(f64, Vec<f64>)>;

/// Exact profile of `target` given `side` under `joint`, at block length `n`.
pub fn exact_entropy_profile(
    joint: &JointDist,
    target: &str,
    side: &[&str],
    n: usize,
    opts: &ProfileOptions,
) -> Result<EntropyProfile> {
    if !n.is_power_of_two() {
        return Err(Error::Structure(format!("block length {n} is not a power of two")));
    }
    if n > opts.max_n {
        return Err(Error::ExactRefused(format!(
            "exact mode handles blocks up to {}, got {n}; use monte_carlo_entropy_profile",
            opts.max_n
        )));
    }
    let q = joint.var_size(target)?;
    let mut chans = vec![merge(side_ensemble(joint, target, side)?, opts.merge_quantum)];
    for _ in 0..n.trailing_zeros() {
        let mut next: Vec<Ensemble> = Vec::with_capacity(chans.len() * 2);
        for e in &chans {
            let projected = e.len() * e.len() * q;
            if projected > opts.max_support {
                return Err(Error::ExactRefused(format!(
                    "posterior ensemble would grow to {projected} elements \
                     (cap {}); use the Monte Carlo profile",
                    opts.max_support
                )));
            }
            next.push(merge(minus_op(e, q), opts.merge_quantum));
            next.push(merge(plus_op(e, q), opts.merge_quantum));
        }
        chans = next;
    }
    let h = chans
        .iter()
        .map(|e| e.iter().map(|(w, p)| w * entropy_slice(p, q as f64)).sum())
        .collect();
    Ok(EntropyProfile { n, q: q as u16, h, std_err: None, samples: 0 })
}

/// Monte Carlo profile: `samples` frames, one SC pass each, commit the true
/// symbols and average the visited conditional entropies. Deterministic for a
/// given `seed` regardless of thread count.
pub fn monte_carlo_entropy_profile(
    joint: &JointDist,
    target: &str,
    side: &[&str],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<EntropyProfile> {
    if !n.is_power_of_two() {
        return Err(Error::Structure(format!("block length {n} is not a power of two")));
    }
    if samples < 2 {
        return Err(Error::Structure("at least 2 samples needed for a standard error".into()));
    }
    let q = joint.var_size(target)?;
    let alphabet = PrimeAlphabet::new(q as u16)?;
    let cond = joint.conditional(target, side)?;
    let target_idx = joint.var_index(target)?;
    let side_idx: Vec<usize> =
        side.iter().map(|v| joint.var_index(v)).collect::<Result<_>>()?;

    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_rng(seed, &[purpose::PROFILE, k as u64]);
            let mut leaves = vec![0.0f64; n * q];
            let mut x = Vec::with_capacity(n);
            let mut sv = Vec::with_capacity(side_idx.len());
            for i in 0..n {
                let a = joint.sample(&mut rng);
                sv.clear();
                sv.extend(side_idx.iter().map(|&ix| a[ix]));
                leaves[i * q..(i + 1) * q].copy_from_slice(cond.row(&sv));
                x.push(a[target_idx] as crate::alphabet::Symbol);
            }
            let truth = polar_transform(&SymbolVec::new(alphabet, x).expect("valid symbols"));
            let truth = truth.as_slice();
            let mut ent = vec![0.0f64; n];
            sc_pass(q, &leaves, &mut |j, d| {
                ent[j] = entropy_slice(d, q as f64);
                truth[j]
            })
            .expect("leaf buffer is well formed");
            ent
        })
        .collect();

    let mut sum = vec![0.0f64; n];
    let mut sumsq = vec![0.0f64; n];
    for ent in &per_sample {
        for j in 0..n {
            sum[j] += ent[j];
            sumsq[j] += ent[j] * ent[j];
        }
    }
    let m = samples as f64;
    let h: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_err = h
        .iter()
        .zip(&sumsq)
        .map(|(&mean, &sq)| {
            let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(EntropyProfile { n, q: q as u16, h, std_err: Some(std_err), samples })
}

/// Initial ensemble: one element per side outcome with positive mass.
fn side_ensemble(joint: &JointDist, target: &str, side: &[&str]) -> Result<Ensemble> {
    let mut keep: Vec<&str> = side.to_vec();
    keep.push(target);
    let m = joint.marginal(&keep)?;
    let q = joint.var_size(target)?;
    let cells = m.probs();
    let mut out = Vec::new();
    for row in cells.chunks(q) {
        let w: f64 = row.iter().sum();
        if w > 0.0 {
            out.push((w, row.iter().map(|&v| v / w).collect()));
        }
    }
    Ok(out)
}

/// Sum channel: both observations, posterior of `x0 + x1`.
fn minus_op(e: &Ensemble, q: usize) -> Ensemble {
    let mut out = Vec::with_capacity(e.len() * e.len());
    for (w0, p0) in e {
        for (w1, p1) in e {
            let mut p = vec![0.0f64; q];
            for (a, pa) in p.iter_mut().enumerate() {
                let mut s = 0.0;
                for (b, &pb) in p1.iter().enumerate() {
                    s += p0[(a + q - b) % q] * pb;
                }
                *pa = s;
            }
            out.push((w0 * w1, p));
        }
    }
    out
}

/// Residual channel: both observations plus the revealed sum, posterior of `x1`.
fn plus_op(e: &Ensemble, q: usize) -> Ensemble {
    let mut out = Vec::with_capacity(e.len() * e.len() * q);
    for (w0, p0) in e {
        for (w1, p1) in e {
            for a in 0..q {
                let mut p = vec![0.0f64; q];
                let mut norm = 0.0;
                for (b, pb) in p.iter_mut().enumerate() {
                    *pb = p0[(a + q - b) % q] * p1[b];
                    norm += *pb;
                }
                if norm <= 0.0 {
                    continue;
                }
                for pb in p.iter_mut() {
                    *pb /= norm;
                }
                out.push((w0 * w1 * norm, p));
            }
        }
    }
    out
}

/// Merges elements whose posteriors agree to within the quantum; the
/// representative is the weight-averaged posterior. Output order is
/// deterministic (lexicographic by posterior).
fn merge(elems: Ensemble, quantum: f64) -> Ensemble {
    let mut map: HashMap<Vec<i64>, (f64, Vec<f64>)> = HashMap::new();
    for (w, p) in elems {
        if w < 1e-300 {
            continue;
        }
        let key: Vec<i64> = p.iter().map(|&v| (v / quantum).round() as i64).collect();
        let entry = map.entry(key).or_insert_with(|| (0.0, vec![0.0; p.len()]));
        entry.0 += w;
        for (acc, v) in entry.1.iter_mut().zip(&p) {
            *acc += w * v;
        }
    }
    let mut out: Ensemble = map
        .into_values()
        .map(|(w, mut p)| {
            for v in p.iter_mut() {
                *v /= w;
            }
            (w, p)
        })
        .collect();
    out.sort_by(|a, b| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Var;

    /// Toy source: target `T` of size `q` correlated with side `S` of size
    /// `s`, filled from an LCG and normalized.
    fn toy_joint(q: usize, s: usize, seed: u64) -> JointDist {
        let mut state = seed;
        let mut probs = vec![0.0f64; q * s];
        for p in probs.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *p = ((state >> 33) as f64 / (1u64 << 31) as f64) + 0.02;
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        JointDist::new(vec![Var::new("T", q), Var::new("S", s)], probs).unwrap()
    }

    /// Brute-force profile by enumerating every (x block, side block) pair.
    fn brute_profile(joint: &JointDist, target: &str, side: &[&str], n: usize) -> Vec<f64> {
        let q = joint.var_size(target).unwrap();
        let alphabet = PrimeAlphabet::new(q as u16).unwrap();
        let mut keep: Vec<&str> = side.to_vec();
        keep.push(target);
        let m = joint.marginal(&keep).unwrap();
        let s: usize = side.iter().map(|v| joint.var_size(v).unwrap()).product();
        // p_ts[s_flat * q + t]
        let p_ts = m.probs();

        let u_cells = q.pow(n as u32);
        let s_cells = s.pow(n as u32);
        assert!(u_cells * s_cells <= 1 << 22, "oracle table too large");
        let mut table = vec![0.0f64; u_cells * s_cells];
        let mut x = vec![0usize; n];
        'outer_x: loop {
            let mut s_vec = vec![0usize; n];
            loop {
                let mut p = 1.0;
                for i in 0..n {
                    p *= p_ts[s_vec[i] * q + x[i]];
                }
                if p > 0.0 {
                    let xs: Vec<crate::alphabet::Symbol> =
                        x.iter().map(|&v| v as crate::alphabet::Symbol).collect();
                    let u = polar_transform(&SymbolVec::new(alphabet, xs).unwrap());
                    let mut u_key = 0usize;
                    for &sym in u.as_slice() {
                        u_key = u_key * q + sym as usize;
                    }
                    let mut s_key = 0usize;
                    for &sv in &s_vec {
                        s_key = s_key * s + sv;
                    }
                    table[s_key * u_cells + u_key] += p;
                }
                // odometer over the side block
                let mut i = 0;
                while i < n {
                    s_vec[i] += 1;
                    if s_vec[i] < s {
                        break;
                    }
                    s_vec[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
            // odometer over the x block
            let mut i = 0;
            while i < n {
                x[i] += 1;
                if x[i] < q {
                    break;
                }
                x[i] = 0;
                i += 1;
            }
            if i == n {
                break 'outer_x;
            }
        }

        (0..n)
            .map(|j| {
                let suffix = q.pow((n - 1 - j) as u32);
                let mut rows: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
                for (cell, &p) in table.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let s_key = cell / u_cells;
                    let u_key = cell % u_cells;
                    let prefix = u_key / (suffix * q);
                    let uj = (u_key / suffix) % q;
                    rows.entry((s_key, prefix)).or_insert_with(|| vec![0.0; q])[uj] += p;
                }
                let mut h = 0.0;
                for row in rows.values() {
                    let w: f64 = row.iter().sum();
                    let norm: Vec<f64> = row.iter().map(|&v| v / w).collect();
                    h += w * entropy_slice(&norm, q as f64);
                }
                h
            })
            .collect()
    }

    #[test]
    fn exact_profile_matches_brute_force() {
        for &(q, s, n) in &[(2usize, 2usize, 2usize), (2, 2, 4), (2, 2, 8), (3, 2, 4), (2, 3, 4)] {
            let joint = toy_joint(q, s, 40 + (q * 10 + s) as u64);
            let exact =
                exact_entropy_profile(&joint, "T", &["S"], n, &ProfileOptions::default()).unwrap();
            let brute = brute_profile(&joint, "T", &["S"], n);
            for j in 0..n {
                assert!(
                    (exact.h[j] - brute[j]).abs() < 1e-9,
                    "q={q} s={s} n={n} j={j}: exact={} brute={}",
                    exact.h[j],
                    brute[j]
                );
            }
        }
    }

    #[test]
    fn exact_profile_no_side_matches_brute_force() {
        let joint = toy_joint(3, 2, 77);
        let exact =
            exact_entropy_profile(&joint, "T", &[], 4, &ProfileOptions::default()).unwrap();
        let brute = brute_profile(&joint, "T", &[], 4);
        for j in 0..4 {
            assert!(
                (exact.h[j] - brute[j]).abs() < 1e-9,
                "j={j}: exact={} brute={}",
                exact.h[j],
                brute[j]
            );
        }
    }

    #[test]
    fn entropy_is_conserved_across_the_transform() {
        let joint = toy_joint(2, 2, 11);
        let n = 16;
        let exact =
            exact_entropy_profile(&joint, "T", &["S"], n, &ProfileOptions::default()).unwrap();
        let total: f64 = exact.h.iter().sum();
        let per_symbol = joint.entropy(&["T"], &["S"], 2.0).unwrap();
        assert!(
            (total - n as f64 * per_symbol).abs() < 1e-8,
            "sum of h = {total}, expected {}",
            n as f64 * per_symbol
        );
    }

    #[test]
    fn uniform_source_stays_uniform() {
        let joint = JointDist::new(
            vec![Var::new("T", 5)],
            vec![0.2; 5],
        )
        .unwrap();
        let exact =
            exact_entropy_profile(&joint, "T", &[], 8, &ProfileOptions::default()).unwrap();
        for (j, &h) in exact.h.iter().enumerate() {
            assert!((h - 1.0).abs() < 1e-12, "position {j} drifted from uniform: {h}");
        }
    }

    #[test]
    fn fully_observed_source_has_zero_entropy() {
        // S = T: the side information pins every position.
        let probs = vec![0.3, 0.0, 0.0, 0.7];
        let joint =
            JointDist::new(vec![Var::new("T", 2), Var::new("S", 2)], probs).unwrap();
        let exact =
            exact_entropy_profile(&joint, "T", &["S"], 8, &ProfileOptions::default()).unwrap();
        for &h in &exact.h {
            assert!(h < 1e-12, "entropy should vanish, got {h}");
        }
    }

    #[test]
    fn monte_carlo_tracks_exact_profile() {
        let joint = toy_joint(2, 2, 123);
        let n = 8;
        let exact =
            exact_entropy_profile(&joint, "T", &["S"], n, &ProfileOptions::default()).unwrap();
        let mc = monte_carlo_entropy_profile(&joint, "T", &["S"], n, 3000, 99).unwrap();
        for j in 0..n {
            let gap = (mc.h[j] - exact.h[j]).abs();
            let tol = 4.0 * mc.se(j) + 1e-6;
            assert!(
                gap <= tol,
                "position {j}: mc={} exact={} gap={gap} tol={tol}",
                mc.h[j],
                exact.h[j]
            );
        }
    }

    #[test]
    fn monte_carlo_is_thread_count_invariant() {
        let joint = toy_joint(2, 2, 5);
        let a = monte_carlo_entropy_profile(&joint, "T", &["S"], 8, 200, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool
            .install(|| monte_carlo_entropy_profile(&joint, "T", &["S"], 8, 200, 42))
            .unwrap();
        assert_eq!(a.h, b.h, "profiles must not depend on the worker count");
        assert_eq!(a.std_err, b.std_err);
    }
}
