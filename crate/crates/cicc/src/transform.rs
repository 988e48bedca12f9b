//! The prime-alphabet polar transform pair.
//!
//! `u = polar_transform(x)` multiplies the row vector `x` by `B_N F^{ic n}`
//! where `F = [[1,0],[1,1]]`, `N = 2^n`, and `B_N` is the bit-reversal
//! permutation. Bit reversal is applied as a pre-permutation so that the
//! successive-cancellation recursion in [`crate::sc`] visits `u` in natural
//! order. Both directions run in `O(N log N)` butterflies; the inverse applies
//! the per-axis kernel inverse `[[1,0],[q-1,1]]` and undoes the permutation.

use crate::alphabet::{PrimeAlphabet, Symbol, SymbolVec};
use crate::{Error, Result};

/// The bit-reversal permutation on `2^n` indices: entry `i` holds the index
/// whose binary expansion is that of `i` reversed over `n` bits.
pub fn bit_reversal_permutation(n: u32) -> Vec<usize> {
    let len = 1usize << n;
    (0..len).map(|i| reverse_bits(i, n)).collect()
}

#[inline]
fn reverse_bits(i: usize, n: u32) -> usize {
    let mut r = 0usize;
    for b in 0..n {
        r |= ((i >> b) & 1) << (n - 1 - b);
    }
    r
}

fn check_pow2(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Structure(format!(
            "transform length {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros())
}

fn bitrev_permute_in_place(data: &mut [Symbol], n: u32) {
    for i in 0..data.len() {
        let j = reverse_bits(i, n);
        if j > i {
            data.swap(i, j);
        }
    }
}

/// In-place forward transform on a raw slice.
pub fn polar_transform_in_place(alphabet: PrimeAlphabet, data: &mut [Symbol]) -> Result<()> {
    let n = check_pow2(data.len())?;
    bitrev_permute_in_place(data, n);
    let len = data.len();
    let mut h = 1usize;
    while h < len {
        for j in 0..len {
            if j & h == 0 {
                data[j] = alphabet.add(data[j], data[j + h]);
            }
        }
        h <<= 1;
    }
    Ok(())
}

/// In-place inverse transform on a raw slice.
pub fn polar_inverse_in_place(alphabet: PrimeAlphabet, data: &mut [Symbol]) -> Result<()> {
    let n = check_pow2(data.len())?;
    let len = data.len();
    let mut h = len >> 1;
    while h >= 1 {
        for j in 0..len {
            if j & h == 0 {
                data[j] = alphabet.sub(data[j], data[j + h]);
            }
        }
        h >>= 1;
    }
    bitrev_permute_in_place(data, n);
    Ok(())
}

/// `u = x * B_N F^{tensor n}` over the sequence's alphabet.
pub fn polar_transform(x: &SymbolVec) -> SymbolVec {
    let alphabet = x.alphabet();
    let mut data = x.as_slice().to_vec();
    polar_transform_in_place(alphabet, &mut data).expect("SymbolVec length is a power of two");
    SymbolVec::new(alphabet, data).expect("transform preserves shape")
}

/// Recovers `x` from `u = polar_transform(x)`.
pub fn polar_inverse(u: &SymbolVec) -> SymbolVec {
    let alphabet = u.alphabet();
    let mut data = u.as_slice().to_vec();
    polar_inverse_in_place(alphabet, &mut data).expect("SymbolVec length is a power of two");
    SymbolVec::new(alphabet, data).expect("transform preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(q: u16, data: Vec<Symbol>) -> SymbolVec {
        SymbolVec::new(PrimeAlphabet::new(q).unwrap(), data).unwrap()
    }

    /// Oracle: explicit N x N matrix `B_N F^{tensor n}` applied as a row-vector
    /// product, built independently of the butterfly code path.
    fn matrix_oracle(q: u16, x: &[Symbol]) -> Vec<Symbol> {
        let len = x.len();
        let n = len.trailing_zeros();
        // F^{tensor n} entry: product over bit axes of F[i_b][j_b].
        let f = [[1u32, 0u32], [1u32, 1u32]];
        let mut g = vec![vec![0u32; len]; len];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut v = 1u32;
                for b in 0..n {
                    v *= f[(i >> b) & 1][(j >> b) & 1];
                }
                *cell = v;
            }
        }
        // u_j = sum_i x_{rev(i)} ... pre-permutation: (x B_N)_i = x_{rev(i)}.
        let mut u = vec![0u32; len];
        for (j, out) in u.iter_mut().enumerate() {
            let mut acc = 0u32;
            for i in 0..len {
                acc += x[reverse_bits(i, n)] as u32 * g[i][j];
            }
            *out = acc % q as u32;
        }
        u.into_iter().map(|v| v as Symbol).collect()
    }

    #[test]
    fn frozen_small_cases() {
        // q = 2, N = 2: (1,0) -> (1,0) and (0,1) -> (1,1).
        assert_eq!(polar_transform(&sv(2, vec![1, 0])).as_slice(), &[1, 0]);
        assert_eq!(polar_transform(&sv(2, vec![0, 1])).as_slice(), &[1, 1]);
        // q = 3, N = 2: (1,2) -> (0,2).
        assert_eq!(polar_transform(&sv(3, vec![1, 2])).as_slice(), &[0, 2]);
        // Inverse: q = 2, u = (1,1) -> x = (0,1).
        assert_eq!(polar_inverse(&sv(2, vec![1, 1])).as_slice(), &[0, 1]);
    }

    #[test]
    fn length_one_is_identity() {
        // N = 1 means zero butterfly stages in both directions.
        for q in [2u16, 3, 5, 7] {
            for s in 0..q {
                assert_eq!(polar_transform(&sv(q, vec![s])).as_slice(), &[s]);
                assert_eq!(polar_inverse(&sv(q, vec![s])).as_slice(), &[s]);
            }
        }
    }

    #[test]
    fn bit_reversal_tables() {
        assert_eq!(bit_reversal_permutation(0), vec![0]);
        assert_eq!(bit_reversal_permutation(2), vec![0, 2, 1, 3]);
        assert_eq!(bit_reversal_permutation(3), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn involution_over_z2() {
        // Over Z_2 the transform is its own inverse.
        for seed in 0..64u16 {
            let x: Vec<Symbol> = (0..6).map(|b| (seed >> b) & 1).collect();
            let x = sv(2, x[..4].to_vec());
            let twice = polar_transform(&polar_transform(&x));
            assert_eq!(twice, x, "G_N^2 = I failed for {:?}", x.as_slice());
        }
    }

    #[test]
    fn exhaustive_q2_matches_matrix_oracle_up_to_n8() {
        for &len in &[1usize, 2, 4, 8] {
            for code in 0..(1usize << len) {
                let x: Vec<Symbol> = (0..len).map(|b| ((code >> b) & 1) as Symbol).collect();
                let got = polar_transform(&sv(2, x.clone()));
                assert_eq!(got.as_slice(), matrix_oracle(2, &x).as_slice());
                let back = polar_inverse(&got);
                assert_eq!(back.as_slice(), &x[..]);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let f2 = PrimeAlphabet::new(2).unwrap();
        let mut data = vec![0, 1, 0];
        assert!(polar_transform_in_place(f2, &mut data).is_err());
        assert!(polar_inverse_in_place(f2, &mut data).is_err());
    }

    proptest! {
        #[test]
        fn randomized_primes_match_oracle(
            qi in 0usize..3,
            ni in 0u32..5,
            seed in any::<u64>(),
        ) {
            let q = [3u16, 5, 7][qi];
            let len = 1usize << ni; // N up to 16
            let mut s = seed;
            let x: Vec<Symbol> = (0..len)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 33) % q as u64) as Symbol
                })
                .collect();
            let v = sv(q, x.clone());
            let u = polar_transform(&v);
            let oracle = matrix_oracle(q, &x);
            prop_assert_eq!(u.as_slice(), &oracle[..]);
            let back = polar_inverse(&u);
            prop_assert_eq!(back.as_slice(), &x[..]);
        }

        #[test]
        fn linearity(
            qi in 0usize..3,
            ni in 0u32..5,
            seed in any::<u64>(),
        ) {
            let q = [3u16, 5, 7][qi];
            let alphabet = PrimeAlphabet::new(q).unwrap();
            let len = 1usize << ni;
            let mut s = seed;
            let mut draw = || -> Vec<Symbol> {
                (0..len)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((s >> 33) % q as u64) as Symbol
                    })
                    .collect()
            };
            let a = draw();
            let b = draw();
            let sum: Vec<Symbol> = a.iter().zip(&b).map(|(&x, &y)| alphabet.add(x, y)).collect();
            let ta = polar_transform(&sv(q, a));
            let tb = polar_transform(&sv(q, b));
            let tsum = polar_transform(&sv(q, sum));
            let want: Vec<Symbol> = ta
                .as_slice()
                .iter()
                .zip(tb.as_slice())
                .map(|(&x, &y)| alphabet.add(x, y))
                .collect();
            prop_assert_eq!(tsum.as_slice(), &want[..]);
        }
    }
}
