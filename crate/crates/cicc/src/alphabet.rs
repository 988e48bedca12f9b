//! Prime symbol alphabets and symbol sequences.
//!
//! Every coded layer lives on Z_q for a prime q, which makes the 2x2 kernel
//! invertible and the polar transform a bijection. Symbols are stored as
//! `u16`, wide enough for every desk-scale prime.

use crate::{Error, Result};

/// One coded symbol. Valid values are `0..q` of the owning alphabet.
pub type Symbol = u16;

/// A prime-order cyclic alphabet Z_q with modular arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeAlphabet {
    q: u16,
}

impl PrimeAlphabet {
    /// Builds Z_q, rejecting composite or trivial sizes.
    pub fn new(q: u16) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::Structure(format!("alphabet size {q} is not prime")));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> usize {
        self.q as usize
    }

    pub fn contains(&self, s: Symbol) -> bool {
        s < self.q
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        let s = a as u32 + b as u32;
        let q = self.q as u32;
        (if s >= q { s - q } else { s }) as Symbol
    }

    #[inline]
    pub fn sub(&self, a: Symbol, b: Symbol) -> Symbol {
        let q = self.q as u32;
        ((a as u32 + q - b as u32) % q) as Symbol
    }

    #[inline]
    pub fn neg(&self, a: Symbol) -> Symbol {
        self.sub(0, a)
    }
}

/// Trial-division primality check; alphabets are desk-scale.
pub fn is_prime(q: u16) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u32;
    let q = q as u32;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime strictly greater than `x`.
pub fn next_prime_above(x: usize) -> u16 {
    let mut c = x as u16 + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// A sequence of symbols from one alphabet whose length is a power of two,
/// the shape consumed and produced by the polar transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolVec {
    alphabet: PrimeAlphabet,
    data: Vec<Symbol>,
}

impl SymbolVec {
    pub fn new(alphabet: PrimeAlphabet, data: Vec<Symbol>) -> Result<Self> {
        if data.is_empty() || !data.len().is_power_of_two() {
            return Err(Error::Structure(format!(
                "symbol sequence length {} is not a power of two",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|s| !alphabet.contains(**s)) {
            return Err(Error::Structure(format!(
                "symbol {bad} out of range for alphabet of size {}",
                alphabet.q()
            )));
        }
        Ok(Self { alphabet, data })
    }

    pub fn zeros(alphabet: PrimeAlphabet, n: usize) -> Result<Self> {
        Self::new(alphabet, vec![0; n])
    }

    pub fn alphabet(&self) -> PrimeAlphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Symbol> {
        self.data
    }
}
