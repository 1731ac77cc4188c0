//! Karp-Rabin polynomial fingerprints over bytes.
//!
//! The fingerprint of `b[0..len]` is `sum b[t] * base^(len-1-t) mod p`.
//! Windows slide in O(1) with [`FingerprintConfig::roll`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// The Mersenne prime `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Fingerprint(u64);

impl Fingerprint {
    pub const EMPTY: Fingerprint = Fingerprint(0);

    pub fn value(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct FingerprintConfig {
    modulus: u64,
    base: u64,
    pow_cache: FxHashMap<usize, u64>,
}

/// Mixes a retry attempt into a seed so each attempt draws a fresh base.
pub fn mix_seed(seed: u64, attempt: u32) -> u64 {
    seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl FingerprintConfig {
    /// Builds a config with an explicit base.
    pub fn new(modulus: u64, base: u64) -> Result<Self> {
        if modulus < 5 || !is_prime(modulus) {
            return Err(Error::InvalidConfig(format!(
                "fingerprint modulus {modulus} is not a prime >= 5"
            )));
        }
        if modulus > MERSENNE_61 {
            return Err(Error::InvalidConfig(format!(
                "fingerprint modulus {modulus} exceeds 2^61 - 1"
            )));
        }
        if !(2..=modulus - 2).contains(&base) {
            return Err(Error::InvalidConfig(format!(
                "base {base} outside [2, {}]",
                modulus - 2
            )));
        }
        Ok(FingerprintConfig {
            modulus,
            base,
            pow_cache: FxHashMap::default(),
        })
    }

    /// Draws the base uniformly from `[2, modulus - 2]`, deterministically in
    /// `(seed, attempt)`.
    pub fn from_seed(modulus: u64, seed: u64, attempt: u32) -> Result<Self> {
        if modulus < 5 {
            return Err(Error::InvalidConfig(format!(
                "fingerprint modulus {modulus} is not a prime >= 5"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, attempt));
        let base = rng.gen_range(2..=modulus - 2);
        Self::new(modulus, base)
    }

    /// Caches `base^l` and `base^(l-1)` for every given length.
    pub fn with_lengths(mut self, lengths: &[usize]) -> Self {
        for &l in lengths {
            for e in [l, l.saturating_sub(1)] {
                if !self.pow_cache.contains_key(&e) {
                    let v = self.pow_uncached(e as u64);
                    self.pow_cache.insert(e, v);
                }
            }
        }
        self
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// `base^e mod modulus`.
    pub fn pow(&self, e: usize) -> u64 {
        match self.pow_cache.get(&e) {
            Some(&v) => v,
            None => self.pow_uncached(e as u64),
        }
    }

    fn pow_uncached(&self, mut e: u64) -> u64 {
        let mut acc = 1 % self.modulus;
        let mut b = self.base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        let prod = a as u128 * b as u128;
        if self.modulus == MERSENNE_61 {
            let folded = (prod as u64 & MERSENNE_61) + (prod >> 61) as u64;
            let folded = (folded & MERSENNE_61) + (folded >> 61);
            if folded >= MERSENNE_61 {
                folded - MERSENNE_61
            } else {
                folded
            }
        } else {
            (prod % self.modulus as u128) as u64
        }
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    fn reduce_byte(&self, b: u8) -> u64 {
        let b = b as u64;
        if b < self.modulus {
            b
        } else {
            b % self.modulus
        }
    }

    /// Horner evaluation over `bytes`.
    pub fn fp_of(&self, bytes: &[u8]) -> Fingerprint {
        bytes
            .iter()
            .fold(Fingerprint::EMPTY, |fp, &b| self.push(fp, b))
    }

    /// Appends one byte: `fp * base + byte`.
    #[inline]
    pub fn push(&self, fp: Fingerprint, byte: u8) -> Fingerprint {
        Fingerprint(self.add(self.mul(fp.0, self.base), self.reduce_byte(byte)))
    }

    /// Drops `out_byte` from the front of a window of length `ell` and appends
    /// `in_byte`.
    pub fn roll(&self, fp: Fingerprint, out_byte: u8, in_byte: u8, ell: usize) -> Fingerprint {
        debug_assert!(ell >= 1);
        self.roll_weighted(fp, out_byte, in_byte, self.pow(ell - 1))
    }

    /// [`roll`](Self::roll) with the leading weight `base^(ell-1)` supplied.
    #[inline]
    pub fn roll_weighted(
        &self,
        fp: Fingerprint,
        out_byte: u8,
        in_byte: u8,
        lead: u64,
    ) -> Fingerprint {
        let without = self.sub(fp.0, self.mul(self.reduce_byte(out_byte), lead));
        Fingerprint(self.add(self.mul(without, self.base), self.reduce_byte(in_byte)))
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulm = |a: u64, b: u64| (a as u128 * b as u128 % n as u128) as u64;
    let powm = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulm(acc, b);
            }
            b = mulm(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powm(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulm(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
