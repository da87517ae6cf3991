//! Packed bit-vectors used for input patterns, selection vectors and
//! sampler states.

use rand::Rng;

use crate::{Error, Result};

/// Fixed-length bit-vector packed into 64-bit words.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`. Unused high bits of
/// the last word are kept at zero so equality and hashing work on the raw
/// words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = u64::MAX;
        }
        v.mask_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Builds a vector of `len <= 64` bits from an integer; bit `i` of
    /// `value` becomes bit `i` of the vector.
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        debug_assert!(len == 64 || value < (1u64 << len));
        let mut v = Self::zeros(len);
        if !v.words.is_empty() {
            v.words[0] = value;
            v.mask_tail();
        }
        v
    }

    /// Uniformly random bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.random();
        }
        v.mask_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of positions where both vectors are 1.
    pub fn common_ones(&self, other: &Self) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Number of differing bits. Panics on length mismatch; callers that
    /// need a recoverable error check lengths first.
    pub fn hamming_distance(&self, other: &Self) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }

    /// Big-endian hex with `ceil(len/4)` digits; bit 0 is the least
    /// significant bit of the last digit.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let mut nibble = 0u8;
            for bit in 0..4 {
                let i = d * 4 + bit;
                if i < self.len && self.get(i) {
                    nibble |= 1 << bit;
                }
            }
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    /// Parses the format written by [`BitVec::to_hex`] for a vector of
    /// `len` bits.
    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let digits = len.div_ceil(4);
        if s.len() != digits {
            return Err(Error::LengthMismatch {
                expected: digits,
                actual: s.len(),
            });
        }
        let mut v = Self::zeros(len);
        for (pos, ch) in s.chars().enumerate() {
            let nibble = ch.to_digit(16).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("invalid hex digit `{ch}`"),
            })? as u64;
            let d = digits - 1 - pos;
            for bit in 0..4 {
                if nibble >> bit & 1 == 1 {
                    let i = d * 4 + bit;
                    if i >= len {
                        return Err(Error::Parse {
                            line: 0,
                            message: format!("hex `{s}` sets bits beyond length {len}"),
                        });
                    }
                    v.set(i, true);
                }
            }
        }
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let used = self.len % 64;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }
}

impl std::fmt::Debug for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn set_get_flip() {
        let mut v = BitVec::zeros(70);
        assert_eq!(v.count_ones(), 0);
        v.set(0, true);
        v.set(69, true);
        v.flip(33);
        assert!(v.get(0) && v.get(33) && v.get(69));
        assert_eq!(v.count_ones(), 3);
        v.flip(33);
        assert_eq!(v.count_ones(), 2);
    }

    #[test]
    fn ones_masks_tail() {
        let v = BitVec::ones(5);
        assert_eq!(v.count_ones(), 5);
        assert_eq!(v, BitVec::from_u64(5, 0b11111));
    }

    #[test]
    fn hex_round_trip_examples() {
        // bit 0 set in an 8-bit vector -> integer 0x01
        let mut v = BitVec::zeros(8);
        v.set(0, true);
        v.set(7, true);
        assert_eq!(v.to_hex(), "81");
        assert_eq!(BitVec::from_hex("81", 8).unwrap(), v);

        // 9 bits need 3 digits
        let mut w = BitVec::zeros(9);
        w.set(8, true);
        assert_eq!(w.to_hex(), "100");
        assert_eq!(BitVec::from_hex("100", 9).unwrap(), w);
    }

    #[test]
    fn from_hex_rejects_garbage() {
        assert!(BitVec::from_hex("zz", 8).is_err());
        assert!(BitVec::from_hex("8", 8).is_err()); // wrong digit count
        assert!(BitVec::from_hex("ff", 7).is_err()); // sets bit 7 of a 7-bit vector
    }

    #[test]
    fn hamming_and_common() {
        let a = BitVec::from_u64(6, 0b101101);
        let b = BitVec::from_u64(6, 0b100011);
        assert_eq!(a.hamming_distance(&b), 3);
        assert_eq!(a.common_ones(&b), 2);
        assert_eq!(a.hamming_distance(&a), 0);
    }

    #[test]
    fn iter_ones_matches_get() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1usize, 63, 64, 65, 130] {
            let v = BitVec::random(len, &mut rng);
            let ones: Vec<usize> = v.iter_ones().collect();
            let expect: Vec<usize> = (0..len).filter(|&i| v.get(i)).collect();
            assert_eq!(ones, expect);
        }
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let a = BitVec::random(128, &mut ChaCha8Rng::seed_from_u64(7));
        let b = BitVec::random(128, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }
}
