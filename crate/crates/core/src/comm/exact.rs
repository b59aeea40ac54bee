//! Order-independent floating-point summation.
//!
//! [`ExactSum`] keeps the running sum as a fixed-point integer spanning the
//! whole `f64` exponent range, split into 32-bit chunks held in `i64`
//! bins. Additions are exact, so the final value depends only on the
//! multiset of addends and never on how they were grouped across ranks.

const CHUNK_BITS: u32 = 32;
const CHUNK_MASK: u128 = (1 << CHUNK_BITS) - 1;
// 2046 exponent shifts + 85 mantissa bits, plus headroom for carries
const NBINS: usize = 68;
// each add moves a bin by < 2^32; renormalise well before i64 overflow
const CARRY_INTERVAL: u32 = 1 << 29;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSum {
    bins: [i64; NBINS],
    pending: u32,
    /// Infinities and NaNs, summed with ordinary IEEE semantics.
    special: u64,
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum { bins: [0; NBINS], pending: 0, special: 0f64.to_bits() }
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Size of the accumulator when sent as a message.
    pub const fn wire_bytes() -> usize {
        NBINS * 8
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as u32;
        let frac = bits & ((1u64 << 52) - 1);
        if exp == 0x7ff {
            self.special = (f64::from_bits(self.special) + x).to_bits();
            return;
        }
        // value = mant * 2^(shift - 1074)
        let (mant, shift) = if exp == 0 { (frac, 0) } else { (frac | (1u64 << 52), exp - 1) };
        if mant == 0 {
            return;
        }
        let bin = (shift / CHUNK_BITS) as usize;
        let wide = (mant as u128) << (shift % CHUNK_BITS);
        let c0 = (wide & CHUNK_MASK) as i64;
        let c1 = ((wide >> CHUNK_BITS) & CHUNK_MASK) as i64;
        let c2 = (wide >> (2 * CHUNK_BITS)) as i64;
        if bits >> 63 == 1 {
            self.bins[bin] -= c0;
            self.bins[bin + 1] -= c1;
            self.bins[bin + 2] -= c2;
        } else {
            self.bins[bin] += c0;
            self.bins[bin + 1] += c1;
            self.bins[bin + 2] += c2;
        }
        self.pending += 1;
        if self.pending == CARRY_INTERVAL {
            self.normalize();
        }
    }

    /// Adds `a[i] * b[i]` for every `i`; each product is rounded once.
    pub fn add_products(&mut self, a: &[f64], b: &[f64]) {
        for (x, y) in a.iter().zip(b) {
            self.add(x * y);
        }
    }

    /// Folds another accumulator in exactly.
    pub fn merge(&mut self, other: &ExactSum) {
        let mut other = other.clone();
        other.normalize();
        self.normalize();
        for (a, b) in self.bins.iter_mut().zip(other.bins.iter()) {
            *a += b;
        }
        self.pending = 1;
        self.special = (f64::from_bits(self.special) + f64::from_bits(other.special)).to_bits();
    }

    /// Propagates carries so every bin but the top one lies in `[0, 2^32)`.
    fn normalize(&mut self) {
        propagate(&mut self.bins);
        self.pending = 0;
    }

    /// The exact sum rounded to the nearest `f64` (ties to even).
    pub fn value(&self) -> f64 {
        let special = f64::from_bits(self.special);
        if special != 0.0 || special.is_nan() {
            return special;
        }
        let mut b = self.bins;
        propagate(&mut b);
        let negative = b[NBINS - 1] < 0;
        if negative {
            b.iter_mut().for_each(|v| *v = -*v);
            propagate(&mut b);
        }
        let Some(top) = b.iter().rposition(|&v| v != 0) else {
            return 0.0;
        };
        let base = top.saturating_sub(2);
        let mut wide: u128 = 0;
        for i in (base..=top).rev() {
            wide = (wide << CHUNK_BITS) | b[i] as u128;
        }
        if b[..base].iter().any(|&v| v != 0) {
            // sticky bit, far below the rounding position
            wide |= 1;
        }
        let magnitude = scale_pow2(wide as f64, (CHUNK_BITS as i32) * base as i32 - 1074);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

fn propagate(bins: &mut [i64; NBINS]) {
    for i in 0..NBINS - 1 {
        let carry = bins[i] >> CHUNK_BITS;
        bins[i] -= carry << CHUNK_BITS;
        bins[i + 1] += carry;
    }
}

fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// `x * 2^e` with a single rounding at the end.
fn scale_pow2(x: f64, e: i32) -> f64 {
    if e > 1023 {
        x * pow2(1023) * pow2(e - 1023)
    } else if e < -1022 {
        x * pow2(e + 1022) * pow2(-1022)
    } else {
        x * pow2(e)
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        s.extend(iter);
        s
    }
}
