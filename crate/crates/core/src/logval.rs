//! Sign/log-magnitude numbers and compensated summation.

use serde::{Deserialize, Serialize};

/// A real number stored as a sign and `log2 |x|`.
///
/// Products such as `2^k Θ_k ∏ cos(...)` leave the `f64` range long before the
/// series they belong to has converged; multiplying in this representation and
/// converting only the final term keeps every intermediate finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    pub sign: i8,
    pub log2: f64,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue { sign: 0, log2: f64::NEG_INFINITY };
    pub const ONE: SignedLogValue = SignedLogValue { sign: 1, log2: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLogValue { sign: if x > 0.0 { 1 } else { -1 }, log2: x.abs().log2() }
        }
    }

    pub fn from_log2(sign: i8, log2: f64) -> Self {
        if sign == 0 || log2 == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLogValue { sign: sign.signum(), log2 }
        }
    }

    /// `2^e`.
    pub fn pow2(e: f64) -> Self {
        SignedLogValue { sign: 1, log2: e }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Native value; underflows to `±0` and overflows to `±inf`.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log2.exp2()
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            Self::ZERO
        } else {
            SignedLogValue { sign: self.sign * o.sign, log2: self.log2 + o.log2 }
        }
    }

    pub fn mul_f64(&self, x: f64) -> Self {
        self.mul(&Self::from_f64(x))
    }

    pub fn mul_pow2(&self, e: f64) -> Self {
        if self.is_zero() {
            *self
        } else {
            SignedLogValue { sign: self.sign, log2: self.log2 + e }
        }
    }

    pub fn abs(&self) -> Self {
        SignedLogValue { sign: self.sign.abs(), log2: self.log2 }
    }

    /// `|x|^p` for `p > 0`.
    pub fn abs_powf(&self, p: f64) -> Self {
        if self.is_zero() {
            Self::ZERO
        } else {
            SignedLogValue { sign: 1, log2: self.log2 * p }
        }
    }

    pub fn product<I: IntoIterator<Item = SignedLogValue>>(it: I) -> Self {
        let mut sign = 1i8;
        let mut acc = NeumaierSum::new();
        for v in it {
            if v.is_zero() {
                return Self::ZERO;
            }
            sign *= v.sign;
            acc.add(v.log2);
        }
        SignedLogValue { sign, log2: acc.sum() }
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
